#include "plurima/extrapolate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "plurima/common.hpp"

namespace plurima {

namespace {

// linear LS for y ~ m + C*b(x) with basis values bx; returns rms residual
double ls_fit(std::span<const double> bx, std::span<const double> y, double& m, double& c) {
    std::size_t n = y.size();
    double sb = 0, sbb = 0, sy = 0, sby = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sb += bx[i];
        sbb += bx[i] * bx[i];
        sy += y[i];
        sby += bx[i] * y[i];
    }
    double det = static_cast<double>(n) * sbb - sb * sb;
    if (std::abs(det) < 1e-300) {
        m = sy / static_cast<double>(n);
        c = 0.0;
        return 0.0;
    }
    m = (sbb * sy - sb * sby) / det;
    c = (static_cast<double>(n) * sby - sb * sy) / det;
    double r2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = y[i] - m - c * bx[i];
        r2 += r * r;
    }
    return std::sqrt(r2 / static_cast<double>(n));
}

}  // namespace

PowerFit fit_power_tail(std::span<const double> x, std::span<const double> y, int tail) {
    if (x.size() != y.size() || x.size() < 2)
        throw NumericError("domain", "fit_power_tail needs matched sequences of length >= 2");
    std::size_t n = y.size();
    std::size_t use = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(tail, 2)));
    std::span<const double> xs = x.subspan(n - use);
    std::span<const double> ys = y.subspan(n - use);

    PowerFit out;
    out.points = static_cast<int>(use);

    double lo = *std::min_element(ys.begin(), ys.end());
    double hi = *std::max_element(ys.begin(), ys.end());
    double scale = std::max({std::abs(lo), std::abs(hi), 1e-30});
    if (hi - lo <= 1e-13 * scale) {
        out.degenerate = true;
        double s = 0.0;
        for (double v : ys) s += v;
        out.m_inf = s / static_cast<double>(use);
        return out;
    }

    std::vector<double> bx(use);
    double best_res = std::numeric_limits<double>::infinity();
    double best_alpha = 1.0, best_m = 0.0, best_c = 0.0;
    auto eval_alpha = [&](double a) {
        for (std::size_t i = 0; i < use; ++i) bx[i] = std::pow(xs[i], -a);
        double m, c;
        double r = ls_fit(bx, ys, m, c);
        if (r < best_res) {
            best_res = r;
            best_alpha = a;
            best_m = m;
            best_c = c;
        }
        return r;
    };
    // fixed log grid over [0.05, 6], then one parabolic refinement
    const int grid = 241;
    for (int i = 0; i < grid; ++i) {
        double a = 0.05 * std::pow(6.0 / 0.05, static_cast<double>(i) / (grid - 1));
        eval_alpha(a);
    }
    double a0 = best_alpha;
    double step = a0 * 0.02;
    for (int iter = 0; iter < 40; ++iter) {
        double r0 = best_res;
        eval_alpha(a0 - step);
        eval_alpha(a0 + step);
        if (best_res < r0) {
            a0 = best_alpha;
        } else {
            step *= 0.5;
        }
        if (step < 1e-6 * a0) break;
    }
    out.m_inf = best_m;
    out.coef = best_c;
    out.alpha = best_alpha;
    out.residual = best_res;
    return out;
}

double richardson(double coarse, double fine, int order) {
    double p = std::pow(2.0, order);
    return (p * fine - coarse) / (p - 1.0);
}

bool within_tail_envelope(double v, std::span<const double> y, int tail, double slack) {
    std::size_t n = y.size();
    std::size_t use = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(tail, 2)));
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = n - use; i < n; ++i) {
        lo = std::min(lo, y[i]);
        hi = std::max(hi, y[i]);
    }
    double pad = slack * (hi - lo) + 1e-12 * std::max(std::abs(lo), std::abs(hi));
    return v >= lo - pad && v <= hi + pad;
}

}  // namespace plurima
