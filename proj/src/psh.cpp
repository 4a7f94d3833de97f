#include "plurima/psh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace plurima {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Regularizer Regularizer::clamp(double j) {
    Regularizer r;
    r.kind_ = Kind::Clamp;
    r.j_ = j;
    r.label_ = "clamp(" + std::to_string(j) + ")";
    return r;
}

Regularizer Regularizer::softlog(double j) {
    Regularizer r;
    r.kind_ = Kind::Softlog;
    r.j_ = j;
    r.label_ = "softlog(" + std::to_string(j) + ")";
    return r;
}

Regularizer Regularizer::custom(std::vector<double> knots, std::vector<double> values,
                                std::vector<double> derivs, std::string label) {
    if (knots.size() < 2 || knots.size() != values.size() || knots.size() != derivs.size())
        throw NumericError("domain", "custom regularizer needs matching knot/value/derivative tables");
    if (!std::is_sorted(knots.begin(), knots.end()))
        throw NumericError("domain", "custom regularizer knots must ascend");
    Regularizer r;
    r.kind_ = Kind::Custom;
    r.label_ = std::move(label);
    r.knots_ = std::move(knots);
    r.vals_ = std::move(values);
    r.dvs_ = std::move(derivs);
    return r;
}

double Regularizer::value(double t) const {
    switch (kind_) {
        case Kind::Clamp: return std::max(t, -j_);
        case Kind::Softlog: {
            if (t == -kInf) return 0.5 * std::log(1.0 / j_);
            // 0.5*log(e^{2t} + 1/j), stable for large |t|
            if (t > 20.0) return t + 0.5 * std::log1p(std::exp(-2.0 * t) / j_);
            return 0.5 * std::log(std::exp(2.0 * t) + 1.0 / j_);
        }
        case Kind::Custom: {
            if (t <= knots_.front()) return vals_.front();
            if (t >= knots_.back())
                return vals_.back() + dvs_.back() * (t - knots_.back());
            auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
            std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
            double w = (t - knots_[i]) / (knots_[i + 1] - knots_[i]);
            return vals_[i] + w * (vals_[i + 1] - vals_[i]);
        }
    }
    return t;
}

double Regularizer::deriv(double t) const {
    switch (kind_) {
        case Kind::Clamp: return t > -j_ ? 1.0 : 0.0;
        case Kind::Softlog: {
            if (t == -kInf) return 0.0;
            // e^{2t} / (e^{2t} + 1/j)
            return 1.0 / (1.0 + std::exp(-2.0 * t) / j_);
        }
        case Kind::Custom: {
            if (t <= knots_.front()) return 0.0;
            if (t >= knots_.back()) return dvs_.back();
            auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
            std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
            double w = (t - knots_[i]) / (knots_[i + 1] - knots_[i]);
            return dvs_[i] + w * (dvs_[i + 1] - dvs_[i]);
        }
    }
    return 0.0;
}

double Regularizer::lower_plateau() const { return value(-kInf); }

RegularizerSchedule RegularizerSchedule::softlog_doubling(double j0, int count) {
    std::vector<double> js;
    double j = j0;
    for (int i = 0; i < count; ++i, j *= 2.0) js.push_back(j);
    return softlog(std::move(js));
}

RegularizerSchedule RegularizerSchedule::clamp_linear(double j0, double j1, int count) {
    std::vector<double> js;
    for (int i = 0; i < count; ++i)
        js.push_back(j0 + (j1 - j0) * (count > 1 ? static_cast<double>(i) / (count - 1) : 0.0));
    return clamp(std::move(js));
}

RegularizerSchedule RegularizerSchedule::softlog(std::vector<double> js) {
    RegularizerSchedule s;
    s.js = std::move(js);
    for (double j : s.js) s.members.push_back(Regularizer::softlog(j));
    return s;
}

RegularizerSchedule RegularizerSchedule::clamp(std::vector<double> js) {
    RegularizerSchedule s;
    s.js = std::move(js);
    for (double j : s.js) s.members.push_back(Regularizer::clamp(j));
    return s;
}

void audit_regularizer(const Regularizer& chi, int npts) {
    // log-scaled audit points on (-40, -1e-8)
    double prev = -kInf;
    double s_lo = std::log(1e-8), s_hi = std::log(40.0);
    double dd_tol = 1e-12;
    for (int i = 0; i < npts; ++i) {
        double s = s_lo + (s_hi - s_lo) * (static_cast<double>(i) + 0.5) / npts;
        double t = -std::exp(s_hi + s_lo - s);  // ascending in i
        double v = chi.value(t);
        if (!(v >= t)) throw NumericError("audit", chi.label() + ": chi(t) < t at t=" + std::to_string(t));
        if (v < prev - 1e-12) throw NumericError("audit", chi.label() + ": not nondecreasing");
        prev = v;
        double dt = std::max(1e-6, 1e-3 * std::abs(t));
        double dd = chi.value(t + dt) - 2.0 * v + chi.value(t - dt);
        if (dd < -dd_tol * std::max(1.0, std::abs(v)))
            throw NumericError("audit", chi.label() + ": convexity fails at t=" + std::to_string(t));
    }
    if (!std::isfinite(chi.value(-1e30)))
        throw NumericError("audit", chi.label() + ": not bounded below on (-inf,0)");
    if (!std::isfinite(chi.value(-1e-12)))
        throw NumericError("audit", chi.label() + ": not bounded above near 0");
}

void audit_schedule(const RegularizerSchedule& sched, int npts) {
    if (sched.size() < 1) throw NumericError("audit", "empty regularizer schedule");
    for (std::size_t i = 1; i < sched.js.size(); ++i)
        if (!(sched.js[i] > sched.js[i - 1]))
            throw NumericError("audit", "schedule j-values must strictly increase");
    for (int p = 0; p < npts; ++p) {
        double t = -std::exp(std::log(1e-6) + (std::log(30.0) - std::log(1e-6)) * (p + 0.5) / npts);
        for (std::size_t i = 1; i < sched.members.size(); ++i) {
            double lo = sched.members[i].value(t);
            double hi = sched.members[i - 1].value(t);
            if (lo > hi + 1e-12)
                throw NumericError("audit", "family not pointwise decreasing at t=" + std::to_string(t));
        }
        // pointwise limit is t: last member must be within its own gap bound
        double last = sched.members.back().value(t);
        if (!(last >= t)) throw NumericError("audit", "family member below t");
    }
}

double eval(const AnalyticSingFn& u, const CPoint& z) {
    double p = u.F.abs2(z);
    double b = u.b.is_zero() ? 0.0 : u.b.eval(z);
    if (p == 0.0) return u.c > 0.0 ? -kInf : b;
    return 0.5 * u.c * std::log(p) + b;
}

double regularized_value(const AnalyticSingFn& u, const Regularizer& chi, const CPoint& z,
                         double shift) {
    double p = u.F.abs2(z);
    if (chi.kind() == Regularizer::Kind::Softlog) {
        // chi_j(u - shift) = 0.5 log(|F|^{2c} e^{2(b-shift)} + 1/j), no -inf path
        double w = (u.c == 1.0) ? p : std::pow(p, u.c);
        if (!u.b.is_zero() || shift != 0.0) w *= std::exp(2.0 * (u.b.eval(z) - shift));
        return 0.5 * std::log(w + 1.0 / chi.j());
    }
    double raw;
    if (p == 0.0 && u.c > 0.0) {
        raw = -kInf;
    } else {
        raw = 0.5 * u.c * std::log(p) + (u.b.is_zero() ? 0.0 : u.b.eval(z)) - shift;
    }
    return chi.value(raw);
}

ScalarField regularize(const AnalyticSingFn& u, const Regularizer& chi, const GridDomain& g,
                       double shift) {
    bool needs_negative = true;  // all families here live on (-inf, 0)
    ScalarField out = ScalarField::sample(g, [&](const CPoint& z) {
        if (needs_negative) {
            double raw = eval(u, z) - shift;
            if (raw >= 0.0)
                throw NumericError("audit", "u not negative on box (node value " + std::to_string(raw) +
                                                "); shift it before regularizing");
        }
        return regularized_value(u, chi, z, shift);
    });
    return out;
}

Regularizer gamma_from_chi(const Regularizer& chi, int k) {
    if (k < 1) throw NumericError("domain", "gamma_from_chi requires k >= 1");
    if (chi.kind() == Regularizer::Kind::Clamp) return chi;  // indicator^k = indicator

    // knot set: -exp(s) log-spaced, with -1 included exactly
    std::vector<double> knots;
    int m = 1600;
    for (int i = 0; i < m; ++i) {
        double s = std::log(40.0) + (std::log(1e-7) - std::log(40.0)) * static_cast<double>(i) / (m - 1);
        knots.push_back(-std::exp(s));
    }
    knots.push_back(-1.0);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

    auto f = [&](double t) {
        double d = chi.deriv(t);
        double p = d;
        for (int i = 1; i < k; ++i) p *= d;
        return p;
    };
    // cumulative Simpson from the anchor t = -1
    std::size_t anchor = static_cast<std::size_t>(
        std::lower_bound(knots.begin(), knots.end(), -1.0) - knots.begin());
    std::vector<double> vals(knots.size(), 0.0);
    vals[anchor] = chi.value(-1.0);
    for (std::size_t i = anchor + 1; i < knots.size(); ++i) {
        double a = knots[i - 1], b = knots[i];
        vals[i] = vals[i - 1] + (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
    }
    for (std::size_t i = anchor; i-- > 0;) {
        double a = knots[i], b = knots[i + 1];
        vals[i] = vals[i + 1] - (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
    }
    std::vector<double> dvs(knots.size());
    for (std::size_t i = 0; i < knots.size(); ++i) dvs[i] = f(knots[i]);
    return Regularizer::custom(std::move(knots), std::move(vals), std::move(dvs),
                               "gamma[" + chi.label() + ",k=" + std::to_string(k) + "]");
}

namespace {

// lattice walker over a box: per_axis samples per real axis
template <typename Fn>
void lattice_walk(int axes, const BoxCN& box, int per_axis, Fn&& fn) {
    std::vector<int> idx(static_cast<std::size_t>(axes), 0);
    while (true) {
        CPoint z;
        z.n = axes / 2;
        for (int c = 0; c < z.n; ++c) {
            auto coord = [&](int a) {
                const Interval& iv = box[static_cast<std::size_t>(a)];
                return iv.lo + iv.len() * (idx[static_cast<std::size_t>(a)] + 0.5) / per_axis;
            };
            z.z[static_cast<std::size_t>(c)] = cplx(coord(2 * c), coord(2 * c + 1));
        }
        fn(z);
        int a = axes - 1;
        while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == per_axis) idx[static_cast<std::size_t>(a--)] = 0;
        if (a < 0) break;
    }
}

}  // namespace

double max_on_lattice(const AnalyticSingFn& u, int per_axis) {
    double m = -kInf;
    lattice_walk(2 * u.n(), u.box, per_axis, [&](const CPoint& z) {
        double v = eval(u, z);
        if (v > m && std::isfinite(v)) m = v;
    });
    return m;
}

double lip_bound(const PolyTuple& F, const BoxCN& box, int per_axis) {
    double m = 0.0;
    lattice_walk(2 * F.n(), box, per_axis, [&](const CPoint& z) { m = std::max(m, F.grad_norm(z)); });
    return 1.25 * m;
}

DivisorialForm divisorial_split(const AnalyticSingFn& u) {
    if (u.F.size() != 1)
        throw NumericError("domain", "not divisorial: tuple has " + std::to_string(u.F.size()) + " components");
    double ci = std::round(u.c);
    if (!(u.c >= 1.0) || std::abs(u.c - ci) > 1e-12)
        throw NumericError("domain", "divisorial_split needs integer c >= 1 (got c=" + std::to_string(u.c) +
                                         "); supply the factorization explicitly");
    DivisorialForm d;
    d.f = u.F[0].pow(static_cast<int>(ci));
    d.v = u.b;
    d.original = u;

    // reconstruction audit off a small tube
    double worst = 0.0;
    PolyTuple ft(u.F.n(), {d.f});
    lattice_walk(2 * u.n(), u.box, 7, [&](const CPoint& z) {
        double p = ft.abs2(z);
        if (p < 1e-12) return;
        double rec = 0.5 * std::log(p) + d.v.eval(z);
        double ref = eval(u, z);
        worst = std::max(worst, std::abs(rec - ref));
    });
    if (worst > 1e-10)
        throw NumericError("audit", "divisorial reconstruction off by " + std::to_string(worst));
    return d;
}

Region singular_tube(const PolyTuple& F, double delta) {
    double d2 = delta * delta;
    return Region{"tube(" + std::to_string(delta) + ")",
                  [F, d2](const CPoint& z) { return F.abs2(z) < d2; }};
}

AnalyticSingFn make_log_abs_tuple(int n, std::vector<Poly> comps, BoxCN box, std::string name,
                                  double c) {
    AnalyticSingFn u;
    u.c = c;
    u.F = PolyTuple(n, std::move(comps));
    u.b = BoundedExpr::zero();
    u.box = std::move(box);
    u.name = std::move(name);
    return u;
}

}  // namespace plurima
