#include "plurima/grid.hpp"

#include <algorithm>
#include <cmath>

#include "plurima/reduce.hpp"

namespace plurima {

double tree_sum(std::span<const double> v) {
    if (v.empty()) return 0.0;
    std::vector<double> work(v.begin(), v.end());
    std::size_t m = work.size();
    while (m > 1) {
        std::size_t half = (m + 1) / 2;
        for (std::size_t i = 0; i < m / 2; ++i) work[i] = work[2 * i] + work[2 * i + 1];
        if (m & 1) work[m / 2] = work[m - 1];
        m = half;
    }
    return work[0];
}

GridDomain GridDomain::make(int n, std::span<const Interval> bounds, int res) {
    if (n < 1 || n > kMaxDim)
        throw NumericError("domain", "complex dimension must be in {1,2,3}, got " + std::to_string(n));
    if (res < 8) throw NumericError("domain", "res must be >= 8, got " + std::to_string(res));
    if (static_cast<int>(bounds.size()) != 2 * n)
        throw NumericError("domain", "expected " + std::to_string(2 * n) + " axis intervals, got " +
                                          std::to_string(bounds.size()));
    GridDomain g;
    g.n_ = n;
    g.res_ = res;
    g.cell_vol_ = 1.0;
    for (int a = 0; a < 2 * n; ++a) {
        const Interval& iv = bounds[static_cast<std::size_t>(a)];
        if (!(iv.hi > iv.lo)) throw NumericError("domain", "degenerate interval on axis " + std::to_string(a));
        g.bounds_[static_cast<std::size_t>(a)] = iv;
        g.h_[static_cast<std::size_t>(a)] = iv.len() / res;
        g.cell_vol_ *= g.h_[static_cast<std::size_t>(a)];
    }
    for (int c = 0; c < n; ++c) {
        double hr = g.h_[static_cast<std::size_t>(2 * c)];
        double hi = g.h_[static_cast<std::size_t>(2 * c + 1)];
        if (std::abs(hr - hi) > 1e-12 * std::max(hr, hi))
            throw NumericError("domain", "cells must be square within coordinate z" + std::to_string(c + 1));
    }
    return g;
}

GridDomain make_grid(int n, std::span<const Interval> bounds, int res) {
    return GridDomain::make(n, bounds, res);
}

GridDomain symmetric_grid(int n, double a, int res) {
    std::vector<Interval> b(static_cast<std::size_t>(2 * n), Interval{-a, a});
    return GridDomain::make(n, b, res);
}

std::int64_t GridDomain::node_count() const {
    std::int64_t c = 1;
    for (int a = 0; a < axes(); ++a) c *= res_;
    return c;
}

std::int64_t GridDomain::plane_size() const { return node_count() / res_; }

void GridDomain::index_of(std::int64_t linear, std::span<int> idx) const {
    for (int a = axes() - 1; a >= 0; --a) {
        idx[static_cast<std::size_t>(a)] = static_cast<int>(linear % res_);
        linear /= res_;
    }
}

std::int64_t GridDomain::linear_of(std::span<const int> idx) const {
    std::int64_t l = 0;
    for (int a = 0; a < axes(); ++a) l = l * res_ + idx[static_cast<std::size_t>(a)];
    return l;
}

CPoint GridDomain::point_at(std::span<const int> idx) const {
    CPoint p;
    p.n = n_;
    for (int c = 0; c < n_; ++c)
        p.z[static_cast<std::size_t>(c)] =
            cplx(coord(2 * c, idx[static_cast<std::size_t>(2 * c)]), coord(2 * c + 1, idx[static_cast<std::size_t>(2 * c + 1)]));
    return p;
}

CPoint GridDomain::point_linear(std::int64_t linear) const {
    std::array<int, 2 * kMaxDim> idx{};
    index_of(linear, std::span<int>(idx.data(), static_cast<std::size_t>(axes())));
    return point_at(std::span<const int>(idx.data(), static_cast<std::size_t>(axes())));
}

bool GridDomain::interior(std::span<const int> idx) const {
    for (int a = 0; a < axes(); ++a) {
        int i = idx[static_cast<std::size_t>(a)];
        if (i < 1 || i > res_ - 2) return false;
    }
    return true;
}

bool GridDomain::contains_point(const CPoint& x, double margin) const {
    for (int c = 0; c < n_; ++c) {
        double re = x.z[static_cast<std::size_t>(c)].real();
        double im = x.z[static_cast<std::size_t>(c)].imag();
        if (re < bound(2 * c).lo + margin || re > bound(2 * c).hi - margin) return false;
        if (im < bound(2 * c + 1).lo + margin || im > bound(2 * c + 1).hi - margin) return false;
    }
    return true;
}

bool GridDomain::contains_ball(const CPoint& x, double r) const {
    for (int c = 0; c < n_; ++c) {
        double re = x.z[static_cast<std::size_t>(c)].real();
        double im = x.z[static_cast<std::size_t>(c)].imag();
        if (re - r < bound(2 * c).lo || re + r > bound(2 * c).hi) return false;
        if (im - r < bound(2 * c + 1).lo || im + r > bound(2 * c + 1).hi) return false;
    }
    return true;
}

double GridDomain::hmax() const {
    double m = 0.0;
    for (int a = 0; a < axes(); ++a) m = std::max(m, h(a));
    return m;
}

ScalarField ScalarField::sample(const GridDomain& g, const std::function<double(const CPoint&)>& f) {
    ScalarField out{g, {}};
    std::int64_t nn = g.node_count();
    if (nn > (std::int64_t{1} << 27))
        throw NumericError("domain", "grid too large to materialize a field (" + std::to_string(nn) + " nodes)");
    out.v.resize(static_cast<std::size_t>(nn));
    std::array<int, 2 * kMaxDim> idx{};
    for (std::int64_t l = 0; l < nn; ++l) {
        g.index_of(l, std::span<int>(idx.data(), static_cast<std::size_t>(g.axes())));
        out.v[static_cast<std::size_t>(l)] = f(g.point_at(std::span<const int>(idx.data(), static_cast<std::size_t>(g.axes()))));
    }
    return out;
}

cplx Herm::off(int a, int b) const {
    if (a == b) return cplx(d[static_cast<std::size_t>(a)], 0.0);
    bool sw = a > b;
    if (sw) std::swap(a, b);
    int slot = (a == 0) ? (b == 1 ? 0 : 1) : 2;
    cplx v = o[static_cast<std::size_t>(slot)];
    return sw ? std::conj(v) : v;
}

double Herm::max_abs() const {
    // |re|+|im| entry scale; cheap norm proxy for audits and noise floors
    double m = 0.0;
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs(d[static_cast<std::size_t>(i)]));
    int noff = n * (n - 1) / 2;
    for (int i = 0; i < noff; ++i) {
        const cplx& v = o[static_cast<std::size_t>(i)];
        m = std::max(m, std::abs(v.real()) + std::abs(v.imag()));
    }
    return m;
}

HermitianField::HermitianField(const GridDomain& g) : dom_(g) {
    stride_ = g.n() + g.n() * (g.n() - 1);  // diag + (re,im) per off entry
    std::int64_t c = 1;
    for (int a = 0; a < g.axes(); ++a) c *= (g.res() - 2);
    count_ = c;
    if (c * stride_ > (std::int64_t{1} << 28))
        throw NumericError("domain", "grid too large to materialize a Hessian field");
    data_.assign(static_cast<std::size_t>(c * stride_), 0.0);
}

std::int64_t HermitianField::interior_linear(std::span<const int> idx) const {
    std::int64_t l = 0;
    for (int a = 0; a < dom_.axes(); ++a) {
        int i = idx[static_cast<std::size_t>(a)] - 1;
        l = l * (dom_.res() - 2) + i;
    }
    return l;
}

Herm HermitianField::at(std::span<const int> idx) const {
    const double* p = data_.data() + interior_linear(idx) * stride_;
    Herm h;
    h.n = dom_.n();
    for (int i = 0; i < h.n; ++i) h.d[static_cast<std::size_t>(i)] = p[i];
    int noff = h.n * (h.n - 1) / 2;
    for (int i = 0; i < noff; ++i)
        h.o[static_cast<std::size_t>(i)] = cplx(p[h.n + 2 * i], p[h.n + 2 * i + 1]);
    return h;
}

void HermitianField::set(std::span<const int> idx, const Herm& h) {
    double* p = data_.data() + interior_linear(idx) * stride_;
    for (int i = 0; i < h.n; ++i) p[i] = h.d[static_cast<std::size_t>(i)];
    int noff = h.n * (h.n - 1) / 2;
    for (int i = 0; i < noff; ++i) {
        p[h.n + 2 * i] = h.o[static_cast<std::size_t>(i)].real();
        p[h.n + 2 * i + 1] = h.o[static_cast<std::size_t>(i)].imag();
    }
}

std::int64_t MeasureField::cell_count() const {
    std::int64_t c = 1;
    for (int a = 0; a < dom.axes(); ++a) c *= cells_per_axis();
    return c;
}

CPoint MeasureField::cell_center(std::int64_t linear) const {
    int per = cells_per_axis();
    std::array<int, 2 * kMaxDim> ci{};
    for (int a = dom.axes() - 1; a >= 0; --a) {
        ci[static_cast<std::size_t>(a)] = static_cast<int>(linear % per);
        linear /= per;
    }
    CPoint p;
    p.n = dom.n();
    for (int c = 0; c < dom.n(); ++c) {
        // center of the fine-cell block covered by this coarse cell
        auto axis_center = [&](int axis) {
            int i0 = ci[static_cast<std::size_t>(axis)] * stride;
            int i1 = std::min(i0 + stride, dom.res()) - 1;
            return 0.5 * (dom.coord(axis, i0) + dom.coord(axis, i1));
        };
        p.z[static_cast<std::size_t>(c)] = cplx(axis_center(2 * c), axis_center(2 * c + 1));
    }
    return p;
}

double MeasureField::total() const {
    ExactSum s;
    for (double m : masses) s.add(m);
    return s.value();
}

Region region_all() {
    return Region{"all", [](const CPoint&) { return true; }};
}

Region region_ball(const CPoint& c, double r, std::string name) {
    if (name.empty()) name = "ball(r=" + std::to_string(r) + ")";
    double r2 = r * r;
    return Region{std::move(name), [c, r2](const CPoint& z) { return dist2(z, c) < r2; }};
}

Region region_polydisk(const CPoint& c, double r, std::string name) {
    if (name.empty()) name = "polydisk(r=" + std::to_string(r) + ")";
    double r2 = r * r;
    return Region{std::move(name), [c, r2](const CPoint& z) {
                      for (int i = 0; i < z.n; ++i)
                          if (abs2(z.z[static_cast<std::size_t>(i)] - c.z[static_cast<std::size_t>(i)]) >= r2) return false;
                      return true;
                  }};
}

Region region_complement(const Region& r) {
    RegionPred p = r.pred;
    return Region{"not:" + r.name, [p](const CPoint& z) { return !p(z); }};
}

double integrate(const MeasureField& m, const RegionPred& region) {
    ExactSum s;
    std::int64_t nc = m.cell_count();
    for (std::int64_t l = 0; l < nc; ++l) {
        if (region(m.cell_center(l))) s.add(m.masses[static_cast<std::size_t>(l)]);
    }
    return s.value();
}

double pair(const MeasureField& m, const TestFunction& phi) {
    if (!m.dom.contains_ball(phi.center, phi.radius))
        throw NumericError("domain", "test function support escapes the grid box");
    ExactSum s;
    std::int64_t nc = m.cell_count();
    for (std::int64_t l = 0; l < nc; ++l) {
        double mass = m.masses[static_cast<std::size_t>(l)];
        if (mass != 0.0) s.add(mass * phi.value(m.cell_center(l)));
    }
    return s.value();
}

double ball_mass(const MeasureField& m, const CPoint& x, double r) {
    if (!m.dom.contains_ball(x, r))
        throw NumericError("domain", "ball escapes the grid box");
    return integrate(m, region_ball(x, r).pred);
}

}  // namespace plurima
