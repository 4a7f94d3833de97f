#include "plurima/ma.hpp"

#include <algorithm>
#include <cmath>

#include "plurima/hessian.hpp"
#include "plurima/mixed_disc.hpp"
#include "plurima/reduce.hpp"

namespace plurima {

double MAConvention::density_const(int n) {
    double c = 1.0;
    for (int i = 1; i <= n; ++i) c *= (2.0 / M_PI) * i;
    return c;
}

double MAConvention::lelong_normalizer(int n, int k, double r) {
    int q = n - k;
    double v = 1.0;
    for (int i = 0; i < q; ++i) v *= 2.0 * r * r;
    return v;
}

std::string MAConvention::describe(int n) {
    return "d^c=(i/2pi)(dbar-d); dd^c log|z| = unit Dirac in C^1; top density const (2/pi)^n n! = " +
           std::to_string(density_const(n)) + " (n=" + std::to_string(n) + ")";
}

namespace {

class FieldSourceImpl : public FieldSource {
  public:
    FieldSourceImpl(std::function<double(const CPoint&)> f, std::string name, bool audit)
        : f_(std::move(f)), name_(std::move(name)), audit_(audit) {}
    double at(const CPoint& z) const override { return f_(z); }
    bool audit_psh() const override { return audit_; }
    std::string describe() const override { return name_; }

  private:
    std::function<double(const CPoint&)> f_;
    std::string name_;
    bool audit_;
};

class MaterializedSource : public FieldSource {
  public:
    MaterializedSource(std::shared_ptr<const ScalarField> f, bool audit, std::string name)
        : f_(std::move(f)), audit_(audit), name_(std::move(name)) {}
    double at(const CPoint& z) const override {
        // nearest-node lookup; scan points coincide with nodes
        const GridDomain& g = f_->dom;
        std::array<int, 2 * kMaxDim> idx{};
        for (int c = 0; c < g.n(); ++c) {
            double re = z.z[static_cast<std::size_t>(c)].real();
            double im = z.z[static_cast<std::size_t>(c)].imag();
            idx[static_cast<std::size_t>(2 * c)] =
                static_cast<int>(std::lround((re - g.bound(2 * c).lo) / g.h(2 * c) - 0.5));
            idx[static_cast<std::size_t>(2 * c + 1)] =
                static_cast<int>(std::lround((im - g.bound(2 * c + 1).lo) / g.h(2 * c + 1) - 0.5));
        }
        return f_->at(std::span<const int>(idx.data(), static_cast<std::size_t>(g.axes())));
    }
    bool audit_psh() const override { return audit_; }
    std::string describe() const override { return name_; }

  private:
    std::shared_ptr<const ScalarField> f_;
    bool audit_;
    std::string name_;
};

class ExprSource : public FieldSource {
  public:
    ExprSource(BoundedExpr b, bool audit, std::string name)
        : b_(std::move(b)), audit_(audit), name_(std::move(name)) {}
    double at(const CPoint& z) const override { return b_.eval(z); }
    bool audit_psh() const override { return audit_; }
    std::string describe() const override { return name_; }

  private:
    BoundedExpr b_;
    bool audit_;
    std::string name_;
};

class RegularizedSource : public FieldSource {
  public:
    RegularizedSource(AnalyticSingFn u, Regularizer chi, double shift)
        : u_(std::move(u)), chi_(std::move(chi)), shift_(shift) {}
    double at(const CPoint& z) const override { return regularized_value(u_, chi_, z, shift_); }
    bool has_aux() const override { return true; }
    double aux_at(const CPoint& z) const override { return u_.F.abs2(z); }
    std::string describe() const override {
        return chi_.label() + " o (" + (u_.name.empty() ? "c log|F|+b" : u_.name) + ")" +
               (shift_ != 0.0 ? " - " + std::to_string(shift_) : "");
    }

  private:
    AnalyticSingFn u_;
    Regularizer chi_;
    double shift_;
};

class SumSource : public FieldSource {
  public:
    SumSource(SourcePtr a, SourcePtr b) : a_(std::move(a)), b_(std::move(b)) {}
    double at(const CPoint& z) const override { return a_->at(z) + b_->at(z); }
    bool has_aux() const override { return a_->has_aux() || b_->has_aux(); }
    double aux_at(const CPoint& z) const override {
        return a_->has_aux() ? a_->aux_at(z) : b_->aux_at(z);
    }
    std::string describe() const override { return a_->describe() + " + " + b_->describe(); }

  private:
    SourcePtr a_, b_;
};

}  // namespace

SourcePtr source_field(std::shared_ptr<const ScalarField> f, bool audit_psh, std::string name) {
    return std::make_shared<MaterializedSource>(std::move(f), audit_psh, std::move(name));
}
SourcePtr source_expr(const BoundedExpr& b, bool audit_psh, std::string name) {
    return std::make_shared<ExprSource>(b, audit_psh, std::move(name));
}
SourcePtr source_regularized(const AnalyticSingFn& u, const Regularizer& chi, double shift) {
    return std::make_shared<RegularizedSource>(u, chi, shift);
}
SourcePtr source_fn(std::function<double(const CPoint&)> f, std::string name, bool audit_psh) {
    return std::make_shared<FieldSourceImpl>(std::move(f), std::move(name), audit_psh);
}
SourcePtr source_sum(SourcePtr a, SourcePtr b) {
    return std::make_shared<SumSource>(std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

namespace {

constexpr int kBlockRows = 16;  // fixed block size: reductions are
                                // thread-count independent by construction

enum class DCase { N1, N2Det, N2Mixed, N2Trace, Generic };

struct Plan {
    int k = 0;                       // filled slot count (incl. extras)
    std::vector<const FieldSource*> distinct;
    std::array<int, kMaxDim> slot_to_distinct{};
    DCase dc = DCase::Generic;
    int aux_idx = -1;
    std::vector<int> audit_idx;      // distinct indices with psh audit

    std::vector<double> radii2, deltas2, thresholds;
    std::vector<double> jradii2, jdeltas2;

    bool fine = false;
    int stride = 1;
    int cpa = 0;
    std::int64_t mcells = 0;
    double cn = 0.0;
    double cellvol = 0.0;

    // partial layout offsets
    int off_regions = 0, off_radial = 0, off_tube = 0, off_joint = 0, off_plateau = 0,
        off_integrand = 0, width = 0;
};

Plan build_plan(const GridDomain& g, const ScanSpec& spec) {
    Plan p;
    int n = g.n();
    if (spec.slots.empty() || static_cast<int>(spec.slots.size()) > n)
        throw NumericError("domain", "scan needs 1..n slot sources");
    p.k = static_cast<int>(spec.slots.size());
    for (int s = 0; s < p.k; ++s) {
        const FieldSource* src = spec.slots[static_cast<std::size_t>(s)].get();
        int found = -1;
        for (std::size_t d = 0; d < p.distinct.size(); ++d)
            if (p.distinct[d] == src) found = static_cast<int>(d);
        if (found < 0) {
            found = static_cast<int>(p.distinct.size());
            p.distinct.push_back(src);
        }
        p.slot_to_distinct[static_cast<std::size_t>(s)] = found;
    }
    for (std::size_t d = 0; d < p.distinct.size(); ++d) {
        if (p.distinct[d]->audit_psh()) p.audit_idx.push_back(static_cast<int>(d));
        if (p.aux_idx < 0 && p.distinct[d]->has_aux()) p.aux_idx = static_cast<int>(d);
    }
    if ((spec.tube || spec.radial_tube) && p.aux_idx < 0)
        throw NumericError("domain", "tube bins need a slot carrying |F|^2 aux data");

    if (n == 1) {
        p.dc = DCase::N1;
    } else if (n == 2 && p.k == 2) {
        p.dc = (p.slot_to_distinct[0] == p.slot_to_distinct[1]) ? DCase::N2Det : DCase::N2Mixed;
    } else if (n == 2 && p.k == 1) {
        p.dc = DCase::N2Trace;
    } else {
        p.dc = DCase::Generic;
    }

    auto sq = [](double v) { return v * v; };
    if (spec.radial)
        for (double r : spec.radial->radii) p.radii2.push_back(sq(r));
    if (spec.tube)
        for (double d : spec.tube->deltas) p.deltas2.push_back(sq(d));
    if (spec.radial_tube) {
        for (double r : spec.radial_tube->radii) p.jradii2.push_back(sq(r));
        for (double d : spec.radial_tube->deltas) p.jdeltas2.push_back(sq(d));
    }
    if (spec.plateau) p.thresholds = spec.plateau->thresholds;
    for (auto v : {&p.radii2, &p.deltas2, &p.jradii2, &p.jdeltas2})
        if (!std::is_sorted(v->begin(), v->end()))
            throw NumericError("domain", "bin schedules must ascend");

    if (spec.build_measure) {
        std::int64_t cells = g.node_count();
        if (cells <= spec.max_fine_cells) {
            p.fine = true;
            p.stride = 1;
            p.cpa = g.res();
            p.mcells = cells;
        } else {
            int st = 2;
            auto coarse_cells = [&](int s) {
                std::int64_t c = 1;
                for (int a = 0; a < g.axes(); ++a) c *= (g.res() + s - 1) / s;
                return c;
            };
            while (coarse_cells(st) > spec.max_coarse_cells) st *= 2;
            p.stride = st;
            p.cpa = (g.res() + st - 1) / st;
            p.mcells = coarse_cells(st);
        }
    }

    p.cn = MAConvention::density_const(n);
    p.cellvol = g.cell_volume();

    // partial layout: [0]=mass total, [1]=clipneg, [2]=hscale
    int w = 3;
    p.off_regions = w;
    w += static_cast<int>(spec.regions.size());
    p.off_radial = w;
    w += static_cast<int>(p.radii2.size());
    p.off_tube = w;
    w += static_cast<int>(p.deltas2.size());
    p.off_joint = w;
    w += static_cast<int>(p.jradii2.size() * p.jdeltas2.size());
    p.off_plateau = w;
    w += static_cast<int>(p.thresholds.size()) + 1;
    p.off_integrand = w;
    w += static_cast<int>(spec.integrands.size());
    p.width = w;
    return p;
}

inline int bin_lower(const std::vector<double>& asc, double v) {
    // first index with asc[i] > v; == size means past the last bin
    int lo = 0, hi = static_cast<int>(asc.size());
    while (lo < hi) {
        int mid = (lo + hi) / 2;
        if (asc[static_cast<std::size_t>(mid)] > v) hi = mid;
        else lo = mid + 1;
    }
    return lo;
}

struct DistinctState {
    // ring of 3 planes
    std::array<std::vector<double>, 3> plane;
};

template <int N>
ScanResult scan_impl(const GridDomain& g, const ScanSpec& spec, const Plan& plan) {
    constexpr int A = 2 * N;
    const int res = g.res();
    const std::int64_t plane = g.plane_size();
    const std::int64_t rows = plane / res;
    const int nd = static_cast<int>(plan.distinct.size());

    std::vector<DistinctState> ring(static_cast<std::size_t>(nd));
    for (auto& d : ring)
        for (auto& pl : d.plane) pl.assign(static_cast<std::size_t>(plane), 0.0);
    std::array<std::vector<double>, 3> aux_ring;
    const bool need_aux = plan.aux_idx >= 0 && (!plan.deltas2.empty() || !plan.jdeltas2.empty());
    if (need_aux)
        for (auto& pl : aux_ring) pl.assign(static_cast<std::size_t>(plane), 0.0);

    // within-plane strides for axes 1..A-1
    std::array<std::int64_t, A> stride{};
    stride[A - 1] = 1;
    for (int a = A - 2; a >= 1; --a) stride[static_cast<std::size_t>(a)] = stride[static_cast<std::size_t>(a + 1)] * res;

    std::array<double, 2 * kMaxDim> hh{};
    for (int a = 0; a < A; ++a) hh[static_cast<std::size_t>(a)] = g.h(a);
    std::array<double, A> inv_h2{};
    for (int a = 0; a < A; ++a) inv_h2[static_cast<std::size_t>(a)] = 1.0 / (hh[static_cast<std::size_t>(a)] * hh[static_cast<std::size_t>(a)]);
    std::array<double, A * A> invx{};
    for (int a = 0; a < A; ++a)
        for (int b = 0; b < A; ++b)
            invx[static_cast<std::size_t>(a * A + b)] = 1.0 / (4.0 * hh[static_cast<std::size_t>(a)] * hh[static_cast<std::size_t>(b)]);

    auto fill = [&](int p) {
        const double x0 = g.coord(0, p);
        const int pm = p % 3;
#pragma omp parallel for schedule(static)
        for (std::int64_t row = 0; row < rows; ++row) {
            std::array<int, A> idx{};
            std::int64_t r = row;
            for (int a = A - 2; a >= 1; --a) {
                idx[static_cast<std::size_t>(a)] = static_cast<int>(r % res);
                r /= res;
            }
            CPoint z;
            z.n = N;
            std::array<double, A> x{};
            x[0] = x0;
            for (int a = 1; a < A - 1; ++a) x[static_cast<std::size_t>(a)] = g.coord(a, idx[static_cast<std::size_t>(a)]);
            std::int64_t base = row * res;
            for (int i = 0; i < res; ++i) {
                x[A - 1] = g.coord(A - 1, i);
                for (int c = 0; c < N; ++c)
                    z.z[static_cast<std::size_t>(c)] = cplx(x[static_cast<std::size_t>(2 * c)], x[static_cast<std::size_t>(2 * c + 1)]);
                for (int d = 0; d < nd; ++d)
                    ring[static_cast<std::size_t>(d)].plane[static_cast<std::size_t>(pm)][static_cast<std::size_t>(base + i)] =
                        plan.distinct[static_cast<std::size_t>(d)]->at(z);
                if (need_aux)
                    aux_ring[static_cast<std::size_t>(pm)][static_cast<std::size_t>(base + i)] =
                        plan.distinct[static_cast<std::size_t>(plan.aux_idx)]->aux_at(z);
            }
        }
    };

    const int nR = static_cast<int>(spec.regions.size());
    const int nRad = static_cast<int>(plan.radii2.size());
    const int nTube = static_cast<int>(plan.deltas2.size());
    const int nJR = static_cast<int>(plan.jradii2.size());
    const int nJD = static_cast<int>(plan.jdeltas2.size());
    const int nPlat = static_cast<int>(plan.thresholds.size());
    const int nInt = static_cast<int>(spec.integrands.size());

    // measure storage
    std::vector<double> measure_mass;
    if (plan.mcells > 0) measure_mass.assign(static_cast<std::size_t>(plan.mcells), 0.0);

    const std::int64_t nblocks = (rows + kBlockRows - 1) / kBlockRows;
    std::vector<double> partials(static_cast<std::size_t>(nblocks * plan.width), 0.0);
    std::vector<double> blk_mineig(static_cast<std::size_t>(nblocks * std::max<std::size_t>(1, plan.audit_idx.size())), 0.0);
    std::vector<double> blk_scale(blk_mineig.size(), 0.0);
    std::vector<std::vector<std::pair<std::int64_t, double>>> coarse_runs(
        plan.fine || plan.mcells == 0 ? 0 : static_cast<std::size_t>(nblocks));

    std::vector<Kahan> acc(static_cast<std::size_t>(plan.width));
    std::vector<double> audit_min(plan.audit_idx.size(), 0.0);
    std::vector<double> audit_scale(plan.audit_idx.size(), 0.0);

    const double mass_const = plan.cn * plan.cellvol;
    const int naud = static_cast<int>(plan.audit_idx.size());

    auto process = [&](int i0) {
        const double x0 = g.coord(0, i0);
        const double* pm[kMaxDim];
        const double* p0[kMaxDim];
        const double* pp[kMaxDim];
        for (int d = 0; d < nd; ++d) {
            pm[d] = ring[static_cast<std::size_t>(d)].plane[static_cast<std::size_t>((i0 - 1) % 3)].data();
            p0[d] = ring[static_cast<std::size_t>(d)].plane[static_cast<std::size_t>(i0 % 3)].data();
            pp[d] = ring[static_cast<std::size_t>(d)].plane[static_cast<std::size_t>((i0 + 1) % 3)].data();
        }
        const double* aux0 = need_aux ? aux_ring[static_cast<std::size_t>(i0 % 3)].data() : nullptr;

#pragma omp parallel for schedule(static)
        for (std::int64_t blk = 0; blk < nblocks; ++blk) {
            double* part = partials.data() + blk * plan.width;
            for (int w = 0; w < plan.width; ++w) part[w] = 0.0;
            double* bmin = blk_mineig.data() + blk * std::max(1, naud);
            double* bscl = blk_scale.data() + blk * std::max(1, naud);
            for (int a = 0; a < naud; ++a) {
                bmin[a] = 0.0;
                bscl[a] = 0.0;
            }
            auto* runs = coarse_runs.empty() ? nullptr : &coarse_runs[static_cast<std::size_t>(blk)];
            if (runs) runs->clear();
            std::int64_t crun_idx = -1;
            double crun_sum = 0.0;

            std::int64_t row_lo = blk * kBlockRows;
            std::int64_t row_hi = std::min<std::int64_t>(rows, row_lo + kBlockRows);
            for (std::int64_t row = row_lo; row < row_hi; ++row) {
                std::array<int, A> idx{};
                idx[0] = i0;
                std::int64_t r = row;
                bool row_interior = true;
                for (int a = A - 2; a >= 1; --a) {
                    idx[static_cast<std::size_t>(a)] = static_cast<int>(r % res);
                    r /= res;
                    if (idx[static_cast<std::size_t>(a)] < 1 || idx[static_cast<std::size_t>(a)] > res - 2) row_interior = false;
                }
                if (!row_interior && A > 2) continue;
                std::array<double, A> x{};
                x[0] = x0;
                for (int a = 1; a < A - 1; ++a) x[static_cast<std::size_t>(a)] = g.coord(a, idx[static_cast<std::size_t>(a)]);
                const std::int64_t base = row * res;

                for (int i = 1; i <= res - 2; ++i) {
                    const std::int64_t q = base + i;
                    x[A - 1] = g.coord(A - 1, i);
                    CPoint z;
                    z.n = N;
                    for (int c = 0; c < N; ++c)
                        z.z[static_cast<std::size_t>(c)] = cplx(x[static_cast<std::size_t>(2 * c)], x[static_cast<std::size_t>(2 * c + 1)]);

                    // complex Hessian of each distinct source at this node
                    std::array<Herm, kMaxDim> hs;
                    for (int d = 0; d < nd; ++d) {
                        Herm& H = hs[static_cast<std::size_t>(d)];
                        H.n = N;
                        const double* Pm = pm[d];
                        const double* P0 = p0[d];
                        const double* Pp = pp[d];
                        const double u0 = P0[q];
                        auto d2 = [&](int a) -> double {
                            if (a == 0) return (Pp[q] - 2.0 * u0 + Pm[q]) * inv_h2[0];
                            std::int64_t s = stride[static_cast<std::size_t>(a)];
                            return (P0[q + s] - 2.0 * u0 + P0[q - s]) * inv_h2[static_cast<std::size_t>(a)];
                        };
                        auto dmix = [&](int a, int b) -> double {  // a < b
                            if (a == 0) {
                                std::int64_t s = stride[static_cast<std::size_t>(b)];
                                return (Pp[q + s] + Pm[q - s] - Pp[q - s] - Pm[q + s]) *
                                       invx[static_cast<std::size_t>(b)];
                            }
                            std::int64_t sa = stride[static_cast<std::size_t>(a)];
                            std::int64_t sb = stride[static_cast<std::size_t>(b)];
                            return (P0[q + sa + sb] + P0[q - sa - sb] - P0[q + sa - sb] - P0[q - sa + sb]) *
                                   invx[static_cast<std::size_t>(a * A + b)];
                        };
                        for (int c = 0; c < N; ++c)
                            H.d[static_cast<std::size_t>(c)] = 0.25 * (d2(2 * c) + d2(2 * c + 1));
                        int slot = 0;
                        for (int a = 0; a < N; ++a)
                            for (int b = a + 1; b < N; ++b, ++slot)
                                H.o[static_cast<std::size_t>(slot)] =
                                    0.25 * cplx(dmix(2 * a, 2 * b) + dmix(2 * a + 1, 2 * b + 1),
                                                dmix(2 * a, 2 * b + 1) - dmix(2 * a + 1, 2 * b));
                    }

                    for (int a = 0; a < naud; ++a) {
                        const Herm& H = hs[static_cast<std::size_t>(plan.audit_idx[static_cast<std::size_t>(a)])];
                        bmin[a] = std::min(bmin[a], herm_min_eig(H));
                        bscl[a] = std::max(bscl[a], H.max_abs());
                    }

                    double D;
                    switch (plan.dc) {
                        case DCase::N1: D = hs[0].d[0]; break;
                        case DCase::N2Det: {
                            const Herm& H = hs[static_cast<std::size_t>(plan.slot_to_distinct[0])];
                            D = H.d[0] * H.d[1] - abs2(H.o[0]);
                            break;
                        }
                        case DCase::N2Mixed: {
                            const Herm& Ha = hs[static_cast<std::size_t>(plan.slot_to_distinct[0])];
                            const Herm& Hb = hs[static_cast<std::size_t>(plan.slot_to_distinct[1])];
                            D = 0.5 * (Ha.d[0] * Hb.d[1] + Ha.d[1] * Hb.d[0]) -
                                (Ha.o[0].real() * Hb.o[0].real() + Ha.o[0].imag() * Hb.o[0].imag());
                            break;
                        }
                        case DCase::N2Trace: {
                            const Herm& H = hs[static_cast<std::size_t>(plan.slot_to_distinct[0])];
                            D = 0.5 * (H.d[0] + H.d[1]);
                            break;
                        }
                        default: {
                            std::array<Herm, kMaxDim> sh;
                            for (int s = 0; s < plan.k; ++s)
                                sh[static_cast<std::size_t>(s)] = hs[static_cast<std::size_t>(plan.slot_to_distinct[static_cast<std::size_t>(s)])];
                            D = mixed_discriminant_with_identity(
                                std::span<const Herm>(sh.data(), static_cast<std::size_t>(plan.k)), N);
                            break;
                        }
                    }

                    double hsc = 1.0;
                    for (int s = 0; s < plan.k; ++s)
                        hsc *= hs[static_cast<std::size_t>(plan.slot_to_distinct[static_cast<std::size_t>(s)])].max_abs();
                    part[2] += hsc * mass_const;

                    double mass = D * mass_const;
                    if (spec.weight) mass *= spec.weight(z);
                    if (mass < 0.0) {
                        part[1] -= mass;
                        mass = 0.0;
                    }
                    part[0] += mass;

                    if (mass != 0.0) {
                        for (int rr = 0; rr < nR; ++rr)
                            if (spec.regions[static_cast<std::size_t>(rr)].pred(z)) part[plan.off_regions + rr] += mass;
                        if (nRad) {
                            double r2 = dist2(z, spec.radial->center);
                            int b = bin_lower(plan.radii2, r2);
                            if (b < nRad) part[plan.off_radial + b] += mass;
                        }
                        if (nTube) {
                            int b = bin_lower(plan.deltas2, aux0[q]);
                            if (b < nTube) part[plan.off_tube + b] += mass;
                        }
                        if (nJR) {
                            double r2 = dist2(z, spec.radial_tube->center);
                            int br = bin_lower(plan.jradii2, r2);
                            int bd = bin_lower(plan.jdeltas2, aux0[q]);
                            if (br < nJR && bd < nJD) part[plan.off_joint + br * nJD + bd] += mass;
                        }
                        if (nPlat) {
                            double v = spec.plateau->level(z);
                            int b = bin_lower(plan.thresholds, v);  // # thresholds < v... see note
                            part[plan.off_plateau + b] += mass;
                        }
                        for (int ii = 0; ii < nInt; ++ii)
                            part[plan.off_integrand + ii] += mass * spec.integrands[static_cast<std::size_t>(ii)].second(z);
                    }

                    if (!measure_mass.empty()) {
                        if (plan.fine) {
                            std::int64_t lin = 0;
                            lin = idx[0];
                            for (int a = 1; a < A - 1; ++a) lin = lin * res + idx[static_cast<std::size_t>(a)];
                            lin = lin * res + i;
                            measure_mass[static_cast<std::size_t>(lin)] = mass;
                        } else {
                            std::int64_t cl = idx[0] / plan.stride;
                            for (int a = 1; a < A - 1; ++a) cl = cl * plan.cpa + idx[static_cast<std::size_t>(a)] / plan.stride;
                            cl = cl * plan.cpa + i / plan.stride;
                            if (cl != crun_idx) {
                                if (crun_idx >= 0) runs->emplace_back(crun_idx, crun_sum);
                                crun_idx = cl;
                                crun_sum = 0.0;
                            }
                            crun_sum += mass;
                        }
                    }
                }
            }
            if (runs && crun_idx >= 0) runs->emplace_back(crun_idx, crun_sum);
        }

        // deterministic merge in block order
        for (std::int64_t blk = 0; blk < nblocks; ++blk) {
            const double* part = partials.data() + blk * plan.width;
            for (int w = 0; w < plan.width; ++w) acc[static_cast<std::size_t>(w)].add(part[w]);
            const double* bmin = blk_mineig.data() + blk * std::max(1, naud);
            const double* bscl = blk_scale.data() + blk * std::max(1, naud);
            for (int a = 0; a < naud; ++a) {
                audit_min[static_cast<std::size_t>(a)] = std::min(audit_min[static_cast<std::size_t>(a)], bmin[a]);
                audit_scale[static_cast<std::size_t>(a)] = std::max(audit_scale[static_cast<std::size_t>(a)], bscl[a]);
            }
            if (!coarse_runs.empty())
                for (const auto& [ci, mv] : coarse_runs[static_cast<std::size_t>(blk)])
                    measure_mass[static_cast<std::size_t>(ci)] += mv;
        }
    };

    fill(0);
    fill(1);
    for (int i0 = 1; i0 <= res - 2; ++i0) {
        if (i0 + 1 < res) fill(i0 + 1);
        process(i0);
    }

    // assemble
    ScanResult out;
    out.total = acc[0].value();
    out.clipped_negative = acc[1].value();
    double hscale_total = acc[2].value();
    for (int rr = 0; rr < nR; ++rr)
        out.masses[spec.regions[static_cast<std::size_t>(rr)].name] = acc[static_cast<std::size_t>(plan.off_regions + rr)].value();
    if (nRad) {
        out.radial_masses.resize(static_cast<std::size_t>(nRad));
        double c = 0.0;
        for (int b = 0; b < nRad; ++b) {
            c += acc[static_cast<std::size_t>(plan.off_radial + b)].value();
            out.radial_masses[static_cast<std::size_t>(b)] = c;
        }
    }
    if (nTube) {
        out.tube_masses.resize(static_cast<std::size_t>(nTube));
        double c = 0.0;
        for (int b = 0; b < nTube; ++b) {
            c += acc[static_cast<std::size_t>(plan.off_tube + b)].value();
            out.tube_masses[static_cast<std::size_t>(b)] = c;
        }
    }
    if (nJR) {
        out.radial_tube_masses.assign(static_cast<std::size_t>(nJR), std::vector<double>(static_cast<std::size_t>(nJD), 0.0));
        for (int br = 0; br < nJR; ++br)
            for (int bd = 0; bd < nJD; ++bd) {
                double v = acc[static_cast<std::size_t>(plan.off_joint + br * nJD + bd)].value();
                out.radial_tube_masses[static_cast<std::size_t>(br)][static_cast<std::size_t>(bd)] = v;
                if (br > 0) out.radial_tube_masses[static_cast<std::size_t>(br)][static_cast<std::size_t>(bd)] +=
                    out.radial_tube_masses[static_cast<std::size_t>(br - 1)][static_cast<std::size_t>(bd)];
            }
        for (int br = 0; br < nJR; ++br)
            for (int bd = 1; bd < nJD; ++bd)
                out.radial_tube_masses[static_cast<std::size_t>(br)][static_cast<std::size_t>(bd)] +=
                    out.radial_tube_masses[static_cast<std::size_t>(br)][static_cast<std::size_t>(bd - 1)];
    }
    if (nPlat) {
        // bin b got mass of cells with exactly b thresholds below their level;
        // plateau[i] = mass of {level > thresholds[i]} = suffix over b > i
        out.plateau_masses.assign(static_cast<std::size_t>(nPlat), 0.0);
        double suffix = 0.0;
        for (int b = nPlat; b >= 1; --b) {
            suffix += acc[static_cast<std::size_t>(plan.off_plateau + b)].value();
            out.plateau_masses[static_cast<std::size_t>(b - 1)] = suffix;
        }
    }
    for (int ii = 0; ii < nInt; ++ii)
        out.integrand_values.push_back(acc[static_cast<std::size_t>(plan.off_integrand + ii)].value());

    for (std::size_t a = 0; a < plan.audit_idx.size(); ++a) {
        out.audit_min_eig = std::min(out.audit_min_eig, audit_min[a]);
        out.audit_scale = std::max(out.audit_scale, audit_scale[a]);
        if (audit_min[a] < -spec.audit_tol * std::max(1.0, audit_scale[a]))
            throw NumericError("audit",
                               "psh audit failed for '" +
                                   plan.distinct[static_cast<std::size_t>(plan.audit_idx[a])]->describe() +
                                   "': min eigenvalue " + std::to_string(audit_min[a]) + " vs scale " +
                                   std::to_string(audit_scale[a]));
    }

    // clip contract: discretization noise around an exactly degenerate
    // measure is floored at the h^2 truncation scale of the Hessians
    double noise_floor = 50.0 * g.hmax() * g.hmax() * hscale_total;
    if (spec.enforce_clip && out.clipped_negative > spec.clip_tol * out.total &&
        out.clipped_negative > noise_floor)
        throw NumericError("clip", "clipped negative mass " + std::to_string(out.clipped_negative) +
                                       " exceeds " + std::to_string(spec.clip_tol) + " x total " +
                                       std::to_string(out.total));

    if (!measure_mass.empty()) {
        MeasureField mf;
        mf.dom = g;
        mf.stride = plan.stride;
        mf.masses = std::move(measure_mass);
        mf.clipped_negative_total = out.clipped_negative;
        out.measure = std::move(mf);
    }
    return out;
}

}  // namespace

ScanResult ma_scan(const GridDomain& g, const ScanSpec& spec) {
    Plan plan = build_plan(g, spec);
    switch (g.n()) {
        case 1: return scan_impl<1>(g, spec, plan);
        case 2: return scan_impl<2>(g, spec, plan);
        case 3: return scan_impl<3>(g, spec, plan);
        default: throw NumericError("domain", "unsupported dimension");
    }
}

MeasureField ma_measure(std::span<const ScalarField* const> fields, const GridDomain& g,
                        const MAOptions& opts) {
    if (fields.empty() || static_cast<int>(fields.size()) > g.n())
        throw NumericError("domain", "ma_measure takes 1..n fields");
    ScanSpec spec;
    for (const ScalarField* f : fields) {
        if (f->dom.node_count() != g.node_count())
            throw NumericError("domain", "field grid mismatch");
        for (double v : f->v)
            if (!std::isfinite(v)) throw NumericError("domain", "nonfinite field sample");
        spec.slots.push_back(
            source_field(std::shared_ptr<const ScalarField>(f, [](const ScalarField*) {}), false, "field"));
    }
    spec.clip_tol = opts.clip_tol;
    spec.enforce_clip = opts.enforce_clip;
    spec.max_fine_cells = opts.max_fine_cells;
    spec.build_measure = true;
    ScanResult r = ma_scan(g, spec);
    return std::move(*r.measure);
}

double bt_weighted_mass(const std::function<double(const CPoint&)>& u,
                        std::span<const SourcePtr> v_slots, const Region& region,
                        const GridDomain& g, const MAOptions& opts) {
    ScanSpec spec;
    spec.slots.assign(v_slots.begin(), v_slots.end());
    spec.build_measure = false;
    spec.clip_tol = opts.clip_tol;
    spec.enforce_clip = opts.enforce_clip;
    RegionPred pred = region.pred;
    spec.integrands.emplace_back("bt", [u, pred](const CPoint& z) { return pred(z) ? u(z) : 0.0; });
    ScanResult r = ma_scan(g, spec);
    return r.integrand_values[0];
}

// ---------------------------------------------------------------------------
// generalized operator
// ---------------------------------------------------------------------------

double MASequence::value(const std::string& name) const { return fits.at(name).m_inf; }

std::vector<double> MASequence::series(const std::string& name) const {
    std::vector<double> out;
    for (const ScanResult& s : per_j) {
        if (name == "total") {
            out.push_back(s.total);
        } else {
            auto it = s.masses.find(name);
            if (it == s.masses.end()) throw NumericError("domain", "unknown series " + name);
            out.push_back(it->second);
        }
    }
    return out;
}

CouplingReport check_coupling(const AnalyticSingFn& u, const RegularizerSchedule& sched,
                              const GridDomain& g, double shift) {
    CouplingReport rep;
    if (sched.members.empty()) {
        rep.ok = false;
        rep.detail = "empty schedule";
        return rep;
    }
    BoxCN box;
    for (int a = 0; a < g.axes(); ++a) box.push_back(g.bound(a));
    double lip = lip_bound(u.F, box, 9);
    rep.lip = lip;
    double h = g.hmax();
    double c = std::max(u.c, 1e-12);

    // lattice min of |F| and max of |b| on the box
    double minp = std::numeric_limits<double>::infinity();
    double bmax = 0.0;
    {
        int per = g.n() <= 2 ? 13 : 7;
        std::vector<int> idx(static_cast<std::size_t>(g.axes()), 0);
        bool done = false;
        while (!done) {
            CPoint z;
            z.n = g.n();
            for (int cc = 0; cc < g.n(); ++cc) {
                auto coord = [&](int a) {
                    const Interval& iv = box[static_cast<std::size_t>(a)];
                    return iv.lo + iv.len() * (idx[static_cast<std::size_t>(a)] + 0.5) / per;
                };
                z.z[static_cast<std::size_t>(cc)] = cplx(coord(2 * cc), coord(2 * cc + 1));
            }
            minp = std::min(minp, u.F.abs2(z));
            if (!u.b.is_zero()) bmax = std::max(bmax, std::abs(u.b.eval(z)));
            int a = g.axes() - 1;
            while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == per) idx[static_cast<std::size_t>(a--)] = 0;
            done = a < 0;
        }
    }
    double minF = std::sqrt(std::max(minp, 0.0));
    double need = 3.0 * h * lip;

    const Regularizer& last = sched.members.back();
    double jmax = sched.js.back();
    if (last.kind() == Regularizer::Kind::Softlog) {
        // W = |F|^(2c) e^(2(b-shift)) is smoothed at W-scale 1/j; the active
        // layer sits at |F| ~ levelF
        double levelF = std::pow(std::exp(2.0 * (shift - bmax)) / jmax, 1.0 / (2.0 * c));
        bool active = minF < 10.0 * levelF;
        rep.max_feasible_j =
            need > 0 ? std::exp(2.0 * (shift - bmax)) / std::pow(need, 2.0 * c)
                     : std::numeric_limits<double>::infinity();
        if (active && levelF < need) {
            rep.ok = false;
            double len = 0.0;
            for (int a = 0; a < g.axes(); ++a) len = std::max(len, g.bound(a).len());
            rep.required_res = static_cast<int>(std::ceil(3.0 * len * lip / levelF));
            rep.detail = "softlog coupling: smoothing layer |F|~" + std::to_string(levelF) +
                         " < 3 h Lip = " + std::to_string(need) + "; max feasible j=" +
                         std::to_string(rep.max_feasible_j) + " or res>=" + std::to_string(rep.required_res);
        }
    } else if (last.kind() == Regularizer::Kind::Clamp) {
        // kink level set {u - shift = -j}: |F| = exp((-j - b + shift)/c); its
        // distance to Z is ~ |F|/Lip and must span >= 3 cells
        double levelF = std::exp((-jmax - bmax + shift) / c);
        bool kink_in_box = minF < 2.0 * levelF;
        rep.max_feasible_j = -c * std::log(std::max(need, 1e-300)) - bmax + shift;
        if (kink_in_box && levelF < need) {
            rep.ok = false;
            rep.detail = "clamp coupling: kink tube |F|=" + std::to_string(levelF) +
                         " below 3 h Lip = " + std::to_string(need) +
                         "; max feasible j=" + std::to_string(rep.max_feasible_j);
        }
    }
    return rep;
}

namespace {

void fit_sequence(MASequence& seq, int tail) {
    auto fit_series = [&](const std::string& key, const std::vector<double>& ys) {
        seq.fits[key] = fit_power_tail(seq.js, ys, tail);
        if (!within_tail_envelope(seq.fits[key].m_inf, ys, tail)) seq.envelope_ok = false;
    };
    std::vector<double> totals;
    for (const ScanResult& s : seq.per_j) totals.push_back(s.total);
    fit_series("total", totals);
    if (!seq.per_j.empty()) {
        for (const auto& [name, v] : seq.per_j.front().masses) {
            (void)v;
            std::vector<double> ys;
            for (const ScanResult& s : seq.per_j) ys.push_back(s.masses.at(name));
            fit_series(name, ys);
        }
        std::size_t nr = seq.per_j.front().radial_masses.size();
        for (std::size_t b = 0; b < nr; ++b) {
            std::vector<double> ys;
            for (const ScanResult& s : seq.per_j) ys.push_back(s.radial_masses[b]);
            fit_series("ball:" + std::to_string(b), ys);
        }
        std::size_t nt = seq.per_j.front().tube_masses.size();
        for (std::size_t b = 0; b < nt; ++b) {
            std::vector<double> ys;
            for (const ScanResult& s : seq.per_j) ys.push_back(s.tube_masses[b]);
            fit_series("tube:" + std::to_string(b), ys);
        }
        std::size_t np = seq.per_j.front().plateau_masses.size();
        for (std::size_t b = 0; b < np; ++b) {
            std::vector<double> ys;
            for (const ScanResult& s : seq.per_j) ys.push_back(s.plateau_masses[b]);
            fit_series("plateau:" + std::to_string(b), ys);
        }
        std::size_t ni = seq.per_j.front().integrand_values.size();
        for (std::size_t b = 0; b < ni; ++b) {
            std::vector<double> ys;
            for (const ScanResult& s : seq.per_j) ys.push_back(s.integrand_values[b]);
            fit_series("pair:" + std::to_string(b), ys);
        }
    }
}

void extrapolate_measures(MASequence& seq, int tail) {
    if (seq.measures.empty()) return;
    const PowerFit& tf = seq.fits.at("total");
    std::size_t n = seq.measures.size();
    std::size_t use = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(tail, 2)));
    // linear extrapolation weights for basis {1, j^-alpha}
    double alpha = tf.degenerate ? 1.0 : tf.alpha;
    std::vector<double> b(use), w(use);
    double sb = 0, sbb = 0;
    for (std::size_t i = 0; i < use; ++i) {
        b[i] = std::pow(seq.js[n - use + i], -alpha);
        sb += b[i];
        sbb += b[i] * b[i];
    }
    double det = static_cast<double>(use) * sbb - sb * sb;
    for (std::size_t i = 0; i < use; ++i)
        w[i] = det != 0.0 ? (sbb - sb * b[i]) / det : 1.0 / static_cast<double>(use);
    MeasureField out = seq.measures.back();
    for (std::size_t c = 0; c < out.masses.size(); ++c) {
        double v = 0.0;
        for (std::size_t i = 0; i < use; ++i) v += w[i] * seq.measures[n - use + i].masses[c];
        out.masses[c] = std::max(v, 0.0);
    }
    seq.extrapolated = std::move(out);
}

}  // namespace

MASequence generalized_ma_sources(std::span<const std::vector<SourcePtr>> per_j_slots,
                                  std::span<const double> js, const GridDomain& g,
                                  const GenMAOptions& opt) {
    if (per_j_slots.size() != js.size() || js.empty())
        throw NumericError("domain", "per-j slot stacks must match the schedule");
    MASequence seq;
    seq.js.assign(js.begin(), js.end());
    for (std::size_t i = 0; i < per_j_slots.size(); ++i) {
        ScanSpec spec;
        spec.slots = per_j_slots[i];
        for (const SourcePtr& s : opt.extra_slots) spec.slots.push_back(s);
        spec.regions = opt.regions;
        spec.integrands = opt.integrands;
        spec.radial = opt.radial;
        spec.tube = opt.tube;
        spec.radial_tube = opt.radial_tube;
        spec.plateau = opt.plateau;
        spec.weight = opt.weight;
        spec.build_measure = opt.build_measures;
        spec.clip_tol = opt.ma.clip_tol;
        spec.enforce_clip = opt.ma.enforce_clip;
        spec.max_fine_cells = opt.ma.max_fine_cells;
        ScanResult r = ma_scan(g, spec);
        if (opt.build_measures && r.measure) seq.measures.push_back(std::move(*r.measure));
        r.measure.reset();
        seq.per_j.push_back(std::move(r));
    }
    fit_sequence(seq, opt.tail);
    extrapolate_measures(seq, opt.tail);
    return seq;
}

MASequence generalized_ma(const AnalyticSingFn& u, const GridDomain& g, const GenMAOptions& opt) {
    if (opt.k < 1 || opt.k + static_cast<int>(opt.extra_slots.size()) > g.n())
        throw NumericError("domain", "generalized_ma: k + extra slots must fit in n");
    if (opt.schedule.size() < 1) throw NumericError("domain", "empty schedule");

    double shift = opt.shift;
    if (std::isnan(shift)) {
        AnalyticSingFn probe = u;
        if (probe.box.empty())
            for (int a = 0; a < g.axes(); ++a) probe.box.push_back(g.bound(a));
        double m = max_on_lattice(probe, 17);
        shift = (m < -0.05) ? 0.0 : m + 0.5;
    }
    {
        // negativity audit of u - shift on a dense lattice
        AnalyticSingFn probe = u;
        probe.box.clear();
        for (int a = 0; a < g.axes(); ++a) probe.box.push_back(g.bound(a));
        double m = max_on_lattice(probe, g.n() <= 2 ? 21 : 9);
        if (m - shift >= 0.0)
            throw NumericError("audit", "u - shift not negative on box (max ~ " +
                                            std::to_string(m - shift) + "); increase the shift");
    }

    if (opt.enforce_coupling) {
        CouplingReport rep = check_coupling(u, opt.schedule, g, shift);
        if (!rep.ok) throw NumericError("coupling", rep.detail);
    }

    std::vector<std::vector<SourcePtr>> stacks;
    for (const Regularizer& chi : opt.schedule.members) {
        SourcePtr s = source_regularized(u, chi, shift);
        stacks.push_back(std::vector<SourcePtr>(static_cast<std::size_t>(opt.k), s));
    }
    MASequence seq = generalized_ma_sources(stacks, opt.schedule.js, g, opt);
    seq.shift = shift;
    seq.family = opt.schedule.members.front().label();
    return seq;
}

DivisorialMAResult divisorial_ma(const DivisorialForm& d, int k, const GridDomain& g,
                                 std::span<const double> eps_schedule, const GenMAOptions& opt) {
    if (k < 1 || k > g.n()) throw NumericError("domain", "divisorial_ma: k out of range");
    DivisorialMAResult out;

    SourcePtr vsrc = source_expr(d.v, true, "v");

    // smooth part (dd^c v)^k
    {
        ScanSpec spec;
        spec.slots.assign(static_cast<std::size_t>(k), vsrc);
        for (const SourcePtr& s : opt.extra_slots) spec.slots.push_back(s);
        spec.regions = opt.regions;
        spec.radial = opt.radial;
        spec.build_measure = false;
        spec.clip_tol = opt.ma.clip_tol;
        out.smooth_part = ma_scan(g, spec);
    }

    // slice part [f=0] wedge (dd^c v)^(k-1) via dd^c 0.5 log(|f|^2 + eps^2)
    AnalyticSingFn lf;
    lf.c = 1.0;
    lf.F = PolyTuple(d.f.n(), {d.f});
    lf.b = BoundedExpr::zero();
    for (int a = 0; a < g.axes(); ++a) lf.box.push_back(g.bound(a));
    lf.name = "log|f|";

    std::vector<std::vector<SourcePtr>> stacks;
    std::vector<double> xs;
    for (double eps : eps_schedule) {
        Regularizer chi = Regularizer::softlog(1.0 / (eps * eps));
        std::vector<SourcePtr> slots;
        slots.push_back(source_regularized(lf, chi, 0.0));
        for (int i = 1; i < k; ++i) slots.push_back(vsrc);
        stacks.push_back(std::move(slots));
        xs.push_back(1.0 / eps);
    }
    GenMAOptions sub = opt;
    sub.extra_slots = opt.extra_slots;
    out.slice_part = generalized_ma_sources(stacks, xs, g, sub);

    out.totals["total"] = out.slice_part.value("total") + out.smooth_part.total;
    for (const auto& [name, v] : out.smooth_part.masses)
        out.totals[name] = out.slice_part.value(name) + v;
    return out;
}

}  // namespace plurima
