#pragma once

#include "plurima/ma.hpp"

namespace plurima {

/// [TYPE] ExcisionReport: double-limit estimate of M_k = 1_Z (dd^c u)^k over
/// a region. Inner limit j -> infinity per tube radius delta, outer limit
/// delta -> 0; both fits are kept, plus the residual carried off Z.
struct ExcisionReport {
    int k = 0;
    std::vector<double> js;
    std::vector<double> deltas;                    // descending tube schedule
    std::vector<std::vector<double>> tube_masses;  // [j][delta]
    std::vector<double> totals;                    // region mass per j
    std::vector<double> inner_limits;              // per delta, j -> inf
    std::vector<double> inner_residuals;           // per delta (total - tube)
    PowerFit outer_fit;                            // delta -> 0
    PowerFit residual_fit;
    PowerFit total_fit;
    double mk = 0.0;
    double residual = 0.0;
    double total = 0.0;
    bool stable = true;  // monotone inner tails
    double shift = 0.0;
};

/// [OP] excised_masses over `region` (the tube predicate is |F| < delta).
ExcisionReport excised_masses(const AnalyticSingFn& u, int k, const GridDomain& g,
                              const RegularizerSchedule& sched, std::span<const double> deltas,
                              const Region& region, const GenMAOptions& base = {});

/// [TYPE] LelongReport: mass(B_r)/N_k(r) ratios with N_k(r) =
/// 2^(n-k) r^(2(n-k)), extrapolated r -> 0.
struct LelongReport {
    CPoint x;      // snapped to a grid node
    bool snapped = false;
    int k = 0;
    int codim = 0;  // n - k
    std::vector<double> radii;
    std::vector<double> ball_masses;  // extrapolated in j where applicable
    std::vector<double> ratios;
    PowerFit fit;
    double nu = 0.0;
};

/// Snap a requested center to the nearest grid node (recorded in reports).
CPoint snap_to_grid(const GridDomain& g, const CPoint& x, bool* moved = nullptr);

/// [OP] lelong_number of the extrapolated generalized measure of u at x.
/// Radii must satisfy r >= 5h and fit in the grid.
LelongReport lelong_number(const AnalyticSingFn& u, int k, const GridDomain& g,
                           const RegularizerSchedule& sched, const CPoint& x,
                           std::span<const double> radii, const GenMAOptions& base = {});

/// Lelong number of an already-built measure (fixture measures, extrapolated
/// fields).
LelongReport lelong_from_measure(const MeasureField& m, const CPoint& x, int k,
                                 std::span<const double> radii);

/// [OP] segre_numbers: e_k = Lelong number at x of the M_k estimate,
/// k = 1..n (triple limit: j, then delta, then r).
struct SegreReport {
    std::vector<double> e;                 // e_1..e_n
    std::vector<LelongReport> per_k;
    std::vector<ExcisionReport> details;   // ball-restricted tube tables
};

SegreReport segre_numbers(const AnalyticSingFn& u, const CPoint& x, const GridDomain& g,
                          const RegularizerSchedule& sched, std::span<const double> deltas,
                          std::span<const double> radii, const GenMAOptions& base = {});

/// [OP] maximality_defect: total mass of (dd^c v)^n over the region for a
/// bounded psh-audited v (0 iff maximal for locally bounded functions).
double maximality_defect(const SourcePtr& v, const Region& region, const GridDomain& g,
                         const MAOptions& opts = {});

/// [OP] experiment_divisorial_maximality: defect of the bounded part vs the
/// full generalized Monge-Ampere mass of u = log|f| + v.
struct MaximalityExperiment {
    DivisorialForm split;
    double defect_v = 0.0;
    double u_mass_region = 0.0;  // extrapolated (dd^c u)^n mass over region
    MASequence seq;
};

MaximalityExperiment experiment_divisorial_maximality(const AnalyticSingFn& u, const GridDomain& g,
                                                      const RegularizerSchedule& sched,
                                                      const Region& region,
                                                      const GenMAOptions& base = {});

/// [OP] experiment_uzb: masses of (dd^c max(u, -j))^2 over balls for
/// u = -sqrt(log|z_1| log|z_2|) on a bidisk grid strictly inside the unit
/// bidisk. The paper's point is a positive lower bound along j.
struct UzbExperiment {
    std::vector<double> js;
    std::vector<double> radii;
    std::vector<std::vector<double>> ball_masses;  // [j][r]
    std::vector<double> tail_liminf;               // per radius, min over last half
};

UzbExperiment experiment_uzb(const GridDomain& g, std::span<const double> js,
                             std::span<const double> radii);

/// [OP] experiment_bidisc_comparison: u = -sqrt(log|z1| log|z2|) against
/// v = -sqrt(-log|z1|) - sqrt(-log|z2|) + 1 on the diagonal |z1|=|z2|=e^-s.
struct BidiscRow {
    double s = 0.0;  // -log t
    double t = 0.0;
    double u = 0.0;
    double v = 0.0;
};

struct BidiscComparison {
    std::vector<BidiscRow> rows;
    bool boundary_equal = false;  // u = v = -1 at s = 1
    bool strict_inside = false;   // v > u for s > 1
};

BidiscComparison experiment_bidisc_comparison(std::span<const double> s_values);

}  // namespace plurima
