#pragma once

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plurima/extrapolate.hpp"
#include "plurima/grid.hpp"
#include "plurima/psh.hpp"

namespace plurima {

/// The fixed d^c convention: d^c = (i/2pi)(dbar - d), so dd^c log|z| is the
/// unit point mass in C^1. Top-degree densities against Lebesgue measure on
/// R^(2n) then carry the constant (2/pi)^n n!, and identity-matrix slots
/// realize omega_e = dd^c|z|^2 factors.
struct MAConvention {
    static double density_const(int n);
    /// N_k(r) = 2^(n-k) r^(2(n-k)): ball-mass normalizer giving Lelong
    /// number 1 for a codimension-(n-k) coordinate plane current.
    static double lelong_normalizer(int n, int k, double r);
    static constexpr double kClipTol = 1e-3;
    static std::string describe(int n);
};

/// Immutable node-wise evaluator feeding the scan. Thread-safe and pure.
class FieldSource {
  public:
    virtual ~FieldSource() = default;
    virtual double at(const CPoint& z) const = 0;
    /// Auxiliary per-node value |F(z)|^2 when the source wraps an analytic
    /// singularity (drives tube predicates).
    virtual bool has_aux() const { return false; }
    virtual double aux_at(const CPoint&) const { return 0.0; }
    /// Declared-psh inputs get the Hessian eigenvalue audit.
    virtual bool audit_psh() const { return false; }
    virtual std::string describe() const = 0;
};

using SourcePtr = std::shared_ptr<const FieldSource>;

SourcePtr source_field(std::shared_ptr<const ScalarField> f, bool audit_psh = false,
                       std::string name = "field");
SourcePtr source_expr(const BoundedExpr& b, bool audit_psh, std::string name);
SourcePtr source_regularized(const AnalyticSingFn& u, const Regularizer& chi, double shift = 0.0);
SourcePtr source_fn(std::function<double(const CPoint&)> f, std::string name,
                    bool audit_psh = false);
SourcePtr source_sum(SourcePtr a, SourcePtr b);

/// Ball-mass bins around one center: result[r] = mass of B(center, r).
struct RadialBins {
    CPoint center;
    std::vector<double> radii;  // ascending
};

/// Tube-mass bins: result[d] = mass of {|F| < delta_d} (needs an aux source).
struct AuxBins {
    std::vector<double> deltas;  // ascending
};

/// Joint (r, delta) bins for Segre-number estimates.
struct RadialAuxBins {
    CPoint center;
    std::vector<double> radii;
    std::vector<double> deltas;
};

/// Plateau bins: result[t] = mass of {level(z) > thresholds[t]}.
struct PlateauBins {
    std::function<double(const CPoint&)> level;
    std::vector<double> thresholds;  // ascending
};

struct ScanSpec {
    std::vector<SourcePtr> slots;  // k <= n sources; missing slots are omega_e
    std::vector<Region> regions;
    /// Integrands accumulated as sum(mass * f(center)): weak pairings and
    /// Bedford-Taylor weights.
    std::vector<std::pair<std::string, std::function<double(const CPoint&)>>> integrands;
    std::optional<RadialBins> radial;
    std::optional<AuxBins> tube;
    std::optional<RadialAuxBins> radial_tube;
    std::optional<PlateauBins> plateau;
    /// Optional gate applied to the radial/tube/joint bins (restricts them
    /// to a region without duplicating predicates per bin).
    RegionPred bin_gate;
    /// Optional nonnegative point weight (chart partition of unity).
    std::function<double(const CPoint&)> weight;

    bool build_measure = true;
    std::int64_t max_fine_cells = std::int64_t{1} << 24;
    std::int64_t max_coarse_cells = std::int64_t{1} << 21;
    double clip_tol = MAConvention::kClipTol;
    bool enforce_clip = true;
    double audit_tol = 1e-8;
};

struct ScanResult {
    double total = 0.0;
    double clipped_negative = 0.0;
    std::map<std::string, double> masses;       // named regions
    std::vector<double> radial_masses;          // cumulative per radius
    std::vector<double> tube_masses;            // cumulative per delta
    std::vector<std::vector<double>> radial_tube_masses;  // [radius][delta]
    std::vector<double> plateau_masses;         // per threshold
    std::vector<double> integrand_values;
    std::optional<MeasureField> measure;
    double audit_min_eig = 0.0;
    double audit_scale = 0.0;
};

/// Streaming Bedford-Taylor scan: fills one axis-0 slab at a time, takes
/// centered-difference complex Hessians, forms the mixed discriminant with
/// omega_e completion, clips negative cells, and accumulates. Reductions use
/// fixed blocks, so results are bit-identical for any thread count.
ScanResult ma_scan(const GridDomain& g, const ScanSpec& spec);

struct MAOptions {
    double clip_tol = MAConvention::kClipTol;
    bool enforce_clip = true;
    std::int64_t max_fine_cells = std::int64_t{1} << 24;
};

/// [OP] ma_measure: mixed Monge-Ampere measure of k locally bounded sampled
/// fields, completed to top degree with omega_e slots. Declared-psh inputs
/// are audited; negative discretization cells are clipped and the clip
/// total must stay under clip_tol * total.
MeasureField ma_measure(std::span<const ScalarField* const> fields, const GridDomain& g,
                        const MAOptions& opts = {});

/// [OP] bt_weighted_mass: sum of u(center) * mass(cell) over the region,
/// mass from the mixed measure of the v-slots.
double bt_weighted_mass(const std::function<double(const CPoint&)>& u,
                        std::span<const SourcePtr> v_slots, const Region& region,
                        const GridDomain& g, const MAOptions& opts = {});

/// One regularization level of the generalized operator.
struct MASeqEntry {
    double j = 0.0;
    ScanResult scan;
};

/// [TYPE] MASequence: per-j measures of (dd^c(chi_j o u))^k plus the
/// extrapolated limit and fit diagnostics.
struct MASequence {
    std::vector<double> js;
    std::vector<ScanResult> per_j;
    std::vector<MeasureField> measures;        // when requested
    std::optional<MeasureField> extrapolated;  // tail power-fit per cell
    std::map<std::string, PowerFit> fits;      // "total", region names, bins
    double shift = 0.0;
    bool envelope_ok = true;  // extrapolated totals inside tail envelopes
    std::string family;

    double value(const std::string& name) const;  // extrapolated quantity
    std::vector<double> series(const std::string& name) const;
};

struct GenMAOptions {
    int k = 1;
    RegularizerSchedule schedule;
    std::vector<Region> regions;
    std::vector<std::pair<std::string, std::function<double(const CPoint&)>>> integrands;
    std::optional<RadialBins> radial;
    std::optional<AuxBins> tube;
    std::optional<RadialAuxBins> radial_tube;
    std::optional<PlateauBins> plateau;
    RegionPred bin_gate;
    std::function<double(const CPoint&)> weight;
    bool build_measures = false;
    bool enforce_coupling = true;
    int tail = 4;
    MAOptions ma;
    /// Extra sources wedged after the k regularized slots (omega factors on
    /// charts); identity completion fills whatever remains.
    std::vector<SourcePtr> extra_slots;
    /// Negativity shift; NaN = choose automatically from a lattice audit.
    double shift = std::numeric_limits<double>::quiet_NaN();
};

/// Smoothing-grid coupling rule. softlog(j) smooths log|F| at |F|-scale
/// j^(-1/2) and needs j^(-1/2) >= 3 h Lip(F) unless the box stays clear of
/// {F ~ 0}; clamp(j) needs the kink tube to span >= 3 cells.
struct CouplingReport {
    bool ok = true;
    double lip = 0.0;
    double max_feasible_j = 0.0;
    int required_res = 0;
    std::string detail;
};

CouplingReport check_coupling(const AnalyticSingFn& u, const RegularizerSchedule& sched,
                              const GridDomain& g, double shift);

/// [OP] generalized_ma: (dd^c(chi_j o u))^k along the schedule, extrapolated
/// in j (mass(j) = m_inf + C j^-alpha on the tail). Refuses schedules that
/// violate the coupling rule.
MASequence generalized_ma(const AnalyticSingFn& u, const GridDomain& g, const GenMAOptions& opt);

/// Like generalized_ma but with caller-supplied per-j slot stacks (for
/// alternative decreasing families that are not chi o u).
MASequence generalized_ma_sources(std::span<const std::vector<SourcePtr>> per_j_slots,
                                  std::span<const double> js, const GridDomain& g,
                                  const GenMAOptions& opt);

struct DivisorialMAResult {
    MASequence slice_part;   // [f=0] wedge (dd^c v)^(k-1), eps-extrapolated
    ScanResult smooth_part;  // (dd^c v)^k
    std::map<std::string, double> totals;  // slice + smooth per region
};

/// [OP] divisorial_ma: (dd^c u)^k for u = log|f| + v as the sum of the
/// Poincare-Lelong slice term and the bounded part, cross-checkable against
/// generalized_ma.
DivisorialMAResult divisorial_ma(const DivisorialForm& d, int k, const GridDomain& g,
                                 std::span<const double> eps_schedule, const GenMAOptions& opt);

}  // namespace plurima
