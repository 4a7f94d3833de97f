#pragma once

#include <optional>
#include <string>
#include <vector>

#include "plurima/expr.hpp"
#include "plurima/grid.hpp"
#include "plurima/poly.hpp"

namespace plurima {

/// A bounded nondecreasing convex function on (-inf, 0), one member chi_j of
/// a regularizing family. Built-ins:
///   clamp(j):   t -> max(t, -j)
///   softlog(j): t -> 0.5 * log(e^(2t) + 1/j)
/// Custom members are tabulated on a log-scaled t-grid with monotone convex
/// (piecewise-linear) interpolation and explicit derivative data.
class Regularizer {
  public:
    enum class Kind { Clamp, Softlog, Custom };

    static Regularizer clamp(double j);
    static Regularizer softlog(double j);
    static Regularizer custom(std::vector<double> knots, std::vector<double> values,
                              std::vector<double> derivs, std::string label = "custom");

    Kind kind() const { return kind_; }
    double j() const { return j_; }
    const std::string& label() const { return label_; }

    /// Value at t; t = -inf is admitted and maps to the lower plateau.
    double value(double t) const;
    double deriv(double t) const;
    /// Plateau value lim_{t->-inf} chi(t).
    double lower_plateau() const;

  private:
    Kind kind_ = Kind::Clamp;
    double j_ = 1.0;
    std::string label_;
    std::vector<double> knots_, vals_, dvs_;  // Custom only, knots ascending
};

/// Ordered regularizer family chi_{j1} >= chi_{j2} >= ... decreasing to t.
struct RegularizerSchedule {
    std::vector<double> js;
    std::vector<Regularizer> members;

    int size() const { return static_cast<int>(js.size()); }
    static RegularizerSchedule softlog_doubling(double j0, int count);
    static RegularizerSchedule clamp_linear(double j0, double j1, int count);
    static RegularizerSchedule softlog(std::vector<double> js);
    static RegularizerSchedule clamp(std::vector<double> js);
};

/// Throws NumericError("audit") if chi fails the Theorem-1.1 shape
/// contract on sample points: bounded above, nondecreasing, convex
/// (second differences >= -1e-12 * scale), and chi(t) >= t.
void audit_regularizer(const Regularizer& chi, int npts = 1000);

/// Checks the family is pointwise decreasing in j and approaches t.
void audit_schedule(const RegularizerSchedule& sched, int npts = 400);

/// Box in C^n as 2n real intervals (axis order as in GridDomain).
using BoxCN = std::vector<Interval>;

/// Exact description of u = c log|F| + b with analytic singularities.
struct AnalyticSingFn {
    double c = 1.0;
    PolyTuple F;
    BoundedExpr b;
    BoxCN box;
    bool negative = false;  // asserts u < 0 on the box (Theorem 1.1 hypothesis)
    std::string name;

    int n() const { return F.n(); }
};

/// [OP] eval: c log|F(z)| + b(z); exactly -inf iff F(z) = 0 and c > 0.
double eval(const AnalyticSingFn& u, const CPoint& z);

/// chi(u - shift)(z) computed analytically so no -inf intermediate reaches
/// floating point (softlog uses |F|^(2c) e^(2b) directly).
double regularized_value(const AnalyticSingFn& u, const Regularizer& chi, const CPoint& z,
                         double shift = 0.0);

/// [OP] regularize: sample chi o u on the grid. Audits u < 0 on the grid
/// nodes first when the family needs domain (-inf, 0).
ScalarField regularize(const AnalyticSingFn& u, const Regularizer& chi, const GridDomain& g,
                       double shift = 0.0);

/// [OP] gamma_from_chi: gamma(t) = int_{-1}^t (chi'(s))^k ds + chi(-1).
/// Clamp is a fixed point; other kinds come back tabulated.
Regularizer gamma_from_chi(const Regularizer& chi, int k);

/// Divisorial presentation u = log|f| + v with a single holomorphic f.
struct DivisorialForm {
    Poly f;
    BoundedExpr v;
    AnalyticSingFn original;
};

/// [OP] divisorial_split. Requires a single-component tuple and integer
/// c >= 1 (so that f = F_1^c is a polynomial); audits the reconstruction to
/// 1e-10 off a small tube around {f = 0}.
DivisorialForm divisorial_split(const AnalyticSingFn& u);

/// [OP] singular_tube: cell predicate |F(center)| < delta.
Region singular_tube(const PolyTuple& F, double delta);

/// Max of eval(u, .) over a coarse lattice of the box (negativity audits,
/// shift selection). -inf entries are ignored.
double max_on_lattice(const AnalyticSingFn& u, int per_axis = 9);

/// Coupling-rule ingredient: upper bound proxy for Lip(|F|) on the box,
/// sampled on a coarse lattice with a 25% safety factor.
double lip_bound(const PolyTuple& F, const BoxCN& box, int per_axis = 9);

/// Shorthand constructors for the corpus functions.
AnalyticSingFn make_log_abs_tuple(int n, std::vector<Poly> comps, BoxCN box, std::string name,
                                  double c = 1.0);

}  // namespace plurima
