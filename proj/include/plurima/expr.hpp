#pragma once

#include <memory>
#include <string>
#include <vector>

#include "plurima/common.hpp"

namespace plurima {

/// Expression tree for the bounded part b of an analytic-singularity
/// function. The grammar (docs/function-spec.md) admits constants, Re z_j,
/// Im z_j, |z_j|^2, sums, products, scalar multiples, and composition with
/// the convex nondecreasing maps log1p, exp, softplus.
class Expr {
  public:
    enum class Kind { Const, Re, Im, Abs2, Add, Mul, Log1p, Exp, Softplus };

    Kind kind = Kind::Const;
    double value = 0.0;  // Const payload
    int var = 0;         // coordinate index for Re/Im/Abs2 (0-based)
    std::vector<Expr> args;

    double eval(const CPoint& z) const;

    static Expr constant(double v);
    static Expr re(int j);
    static Expr im(int j);
    static Expr abs2v(int j);
    static Expr add(std::vector<Expr> xs);
    static Expr mul(std::vector<Expr> xs);
    static Expr scale(double a, Expr x);
    static Expr log1p_of(Expr x);
    static Expr exp_of(Expr x);
    static Expr softplus_of(Expr x);
};

/// b with its declared sup-norm bound on the working box. Boundedness is
/// spot-checked on grids; psh-ness of the assembled function is audited,
/// not proved.
struct BoundedExpr {
    Expr root = Expr::constant(0.0);
    double bound = 0.0;
    std::string text = "0";

    double eval(const CPoint& z) const { return root.eval(z); }
    bool is_zero() const { return root.kind == Expr::Kind::Const && root.value == 0.0; }

    static BoundedExpr zero() { return BoundedExpr{}; }
};

/// Parse the expression grammar. `max_var` is the number of complex
/// coordinates available (z1..z_max_var). Throws SpecError with line/col.
Expr parse_expr(const std::string& text, int max_var);

BoundedExpr make_bounded(const std::string& text, double bound, int max_var);

}  // namespace plurima
