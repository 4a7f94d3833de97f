#pragma once

#include <array>
#include <string>
#include <vector>

#include "plurima/common.hpp"

namespace plurima {

/// Complex polynomial in z1..zn with exact coefficients, stored as a term
/// list keyed by exponent multi-indices.
class Poly {
  public:
    struct Term {
        std::array<int, kMaxDim> e{};
        cplx a;
    };

    Poly() = default;
    Poly(int n, std::vector<Term> terms);

    static Poly monomial(int n, std::array<int, kMaxDim> e, cplx a = 1.0);
    static Poly coordinate(int n, int j);  // z_{j+1}
    static Poly constant(int n, cplx a);

    int n() const { return n_; }
    bool zero() const { return terms_.empty(); }
    int degree() const;
    const std::vector<Term>& terms() const { return terms_; }

    cplx eval(const CPoint& z) const;
    Poly derivative(int j) const;
    Poly pow(int k) const;
    Poly operator*(const Poly& rhs) const;

    /// True when every term has total degree m.
    bool homogeneous_of_degree(int m) const;

    /// Substitute z_{chart+1} = 1 and renumber the remaining variables in
    /// order. Requires n >= 2.
    Poly dehomogenize(int chart) const;

    std::string to_string() const;

  private:
    void normalize();
    int n_ = 0;
    std::vector<Term> terms_;
};

/// Tuple F = (f_1,...,f_m) of polynomials; |F|^2 = sum |f_i|^2 evaluates
/// exactly in floating point without any logarithm.
class PolyTuple {
  public:
    PolyTuple() = default;
    PolyTuple(int n, std::vector<Poly> comps);

    int n() const { return n_; }
    int size() const { return static_cast<int>(comps_.size()); }
    const Poly& operator[](int i) const { return comps_[static_cast<std::size_t>(i)]; }
    const std::vector<Poly>& components() const { return comps_; }

    double abs2(const CPoint& z) const;

    /// sqrt(sum_{i,j} |df_i/dz_j|^2) at z; an upper-bound proxy for the
    /// local Lipschitz constant of |F|.
    double grad_norm(const CPoint& z) const;

    std::string to_string() const;

  private:
    int n_ = 0;
    std::vector<Poly> comps_;
    std::vector<Poly> derivs_;  // d f_i / d z_j, row-major i*n + j
};

}  // namespace plurima
