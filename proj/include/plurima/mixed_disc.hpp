#pragma once

#include <span>

#include "plurima/grid.hpp"

namespace plurima {

double herm_det(const Herm& h);
double herm_trace(const Herm& h);
/// Sum of principal 2x2 minors (second characteristic coefficient).
double herm_e2(const Herm& h);
/// Smallest eigenvalue (closed forms for n <= 3); used by the psh audit.
double herm_min_eig(const Herm& h);

/// [OP] mixed_discriminant, normalized so D(H,...,H) = det H. Exactly
/// symmetric under argument permutations; multilinear up to rounding.
/// `imag_residue`, when given, receives the imaginary part discarded on the
/// way to the real result.
double mixed_discriminant(std::span<const Herm> h, double* imag_residue = nullptr);

/// D(H_1,...,H_k, I,...,I) with n_total - k identity slots (the flat
/// omega_e completion of top-degree products).
double mixed_discriminant_with_identity(std::span<const Herm> h, int n_total);

}  // namespace plurima
