#pragma once

#include <array>

#include "plurima/grid.hpp"

namespace plurima {

/// Centered-difference complex Hessian at one node, O(h^2) on C^4 functions.
/// Entries u_{z_a zbar_b} = (u_{x_a x_b} + u_{y_a y_b} + i(u_{x_a y_b} -
/// u_{y_a x_b})) / 4 with x_a = axis 2a, y_a = axis 2a+1.
/// G maps a per-axis offset array (entries in {-1,0,1}) to the sample value.
template <typename G>
Herm hessian_stencil(const G& u, int n, const std::array<double, 2 * kMaxDim>& h) {
    std::array<int, 2 * kMaxDim> off{};
    auto at = [&](int a, int da, int b, int db) {
        off.fill(0);
        off[static_cast<std::size_t>(a)] = da;
        if (b >= 0) off[static_cast<std::size_t>(b)] += db;
        return u(off);
    };
    off.fill(0);
    double u0 = u(off);

    auto d2 = [&](int a) {  // same-axis second difference
        return (at(a, 1, -1, 0) - 2.0 * u0 + at(a, -1, -1, 0)) / (h[static_cast<std::size_t>(a)] * h[static_cast<std::size_t>(a)]);
    };
    auto dm = [&](int a, int b) {  // mixed second difference, a != b
        return (at(a, 1, b, 1) + at(a, -1, b, -1) - at(a, 1, b, -1) - at(a, -1, b, 1)) /
               (4.0 * h[static_cast<std::size_t>(a)] * h[static_cast<std::size_t>(b)]);
    };

    Herm out;
    out.n = n;
    for (int a = 0; a < n; ++a)
        out.d[static_cast<std::size_t>(a)] = 0.25 * (d2(2 * a) + d2(2 * a + 1));
    int slot = 0;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b, ++slot)
            out.o[static_cast<std::size_t>(slot)] =
                0.25 * cplx(dm(2 * a, 2 * b) + dm(2 * a + 1, 2 * b + 1),
                            dm(2 * a, 2 * b + 1) - dm(2 * a + 1, 2 * b));
    return out;
}

/// [OP] complex_hessian on a materialized field. Throws on nonfinite
/// samples touched by any stencil.
HermitianField complex_hessian(const ScalarField& f);

}  // namespace plurima
