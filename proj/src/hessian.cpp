#include "plurima/hessian.hpp"

#include <cmath>

namespace plurima {

HermitianField complex_hessian(const ScalarField& f) {
    const GridDomain& g = f.dom;
    HermitianField out(g);
    std::array<double, 2 * kMaxDim> h{};
    for (int a = 0; a < g.axes(); ++a) h[static_cast<std::size_t>(a)] = g.h(a);

    std::array<int, 2 * kMaxDim> idx{};
    std::span<int> idxs(idx.data(), static_cast<std::size_t>(g.axes()));
    std::int64_t nn = g.node_count();
    for (std::int64_t l = 0; l < nn; ++l) {
        g.index_of(l, idxs);
        if (!g.interior(idxs)) continue;
        auto getter = [&](const std::array<int, 2 * kMaxDim>& off) {
            std::array<int, 2 * kMaxDim> j = idx;
            for (int a = 0; a < g.axes(); ++a) j[static_cast<std::size_t>(a)] += off[static_cast<std::size_t>(a)];
            double v = f.at(std::span<const int>(j.data(), static_cast<std::size_t>(g.axes())));
            if (!std::isfinite(v))
                throw NumericError("domain", "nonfinite sample fed to a Hessian stencil");
            return v;
        };
        out.set(idxs, hessian_stencil(getter, g.n(), h));
    }
    return out;
}

}  // namespace plurima
