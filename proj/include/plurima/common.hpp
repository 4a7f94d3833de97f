#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace plurima {

using cplx = std::complex<double>;

inline constexpr int kMaxDim = 3;  // complex dimension cap

/// Point in C^n, n <= kMaxDim. Unused slots are zero.
struct CPoint {
    int n = 0;
    std::array<cplx, kMaxDim> z{};

    cplx operator[](int i) const { return z[static_cast<std::size_t>(i)]; }

    static CPoint make(std::initializer_list<cplx> zs) {
        CPoint p;
        p.n = static_cast<int>(zs.size());
        int i = 0;
        for (cplx v : zs) p.z[static_cast<std::size_t>(i++)] = v;
        return p;
    }
};

inline double abs2(cplx w) { return w.real() * w.real() + w.imag() * w.imag(); }

/// Squared Euclidean distance in C^n.
inline double dist2(const CPoint& a, const CPoint& b) {
    double s = 0.0;
    for (int i = 0; i < a.n; ++i) s += abs2(a.z[static_cast<std::size_t>(i)] - b.z[static_cast<std::size_t>(i)]);
    return s;
}

/// Error in a user-provided document (JSON spec, expression string).
/// Carries the source location when known.
struct SpecError : std::runtime_error {
    int line = -1;
    int col = -1;
    SpecError(const std::string& msg, int line_ = -1, int col_ = -1)
        : std::runtime_error(line_ >= 0 ? msg + " (line " + std::to_string(line_) + ", col " +
                                              std::to_string(col_) + ")"
                                        : msg),
          line(line_),
          col(col_) {}
};

/// A numeric contract was violated: clip overflow, coupling-rule refusal,
/// psh audit failure, unstable fit where stability is required.
struct NumericError : std::runtime_error {
    std::string kind;  // "clip", "coupling", "audit", "domain"
    NumericError(std::string kind_, const std::string& msg)
        : std::runtime_error("[" + kind_ + "] " + msg), kind(std::move(kind_)) {}
};

}  // namespace plurima
