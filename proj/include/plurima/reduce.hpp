#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace plurima {

/// Kahan compensated accumulator. Used inside fixed-size blocks so that
/// parallel reductions stay bit-identical for any thread count.
struct Kahan {
    double s = 0.0;
    double c = 0.0;
    void add(double x) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    double value() const { return s; }
};

/// Pairwise tree sum in a fixed order. Input order defines the tree shape,
/// so the result does not depend on how the partials were produced.
double tree_sum(std::span<const double> v);

/// Exact fixed-point accumulator for doubles (Kulisch style). The internal
/// state represents the running sum exactly, so it is independent of the
/// order in which values arrive; only the final conversion to double rounds.
/// Inputs must be finite; a nonfinite input poisons the sum to NaN.
class ExactSum {
  public:
    ExactSum() { limbs_.assign(kLimbs, 0); }

    void add(double x) {
        if (x == 0.0) return;
        if (!std::isfinite(x)) {
            poisoned_ = true;
            return;
        }
        int e;
        double m = std::frexp(x, &e);  // x = m * 2^e, |m| in [0.5, 1)
        auto mant = static_cast<std::int64_t>(m * 9007199254740992.0);  // m * 2^53
        int pos = (e - 53) + kBias;    // bit position of the mantissa LSB
        int li = pos >> 5;
        int sh = pos & 31;
        // mant spans at most 3 limbs after the shift; low digits are kept
        // nonnegative, the top digit carries the sign (C++20 shift semantics).
        limbs_[static_cast<std::size_t>(li)] += (mant << sh) & kMask;
        limbs_[static_cast<std::size_t>(li) + 1] += (mant >> (32 - sh)) & kMask;
        if (sh != 0) limbs_[static_cast<std::size_t>(li) + 2] += mant >> (64 - sh);
        if (++adds_ >= kNormEvery) normalize();
    }

    void add(const ExactSum& other) {
        normalize();
        std::vector<std::int64_t> t = other.limbs_;
        propagate(t);
        for (std::size_t i = 0; i < kLimbs; ++i) limbs_[i] += t[i];
        poisoned_ = poisoned_ || other.poisoned_;
        adds_ = 1;
    }

    double value() const {
        if (poisoned_) return std::nan("");
        std::vector<std::int64_t> t = limbs_;
        propagate(t);
        Kahan k;
        for (std::size_t i = 0; i < kLimbs; ++i) {
            if (t[i] != 0)
                k.add(std::ldexp(static_cast<double>(t[i]), 32 * static_cast<int>(i) - kBias));
        }
        return k.value();
    }

  private:
    // Limb i holds a signed contribution scaled by 2^(32*i - kBias); kBias
    // shifts the lowest double bit (2^-1074) to a nonnegative position.
    static constexpr int kBias = 1088;
    static constexpr std::size_t kLimbs = (1024 + kBias) / 32 + 4;
    static constexpr std::int64_t kMask = 0xffffffffLL;
    static constexpr std::uint64_t kNormEvery = 1ull << 29;

    void normalize() {
        propagate(limbs_);
        adds_ = 0;
    }

    static void propagate(std::vector<std::int64_t>& t) {
        std::int64_t carry = 0;
        for (std::size_t i = 0; i + 1 < kLimbs; ++i) {
            t[i] += carry;
            std::int64_t r = t[i] & kMask;
            carry = (t[i] - r) >> 32;
            t[i] = r;
        }
        t[kLimbs - 1] += carry;  // top limb keeps the sign
    }

    std::vector<std::int64_t> limbs_;
    std::uint64_t adds_ = 0;
    bool poisoned_ = false;
};

}  // namespace plurima
