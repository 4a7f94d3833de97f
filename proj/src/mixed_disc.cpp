#include "plurima/mixed_disc.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace plurima {

double herm_trace(const Herm& h) {
    double t = 0.0;
    for (int i = 0; i < h.n; ++i) t += h.d[static_cast<std::size_t>(i)];
    return t;
}

double herm_det(const Herm& h) {
    switch (h.n) {
        case 1: return h.d[0];
        case 2: return h.d[0] * h.d[1] - abs2(h.o[0]);
        case 3: {
            // o: (01), (02), (12)
            double m = h.d[0] * h.d[1] * h.d[2];
            m -= h.d[0] * abs2(h.o[2]);
            m -= h.d[1] * abs2(h.o[1]);
            m -= h.d[2] * abs2(h.o[0]);
            m += 2.0 * (h.o[0] * h.o[2] * std::conj(h.o[1])).real();
            return m;
        }
        default: return 0.0;
    }
}

double herm_e2(const Herm& h) {
    switch (h.n) {
        case 1: return 0.0;
        case 2: return herm_det(h);
        case 3:
            return h.d[0] * h.d[1] - abs2(h.o[0]) + h.d[0] * h.d[2] - abs2(h.o[1]) +
                   h.d[1] * h.d[2] - abs2(h.o[2]);
        default: return 0.0;
    }
}

double herm_min_eig(const Herm& h) {
    switch (h.n) {
        case 1: return h.d[0];
        case 2: {
            double tr = h.d[0] + h.d[1];
            double gap = h.d[0] - h.d[1];
            double disc = std::sqrt(gap * gap + 4.0 * abs2(h.o[0]));
            return 0.5 * (tr - disc);
        }
        case 3: {
            // eigenvalues of the characteristic cubic via the trigonometric form
            double q = herm_trace(h) / 3.0;
            Herm s = h;
            for (int i = 0; i < 3; ++i) s.d[static_cast<std::size_t>(i)] -= q;
            double p2 = s.d[0] * s.d[0] + s.d[1] * s.d[1] + s.d[2] * s.d[2] +
                        2.0 * (abs2(s.o[0]) + abs2(s.o[1]) + abs2(s.o[2]));
            double p = std::sqrt(std::max(p2 / 6.0, 0.0));
            if (p == 0.0) return q;
            Herm b = s;
            for (int i = 0; i < 3; ++i) b.d[static_cast<std::size_t>(i)] /= p;
            for (int i = 0; i < 3; ++i) b.o[static_cast<std::size_t>(i)] /= p;
            double r = herm_det(b) / 2.0;
            r = std::clamp(r, -1.0, 1.0);
            double phi = std::acos(r) / 3.0;
            // smallest eigenvalue
            return q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
        }
        default: return 0.0;
    }
}

namespace {

cplx entry(const Herm& h, int a, int b) { return h.off(a, b); }

// sum_{tau in S3} sgn(tau) X_{0,tau(0)} Y_{1,tau(1)} Z_{2,tau(2)}
cplx det3_mixed(const Herm& x, const Herm& y, const Herm& z) {
    cplx s = 0.0;
    s += entry(x, 0, 0) * entry(y, 1, 1) * entry(z, 2, 2);
    s -= entry(x, 0, 0) * entry(y, 1, 2) * entry(z, 2, 1);
    s -= entry(x, 0, 1) * entry(y, 1, 0) * entry(z, 2, 2);
    s += entry(x, 0, 1) * entry(y, 1, 2) * entry(z, 2, 0);
    s += entry(x, 0, 2) * entry(y, 1, 0) * entry(z, 2, 1);
    s -= entry(x, 0, 2) * entry(y, 1, 1) * entry(z, 2, 0);
    return s;
}

}  // namespace

double mixed_discriminant(std::span<const Herm> h, double* imag_residue) {
    if (imag_residue) *imag_residue = 0.0;
    int n = static_cast<int>(h.size());
    for (const Herm& m : h)
        if (m.n != n) throw NumericError("domain", "mixed_discriminant: need n matrices of size n");
    switch (n) {
        case 1: return h[0].d[0];
        case 2: {
            const Herm& a = h[0];
            const Herm& b = h[1];
            // 1/2 coefficient of t1 t2 in det(t1 A + t2 B); FP-commutative
            // products keep this exactly symmetric in (A, B).
            double cross = a.o[0].real() * b.o[0].real() + a.o[0].imag() * b.o[0].imag();
            return 0.5 * (a.d[0] * b.d[1] + a.d[1] * b.d[0]) - cross;
        }
        case 3: {
            // average det3_mixed over all argument assignments; sorting the
            // six terms before summation makes the result exactly
            // permutation-invariant.
            std::array<cplx, 6> terms{
                det3_mixed(h[0], h[1], h[2]), det3_mixed(h[0], h[2], h[1]),
                det3_mixed(h[1], h[0], h[2]), det3_mixed(h[1], h[2], h[0]),
                det3_mixed(h[2], h[0], h[1]), det3_mixed(h[2], h[1], h[0])};
            std::sort(terms.begin(), terms.end(), [](cplx p, cplx q) {
                return p.real() != q.real() ? p.real() < q.real() : p.imag() < q.imag();
            });
            cplx s = 0.0;
            for (cplx t : terms) s += t;
            if (imag_residue) *imag_residue = std::abs(s.imag() / 6.0);
            return s.real() / 6.0;
        }
        default:
            throw NumericError("domain", "mixed_discriminant supports n <= 3");
    }
}

double mixed_discriminant_with_identity(std::span<const Herm> h, int n_total) {
    int k = static_cast<int>(h.size());
    if (k == 0) return 1.0;  // det I
    if (k > n_total) throw NumericError("domain", "more matrices than slots");
    for (const Herm& m : h)
        if (m.n != n_total) throw NumericError("domain", "matrix size must equal n_total");
    if (k == n_total) return mixed_discriminant(h);
    switch (n_total) {
        case 2:  // (n,k) = (2,1): D(H, I) = tr H / 2
            return 0.5 * herm_trace(h[0]);
        case 3:
            if (k == 1) return herm_trace(h[0]) / 3.0;  // D(H, I, I)
            {
                // D(A, B, I) = (e2(A+B) - e2(A) - e2(B)) / 6
                Herm s = h[0];
                for (int i = 0; i < 3; ++i) s.d[static_cast<std::size_t>(i)] += h[1].d[static_cast<std::size_t>(i)];
                for (int i = 0; i < 3; ++i) s.o[static_cast<std::size_t>(i)] += h[1].o[static_cast<std::size_t>(i)];
                return (herm_e2(s) - herm_e2(h[0]) - herm_e2(h[1])) / 6.0;
            }
        default:
            throw NumericError("domain", "identity completion supports n_total in {2,3}");
    }
}

}  // namespace plurima
