#include "plurima/poly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace plurima {

Poly::Poly(int n, std::vector<Term> terms) : n_(n), terms_(std::move(terms)) { normalize(); }

void Poly::normalize() {
    std::map<std::array<int, kMaxDim>, cplx> acc;
    for (const Term& t : terms_) acc[t.e] += t.a;
    terms_.clear();
    for (const auto& [e, a] : acc)
        if (a != cplx(0.0)) terms_.push_back(Term{e, a});
}

Poly Poly::monomial(int n, std::array<int, kMaxDim> e, cplx a) { return Poly(n, {Term{e, a}}); }

Poly Poly::coordinate(int n, int j) {
    std::array<int, kMaxDim> e{};
    e[static_cast<std::size_t>(j)] = 1;
    return monomial(n, e);
}

Poly Poly::constant(int n, cplx a) { return Poly(n, {Term{{}, a}}); }

int Poly::degree() const {
    int d = 0;
    for (const Term& t : terms_) {
        int s = 0;
        for (int j = 0; j < n_; ++j) s += t.e[static_cast<std::size_t>(j)];
        d = std::max(d, s);
    }
    return d;
}

cplx Poly::eval(const CPoint& z) const {
    // shared power tables per coordinate
    std::array<std::array<cplx, 16>, kMaxDim> pw;
    std::array<int, kMaxDim> maxe{};
    for (const Term& t : terms_)
        for (int j = 0; j < n_; ++j)
            maxe[static_cast<std::size_t>(j)] = std::max(maxe[static_cast<std::size_t>(j)], t.e[static_cast<std::size_t>(j)]);
    for (int j = 0; j < n_; ++j) {
        pw[static_cast<std::size_t>(j)][0] = 1.0;
        for (int k = 1; k <= maxe[static_cast<std::size_t>(j)] && k < 16; ++k)
            pw[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] =
                pw[static_cast<std::size_t>(j)][static_cast<std::size_t>(k - 1)] * z.z[static_cast<std::size_t>(j)];
    }
    cplx s = 0.0;
    for (const Term& t : terms_) {
        cplx m = t.a;
        for (int j = 0; j < n_; ++j) {
            int e = t.e[static_cast<std::size_t>(j)];
            if (e > 0) {
                if (e < 16) {
                    m *= pw[static_cast<std::size_t>(j)][static_cast<std::size_t>(e)];
                } else {
                    m *= std::pow(z.z[static_cast<std::size_t>(j)], e);
                }
            }
        }
        s += m;
    }
    return s;
}

Poly Poly::derivative(int j) const {
    std::vector<Term> out;
    for (const Term& t : terms_) {
        int e = t.e[static_cast<std::size_t>(j)];
        if (e > 0) {
            Term d = t;
            d.a *= static_cast<double>(e);
            d.e[static_cast<std::size_t>(j)] = e - 1;
            out.push_back(d);
        }
    }
    return Poly(n_, std::move(out));
}

Poly Poly::operator*(const Poly& rhs) const {
    std::vector<Term> out;
    for (const Term& s : terms_)
        for (const Term& t : rhs.terms_) {
            Term p;
            p.a = s.a * t.a;
            for (int j = 0; j < kMaxDim; ++j)
                p.e[static_cast<std::size_t>(j)] = s.e[static_cast<std::size_t>(j)] + t.e[static_cast<std::size_t>(j)];
            out.push_back(p);
        }
    return Poly(n_, std::move(out));
}

Poly Poly::pow(int k) const {
    Poly acc = Poly::constant(n_, 1.0);
    for (int i = 0; i < k; ++i) acc = acc * (*this);
    return acc;
}

bool Poly::homogeneous_of_degree(int m) const {
    for (const Term& t : terms_) {
        int s = 0;
        for (int j = 0; j < n_; ++j) s += t.e[static_cast<std::size_t>(j)];
        if (s != m) return false;
    }
    return true;
}

Poly Poly::dehomogenize(int chart) const {
    std::vector<Term> out;
    for (const Term& t : terms_) {
        Term d;
        d.a = t.a;
        int k = 0;
        for (int j = 0; j < n_; ++j) {
            if (j == chart) continue;
            d.e[static_cast<std::size_t>(k++)] = t.e[static_cast<std::size_t>(j)];
        }
        for (; k < kMaxDim; ++k) d.e[static_cast<std::size_t>(k)] = 0;
        out.push_back(d);
    }
    return Poly(n_ - 1, std::move(out));
}

std::string Poly::to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const Term& t : terms_) {
        if (!first) os << " + ";
        first = false;
        os << "(" << t.a.real();
        if (t.a.imag() != 0.0) os << (t.a.imag() > 0 ? "+" : "") << t.a.imag() << "i";
        os << ")";
        for (int j = 0; j < n_; ++j) {
            int e = t.e[static_cast<std::size_t>(j)];
            if (e == 1) os << "*z" << j + 1;
            if (e > 1) os << "*z" << j + 1 << "^" << e;
        }
    }
    return os.str();
}

PolyTuple::PolyTuple(int n, std::vector<Poly> comps) : n_(n), comps_(std::move(comps)) {
    bool all_zero = true;
    for (const Poly& p : comps_) {
        if (p.n() != n_) throw NumericError("domain", "tuple component dimension mismatch");
        if (!p.zero()) all_zero = false;
    }
    if (comps_.empty() || all_zero)
        throw NumericError("domain", "polynomial tuple must have a nonzero component");
    for (const Poly& p : comps_)
        for (int j = 0; j < n_; ++j) derivs_.push_back(p.derivative(j));
}

double PolyTuple::abs2(const CPoint& z) const {
    double s = 0.0;
    for (const Poly& p : comps_) s += plurima::abs2(p.eval(z));
    return s;
}

double PolyTuple::grad_norm(const CPoint& z) const {
    double s = 0.0;
    for (const Poly& d : derivs_) s += plurima::abs2(d.eval(z));
    return std::sqrt(s);
}

std::string PolyTuple::to_string() const {
    std::ostringstream os;
    os << "(";
    for (int i = 0; i < size(); ++i) {
        if (i) os << ", ";
        os << comps_[static_cast<std::size_t>(i)].to_string();
    }
    os << ")";
    return os.str();
}

}  // namespace plurima
