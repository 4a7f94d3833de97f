#include "plurima/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace plurima {

namespace {

// Numerically stable log(1+exp(t)).
double softplus(double t) {
    if (t > 36.0) return t;
    if (t < -36.0) return std::exp(t);
    return std::log1p(std::exp(t));
}

}  // namespace

double Expr::eval(const CPoint& z) const {
    switch (kind) {
        case Kind::Const: return value;
        case Kind::Re: return z.z[static_cast<std::size_t>(var)].real();
        case Kind::Im: return z.z[static_cast<std::size_t>(var)].imag();
        case Kind::Abs2: return abs2(z.z[static_cast<std::size_t>(var)]);
        case Kind::Add: {
            double s = 0.0;
            for (const Expr& a : args) s += a.eval(z);
            return s;
        }
        case Kind::Mul: {
            double p = 1.0;
            for (const Expr& a : args) p *= a.eval(z);
            return p;
        }
        case Kind::Log1p: return std::log1p(args[0].eval(z));
        case Kind::Exp: return std::exp(args[0].eval(z));
        case Kind::Softplus: return softplus(args[0].eval(z));
    }
    return 0.0;
}

Expr Expr::constant(double v) {
    Expr e;
    e.kind = Kind::Const;
    e.value = v;
    return e;
}
Expr Expr::re(int j) {
    Expr e;
    e.kind = Kind::Re;
    e.var = j;
    return e;
}
Expr Expr::im(int j) {
    Expr e;
    e.kind = Kind::Im;
    e.var = j;
    return e;
}
Expr Expr::abs2v(int j) {
    Expr e;
    e.kind = Kind::Abs2;
    e.var = j;
    return e;
}
Expr Expr::add(std::vector<Expr> xs) {
    Expr e;
    e.kind = Kind::Add;
    e.args = std::move(xs);
    return e;
}
Expr Expr::mul(std::vector<Expr> xs) {
    Expr e;
    e.kind = Kind::Mul;
    e.args = std::move(xs);
    return e;
}
Expr Expr::scale(double a, Expr x) { return mul({constant(a), std::move(x)}); }
Expr Expr::log1p_of(Expr x) {
    Expr e;
    e.kind = Kind::Log1p;
    e.args.push_back(std::move(x));
    return e;
}
Expr Expr::exp_of(Expr x) {
    Expr e;
    e.kind = Kind::Exp;
    e.args.push_back(std::move(x));
    return e;
}
Expr Expr::softplus_of(Expr x) {
    Expr e;
    e.kind = Kind::Softplus;
    e.args.push_back(std::move(x));
    return e;
}

namespace {

struct Token {
    enum class T { Number, Ident, LParen, RParen, Plus, Minus, Star, End } t;
    std::string text;
    double num = 0.0;
    int line = 1, col = 1;
};

class Lexer {
  public:
    explicit Lexer(const std::string& s) : s_(s) {}

    Token next() {
        skip_ws();
        Token tok;
        tok.line = line_;
        tok.col = col_;
        if (pos_ >= s_.size()) {
            tok.t = Token::T::End;
            return tok;
        }
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* start = s_.c_str() + pos_;
            char* end = nullptr;
            tok.num = std::strtod(start, &end);
            std::size_t len = static_cast<std::size_t>(end - start);
            if (len == 0) throw SpecError("invalid number", line_, col_);
            advance(len);
            tok.t = Token::T::Number;
            return tok;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = pos_;
            while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_')) ++j;
            tok.text = s_.substr(pos_, j - pos_);
            advance(j - pos_);
            tok.t = Token::T::Ident;
            return tok;
        }
        advance(1);
        switch (c) {
            case '(': tok.t = Token::T::LParen; return tok;
            case ')': tok.t = Token::T::RParen; return tok;
            case '+': tok.t = Token::T::Plus; return tok;
            case '-': tok.t = Token::T::Minus; return tok;
            case '*': tok.t = Token::T::Star; return tok;
            default: throw SpecError(std::string("unexpected character '") + c + "'", tok.line, tok.col);
        }
    }

  private:
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) advance(1);
    }
    void advance(std::size_t k) {
        for (std::size_t i = 0; i < k && pos_ < s_.size(); ++i, ++pos_) {
            if (s_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
        }
    }
    const std::string& s_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;
};

class Parser {
  public:
    Parser(const std::string& s, int max_var) : lex_(s), max_var_(max_var) { shift(); }

    Expr parse() {
        Expr e = expr();
        expect(Token::T::End, "end of input");
        return e;
    }

  private:
    void shift() { cur_ = lex_.next(); }

    void expect(Token::T t, const char* what) {
        if (cur_.t != t) throw SpecError(std::string("expected ") + what, cur_.line, cur_.col);
        if (t != Token::T::End) shift();
    }

    Expr expr() {
        std::vector<Expr> terms;
        terms.push_back(term());
        while (cur_.t == Token::T::Plus || cur_.t == Token::T::Minus) {
            bool neg = cur_.t == Token::T::Minus;
            shift();
            Expr t = term();
            terms.push_back(neg ? Expr::scale(-1.0, std::move(t)) : std::move(t));
        }
        return terms.size() == 1 ? std::move(terms[0]) : Expr::add(std::move(terms));
    }

    Expr term() {
        std::vector<Expr> factors;
        factors.push_back(factor());
        while (cur_.t == Token::T::Star) {
            shift();
            factors.push_back(factor());
        }
        return factors.size() == 1 ? std::move(factors[0]) : Expr::mul(std::move(factors));
    }

    int zindex() {
        if (cur_.t != Token::T::Ident || cur_.text.size() != 2 || cur_.text[0] != 'z' ||
            !std::isdigit(static_cast<unsigned char>(cur_.text[1])))
            throw SpecError("expected coordinate z1..z" + std::to_string(max_var_), cur_.line, cur_.col);
        int j = cur_.text[1] - '0';
        if (j < 1 || j > max_var_)
            throw SpecError("coordinate z" + std::to_string(j) + " out of range (n=" + std::to_string(max_var_) + ")",
                            cur_.line, cur_.col);
        shift();
        return j - 1;
    }

    Expr factor() {
        switch (cur_.t) {
            case Token::T::Number: {
                double v = cur_.num;
                shift();
                return Expr::constant(v);
            }
            case Token::T::Minus: {
                shift();
                return Expr::scale(-1.0, factor());
            }
            case Token::T::LParen: {
                shift();
                Expr e = expr();
                expect(Token::T::RParen, "')'");
                return e;
            }
            case Token::T::Ident: {
                std::string id = cur_.text;
                int line = cur_.line, col = cur_.col;
                shift();
                expect(Token::T::LParen, "'(' after function name");
                if (id == "Re" || id == "Im" || id == "abs2") {
                    int j = zindex();
                    expect(Token::T::RParen, "')'");
                    if (id == "Re") return Expr::re(j);
                    if (id == "Im") return Expr::im(j);
                    return Expr::abs2v(j);
                }
                Expr arg = expr();
                expect(Token::T::RParen, "')'");
                if (id == "log1p") return Expr::log1p_of(std::move(arg));
                if (id == "exp") return Expr::exp_of(std::move(arg));
                if (id == "softplus") return Expr::softplus_of(std::move(arg));
                throw SpecError("unknown function '" + id + "'", line, col);
            }
            default:
                throw SpecError("expected a factor", cur_.line, cur_.col);
        }
    }

    Lexer lex_;
    Token cur_;
    int max_var_;
};

}  // namespace

Expr parse_expr(const std::string& text, int max_var) { return Parser(text, max_var).parse(); }

BoundedExpr make_bounded(const std::string& text, double bound, int max_var) {
    BoundedExpr b;
    b.root = parse_expr(text, max_var);
    b.bound = bound;
    b.text = text;
    return b;
}

}  // namespace plurima
