#include "fpk/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <utility>

namespace fpk {

namespace {

double int_pow(double base, int exponent) {
    if (exponent == 0) return 1.0;
    const bool negative = exponent < 0;
    unsigned int e = negative ? static_cast<unsigned int>(-static_cast<long long>(exponent))
                              : static_cast<unsigned int>(exponent);
    double result = 1.0;
    double acc = base;
    while (e > 0) {
        if (e & 1u) result *= acc;
        acc *= acc;
        e >>= 1u;
    }
    if (negative) {
        if (result == 0.0) throw EvalError("zero raised to a negative power");
        return 1.0 / result;
    }
    return result;
}

ExprPtr node(Expr::Kind kind, double value, int index, ExprPtr lhs, ExprPtr rhs) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->value = value;
    e->index = index;
    e->lhs = std::move(lhs);
    e->rhs = std::move(rhs);
    return e;
}

bool is_const(const ExprPtr& e, double v) {
    return e->kind == Expr::Kind::constant && e->value == v;
}

}  // namespace

double Expr::eval(std::span<const double> x) const {
    switch (kind) {
        case Kind::constant: return value;
        case Kind::variable: {
            const std::size_t i = static_cast<std::size_t>(index - 1);
            if (i >= x.size()) throw EvalError("state vector shorter than variable index");
            return x[i];
        }
        case Kind::add: return lhs->eval(x) + rhs->eval(x);
        case Kind::sub: return lhs->eval(x) - rhs->eval(x);
        case Kind::mul: return lhs->eval(x) * rhs->eval(x);
        case Kind::div: {
            const double d = rhs->eval(x);
            if (d == 0.0) throw EvalError("division by zero");
            return lhs->eval(x) / d;
        }
        case Kind::pow: return int_pow(lhs->eval(x), index);
        case Kind::neg: return -lhs->eval(x);
        case Kind::sin: return std::sin(lhs->eval(x));
        case Kind::cos: return std::cos(lhs->eval(x));
        case Kind::exp: return std::exp(lhs->eval(x));
        case Kind::tanh: return std::tanh(lhs->eval(x));
    }
    throw EvalError("corrupt expression node");
}

ExprPtr make_constant(double v) { return node(Expr::Kind::constant, v, 0, nullptr, nullptr); }

ExprPtr make_variable(int index_1based) {
    return node(Expr::Kind::variable, 0.0, index_1based, nullptr, nullptr);
}

ExprPtr make_add(ExprPtr a, ExprPtr b) {
    if (a->kind == Expr::Kind::constant && b->kind == Expr::Kind::constant)
        return make_constant(a->value + b->value);
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    return node(Expr::Kind::add, 0.0, 0, std::move(a), std::move(b));
}

ExprPtr make_sub(ExprPtr a, ExprPtr b) {
    if (a->kind == Expr::Kind::constant && b->kind == Expr::Kind::constant)
        return make_constant(a->value - b->value);
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return make_neg(std::move(b));
    return node(Expr::Kind::sub, 0.0, 0, std::move(a), std::move(b));
}

ExprPtr make_mul(ExprPtr a, ExprPtr b) {
    if (a->kind == Expr::Kind::constant && b->kind == Expr::Kind::constant)
        return make_constant(a->value * b->value);
    if (is_const(a, 0.0) || is_const(b, 0.0)) return make_constant(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    return node(Expr::Kind::mul, 0.0, 0, std::move(a), std::move(b));
}

ExprPtr make_div(ExprPtr a, ExprPtr b) {
    if (is_const(a, 0.0)) return make_constant(0.0);
    if (is_const(b, 1.0)) return a;
    if (a->kind == Expr::Kind::constant && b->kind == Expr::Kind::constant && b->value != 0.0)
        return make_constant(a->value / b->value);
    return node(Expr::Kind::div, 0.0, 0, std::move(a), std::move(b));
}

ExprPtr make_pow(ExprPtr base, int exponent) {
    if (exponent == 0) return make_constant(1.0);
    if (exponent == 1) return base;
    if (base->kind == Expr::Kind::constant) return make_constant(int_pow(base->value, exponent));
    return node(Expr::Kind::pow, 0.0, exponent, std::move(base), nullptr);
}

ExprPtr make_neg(ExprPtr a) {
    if (a->kind == Expr::Kind::constant) return make_constant(-a->value);
    if (a->kind == Expr::Kind::neg) return a->lhs;
    return node(Expr::Kind::neg, 0.0, 0, std::move(a), nullptr);
}

ExprPtr make_unary(Expr::Kind kind, ExprPtr a) {
    if (a->kind == Expr::Kind::constant) {
        switch (kind) {
            case Expr::Kind::sin: return make_constant(std::sin(a->value));
            case Expr::Kind::cos: return make_constant(std::cos(a->value));
            case Expr::Kind::exp: return make_constant(std::exp(a->value));
            case Expr::Kind::tanh: return make_constant(std::tanh(a->value));
            default: break;
        }
    }
    return node(kind, 0.0, 0, std::move(a), nullptr);
}

// ---------------------------------------------------------------------------
// Parser: recursive descent.
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | power
//   power  := primary ('^' integer)?
//   primary:= number | x<k> | func '(' expr ')' | '(' expr ')'
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
    Parser(const std::string& src, int dim) : src_(src), dim_(dim) {}

    ExprPtr run() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("empty expression", 0);
        ExprPtr e = parse_expr();
        skip_ws();
        if (pos_ < src_.size())
            throw ParseError(std::string("unexpected character '") + src_[pos_] + "'", pos_);
        return e;
    }

private:
    ExprPtr parse_expr() {
        ExprPtr e = parse_term();
        for (;;) {
            skip_ws();
            if (peek() == '+') {
                ++pos_;
                e = make_add(e, parse_term());
            } else if (peek() == '-') {
                ++pos_;
                e = make_sub(e, parse_term());
            } else {
                return e;
            }
        }
    }

    ExprPtr parse_term() {
        ExprPtr e = parse_unary();
        for (;;) {
            skip_ws();
            if (peek() == '*') {
                ++pos_;
                e = make_mul(e, parse_unary());
            } else if (peek() == '/') {
                ++pos_;
                e = make_div(e, parse_unary());
            } else {
                return e;
            }
        }
    }

    ExprPtr parse_unary() {
        skip_ws();
        if (peek() == '-') {
            ++pos_;
            return make_neg(parse_unary());
        }
        if (peek() == '+') {
            ++pos_;
            return parse_unary();
        }
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_primary();
        skip_ws();
        if (peek() == '^') {
            ++pos_;
            return make_pow(base, parse_int_exponent());
        }
        return base;
    }

    int parse_int_exponent() {
        skip_ws();
        const std::size_t start = pos_;
        bool negative = false;
        if (peek() == '-') {
            negative = true;
            ++pos_;
        }
        if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_])))
            throw ParseError("'^' requires an integer exponent", start);
        long long v = 0;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            v = v * 10 + (src_[pos_] - '0');
            if (v > 1000000) throw ParseError("exponent too large", start);
            ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E'))
            throw ParseError("'^' requires an integer exponent", start);
        return static_cast<int>(negative ? -v : v);
    }

    ExprPtr parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            ExprPtr e = parse_expr();
            skip_ws();
            if (peek() != ')') throw ParseError("expected ')'", pos_);
            ++pos_;
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    ExprPtr parse_number() {
        const std::size_t start = pos_;
        double v = 0.0;
        const char* begin = src_.data() + pos_;
        const char* end = src_.data() + src_.size();
        auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec != std::errc{}) throw ParseError("malformed number", start);
        pos_ = static_cast<std::size_t>(ptr - src_.data());
        return make_constant(v);
    }

    ExprPtr parse_identifier() {
        const std::size_t start = pos_;
        std::string name;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            name += src_[pos_++];
        }
        if (name.size() >= 2 && name[0] == 'x' &&
            std::isdigit(static_cast<unsigned char>(name[1]))) {
            long long k = 0;
            for (std::size_t i = 1; i < name.size(); ++i) {
                if (!std::isdigit(static_cast<unsigned char>(name[i])))
                    throw ParseError("unknown identifier '" + name + "'", start);
                k = k * 10 + (name[i] - '0');
                if (k > 1000000) throw ParseError("variable index too large", start);
            }
            if (k < 1 || k > dim_)
                throw ParseError("unknown variable '" + name + "' for dimension " +
                                     std::to_string(dim_),
                                 start);
            return make_variable(static_cast<int>(k));
        }
        Expr::Kind kind;
        if (name == "sin") kind = Expr::Kind::sin;
        else if (name == "cos") kind = Expr::Kind::cos;
        else if (name == "exp") kind = Expr::Kind::exp;
        else if (name == "tanh") kind = Expr::Kind::tanh;
        else throw ParseError("unknown identifier '" + name + "'", start);
        skip_ws();
        if (peek() != '(') throw ParseError("expected '(' after '" + name + "'", pos_);
        ++pos_;
        ExprPtr arg = parse_expr();
        skip_ws();
        if (peek() != ')') throw ParseError("expected ')'", pos_);
        ++pos_;
        return make_unary(kind, arg);
    }

    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    const std::string& src_;
    int dim_;
    std::size_t pos_ = 0;
};

}  // namespace

ExprPtr parse_drift(const std::string& source, int dimension) {
    if (dimension < 1) throw std::invalid_argument("dimension must be >= 1");
    return Parser(source, dimension).run();
}

ExprPtr differentiate(const ExprPtr& e, int k) {
    if (k < 1) throw std::invalid_argument("variable index must be >= 1");
    switch (e->kind) {
        case Expr::Kind::constant: return make_constant(0.0);
        case Expr::Kind::variable: return make_constant(e->index == k ? 1.0 : 0.0);
        case Expr::Kind::add: return make_add(differentiate(e->lhs, k), differentiate(e->rhs, k));
        case Expr::Kind::sub: return make_sub(differentiate(e->lhs, k), differentiate(e->rhs, k));
        case Expr::Kind::mul:
            return make_add(make_mul(differentiate(e->lhs, k), e->rhs),
                            make_mul(e->lhs, differentiate(e->rhs, k)));
        case Expr::Kind::div:
            return make_div(make_sub(make_mul(differentiate(e->lhs, k), e->rhs),
                                     make_mul(e->lhs, differentiate(e->rhs, k))),
                            make_pow(e->rhs, 2));
        case Expr::Kind::pow:
            return make_mul(make_mul(make_constant(static_cast<double>(e->index)),
                                     make_pow(e->lhs, e->index - 1)),
                            differentiate(e->lhs, k));
        case Expr::Kind::neg: return make_neg(differentiate(e->lhs, k));
        case Expr::Kind::sin:
            return make_mul(make_unary(Expr::Kind::cos, e->lhs), differentiate(e->lhs, k));
        case Expr::Kind::cos:
            return make_neg(
                make_mul(make_unary(Expr::Kind::sin, e->lhs), differentiate(e->lhs, k)));
        case Expr::Kind::exp:
            return make_mul(make_unary(Expr::Kind::exp, e->lhs), differentiate(e->lhs, k));
        case Expr::Kind::tanh:
            return make_mul(
                make_sub(make_constant(1.0), make_pow(make_unary(Expr::Kind::tanh, e->lhs), 2)),
                differentiate(e->lhs, k));
    }
    throw std::logic_error("corrupt expression node");
}

namespace {

void print(const ExprPtr& e, std::string& out) {
    switch (e->kind) {
        case Expr::Kind::constant: {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", e->value);
            if (e->value < 0.0) {
                out += '(';
                out += buf;
                out += ')';
            } else {
                out += buf;
            }
            return;
        }
        case Expr::Kind::variable:
            out += 'x';
            out += std::to_string(e->index);
            return;
        case Expr::Kind::add:
        case Expr::Kind::sub:
        case Expr::Kind::mul:
        case Expr::Kind::div: {
            const char op = e->kind == Expr::Kind::add   ? '+'
                            : e->kind == Expr::Kind::sub ? '-'
                            : e->kind == Expr::Kind::mul ? '*'
                                                         : '/';
            out += '(';
            print(e->lhs, out);
            out += op;
            print(e->rhs, out);
            out += ')';
            return;
        }
        case Expr::Kind::pow:
            out += '(';
            print(e->lhs, out);
            out += '^';
            out += std::to_string(e->index);
            out += ')';
            return;
        case Expr::Kind::neg:
            out += "(-";
            print(e->lhs, out);
            out += ')';
            return;
        case Expr::Kind::sin:
        case Expr::Kind::cos:
        case Expr::Kind::exp:
        case Expr::Kind::tanh: {
            const char* name = e->kind == Expr::Kind::sin   ? "sin"
                               : e->kind == Expr::Kind::cos ? "cos"
                               : e->kind == Expr::Kind::exp ? "exp"
                                                            : "tanh";
            out += name;
            out += '(';
            print(e->lhs, out);
            out += ')';
            return;
        }
    }
}

}  // namespace

std::string to_string(const ExprPtr& expr) {
    std::string out;
    print(expr, out);
    return out;
}

}  // namespace fpk
