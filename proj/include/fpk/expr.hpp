#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

namespace fpk {

/// Thrown on malformed expression text. `position()` is the 0-based
/// character offset of the offending token in the source string.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t position)
        : std::runtime_error(message + " (at position " + std::to_string(position) + ")"),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Thrown when evaluation hits a numeric domain problem (division by zero).
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression tree over state variables x1..xn.
///
/// Node kinds: numeric constants, variables, the binary operators
/// + - * / and integer ^, unary negation, and sin/cos/exp/tanh.
class Expr {
public:
    enum class Kind {
        constant,
        variable,
        add,
        sub,
        mul,
        div,
        pow,
        neg,
        sin,
        cos,
        exp,
        tanh
    };

    Kind kind;
    double value = 0.0;  // constant
    int index = 0;       // variable: 1-based state index; pow: integer exponent
    ExprPtr lhs;
    ExprPtr rhs;

    /// Evaluates at state x (x[0] is x1). Division by zero throws EvalError.
    double eval(std::span<const double> x) const;
};

// Node constructors. The arithmetic ones fold constants and drop
// identity terms (0+a, 1*a, a^1, ...), so derivatives stay compact.
ExprPtr make_constant(double v);
ExprPtr make_variable(int index_1based);
ExprPtr make_add(ExprPtr a, ExprPtr b);
ExprPtr make_sub(ExprPtr a, ExprPtr b);
ExprPtr make_mul(ExprPtr a, ExprPtr b);
ExprPtr make_div(ExprPtr a, ExprPtr b);
ExprPtr make_pow(ExprPtr base, int exponent);
ExprPtr make_neg(ExprPtr a);
ExprPtr make_unary(Expr::Kind kind, ExprPtr a);

/// Parses expression text over variables x1..x<dimension>.
/// Syntax errors and out-of-range variable references throw ParseError.
ExprPtr parse_drift(const std::string& source, int dimension);

/// Exact symbolic partial derivative with respect to x_k (k is 1-based).
ExprPtr differentiate(const ExprPtr& expr, int k);

/// Canonical fully-parenthesized rendering; reparses to an equivalent tree.
std::string to_string(const ExprPtr& expr);

}  // namespace fpk
