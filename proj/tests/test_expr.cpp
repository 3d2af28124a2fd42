#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fpk/expr.hpp"

using fpk::EvalError;
using fpk::ExprPtr;
using fpk::ParseError;
using fpk::parse_drift;

namespace {

double eval2(const ExprPtr& e, double x1, double x2) {
    const double x[2] = {x1, x2};
    return e->eval(x);
}

std::mt19937_64 rng(42);

double uniform(double a, double b) {
    return a + (b - a) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

// random expression trees over x1, x2 for round-trip fuzzing
ExprPtr random_expr(int depth) {
    const int pick = static_cast<int>(rng() % (depth <= 0 ? 2 : 9));
    switch (pick) {
        case 0: return fpk::make_constant(uniform(-3, 3));
        case 1: return fpk::make_variable(1 + static_cast<int>(rng() % 2));
        case 2: return fpk::make_add(random_expr(depth - 1), random_expr(depth - 1));
        case 3: return fpk::make_sub(random_expr(depth - 1), random_expr(depth - 1));
        case 4: return fpk::make_mul(random_expr(depth - 1), random_expr(depth - 1));
        case 5: return fpk::make_div(random_expr(depth - 1), random_expr(depth - 1));
        case 6: return fpk::make_pow(random_expr(depth - 1), 2 + static_cast<int>(rng() % 3));
        case 7: return fpk::make_neg(random_expr(depth - 1));
        default: {
            const fpk::Expr::Kind kinds[] = {fpk::Expr::Kind::sin, fpk::Expr::Kind::cos,
                                             fpk::Expr::Kind::exp, fpk::Expr::Kind::tanh};
            return fpk::make_unary(kinds[rng() % 4], random_expr(depth - 1));
        }
    }
}

}  // namespace

TEST_CASE("variable lookup and arithmetic") {
    CHECK(eval2(parse_drift("x2", 2), 0.5, -0.3) == doctest::Approx(-0.3));
    CHECK(eval2(parse_drift("x1^2*x2", 2), 2, 3) == doctest::Approx(12.0));
    CHECK(eval2(parse_drift("1 - x1^2 - x2^2", 2), 1, 1) == doctest::Approx(-1.0));
    CHECK(eval2(parse_drift("sin(x1) + cos(x2)", 2), 0, 0) == doctest::Approx(1.0));
    CHECK(eval2(parse_drift("exp(x1)*tanh(x2)", 2), 0, 100) == doctest::Approx(1.0));
    CHECK(eval2(parse_drift("-x1^2", 2), 2, 0) == doctest::Approx(-4.0));
    CHECK(eval2(parse_drift("x1^-2", 2), 2, 0) == doctest::Approx(0.25));
}

TEST_CASE("out-of-range variables and syntax errors carry a position") {
    CHECK_THROWS_AS(parse_drift("x3", 2), ParseError);
    CHECK_THROWS_AS(parse_drift("x0", 2), ParseError);
    CHECK_THROWS_AS(parse_drift("", 2), ParseError);
    CHECK_THROWS_AS(parse_drift("x1 + * x2", 2), ParseError);
    CHECK_THROWS_AS(parse_drift("foo(x1)", 2), ParseError);
    CHECK_THROWS_AS(parse_drift("x1 ^ x2", 2), ParseError);
    CHECK_THROWS_AS(parse_drift("x1^2.5", 2), ParseError);
    CHECK_THROWS_AS(parse_drift("(x1", 2), ParseError);
    try {
        parse_drift("x1 + * x2", 2);
    } catch (const ParseError& e) {
        CHECK(e.position() == 5);
    }
}

TEST_CASE("division by zero is an evaluation error") {
    const auto e = parse_drift("x1/x2", 2);
    CHECK(eval2(e, 1, 2) == doctest::Approx(0.5));
    CHECK_THROWS_AS(eval2(e, 1, 0), EvalError);
    CHECK_THROWS_AS(eval2(parse_drift("x1^-1", 2), 0, 1), EvalError);
}

TEST_CASE("derivatives: power rule and constants") {
    const auto e = parse_drift("x1^2*x2", 2);
    const auto d = fpk::differentiate(e, 1);
    const auto expected = parse_drift("2*x1*x2", 2);
    for (int t = 0; t < 5; ++t) {
        const double a = uniform(-2, 2);
        const double b = uniform(-2, 2);
        CHECK(eval2(d, a, b) == doctest::Approx(eval2(expected, a, b)).epsilon(1e-12));
    }

    const auto dc = fpk::differentiate(parse_drift("3.5", 2), 1);
    CHECK(dc->kind == fpk::Expr::Kind::constant);
    CHECK(dc->value == 0.0);
}

TEST_CASE("derivative of the oscillator drift matches finite differences") {
    // F_2 = (1 - x1^2) x2 - x1; dF_2/dx2 = 1 - x1^2
    const auto f2 = parse_drift("(1-x1^2)*x2-x1", 2);
    const auto d = fpk::differentiate(f2, 2);
    CHECK(eval2(d, 1, 2) == doctest::Approx(0.0).epsilon(1e-12));
    const double h = 1e-6;
    for (int t = 0; t < 20; ++t) {
        const double a = uniform(-2, 2);
        const double b = uniform(-2, 2);
        const double fd = (eval2(f2, a, b + h) - eval2(f2, a, b - h)) / (2 * h);
        CHECK(eval2(d, a, b) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("chain rule through the function set") {
    const auto e = parse_drift("sin(x1^2) + exp(tanh(x2)) - cos(x1*x2)", 2);
    const double h = 1e-6;
    for (int k = 1; k <= 2; ++k) {
        const auto d = fpk::differentiate(e, k);
        for (int t = 0; t < 20; ++t) {
            const double a = uniform(-1.5, 1.5);
            const double b = uniform(-1.5, 1.5);
            const double xp[2] = {k == 1 ? a + h : a, k == 2 ? b + h : b};
            const double xm[2] = {k == 1 ? a - h : a, k == 2 ? b - h : b};
            const double fd = (e->eval(xp) - e->eval(xm)) / (2 * h);
            CHECK(eval2(d, a, b) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("print/parse round trip evaluates identically") {
    for (int t = 0; t < 200; ++t) {
        const auto e = random_expr(4);
        const auto r = parse_drift(fpk::to_string(e), 2);
        for (int s = 0; s < 5; ++s) {
            const double x[2] = {uniform(-2, 2), uniform(-2, 2)};
            double ve = 0.0;
            double vr = 0.0;
            bool te = false;
            bool tr = false;
            try {
                ve = e->eval(x);
            } catch (const EvalError&) {
                te = true;
            }
            try {
                vr = r->eval(x);
            } catch (const EvalError&) {
                tr = true;
            }
            REQUIRE(te == tr);
            if (!te && std::isfinite(ve))
                CHECK(vr == doctest::Approx(ve).epsilon(1e-14));
        }
    }
}
