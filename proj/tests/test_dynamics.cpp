#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fpk/dynamics.hpp"

using fpk::DynamicalSystem;
using fpk::make_builtin;
using fpk::make_custom;

namespace {

std::mt19937_64 rng(7);

double uniform(double a, double b) {
    return a + (b - a) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

// central-difference oracle for the divergence
double divergence_fd(const DynamicalSystem& system, const Eigen::VectorXd& x) {
    const double h = 1e-6;
    double sum = 0.0;
    for (int a = 0; a < system.dimension(); ++a) {
        Eigen::VectorXd xp = x;
        Eigen::VectorXd xm = x;
        xp[a] += h;
        xm[a] -= h;
        sum += (system.drift_at(xp)[a] - system.drift_at(xm)[a]) / (2 * h);
    }
    return sum;
}

constexpr double kSigma = 0.31622776601683794;  // sigma^2 = 0.1

}  // namespace

TEST_CASE("built-in drifts at pinned points") {
    const auto vdp = make_builtin("vdp", kSigma);
    Eigen::Vector2d x(1, 2);
    CHECK(vdp.drift_at(x)[0] == doctest::Approx(2.0));
    CHECK(vdp.drift_at(x)[1] == doctest::Approx(-1.0));
    CHECK(vdp.divergence_at(Eigen::Vector2d(0, 1)) == doctest::Approx(1.0));
    CHECK(vdp.divergence_at(Eigen::Vector2d(0, 0)) == doctest::Approx(1.0));

    const auto vdpr = make_builtin("vdp_rayleigh", kSigma);
    CHECK(vdpr.drift_at(Eigen::Vector2d(0, 0)).norm() == doctest::Approx(0.0));
    const auto [f, divf] = fpk::eval_drift_and_divergence(vdpr, Eigen::Vector2d(1, 1));
    CHECK(f[0] == doctest::Approx(1.0));
    CHECK(f[1] == doctest::Approx(-2.0));
    CHECK(divf == doctest::Approx(-3.0));

    const auto ou = make_builtin("ou1d", kSigma);
    Eigen::VectorXd x1(1);
    x1 << 0.7;
    const auto [fo, divo] = fpk::eval_drift_and_divergence(ou, x1);
    CHECK(fo[0] == doctest::Approx(-0.7));
    CHECK(divo == doctest::Approx(-1.0));
}

TEST_CASE("diffusion matrices") {
    const auto vdp = make_builtin("vdp", kSigma);
    CHECK(vdp.diffusion()(0, 0) == 0.0);
    CHECK(vdp.diffusion()(0, 1) == 0.0);
    CHECK(vdp.diffusion()(1, 1) == doctest::Approx(0.05).epsilon(1e-14));
    CHECK((vdp.diffusion() - vdp.diffusion().transpose()).cwiseAbs().maxCoeff() == 0.0);

    const auto ou = make_builtin("ou1d", kSigma);
    CHECK(ou.diffusion()(0, 0) == doctest::Approx(0.05).epsilon(1e-14));
}

TEST_CASE("construction errors") {
    CHECK_THROWS_AS(make_builtin("duffing", 0.3), std::invalid_argument);
    CHECK_THROWS_AS(make_builtin("vdp", 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_builtin("vdp", -1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_custom(2, {"x1"}, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(make_custom(2, {"x1", "x3"}, 0.3), fpk::ParseError);

    Eigen::MatrixXd bad(2, 2);
    bad << 0, 1, 0, 0;  // asymmetric
    CHECK_THROWS_AS(fpk::make_custom_with_diffusion(2, {"x1", "x2"}, bad, 0.3),
                    std::invalid_argument);
    Eigen::MatrixXd negdef = -Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(fpk::make_custom_with_diffusion(2, {"x1", "x2"}, negdef, 0.3),
                    std::invalid_argument);
}

TEST_CASE("divergence matches finite differences at 100 random points") {
    for (const char* name : {"vdp", "vdp_rayleigh", "ou1d"}) {
        const auto system = make_builtin(name, kSigma);
        for (int t = 0; t < 100; ++t) {
            Eigen::VectorXd x(system.dimension());
            for (int a = 0; a < system.dimension(); ++a) x[a] = uniform(-2, 2);
            const double fd = divergence_fd(system, x);
            CHECK(system.divergence_at(x) ==
                  doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
    }
    // parsed custom system with a transcendental drift
    const auto custom = make_custom(2, {"sin(x1)*x2 + exp(-x2^2)", "tanh(x1*x2) - x1^3"}, 0.5);
    for (int t = 0; t < 100; ++t) {
        Eigen::Vector2d x(uniform(-2, 2), uniform(-2, 2));
        const double fd = divergence_fd(custom, x);
        CHECK(custom.divergence_at(x) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("evaluation errors propagate from the expression layer") {
    const auto system = make_custom(1, {"1/x1"}, 0.3);
    Eigen::VectorXd zero(1);
    zero << 0.0;
    CHECK_THROWS_AS(system.drift_at(zero), fpk::EvalError);
    Eigen::VectorXd wrong(2);
    wrong << 1.0, 2.0;
    CHECK_THROWS_AS(system.drift_at(wrong), std::invalid_argument);
}
