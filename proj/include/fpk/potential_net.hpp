#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace fpk {

/// Single-hidden-layer tanh approximator for the potential eta(x):
///   eta = w2 . tanh(W1 x + b1) + b2.
///
/// The flat parameter vector is [W1 row-major, b1, w2, b2]; all
/// derivatives below are closed forms in that layout.
struct PotentialNetwork {
    int n = 0;           // input dimension
    int hidden = 0;      // hidden width H
    Eigen::MatrixXd w1;  // H x n
    Eigen::VectorXd b1;  // H
    Eigen::VectorXd w2;  // H
    double b2 = 0.0;

    int parameter_count() const { return hidden * n + 2 * hidden + 1; }

    Eigen::VectorXd flatten() const;
    void set_parameters(const Eigen::VectorXd& theta);

    double value_at(const Eigen::VectorXd& x) const;  // plain forward pass
};

PotentialNetwork unflatten(const Eigen::VectorXd& theta, int n, int hidden);

/// Glorot-style symmetric uniform init for W1 and w2, zero biases.
/// Deterministic per seed.
PotentialNetwork init_network(int n, int hidden, std::uint64_t seed);

/// Value, input gradient, and input Hessian at one point.
struct NetworkJet {
    double value = 0.0;
    Eigen::VectorXd gradient;  // n
    Eigen::MatrixXd hessian;   // n x n, symmetric by construction
};

NetworkJet evaluate_jet(const PotentialNetwork& net, const Eigen::VectorXd& x);

/// Derivatives of every jet component with respect to the flat parameter
/// vector. hessian row (i*n + j) holds d(Hm_ij)/d(theta).
struct ParameterJacobians {
    Eigen::VectorXd value;     // P
    Eigen::MatrixXd gradient;  // n x P
    Eigen::MatrixXd hessian;   // n*n x P
};

ParameterJacobians parameter_jacobians(const PotentialNetwork& net, const Eigen::VectorXd& x);

/// JSON snapshot {n, H, W1, b1, w2, b2, seed} for warm starts.
void save_snapshot(const PotentialNetwork& net, std::uint64_t seed, const std::string& path);
PotentialNetwork load_snapshot(const std::string& path, std::uint64_t* seed_out = nullptr);

}  // namespace fpk
