#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "fpk/expr.hpp"

namespace fpk {

/// An n-dimensional stochastic system dx = F(x) dt + noise, held as the
/// drift expressions F_i, their diagonal partials dF_i/dx_i, and the
/// constant diffusion matrix D = (1/2) * Lambda * Lambda^T.
///
/// Immutable after construction; evaluation is safe from concurrent workers.
class DynamicalSystem {
public:
    DynamicalSystem(std::vector<ExprPtr> drift, Eigen::MatrixXd diffusion,
                    double noise_intensity);

    int dimension() const noexcept { return n_; }
    const std::vector<ExprPtr>& drift() const noexcept { return drift_; }
    const std::vector<ExprPtr>& divergence_terms() const noexcept { return divergence_; }
    const Eigen::MatrixXd& diffusion() const noexcept { return diffusion_; }
    double noise_intensity() const noexcept { return noise_intensity_; }

    Eigen::VectorXd drift_at(const Eigen::VectorXd& x) const;
    /// Sum over i of dF_i/dx_i at x.
    double divergence_at(const Eigen::VectorXd& x) const;

private:
    int n_;
    std::vector<ExprPtr> drift_;
    std::vector<ExprPtr> divergence_;
    Eigen::MatrixXd diffusion_;
    double noise_intensity_;
};

/// Built-in oscillators: "vdp", "vdp_rayleigh", "ou1d". Noise drives the
/// last state component, so D = diag(0, .., sigma^2/2).
DynamicalSystem make_builtin(const std::string& name, double sigma);

/// System from drift expression text, one component per state variable.
/// Noise convention matches the built-ins (last component).
DynamicalSystem make_custom(int dimension, const std::vector<std::string>& drift_sources,
                            double sigma);

/// Convenience for D scaled or replaced explicitly (tests, scaling checks).
DynamicalSystem make_custom_with_diffusion(int dimension,
                                           const std::vector<std::string>& drift_sources,
                                           Eigen::MatrixXd diffusion, double sigma);

std::pair<Eigen::VectorXd, double> eval_drift_and_divergence(const DynamicalSystem& system,
                                                             const Eigen::VectorXd& x);

}  // namespace fpk
