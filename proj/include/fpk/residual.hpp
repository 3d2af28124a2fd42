#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fpk/dynamics.hpp"
#include "fpk/grid.hpp"
#include "fpk/potential_net.hpp"

namespace fpk {

/// How the boundary term of the composite loss is formed:
///   exp_zero   - penalize exp(-eta)^2, driving the unnormalized density
///                to zero at the box boundary (needs no tuned constant)
///   eta_target - penalize (eta - eta_target)^2
///   none       - residual loss only
enum class BoundaryMode { exp_zero, eta_target, none };

struct LossOptions {
    BoundaryMode boundary_mode = BoundaryMode::exp_zero;
    double eta_target = 10.0;
};

/// Stationary-FPKE residual in potential form:
///   R(x) = sum_i (dF_i/dx_i - F_i g_i) + sum_ij D_ij (Hm_ij - g_i g_j)
double eta_residual(const DynamicalSystem& system, const NetworkJet& jet,
                    const Eigen::VectorXd& x);

/// Density-form operator at rho = exp(-eta), evaluated through the
/// derivative identities d(rho)/dx_i = -exp(-eta) g_i and
/// d2(rho)/dx_i dx_j = exp(-eta) (g_i g_j - Hm_ij).
/// Throws std::range_error when eta < -700 (exp overflow guard).
double rho_residual(const DynamicalSystem& system, const NetworkJet& jet,
                    const Eigen::VectorXd& x);

struct LossReport {
    double residual_term = 0.0;  // mean squared interior residual
    double boundary_term = 0.0;
    double total = 0.0;
    std::vector<std::pair<Eigen::VectorXd, double>> per_point_residuals;
};

using JetFn = std::function<NetworkJet(const Eigen::VectorXd&)>;

LossReport loss(const PotentialNetwork& net, const DynamicalSystem& system,
                const CollocationSet& points, const LossOptions& options);

/// Same loss over an arbitrary jet source (closed-form potentials in tests).
LossReport loss_from_jets(const JetFn& jet_fn, const DynamicalSystem& system,
                          const CollocationSet& points, const LossOptions& options);

/// Analytic gradient of loss().total with respect to the flat parameters.
Eigen::VectorXd loss_gradient(const PotentialNetwork& net, const DynamicalSystem& system,
                              const CollocationSet& points, const LossOptions& options,
                              int threads = 1);

// ---------------------------------------------------------------------------
// Batched evaluation. Drift and divergence are constant per collocation
// point, so training precomputes them once into a table. All reductions
// run over fixed-size point blocks combined in block order, which keeps
// results bit-identical for any worker count.
// ---------------------------------------------------------------------------

struct ResidualTable {
    Eigen::MatrixXd x;     // n x N, one column per point
    Eigen::MatrixXd f;     // n x N drift values
    Eigen::VectorXd divf;  // N divergence values
};

ResidualTable build_residual_table(const DynamicalSystem& system,
                                   const std::vector<Eigen::VectorXd>& points);

Eigen::MatrixXd points_matrix(const std::vector<Eigen::VectorXd>& points, int dimension);

/// Potential-form residuals at every table column.
Eigen::VectorXd eta_residuals_batch(const PotentialNetwork& net,
                                    const Eigen::MatrixXd& diffusion,
                                    const ResidualTable& interior, int threads);

/// Composite loss and (optionally) its parameter gradient in one pass.
/// `boundary_x` may have zero columns. Returns the total loss; fills
/// residual/boundary terms if the pointers are non-null.
double loss_value_and_gradient(const PotentialNetwork& net, const Eigen::MatrixXd& diffusion,
                               const ResidualTable& interior, const Eigen::MatrixXd& boundary_x,
                               const LossOptions& options, int threads, Eigen::VectorXd* grad,
                               double* residual_term = nullptr, double* boundary_term = nullptr);

/// CSV rows (x_1..x_n, R, R^2) for error heat maps.
void write_residual_csv(const std::string& path, const Eigen::MatrixXd& points,
                        const Eigen::VectorXd& residuals);

}  // namespace fpk
