#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace fpk {

/// Source ensemble for the resampling LP: M points, their squared
/// residuals, and the normalized target weights w (sum = 1).
struct ErrorEnsemble {
    Eigen::MatrixXd points;            // M x n, one row per sample
    Eigen::VectorXd raw_sq_residuals;  // M, R(x_i)^2
    Eigen::VectorXd weights;           // M, w_i = R_i^2 / sum R_j^2

    int size() const { return static_cast<int>(points.rows()); }
};

/// Builds the ensemble from raw residuals. All-zero residuals fall back
/// to uniform weights.
ErrorEnsemble build_ensemble(const std::vector<Eigen::VectorXd>& points,
                             const std::vector<double>& residuals);

enum class CostMode { euclidean, sq_euclidean };

/// Pairwise distances c_ij = |x_i - x_j| (or squared); zero diagonal.
Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& points, CostMode mode = CostMode::euclidean);

enum class TransportSolver { exact, sinkhorn };

/// Solution of  min <T, C>  s.t.  row sums = w, column sums = 1/M, T >= 0.
struct TransportPlan {
    Eigen::MatrixXd t;  // M x M
    double objective = 0.0;
    TransportSolver solver = TransportSolver::exact;
    int iterations = 0;              // simplex pivots or Sinkhorn sweeps
    Eigen::VectorXd row_duals;       // exact solver: u_i with c_ij - u_i - v_j >= 0
    Eigen::VectorXd col_duals;       // exact solver: v_j
    bool converged = true;           // sinkhorn: marginal_tol reached in max_sweeps
    double marginal_error = 0.0;     // sinkhorn: achieved max marginal deviation
};

/// Transportation simplex with deterministic seeded supply perturbation
/// against degenerate pivoting; ties in the entering variable break by
/// lowest index. Flows are re-solved on the final basis tree from the
/// exact marginals, so the returned plan meets them to machine accuracy.
TransportPlan solve_transport(const ErrorEnsemble& ensemble, const Eigen::MatrixXd& cost);

struct SinkhornSettings {
    double epsilon = 0.01;       // entropic regularization strength
    int max_sweeps = 10000;
    double marginal_tol = 1e-9;  // max deviation before the rounding step
};

/// Log-domain Sinkhorn followed by a rounding step that restores the
/// marginals exactly. Non-convergence is reported via `converged` and
/// `marginal_error`; the rounded plan is still returned.
TransportPlan solve_transport_sinkhorn(const ErrorEnsemble& ensemble,
                                       const Eigen::MatrixXd& cost,
                                       const SinkhornSettings& settings);

/// Barycentric resampling x_j+ = sum_i x_i- (M t_ij); one row per new point.
Eigen::MatrixXd resample(const ErrorEnsemble& ensemble, const TransportPlan& plan);

/// Sparse triplet dump (i, j, t_ij), skipping zero entries.
void write_plan_csv(const TransportPlan& plan, const std::string& path);

}  // namespace fpk
