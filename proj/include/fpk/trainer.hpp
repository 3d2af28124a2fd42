#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fpk/dynamics.hpp"
#include "fpk/evaluate.hpp"
#include "fpk/grid.hpp"
#include "fpk/optim.hpp"
#include "fpk/potential_net.hpp"
#include "fpk/residual.hpp"
#include "fpk/transport.hpp"

namespace fpk {

struct TrainingConfig {
    std::string system = "vdp_rayleigh";
    double sigma2 = 0.1;
    int dimension = 0;                      // custom systems only
    std::vector<std::string> custom_drift;  // custom systems only
    Eigen::VectorXd domain_lower;
    Eigen::VectorXd domain_upper;
    double dx_train = 0.25;
    double dx_test = 0.05;
    double dx_quad = 0.05;
    int top_m = 200;  // points added per refinement iteration
    int n_ot = 10;    // refinement iterations
    int hidden = 48;
    OptimizerSettings optimizer;
    BoundaryMode boundary_mode = BoundaryMode::exp_zero;
    double eta_target = 10.0;
    ResidualForm eps_pde_form = ResidualForm::eta;
    CostMode cost_mode = CostMode::euclidean;
    std::string ot_solver = "auto";  // auto | exact | sinkhorn
    int exact_threshold = 512;       // auto: exact solver up to this M
    double sinkhorn_epsilon_rel = 0.01;  // epsilon = rel * median cost
    int sinkhorn_max_sweeps = 10000;
    double sinkhorn_marginal_tol = 1e-9;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::string label;

    void validate() const;
    Domain domain() const;
    DynamicalSystem make_system() const;
    LossOptions loss_options() const;
};

struct RunRecordEntry {
    int iteration = 0;
    int train_interior = 0;
    int train_boundary = 0;
    double eps_pde_eta = 0.0;
    std::optional<double> eps_pde_rho;  // absent when exp(-eta) overflows
    std::optional<double> eps_rho;      // absent without an analytic reference
    double loss = 0.0;
    double grad_norm = 0.0;
    int optim_iterations = 0;
    double wall_ms = 0.0;
    std::string added_points_file;  // empty for the nominal entry
};

struct RunRecord {
    std::string label;
    std::vector<RunRecordEntry> entries;
};

struct TrainerOptions {
    int threads = 1;
    std::string out_dir;  // when set, per-iteration CSV artifacts are written
    bool verbose = false;
};

struct TrainingOutcome {
    PotentialNetwork net;
    RunRecord record;
    CollocationSet train_set;
    CollocationSet test_set;
};

/// Trains on the dx_train grid from the seeded initialization and records
/// entry 0 with metrics on the dx_test grid.
TrainingOutcome train_nominal(const TrainingConfig& config, const TrainerOptions& options);

/// The M interior test points with the largest squared residual,
/// descending; ties keep grid order. Returns points and raw residuals.
std::pair<std::vector<Eigen::VectorXd>, std::vector<double>> top_m_errors(
    const PotentialNetwork& net, const DynamicalSystem& system,
    const std::vector<Eigen::VectorXd>& test_interior, int m, int threads = 1);

/// Refinement iterations 1..n_ot on top of a nominal outcome: residual
/// ranking, transport resampling, dataset growth, warm-started retraining.
TrainingOutcome ot_refinement_loop(const TrainingConfig& config, TrainingOutcome state,
                                   const TrainerOptions& options);

/// train_nominal + ot_refinement_loop.
TrainingOutcome run_training(const TrainingConfig& config, const TrainerOptions& options);

}  // namespace fpk
