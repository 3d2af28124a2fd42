#include "fpk/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fpk/csv.hpp"

namespace fpk {

void TrainingConfig::validate() const {
    if (top_m < 1) throw std::invalid_argument("top_m must be >= 1");
    if (n_ot < 0) throw std::invalid_argument("n_ot must be >= 0");
    if (hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    if (!(dx_train > 0.0 && dx_test > 0.0 && dx_quad > 0.0))
        throw std::invalid_argument("grid spacings must be positive");
    if (dx_test > dx_train)
        throw std::invalid_argument("dx_test must not exceed dx_train (test grid at least as fine)");
    if (system == "custom") {
        if (dimension < 1) throw std::invalid_argument("custom system needs dimension >= 1");
        if (static_cast<int>(custom_drift.size()) != dimension)
            throw std::invalid_argument("custom system needs one drift expression per component");
    } else if (system != "vdp" && system != "vdp_rayleigh" && system != "ou1d") {
        throw std::invalid_argument("unknown system '" + system + "'");
    }
    if (domain_lower.size() == 0 || domain_lower.size() != domain_upper.size())
        throw std::invalid_argument("domain bounds missing or inconsistent");
    if (ot_solver != "auto" && ot_solver != "exact" && ot_solver != "sinkhorn")
        throw std::invalid_argument("ot_solver must be auto, exact, or sinkhorn");
    if (exact_threshold < 1) throw std::invalid_argument("exact_threshold must be >= 1");
    if (!(sinkhorn_epsilon_rel > 0.0) || sinkhorn_max_sweeps < 1 ||
        !(sinkhorn_marginal_tol > 0.0))
        throw std::invalid_argument("invalid sinkhorn settings");
    optimizer.validate();
    make_domain(domain_lower, domain_upper);
    const int n = system == "custom" ? dimension : (system == "ou1d" ? 1 : 2);
    if (domain_lower.size() != n)
        throw std::invalid_argument("domain dimension does not match the system");
}

Domain TrainingConfig::domain() const { return make_domain(domain_lower, domain_upper); }

DynamicalSystem TrainingConfig::make_system() const {
    const double sigma = std::sqrt(sigma2);
    if (system == "custom") return make_custom(dimension, custom_drift, sigma);
    return make_builtin(system, sigma);
}

LossOptions TrainingConfig::loss_options() const {
    LossOptions opts;
    opts.boundary_mode = boundary_mode;
    opts.eta_target = eta_target;
    return opts;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string artifact_path(const std::string& dir, const std::string& name) {
    return dir.empty() ? std::string() : dir + "/" + name;
}

MinimizeResult train_once(const DynamicalSystem& system, const CollocationSet& train_set,
                          const LossOptions& loss_opts, const OptimizerSettings& settings,
                          const Eigen::VectorXd& theta0, int n, int hidden, int threads) {
    const ResidualTable table = build_residual_table(system, train_set.interior);
    const Eigen::MatrixXd boundary = points_matrix(train_set.boundary, n);
    PotentialNetwork scratch = unflatten(theta0, n, hidden);
    Objective objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
        scratch.set_parameters(theta);
        return loss_value_and_gradient(scratch, system.diffusion(), table, boundary, loss_opts,
                                       threads, &grad);
    };
    return minimize(objective, theta0, settings);
}

struct IterationMetrics {
    Eigen::VectorXd residuals;  // eta-form over the test interior
    RunRecordEntry entry;
};

IterationMetrics evaluate_iteration(const TrainingConfig& config, const DynamicalSystem& system,
                                    const PotentialNetwork& net,
                                    const CollocationSet& train_set,
                                    const CollocationSet& test_set,
                                    const ResidualTable& test_table,
                                    const MinimizeResult& optim_result, int iteration,
                                    int threads) {
    IterationMetrics out;
    out.residuals = eta_residuals_batch(net, system.diffusion(), test_table, threads);

    RunRecordEntry& e = out.entry;
    e.iteration = iteration;
    e.train_interior = static_cast<int>(train_set.interior.size());
    e.train_boundary = static_cast<int>(train_set.boundary.size());
    e.eps_pde_eta =
        out.residuals.squaredNorm() / static_cast<double>(out.residuals.size());
    try {
        Eigen::VectorXd scaled = out.residuals;
        for (Eigen::Index p = 0; p < scaled.size(); ++p) {
            const double eta = net.value_at(test_table.x.col(p));
            if (eta < -700.0)
                throw std::range_error("eta below -700: exp(-eta) would overflow");
            scaled[p] *= std::exp(-eta);
        }
        e.eps_pde_rho = scaled.squaredNorm() / static_cast<double>(scaled.size());
    } catch (const std::range_error&) {
        e.eps_pde_rho.reset();
    }
    try {
        const AnalyticReference ref = analytic_reference(config.system, std::sqrt(config.sigma2));
        e.eps_rho =
            eps_rho(net, ref, test_set.interior, config.domain(), config.dx_quad);
    } catch (const std::invalid_argument&) {
        e.eps_rho.reset();
    }
    e.loss = optim_result.value;
    e.grad_norm = optim_result.grad_norm;
    e.optim_iterations = optim_result.iterations;
    return out;
}

void log_entry(const TrainerOptions& options, const RunRecordEntry& e) {
    if (!options.verbose) return;
    std::fprintf(stderr,
                 "[iteration %2d] train=%d eps_pde=%.3e loss=%.3e optim_iters=%d (%.1f s)\n",
                 e.iteration, e.train_interior, e.eps_pde_eta, e.loss, e.optim_iterations,
                 e.wall_ms / 1000.0);
}

void write_added_points(const std::string& path, const Eigen::MatrixXd& points) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (Eigen::Index a = 1; a <= points.cols(); ++a) os << "x" << a << (a < points.cols() ? "," : "\n");
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        for (Eigen::Index a = 0; a < points.cols(); ++a)
            os << csv_double(points(i, a)) << (a + 1 < points.cols() ? "," : "\n");
    }
}

}  // namespace

TrainingOutcome train_nominal(const TrainingConfig& config, const TrainerOptions& options) {
    config.validate();
    const auto start = Clock::now();
    const DynamicalSystem system = config.make_system();
    const Domain domain = config.domain();

    TrainingOutcome outcome;
    outcome.train_set = uniform_grid(domain, config.dx_train);
    outcome.test_set = uniform_grid(domain, config.dx_test);
    outcome.record.label = config.label;

    const PotentialNetwork init =
        init_network(system.dimension(), config.hidden, config.seed);
    const MinimizeResult result =
        train_once(system, outcome.train_set, config.loss_options(), config.optimizer,
                   init.flatten(), system.dimension(), config.hidden, options.threads);
    outcome.net = unflatten(result.x, system.dimension(), config.hidden);

    const ResidualTable test_table = build_residual_table(system, outcome.test_set.interior);
    IterationMetrics metrics =
        evaluate_iteration(config, system, outcome.net, outcome.train_set, outcome.test_set,
                           test_table, result, 0, options.threads);
    metrics.entry.wall_ms = ms_since(start);
    if (!options.out_dir.empty())
        result.trace.write_csv(artifact_path(options.out_dir, "trace_000.csv"));
    log_entry(options, metrics.entry);
    outcome.record.entries.push_back(std::move(metrics.entry));
    return outcome;
}

std::pair<std::vector<Eigen::VectorXd>, std::vector<double>> top_m_errors(
    const PotentialNetwork& net, const DynamicalSystem& system,
    const std::vector<Eigen::VectorXd>& test_interior, int m, int threads) {
    if (m < 1) throw std::invalid_argument("m must be >= 1");
    if (m > static_cast<int>(test_interior.size()))
        throw std::invalid_argument("m exceeds the number of test interior points");
    const ResidualTable table = build_residual_table(system, test_interior);
    const Eigen::VectorXd residuals = eta_residuals_batch(net, system.diffusion(), table, threads);

    std::vector<int> order(test_interior.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return residuals[a] * residuals[a] > residuals[b] * residuals[b];
    });

    std::pair<std::vector<Eigen::VectorXd>, std::vector<double>> out;
    out.first.reserve(static_cast<std::size_t>(m));
    out.second.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const int p = order[static_cast<std::size_t>(i)];
        out.first.push_back(test_interior[static_cast<std::size_t>(p)]);
        out.second.push_back(residuals[p]);
    }
    return out;
}

namespace {

double median_positive_cost(const Eigen::MatrixXd& cost) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(cost.rows()) * (cost.rows() - 1) / 2);
    for (Eigen::Index i = 0; i < cost.rows(); ++i)
        for (Eigen::Index j = i + 1; j < cost.cols(); ++j)
            if (cost(i, j) > 0.0) values.push_back(cost(i, j));
    if (values.empty()) return 1.0;
    std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
    return values[values.size() / 2];
}

}  // namespace

TrainingOutcome ot_refinement_loop(const TrainingConfig& config, TrainingOutcome state,
                                   const TrainerOptions& options) {
    config.validate();
    const DynamicalSystem system = config.make_system();
    Eigen::VectorXd theta = state.net.flatten();

    for (int iter = 1; iter <= config.n_ot; ++iter) {
        const auto start = Clock::now();

        auto [err_points, err_residuals] =
            top_m_errors(state.net, system, state.test_set.interior, config.top_m,
                         options.threads);
        const ErrorEnsemble ensemble = build_ensemble(err_points, err_residuals);
        const Eigen::MatrixXd cost = cost_matrix(ensemble.points, config.cost_mode);

        const bool use_exact =
            config.ot_solver == "exact" ||
            (config.ot_solver == "auto" && ensemble.size() <= config.exact_threshold);
        TransportPlan plan;
        if (use_exact) {
            plan = solve_transport(ensemble, cost);
        } else {
            SinkhornSettings sk;
            sk.epsilon = config.sinkhorn_epsilon_rel * median_positive_cost(cost);
            sk.max_sweeps = config.sinkhorn_max_sweeps;
            sk.marginal_tol = config.sinkhorn_marginal_tol;
            plan = solve_transport_sinkhorn(ensemble, cost, sk);
        }
        const Eigen::MatrixXd new_points = resample(ensemble, plan);

        char name[48];
        std::snprintf(name, sizeof(name), "added_points_%03d.csv", iter);
        std::string added_file;
        if (!options.out_dir.empty()) {
            added_file = name;
            write_added_points(artifact_path(options.out_dir, name), new_points);
        }

        std::vector<Eigen::VectorXd> additions;
        additions.reserve(static_cast<std::size_t>(new_points.rows()));
        for (Eigen::Index i = 0; i < new_points.rows(); ++i)
            additions.push_back(new_points.row(i).transpose());
        state.train_set = append_points(state.train_set, additions);

        const MinimizeResult result =
            train_once(system, state.train_set, config.loss_options(), config.optimizer, theta,
                       system.dimension(), config.hidden, options.threads);
        theta = result.x;
        state.net = unflatten(theta, system.dimension(), config.hidden);

        const ResidualTable test_table = build_residual_table(system, state.test_set.interior);
        IterationMetrics metrics =
            evaluate_iteration(config, system, state.net, state.train_set, state.test_set,
                               test_table, result, iter, options.threads);
        metrics.entry.wall_ms = ms_since(start);
        metrics.entry.added_points_file = added_file;
        if (!options.out_dir.empty()) {
            char trace_name[32];
            std::snprintf(trace_name, sizeof(trace_name), "trace_%03d.csv", iter);
            result.trace.write_csv(artifact_path(options.out_dir, trace_name));
        }
        log_entry(options, metrics.entry);
        state.record.entries.push_back(std::move(metrics.entry));
    }
    return state;
}

TrainingOutcome run_training(const TrainingConfig& config, const TrainerOptions& options) {
    return ot_refinement_loop(config, train_nominal(config, options), options);
}

}  // namespace fpk
