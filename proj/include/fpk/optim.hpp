#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace fpk {

struct OptimizerSettings {
    int max_iters = 10000;
    double grad_tol = 1e-8;  // max-norm termination threshold
    double c1 = 1e-4;        // Armijo sufficient-decrease constant
    double c2 = 0.9;         // strong Wolfe curvature constant
    int max_line_search_evals = 50;
    double step_min = 1e-20;
    double step_max = 1e3;

    void validate() const;
};

struct OptimTrace {
    struct Row {
        int iteration;
        double loss;
        double grad_norm;  // max-norm
        double step;
        int fevals;
    };
    std::vector<Row> rows;
    int total_fevals = 0;
    std::string termination;  // gradient_tolerance | max_iters | line_search_failure

    void write_csv(const std::string& path) const;
};

/// Objective callback: fills `grad` and returns the value.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct MinimizeResult {
    Eigen::VectorXd x;  // best iterate seen
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    OptimTrace trace;
};

/// Dense BFGS with strong Wolfe line search. Terminates on the gradient
/// tolerance, the iteration cap, or line-search failure (not fatal: the
/// best iterate seen is returned and the trace records the reason).
/// Curvature pairs with s.y <= 1e-10 |s||y| are skipped.
MinimizeResult minimize(const Objective& objective, const Eigen::VectorXd& x0,
                        const OptimizerSettings& settings);

struct LineSearchResult {
    double step = 0.0;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int evals = 0;
    bool curvature_ok = true;  // false when capped at step_max with Armijo only
};

/// Strong Wolfe search along `direction` from `x`. Throws
/// std::invalid_argument for a non-descent direction and std::runtime_error
/// when bracketing is exhausted.
LineSearchResult wolfe_line_search(const Objective& objective, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& direction, double initial_step,
                                   const OptimizerSettings& settings);

}  // namespace fpk
