#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fpk/dynamics.hpp"
#include "fpk/grid.hpp"
#include "fpk/potential_net.hpp"
#include "fpk/residual.hpp"

namespace fpk {

using EtaFn = std::function<double(const Eigen::VectorXd&)>;

/// N0 = 1 / integral of exp(-eta) over the box, by composite trapezoidal
/// quadrature with per-axis spacing dx_quad.
double normalize_eta(const EtaFn& eta, const Domain& domain, const Eigen::VectorXd& dx_quad);
double normalize(const PotentialNetwork& net, const Domain& domain, double dx_quad);

enum class ResidualForm { eta, rho };

/// Mean squared residual over the test interior in the chosen form.
double eps_pde(const PotentialNetwork& net, const DynamicalSystem& system,
               const std::vector<Eigen::VectorXd>& test_interior,
               ResidualForm form = ResidualForm::eta, int threads = 1);

/// Closed-form stationary potential, where one exists.
struct AnalyticReference {
    std::string name;
    EtaFn eta;  // density is exp(-eta) up to normalization
};

/// Supported: "vdp_rayleigh", "ou1d". Throws for systems without a
/// closed-form stationary density (e.g. "vdp").
AnalyticReference analytic_reference(const std::string& name, double sigma);

/// Mean squared density error against the reference, both densities
/// normalized over the same domain by the same quadrature spacing.
double eps_rho(const PotentialNetwork& net, const AnalyticReference& reference,
               const std::vector<Eigen::VectorXd>& test_interior, const Domain& domain,
               double dx_quad);

/// Normalized solution sampled on a point set.
struct SolutionField {
    Eigen::MatrixXd points;   // n x N
    Eigen::VectorXd eta;      // N
    Eigen::VectorXd rho_hat;  // N, N0 * exp(-eta)
    double n0 = 0.0;
};

SolutionField solution_field(const PotentialNetwork& net, const Eigen::MatrixXd& points,
                             double n0);

void write_solution_csv(const SolutionField& field, const std::string& path);

struct Metrics {
    double eps_pde = 0.0;
    std::optional<double> eps_rho;
    int n_test_interior = 0;
    double n0 = 0.0;
    std::string form = "eta";
    int iteration = 0;
};

}  // namespace fpk
