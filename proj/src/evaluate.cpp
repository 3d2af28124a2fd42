#include "fpk/evaluate.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "fpk/csv.hpp"

namespace fpk {

double normalize_eta(const EtaFn& eta, const Domain& domain, const Eigen::VectorXd& dx_quad) {
    const int n = domain.dimension();
    if (dx_quad.size() != n) throw std::invalid_argument("dx_quad must have one entry per axis");

    std::vector<int> nodes(static_cast<std::size_t>(n));
    double cell = 1.0;
    long long total = 1;
    for (int a = 0; a < n; ++a) {
        if (!(dx_quad[a] > 0.0)) throw std::invalid_argument("quadrature spacing must be positive");
        const double steps = (domain.upper[a] - domain.lower[a]) / dx_quad[a];
        const double rounded = std::round(steps);
        if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, std::abs(steps)))
            throw std::invalid_argument("axis span is not an integer multiple of dx_quad");
        nodes[static_cast<std::size_t>(a)] = static_cast<int>(rounded) + 1;
        if (nodes[static_cast<std::size_t>(a)] < 2)
            throw std::invalid_argument("need at least 2 quadrature nodes per axis");
        cell *= dx_quad[a];
        total *= nodes[static_cast<std::size_t>(a)];
    }

    // trapezoid weights: 1/2 at axis endpoints, tensorized
    double integral = 0.0;
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd point(n);
    for (long long flat = 0; flat < total; ++flat) {
        double weight = cell;
        for (int a = 0; a < n; ++a) {
            const int j = idx[static_cast<std::size_t>(a)];
            const int k = nodes[static_cast<std::size_t>(a)];
            point[a] = (j == k - 1) ? domain.upper[a] : domain.lower[a] + j * dx_quad[a];
            if (j == 0 || j == k - 1) weight *= 0.5;
        }
        integral += weight * std::exp(-eta(point));
        for (int a = n - 1; a >= 0; --a) {
            if (++idx[static_cast<std::size_t>(a)] < nodes[static_cast<std::size_t>(a)]) break;
            idx[static_cast<std::size_t>(a)] = 0;
        }
    }
    if (!(integral > 0.0) || !std::isfinite(integral))
        throw std::runtime_error("quadrature of exp(-eta) is not a positive finite number");
    return 1.0 / integral;
}

double normalize(const PotentialNetwork& net, const Domain& domain, double dx_quad) {
    return normalize_eta([&](const Eigen::VectorXd& x) { return net.value_at(x); }, domain,
                         Eigen::VectorXd::Constant(domain.dimension(), dx_quad));
}

double eps_pde(const PotentialNetwork& net, const DynamicalSystem& system,
               const std::vector<Eigen::VectorXd>& test_interior, ResidualForm form,
               int threads) {
    if (test_interior.empty()) throw std::invalid_argument("empty test interior");
    const ResidualTable table = build_residual_table(system, test_interior);
    Eigen::VectorXd r = eta_residuals_batch(net, system.diffusion(), table, threads);
    if (form == ResidualForm::rho) {
        for (Eigen::Index p = 0; p < r.size(); ++p) {
            const double eta = net.value_at(table.x.col(p));
            if (eta < -700.0)
                throw std::range_error("eta below -700: exp(-eta) would overflow");
            r[p] *= std::exp(-eta);
        }
    }
    return r.squaredNorm() / static_cast<double>(r.size());
}

AnalyticReference analytic_reference(const std::string& name, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    const double sigma2 = sigma * sigma;
    if (name == "vdp_rayleigh") {
        return {name, [sigma2](const Eigen::VectorXd& x) {
                    const double r2 = x.squaredNorm();
                    return -(r2 - 0.5 * r2 * r2) / sigma2;
                }};
    }
    if (name == "ou1d") {
        return {name, [sigma2](const Eigen::VectorXd& x) { return x[0] * x[0] / sigma2; }};
    }
    throw std::invalid_argument("no analytical stationary solution for system '" + name + "'");
}

double eps_rho(const PotentialNetwork& net, const AnalyticReference& reference,
               const std::vector<Eigen::VectorXd>& test_interior, const Domain& domain,
               double dx_quad) {
    if (test_interior.empty()) throw std::invalid_argument("empty test interior");
    const Eigen::VectorXd dxq = Eigen::VectorXd::Constant(domain.dimension(), dx_quad);
    const double n0_net =
        normalize_eta([&](const Eigen::VectorXd& x) { return net.value_at(x); }, domain, dxq);
    const double n0_ref = normalize_eta(reference.eta, domain, dxq);
    double sum = 0.0;
    for (const auto& x : test_interior) {
        const double diff =
            n0_net * std::exp(-net.value_at(x)) - n0_ref * std::exp(-reference.eta(x));
        sum += diff * diff;
    }
    return sum / static_cast<double>(test_interior.size());
}

SolutionField solution_field(const PotentialNetwork& net, const Eigen::MatrixXd& points,
                             double n0) {
    SolutionField field;
    field.points = points;
    field.n0 = n0;
    field.eta.resize(points.cols());
    field.rho_hat.resize(points.cols());
    for (Eigen::Index p = 0; p < points.cols(); ++p) {
        field.eta[p] = net.value_at(points.col(p));
        field.rho_hat[p] = n0 * std::exp(-field.eta[p]);
    }
    return field;
}

void write_solution_csv(const SolutionField& field, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (Eigen::Index a = 1; a <= field.points.rows(); ++a) os << "x" << a << ",";
    os << "eta,rho_hat\n";
    for (Eigen::Index p = 0; p < field.points.cols(); ++p) {
        for (Eigen::Index a = 0; a < field.points.rows(); ++a)
            os << csv_double(field.points(a, p)) << ",";
        os << csv_double(field.eta[p]) << "," << csv_double(field.rho_hat[p]) << "\n";
    }
}

}  // namespace fpk
