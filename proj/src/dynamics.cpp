#include "fpk/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace fpk {

DynamicalSystem::DynamicalSystem(std::vector<ExprPtr> drift, Eigen::MatrixXd diffusion,
                                 double noise_intensity)
    : n_(static_cast<int>(drift.size())),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)),
      noise_intensity_(noise_intensity) {
    if (n_ < 1) throw std::invalid_argument("drift must have at least one component");
    if (diffusion_.rows() != n_ || diffusion_.cols() != n_)
        throw std::invalid_argument("diffusion matrix must be n x n");
    if ((diffusion_ - diffusion_.transpose()).cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument("diffusion matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diffusion_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12)
        throw std::invalid_argument("diffusion matrix must be positive semidefinite");
    if (!(noise_intensity_ > 0.0))
        throw std::invalid_argument("noise intensity must be positive");
    divergence_.reserve(drift_.size());
    for (int i = 0; i < n_; ++i) divergence_.push_back(differentiate(drift_[i], i + 1));
}

Eigen::VectorXd DynamicalSystem::drift_at(const Eigen::VectorXd& x) const {
    if (x.size() != n_) throw std::invalid_argument("state dimension mismatch");
    Eigen::VectorXd f(n_);
    std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    for (int i = 0; i < n_; ++i) f[i] = drift_[i]->eval(xs);
    return f;
}

double DynamicalSystem::divergence_at(const Eigen::VectorXd& x) const {
    if (x.size() != n_) throw std::invalid_argument("state dimension mismatch");
    double sum = 0.0;
    std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    for (const auto& term : divergence_) sum += term->eval(xs);
    return sum;
}

namespace {

Eigen::MatrixXd last_axis_diffusion(int n, double sigma) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    d(n - 1, n - 1) = sigma * sigma / 2.0;
    return d;
}

}  // namespace

DynamicalSystem make_builtin(const std::string& name, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (name == "vdp") {
        std::vector<ExprPtr> drift{parse_drift("x2", 2), parse_drift("(1-x1^2)*x2-x1", 2)};
        return DynamicalSystem(std::move(drift), last_axis_diffusion(2, sigma), sigma);
    }
    if (name == "vdp_rayleigh") {
        std::vector<ExprPtr> drift{parse_drift("x2", 2), parse_drift("(1-x1^2-x2^2)*x2-x1", 2)};
        return DynamicalSystem(std::move(drift), last_axis_diffusion(2, sigma), sigma);
    }
    if (name == "ou1d") {
        std::vector<ExprPtr> drift{parse_drift("-x1", 1)};
        return DynamicalSystem(std::move(drift), last_axis_diffusion(1, sigma), sigma);
    }
    throw std::invalid_argument("unknown built-in system '" + name + "'");
}

DynamicalSystem make_custom(int dimension, const std::vector<std::string>& drift_sources,
                            double sigma) {
    return make_custom_with_diffusion(dimension, drift_sources,
                                      last_axis_diffusion(dimension, sigma), sigma);
}

DynamicalSystem make_custom_with_diffusion(int dimension,
                                           const std::vector<std::string>& drift_sources,
                                           Eigen::MatrixXd diffusion, double sigma) {
    if (dimension < 1) throw std::invalid_argument("dimension must be >= 1");
    if (static_cast<int>(drift_sources.size()) != dimension)
        throw std::invalid_argument("need one drift expression per state component");
    std::vector<ExprPtr> drift;
    drift.reserve(drift_sources.size());
    for (const auto& src : drift_sources) drift.push_back(parse_drift(src, dimension));
    return DynamicalSystem(std::move(drift), std::move(diffusion), sigma);
}

std::pair<Eigen::VectorXd, double> eval_drift_and_divergence(const DynamicalSystem& system,
                                                             const Eigen::VectorXd& x) {
    return {system.drift_at(x), system.divergence_at(x)};
}

}  // namespace fpk
