#include "fpk/grid.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "fpk/csv.hpp"

namespace fpk {

Domain make_domain(Eigen::VectorXd lower, Eigen::VectorXd upper) {
    if (lower.size() != upper.size() || lower.size() == 0)
        throw std::invalid_argument("domain bounds must have equal, nonzero dimension");
    for (int a = 0; a < lower.size(); ++a)
        if (!(lower[a] < upper[a]))
            throw std::invalid_argument("domain requires lower < upper on every axis");
    return Domain{std::move(lower), std::move(upper)};
}

CollocationSet uniform_grid(const Domain& domain, const Eigen::VectorXd& dx) {
    const int n = domain.dimension();
    if (dx.size() != n) throw std::invalid_argument("dx must have one entry per axis");

    std::vector<int> nodes(static_cast<std::size_t>(n));
    long long total = 1;
    for (int a = 0; a < n; ++a) {
        if (!(dx[a] > 0.0)) throw std::invalid_argument("grid spacing must be positive");
        const double span = domain.upper[a] - domain.lower[a];
        const double steps = span / dx[a];
        const double rounded = std::round(steps);
        if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, std::abs(steps)))
            throw std::invalid_argument("axis span is not an integer multiple of dx");
        nodes[static_cast<std::size_t>(a)] = static_cast<int>(rounded) + 1;
        if (nodes[static_cast<std::size_t>(a)] < 3)
            throw std::invalid_argument("need at least 3 grid nodes per axis");
        total *= nodes[static_cast<std::size_t>(a)];
    }

    CollocationSet set;
    set.domain = domain;
    set.dx = dx;
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd point(n);
    for (long long flat = 0; flat < total; ++flat) {
        bool on_boundary = false;
        for (int a = 0; a < n; ++a) {
            const int j = idx[static_cast<std::size_t>(a)];
            const int k = nodes[static_cast<std::size_t>(a)];
            point[a] = (j == k - 1) ? domain.upper[a] : domain.lower[a] + j * dx[a];
            if (j == 0 || j == k - 1) on_boundary = true;
        }
        (on_boundary ? set.boundary : set.interior).push_back(point);
        // odometer increment, last axis fastest
        for (int a = n - 1; a >= 0; --a) {
            if (++idx[static_cast<std::size_t>(a)] < nodes[static_cast<std::size_t>(a)]) break;
            idx[static_cast<std::size_t>(a)] = 0;
        }
    }
    return set;
}

CollocationSet uniform_grid(const Domain& domain, double dx) {
    return uniform_grid(domain, Eigen::VectorXd::Constant(domain.dimension(), dx));
}

namespace {

std::vector<double> key_of(const Eigen::VectorXd& p) {
    return std::vector<double>(p.data(), p.data() + p.size());
}

}  // namespace

CollocationSet append_points(const CollocationSet& set,
                             const std::vector<Eigen::VectorXd>& points) {
    const int n = set.dimension();
    CollocationSet out = set;
    std::set<std::vector<double>> seen;
    for (const auto& p : out.interior) seen.insert(key_of(p));
    for (const auto& p : out.boundary) seen.insert(key_of(p));
    for (const auto& p : points) {
        if (p.size() != n) throw std::invalid_argument("appended point dimension mismatch");
        Eigen::VectorXd clipped = p.cwiseMax(set.domain.lower).cwiseMin(set.domain.upper);
        if (seen.insert(key_of(clipped)).second) out.interior.push_back(std::move(clipped));
    }
    return out;
}

void write_collocation_csv(const CollocationSet& set, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    const int n = set.dimension();
    for (int a = 1; a <= n; ++a) os << "x" << a << ",";
    os << "tag\n";
    for (const auto& p : set.interior) {
        for (int a = 0; a < n; ++a) os << csv_double(p[a]) << ",";
        os << "interior\n";
    }
    for (const auto& p : set.boundary) {
        for (int a = 0; a < n; ++a) os << csv_double(p[a]) << ",";
        os << "boundary\n";
    }
}

}  // namespace fpk
