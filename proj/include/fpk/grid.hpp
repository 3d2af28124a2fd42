#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace fpk {

/// Axis-aligned box domain.
struct Domain {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    int dimension() const { return static_cast<int>(lower.size()); }
};

Domain make_domain(Eigen::VectorXd lower, Eigen::VectorXd upper);

/// Interior/boundary collocation points on a box. Boundary points have at
/// least one coordinate exactly on an axis bound; interior points have none.
struct CollocationSet {
    Domain domain;
    Eigen::VectorXd dx;  // per-axis spacing of the generating grid
    std::vector<Eigen::VectorXd> interior;
    std::vector<Eigen::VectorXd> boundary;

    int dimension() const { return domain.dimension(); }
};

/// Tensor-product grid with inclusive endpoints; perimeter nodes go to
/// the boundary list, everything else to the interior. (upper - lower)
/// must be an integer multiple of dx per axis (tolerance 1e-9) with at
/// least 3 nodes per axis.
CollocationSet uniform_grid(const Domain& domain, const Eigen::VectorXd& dx);
CollocationSet uniform_grid(const Domain& domain, double dx);

/// Returns a copy of `set` with `points` appended to the interior list.
/// Points are clipped to the closed box; exact duplicates of existing
/// interior/boundary points (or within the batch) are dropped.
CollocationSet append_points(const CollocationSet& set,
                             const std::vector<Eigen::VectorXd>& points);

/// One row per point: x_1..x_n plus a tag column {interior, boundary}.
void write_collocation_csv(const CollocationSet& set, const std::string& path);

}  // namespace fpk
