#include "fpk/transport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "fpk/csv.hpp"

namespace fpk {

ErrorEnsemble build_ensemble(const std::vector<Eigen::VectorXd>& points,
                             const std::vector<double>& residuals) {
    if (points.empty() || points.size() != residuals.size())
        throw std::invalid_argument("need equally many points and residuals (>= 1)");
    const int m = static_cast<int>(points.size());
    const int n = static_cast<int>(points[0].size());

    ErrorEnsemble ens;
    ens.points.resize(m, n);
    ens.raw_sq_residuals.resize(m);
    for (int i = 0; i < m; ++i) {
        if (points[static_cast<std::size_t>(i)].size() != n)
            throw std::invalid_argument("inconsistent point dimensions");
        const double r = residuals[static_cast<std::size_t>(i)];
        if (!std::isfinite(r)) throw std::invalid_argument("non-finite residual");
        ens.points.row(i) = points[static_cast<std::size_t>(i)].transpose();
        ens.raw_sq_residuals[i] = r * r;
    }
    const double total = ens.raw_sq_residuals.sum();
    if (total > 0.0) {
        ens.weights = ens.raw_sq_residuals / total;
    } else {
        ens.weights = Eigen::VectorXd::Constant(m, 1.0 / m);
    }
    return ens;
}

Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& points, CostMode mode) {
    const int m = static_cast<int>(points.rows());
    Eigen::MatrixXd c(m, m);
    for (int i = 0; i < m; ++i) {
        c(i, i) = 0.0;
        for (int j = i + 1; j < m; ++j) {
            const double sq = (points.row(i) - points.row(j)).squaredNorm();
            const double v = mode == CostMode::sq_euclidean ? sq : std::sqrt(sq);
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    return c;
}

namespace {

void check_inputs(const ErrorEnsemble& ens, const Eigen::MatrixXd& cost) {
    const int m = ens.size();
    if (m < 1) throw std::invalid_argument("empty ensemble");
    if (cost.rows() != m || cost.cols() != m)
        throw std::invalid_argument("cost matrix must be M x M");
    if (!cost.allFinite() || cost.minCoeff() < 0.0)
        throw std::invalid_argument("cost matrix must be non-negative and finite");
    if (ens.weights.minCoeff() < 0.0 || std::abs(ens.weights.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("ensemble weights must be a probability vector");
}

struct Arc {
    int row;
    int col;
    double flow;
};

// Transportation simplex over the bipartite graph rows x cols. Node ids:
// rows 0..m-1, cols m..2m-1. The basis is a spanning tree of 2m-1 arcs.
class TransportSimplex {
public:
    TransportSimplex(Eigen::VectorXd supply, Eigen::VectorXd demand, const Eigen::MatrixXd& cost)
        : m_(static_cast<int>(supply.size())),
          cost_(cost),
          supply_(std::move(supply)),
          demand_(std::move(demand)) {}

    // Runs pivots until no negative reduced cost remains. Returns pivots used.
    int run() {
        northwest_corner();
        const int pivot_cap = 100 * m_ + 10000;
        int pivots = 0;
        while (pivots < pivot_cap) {
            compute_duals();
            int ei = -1;
            int ej = -1;
            double best = -1e-12;
            for (int i = 0; i < m_; ++i) {
                const double ui = u_[static_cast<std::size_t>(i)];
                for (int j = 0; j < m_; ++j) {
                    if (in_basis_[static_cast<std::size_t>(i * m_ + j)]) continue;
                    const double rc = cost_(i, j) - ui - v_[static_cast<std::size_t>(j)];
                    if (rc < best) {  // strict: ties keep the lowest (i, j)
                        best = rc;
                        ei = i;
                        ej = j;
                    }
                }
            }
            if (ei < 0) return pivots;
            pivot(ei, ej);
            ++pivots;
        }
        throw std::runtime_error("transportation simplex exceeded pivot cap");
    }

    // Re-solves the basic flows from exact marginals by leaf stripping.
    void resolve_flows(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand) {
        std::vector<double> rem(static_cast<std::size_t>(2 * m_));
        for (int i = 0; i < m_; ++i) rem[static_cast<std::size_t>(i)] = supply[i];
        for (int j = 0; j < m_; ++j) rem[static_cast<std::size_t>(m_ + j)] = demand[j];
        build_adjacency();
        std::vector<int> degree(static_cast<std::size_t>(2 * m_), 0);
        std::vector<char> arc_done(basis_.size(), 0);
        for (std::size_t a = 0; a < basis_.size(); ++a) {
            ++degree[static_cast<std::size_t>(basis_[a].row)];
            ++degree[static_cast<std::size_t>(m_ + basis_[a].col)];
        }
        std::deque<int> leaves;
        for (int nd = 0; nd < 2 * m_; ++nd)
            if (degree[static_cast<std::size_t>(nd)] == 1) leaves.push_back(nd);
        while (!leaves.empty()) {
            const int nd = leaves.front();
            leaves.pop_front();
            if (degree[static_cast<std::size_t>(nd)] != 1) continue;
            int arc = -1;
            for (const int a : adjacency_[static_cast<std::size_t>(nd)])
                if (!arc_done[static_cast<std::size_t>(a)]) arc = a;
            if (arc < 0) continue;
            Arc& cell = basis_[static_cast<std::size_t>(arc)];
            const double flow = rem[static_cast<std::size_t>(nd)];
            cell.flow = flow;  // clamped to >= 0 when the plan matrix is built
            arc_done[static_cast<std::size_t>(arc)] = 1;
            const int other = (nd < m_) ? m_ + cell.col : cell.row;
            rem[static_cast<std::size_t>(other)] -= flow;
            rem[static_cast<std::size_t>(nd)] = 0.0;
            --degree[static_cast<std::size_t>(nd)];
            if (--degree[static_cast<std::size_t>(other)] == 1) leaves.push_back(other);
        }
    }

    const std::vector<Arc>& basis() const { return basis_; }

    void duals(Eigen::VectorXd& u, Eigen::VectorXd& v) {
        compute_duals();
        u = Eigen::Map<const Eigen::VectorXd>(u_.data(), m_);
        v = Eigen::Map<const Eigen::VectorXd>(v_.data(), m_);
    }

private:
    void northwest_corner() {
        basis_.clear();
        basis_.reserve(static_cast<std::size_t>(2 * m_ - 1));
        in_basis_.assign(static_cast<std::size_t>(m_) * m_, 0);
        Eigen::VectorXd a = supply_;
        Eigen::VectorXd b = demand_;
        int r = 0;
        int c = 0;
        for (;;) {
            const double flow = std::min(a[r], b[c]);
            basis_.push_back({r, c, flow});
            in_basis_[static_cast<std::size_t>(r * m_ + c)] = 1;
            a[r] -= flow;
            b[c] -= flow;
            if (r == m_ - 1 && c == m_ - 1) break;
            if (a[r] <= b[c] && r < m_ - 1) ++r;
            else if (c < m_ - 1) ++c;
            else ++r;
        }
    }

    void build_adjacency() {
        adjacency_.assign(static_cast<std::size_t>(2 * m_), {});
        for (std::size_t a = 0; a < basis_.size(); ++a) {
            adjacency_[static_cast<std::size_t>(basis_[a].row)].push_back(static_cast<int>(a));
            adjacency_[static_cast<std::size_t>(m_ + basis_[a].col)].push_back(
                static_cast<int>(a));
        }
    }

    void compute_duals() {
        build_adjacency();
        u_.assign(static_cast<std::size_t>(m_), 0.0);
        v_.assign(static_cast<std::size_t>(m_), 0.0);
        std::vector<char> known(static_cast<std::size_t>(2 * m_), 0);
        known[0] = 1;
        std::deque<int> queue{0};
        while (!queue.empty()) {
            const int nd = queue.front();
            queue.pop_front();
            for (const int a : adjacency_[static_cast<std::size_t>(nd)]) {
                const Arc& cell = basis_[static_cast<std::size_t>(a)];
                const int other = (nd < m_) ? m_ + cell.col : cell.row;
                if (known[static_cast<std::size_t>(other)]) continue;
                if (nd < m_)
                    v_[static_cast<std::size_t>(cell.col)] =
                        cost_(cell.row, cell.col) - u_[static_cast<std::size_t>(cell.row)];
                else
                    u_[static_cast<std::size_t>(cell.row)] =
                        cost_(cell.row, cell.col) - v_[static_cast<std::size_t>(cell.col)];
                known[static_cast<std::size_t>(other)] = 1;
                queue.push_back(other);
            }
        }
    }

    // Unique tree path from row `ei` to col node `ej`; alternating +/- flow
    // adjustments close the cycle with the entering cell.
    void pivot(int ei, int ej) {
        build_adjacency();
        const int source = ei;
        const int target = m_ + ej;
        std::vector<int> parent_arc(static_cast<std::size_t>(2 * m_), -1);
        std::vector<int> parent_node(static_cast<std::size_t>(2 * m_), -1);
        std::vector<char> seen(static_cast<std::size_t>(2 * m_), 0);
        seen[static_cast<std::size_t>(source)] = 1;
        std::deque<int> queue{source};
        while (!queue.empty() && !seen[static_cast<std::size_t>(target)]) {
            const int nd = queue.front();
            queue.pop_front();
            for (const int a : adjacency_[static_cast<std::size_t>(nd)]) {
                const Arc& cell = basis_[static_cast<std::size_t>(a)];
                const int other = (nd < m_) ? m_ + cell.col : cell.row;
                if (seen[static_cast<std::size_t>(other)]) continue;
                seen[static_cast<std::size_t>(other)] = 1;
                parent_arc[static_cast<std::size_t>(other)] = a;
                parent_node[static_cast<std::size_t>(other)] = nd;
                queue.push_back(other);
            }
        }
        // arcs from the target back toward the source alternate -, +, -, ...
        std::vector<int> minus_arcs;
        std::vector<int> plus_arcs;
        {
            int nd = target;
            bool minus = true;
            while (nd != source) {
                const int a = parent_arc[static_cast<std::size_t>(nd)];
                (minus ? minus_arcs : plus_arcs).push_back(a);
                minus = !minus;
                nd = parent_node[static_cast<std::size_t>(nd)];
            }
        }
        double theta = std::numeric_limits<double>::infinity();
        int leaving = -1;
        for (const int a : minus_arcs) {
            const Arc& cell = basis_[static_cast<std::size_t>(a)];
            if (cell.flow < theta ||
                (cell.flow == theta && leaving >= 0 &&
                 std::make_pair(cell.row, cell.col) <
                     std::make_pair(basis_[static_cast<std::size_t>(leaving)].row,
                                    basis_[static_cast<std::size_t>(leaving)].col))) {
                theta = cell.flow;
                leaving = a;
            }
        }
        for (const int a : minus_arcs) basis_[static_cast<std::size_t>(a)].flow -= theta;
        for (const int a : plus_arcs) basis_[static_cast<std::size_t>(a)].flow += theta;
        Arc& replaced = basis_[static_cast<std::size_t>(leaving)];
        in_basis_[static_cast<std::size_t>(replaced.row * m_ + replaced.col)] = 0;
        in_basis_[static_cast<std::size_t>(ei * m_ + ej)] = 1;
        replaced = {ei, ej, theta};
    }

    int m_;
    const Eigen::MatrixXd& cost_;
    Eigen::VectorXd supply_;
    Eigen::VectorXd demand_;
    std::vector<Arc> basis_;
    std::vector<char> in_basis_;
    std::vector<std::vector<int>> adjacency_;
    std::vector<double> u_;
    std::vector<double> v_;
};

}  // namespace

TransportPlan solve_transport(const ErrorEnsemble& ensemble, const Eigen::MatrixXd& cost) {
    check_inputs(ensemble, cost);
    const int m = ensemble.size();

    // Deterministic supply perturbation keeps the intermediate bases
    // nondegenerate even when many weights are exactly zero.
    const double eps0 = 1e-11 / m;
    std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
    Eigen::VectorXd supply = ensemble.weights;
    double added = 0.0;
    for (int i = 0; i < m; ++i) {
        const double r = 1.0 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
        supply[i] += eps0 * r;
        added += eps0 * r;
    }
    Eigen::VectorXd demand = Eigen::VectorXd::Constant(m, (1.0 + added) / m);

    TransportSimplex simplex(supply, demand, cost);
    TransportPlan plan;
    plan.solver = TransportSolver::exact;
    plan.iterations = simplex.run();

    // Final basis stays optimal for the unperturbed marginals; reduced
    // costs depend only on the basis.
    simplex.resolve_flows(ensemble.weights, Eigen::VectorXd::Constant(m, 1.0 / m));
    plan.t = Eigen::MatrixXd::Zero(m, m);
    double objective = 0.0;
    for (const Arc& cell : simplex.basis()) {
        const double flow = std::max(cell.flow, 0.0);
        plan.t(cell.row, cell.col) = flow;
        objective += flow * cost(cell.row, cell.col);
    }
    plan.objective = objective;
    simplex.duals(plan.row_duals, plan.col_duals);
    plan.converged = true;
    plan.marginal_error =
        std::max((plan.t.rowwise().sum() - ensemble.weights).cwiseAbs().maxCoeff(),
                 (plan.t.colwise().sum().transpose() -
                  Eigen::VectorXd::Constant(m, 1.0 / m))
                     .cwiseAbs()
                     .maxCoeff());
    return plan;
}

namespace {

double log_sum_exp(const Eigen::ArrayXd& v) {
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx)) return mx;  // all -inf
    return mx + std::log((v - mx).exp().sum());
}

}  // namespace

TransportPlan solve_transport_sinkhorn(const ErrorEnsemble& ensemble,
                                       const Eigen::MatrixXd& cost,
                                       const SinkhornSettings& settings) {
    check_inputs(ensemble, cost);
    if (!(settings.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    const int m = ensemble.size();
    const double neg_inf = -std::numeric_limits<double>::infinity();

    const Eigen::ArrayXXd log_kernel = (-cost / settings.epsilon).array();
    Eigen::ArrayXd log_w(m);
    for (int i = 0; i < m; ++i)
        log_w[i] = ensemble.weights[i] > 0.0 ? std::log(ensemble.weights[i]) : neg_inf;
    const double log_b = -std::log(static_cast<double>(m));

    Eigen::ArrayXd log_u = Eigen::ArrayXd::Zero(m);
    Eigen::ArrayXd log_v = Eigen::ArrayXd::Zero(m);
    const Eigen::VectorXd col_target = Eigen::VectorXd::Constant(m, 1.0 / m);

    auto build_plan = [&]() {
        Eigen::MatrixXd p(m, m);
        for (int i = 0; i < m; ++i) {
            if (log_u[i] == neg_inf) {
                p.row(i).setZero();
                continue;
            }
            for (int j = 0; j < m; ++j)
                p(i, j) = std::exp(log_u[i] + log_kernel(i, j) + log_v[j]);
        }
        return p;
    };
    auto marginal_error = [&](const Eigen::MatrixXd& p) {
        const double row_err = (p.rowwise().sum() - ensemble.weights).cwiseAbs().maxCoeff();
        const double col_err =
            (p.colwise().sum().transpose() - col_target).cwiseAbs().maxCoeff();
        return std::max(row_err, col_err);
    };

    TransportPlan plan;
    plan.solver = TransportSolver::sinkhorn;
    plan.converged = false;
    int sweeps = 0;
    double achieved = std::numeric_limits<double>::infinity();
    while (sweeps < settings.max_sweeps) {
        for (int i = 0; i < m; ++i) {
            if (log_w[i] == neg_inf) {
                log_u[i] = neg_inf;
                continue;
            }
            log_u[i] = log_w[i] - log_sum_exp(log_kernel.row(i).transpose() + log_v);
        }
        for (int j = 0; j < m; ++j)
            log_v[j] = log_b - log_sum_exp(log_kernel.col(j) + log_u);
        ++sweeps;
        if (sweeps % 5 == 0 || sweeps == settings.max_sweeps) {
            achieved = marginal_error(build_plan());
            if (achieved <= settings.marginal_tol) {
                plan.converged = true;
                break;
            }
        }
    }
    plan.iterations = sweeps;
    Eigen::MatrixXd p = build_plan();
    if (!std::isfinite(achieved)) achieved = marginal_error(p);
    plan.marginal_error = achieved;

    // rounding: scale rows/columns down to their targets, then patch the
    // deficit with a rank-one correction; restores marginals exactly
    Eigen::VectorXd row_sum = p.rowwise().sum();
    for (int i = 0; i < m; ++i) {
        const double target = ensemble.weights[i];
        if (row_sum[i] > target && row_sum[i] > 0.0) p.row(i) *= target / row_sum[i];
    }
    Eigen::VectorXd col_sum = p.colwise().sum().transpose();
    for (int j = 0; j < m; ++j) {
        if (col_sum[j] > col_target[j] && col_sum[j] > 0.0)
            p.col(j) *= col_target[j] / col_sum[j];
    }
    const Eigen::VectorXd err_r =
        (ensemble.weights - p.rowwise().sum()).cwiseMax(0.0);
    const Eigen::VectorXd err_c =
        (col_target - p.colwise().sum().transpose()).cwiseMax(0.0);
    const double deficit = err_r.sum();
    if (deficit > 0.0) p += (err_r * err_c.transpose()) / deficit;

    plan.t = p;
    plan.objective = (p.array() * cost.array()).sum();
    return plan;
}

Eigen::MatrixXd resample(const ErrorEnsemble& ensemble, const TransportPlan& plan) {
    const int m = ensemble.size();
    if (plan.t.rows() != m || plan.t.cols() != m)
        throw std::invalid_argument("plan size does not match ensemble");
    // x_j+ = sum_i x_i- (M t_ij): column j of M*T holds the barycentric
    // weights of new point j over the source rows.
    return static_cast<double>(m) * plan.t.transpose() * ensemble.points;
}

void write_plan_csv(const TransportPlan& plan, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "i,j,t\n";
    for (Eigen::Index i = 0; i < plan.t.rows(); ++i)
        for (Eigen::Index j = 0; j < plan.t.cols(); ++j)
            if (plan.t(i, j) != 0.0)
                os << i << "," << j << "," << csv_double(plan.t(i, j)) << "\n";
}

}  // namespace fpk
