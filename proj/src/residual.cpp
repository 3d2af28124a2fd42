#include "fpk/residual.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "fpk/csv.hpp"
#include "fpk/parallel.hpp"

namespace fpk {

double eta_residual(const DynamicalSystem& system, const NetworkJet& jet,
                    const Eigen::VectorXd& x) {
    if (x.size() != system.dimension()) throw std::invalid_argument("point dimension mismatch");
    if (jet.gradient.size() != system.dimension())
        throw std::invalid_argument("jet dimension mismatch");
    const Eigen::VectorXd f = system.drift_at(x);
    const double divf = system.divergence_at(x);
    const Eigen::VectorXd& g = jet.gradient;
    const Eigen::MatrixXd& d = system.diffusion();
    return divf - f.dot(g) + (d.array() * (jet.hessian - g * g.transpose()).array()).sum();
}

double rho_residual(const DynamicalSystem& system, const NetworkJet& jet,
                    const Eigen::VectorXd& x) {
    if (jet.value < -700.0)
        throw std::range_error("eta below -700: exp(-eta) would overflow");
    if (x.size() != system.dimension()) throw std::invalid_argument("point dimension mismatch");
    const Eigen::VectorXd f = system.drift_at(x);
    const double divf = system.divergence_at(x);
    const Eigen::VectorXd& g = jet.gradient;
    const Eigen::MatrixXd& d = system.diffusion();
    const double e = std::exp(-jet.value);
    // d(rho)/dx_i = -e g_i,  d2(rho)/dx_i dx_j = e (g_i g_j - Hm_ij)
    const double drift_part = divf * e - e * f.dot(g);
    const double diff_part =
        (d.array() * (e * (g * g.transpose() - jet.hessian)).array()).sum();
    return drift_part - diff_part;
}

Eigen::MatrixXd points_matrix(const std::vector<Eigen::VectorXd>& points, int dimension) {
    Eigen::MatrixXd m(dimension, static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].size() != dimension)
            throw std::invalid_argument("point dimension mismatch");
        m.col(static_cast<Eigen::Index>(i)) = points[i];
    }
    return m;
}

ResidualTable build_residual_table(const DynamicalSystem& system,
                                   const std::vector<Eigen::VectorXd>& points) {
    ResidualTable table;
    const int n = system.dimension();
    table.x = points_matrix(points, n);
    table.f.resize(n, table.x.cols());
    table.divf.resize(table.x.cols());
    for (Eigen::Index p = 0; p < table.x.cols(); ++p) {
        const Eigen::VectorXd xp = table.x.col(p);
        table.f.col(p) = system.drift_at(xp);
        table.divf[p] = system.divergence_at(xp);
    }
    return table;
}

namespace {

constexpr int kBlock = 512;

// Quantities that depend on the parameters and diffusion but not on the
// evaluation points; computed once per objective call.
struct SharedTerms {
    Eigen::MatrixXd d;      // n x n diffusion
    Eigen::MatrixXd dw1t;   // n x H  (D W1^T)
    Eigen::VectorXd q;      // H      w1_k D w1_k^T
    Eigen::MatrixXd pp;     // m x H  packed W1_ki W1_kj for i <= j
    Eigen::VectorXd dvec;   // m      D_ii, or 2 D_ij off the diagonal
};

SharedTerms make_shared_terms(const PotentialNetwork& net, const Eigen::MatrixXd& diffusion) {
    const int n = net.n;
    const int hid = net.hidden;
    const int m = n * (n + 1) / 2;
    SharedTerms sh;
    sh.d = diffusion;
    sh.dw1t = diffusion * net.w1.transpose();
    sh.q.resize(hid);
    for (int k = 0; k < hid; ++k) sh.q[k] = net.w1.row(k) * diffusion * net.w1.row(k).transpose();
    sh.pp.resize(m, hid);
    sh.dvec.resize(m);
    int idx = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j, ++idx) {
            sh.dvec[idx] = (i == j) ? diffusion(i, j) : 2.0 * diffusion(i, j);
            for (int k = 0; k < hid; ++k) sh.pp(idx, k) = net.w1(k, i) * net.w1(k, j);
        }
    }
    return sh;
}

struct BlockAccum {
    double value = 0.0;
    Eigen::MatrixXd w1g;
    Eigen::VectorXd b1g;
    Eigen::VectorXd w2g;
    double b2g = 0.0;
};

void interior_block(const PotentialNetwork& net, const SharedTerms& sh,
                    const ResidualTable& tab, Eigen::Index begin, Eigen::Index count,
                    Eigen::VectorXd* out_residuals, BlockAccum* acc, bool want_grad) {
    const auto x = tab.x.middleCols(begin, count);
    const auto f = tab.f.middleCols(begin, count);
    const Eigen::MatrixXd z = (net.w1 * x).colwise() + net.b1;
    const Eigen::ArrayXXd s = z.array().tanh();
    const Eigen::ArrayXXd ds = 1.0 - s.square();
    const Eigen::ArrayXXd dds = -2.0 * s * ds;

    const Eigen::MatrixXd g = net.w1.transpose() * (ds.colwise() * net.w2.array()).matrix();
    const Eigen::MatrixXd hm_packed = sh.pp * (dds.colwise() * net.w2.array()).matrix();
    const Eigen::MatrixXd dg = sh.d * g;

    Eigen::VectorXd residual =
        tab.divf.segment(begin, count) + (hm_packed.transpose() * sh.dvec) -
        ((f.array() * g.array()).colwise().sum() + (g.array() * dg.array()).colwise().sum())
            .matrix()
            .transpose();

    if (out_residuals) out_residuals->segment(begin, count) = residual;
    if (!acc) return;

    acc->value = residual.squaredNorm();
    if (!want_grad) return;

    const Eigen::ArrayXXd ddds = (6.0 * s.square() - 2.0) * ds;
    const Eigen::MatrixXd a = -f - 2.0 * dg;  // dR/dg per point
    const Eigen::MatrixXd u = net.w1 * a;
    const Eigen::ArrayXd cw = residual.array();  // per-point weights (R_p)

    const Eigen::MatrixXd m1 = (dds * u.array() + ddds.colwise() * sh.q.array()).matrix();
    const Eigen::MatrixXd xc = (x.array().rowwise() * cw.transpose()).matrix();
    const Eigen::MatrixXd ac = (a.array().rowwise() * cw.transpose()).matrix();
    const Eigen::VectorXd ddsc = dds.matrix() * residual;

    Eigen::MatrixXd inner = m1 * xc.transpose() + ds.matrix() * ac.transpose() +
                            2.0 * (ddsc.asDiagonal() * sh.dw1t.transpose());
    acc->w1g = net.w2.asDiagonal() * inner;
    acc->b1g = (net.w2.array() * (m1 * residual).array()).matrix();
    acc->w2g = (ds * u.array()).matrix() * residual +
               (sh.q.array() * ddsc.array()).matrix();
    acc->b2g = 0.0;
}

void boundary_block(const PotentialNetwork& net, const Eigen::MatrixXd& boundary_x,
                    const LossOptions& options, Eigen::Index begin, Eigen::Index count,
                    bool want_grad, BlockAccum* acc) {
    const auto x = boundary_x.middleCols(begin, count);
    const Eigen::MatrixXd z = (net.w1 * x).colwise() + net.b1;
    const Eigen::ArrayXXd s = z.array().tanh();
    const Eigen::ArrayXd eta =
        (net.w2.transpose() * s.matrix()).transpose().array() + net.b2;

    Eigen::ArrayXd cw(count);  // d(term)/d(eta) per point
    if (options.boundary_mode == BoundaryMode::exp_zero) {
        const Eigen::ArrayXd e2 = (-2.0 * eta).exp();
        acc->value = e2.sum();
        cw = -2.0 * e2;
    } else {
        const Eigen::ArrayXd diff = eta - options.eta_target;
        acc->value = diff.square().sum();
        cw = 2.0 * diff;
    }
    if (!want_grad) return;

    const Eigen::ArrayXXd ds = 1.0 - s.square();
    const Eigen::MatrixXd xc = (x.array().rowwise() * cw.transpose()).matrix();
    acc->w1g = net.w2.asDiagonal() * (ds.matrix() * xc.transpose());
    acc->b1g = (net.w2.array() * (ds.matrix() * cw.matrix()).array()).matrix();
    acc->w2g = s.matrix() * cw.matrix();
    acc->b2g = cw.sum();
}

void flatten_grad_into(const PotentialNetwork& net, const Eigen::MatrixXd& w1g,
                       const Eigen::VectorXd& b1g, const Eigen::VectorXd& w2g, double b2g,
                       Eigen::VectorXd& out) {
    int at = 0;
    for (int k = 0; k < net.hidden; ++k)
        for (int a = 0; a < net.n; ++a) out[at++] = w1g(k, a);
    out.segment(at, net.hidden) = b1g;
    at += net.hidden;
    out.segment(at, net.hidden) = w2g;
    at += net.hidden;
    out[at] = b2g;
}

}  // namespace

Eigen::VectorXd eta_residuals_batch(const PotentialNetwork& net,
                                    const Eigen::MatrixXd& diffusion,
                                    const ResidualTable& interior, int threads) {
    const Eigen::Index n_pts = interior.x.cols();
    Eigen::VectorXd residuals(n_pts);
    if (n_pts == 0) return residuals;
    const SharedTerms sh = make_shared_terms(net, diffusion);
    const int nblocks = static_cast<int>((n_pts + kBlock - 1) / kBlock);
    for_each_block(nblocks, threads, [&](int b) {
        const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBlock;
        const Eigen::Index count = std::min<Eigen::Index>(kBlock, n_pts - begin);
        interior_block(net, sh, interior, begin, count, &residuals, nullptr, false);
    });
    return residuals;
}

double loss_value_and_gradient(const PotentialNetwork& net, const Eigen::MatrixXd& diffusion,
                               const ResidualTable& interior, const Eigen::MatrixXd& boundary_x,
                               const LossOptions& options, int threads, Eigen::VectorXd* grad,
                               double* residual_term, double* boundary_term) {
    const Eigen::Index n_int = interior.x.cols();
    if (n_int == 0) throw std::invalid_argument("empty interior collocation set");
    const bool use_boundary =
        options.boundary_mode != BoundaryMode::none && boundary_x.cols() > 0;
    const Eigen::Index n_bdy = use_boundary ? boundary_x.cols() : 0;

    const SharedTerms sh = make_shared_terms(net, diffusion);
    const int blocks_int = static_cast<int>((n_int + kBlock - 1) / kBlock);
    const int blocks_bdy = static_cast<int>((n_bdy + kBlock - 1) / kBlock);
    std::vector<BlockAccum> acc_int(static_cast<std::size_t>(blocks_int));
    std::vector<BlockAccum> acc_bdy(static_cast<std::size_t>(blocks_bdy));

    for_each_block(blocks_int + blocks_bdy, threads, [&](int b) {
        if (b < blocks_int) {
            const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBlock;
            const Eigen::Index count = std::min<Eigen::Index>(kBlock, n_int - begin);
            interior_block(net, sh, interior, begin, count, nullptr,
                           &acc_int[static_cast<std::size_t>(b)], grad != nullptr);
        } else {
            const int bb = b - blocks_int;
            const Eigen::Index begin = static_cast<Eigen::Index>(bb) * kBlock;
            const Eigen::Index count = std::min<Eigen::Index>(kBlock, n_bdy - begin);
            boundary_block(net, boundary_x, options, begin, count, grad != nullptr,
                           &acc_bdy[static_cast<std::size_t>(bb)]);
        }
    });

    double sum_r2 = 0.0;
    for (const auto& a : acc_int) sum_r2 += a.value;
    const double loss_r = sum_r2 / static_cast<double>(n_int);

    double loss_b = 0.0;
    if (use_boundary) {
        double sum_b = 0.0;
        for (const auto& a : acc_bdy) sum_b += a.value;
        loss_b = sum_b / static_cast<double>(n_bdy);
    }

    if (grad) {
        Eigen::MatrixXd w1g = Eigen::MatrixXd::Zero(net.hidden, net.n);
        Eigen::VectorXd b1g = Eigen::VectorXd::Zero(net.hidden);
        Eigen::VectorXd w2g = Eigen::VectorXd::Zero(net.hidden);
        double b2g = 0.0;
        const double scale_r = 2.0 / static_cast<double>(n_int);
        for (const auto& a : acc_int) {
            w1g += scale_r * a.w1g;
            b1g += scale_r * a.b1g;
            w2g += scale_r * a.w2g;
            b2g += scale_r * a.b2g;
        }
        if (use_boundary) {
            const double scale_b = 1.0 / static_cast<double>(n_bdy);
            for (const auto& a : acc_bdy) {
                w1g += scale_b * a.w1g;
                b1g += scale_b * a.b1g;
                w2g += scale_b * a.w2g;
                b2g += scale_b * a.b2g;
            }
        }
        grad->resize(net.parameter_count());
        flatten_grad_into(net, w1g, b1g, w2g, b2g, *grad);
    }

    if (residual_term) *residual_term = loss_r;
    if (boundary_term) *boundary_term = loss_b;
    return loss_r + loss_b;
}

namespace {

LossReport report_impl(const JetFn& jet_fn, const DynamicalSystem& system,
                       const CollocationSet& points, const LossOptions& options) {
    if (points.interior.empty()) throw std::invalid_argument("empty interior collocation set");
    LossReport report;
    report.per_point_residuals.reserve(points.interior.size());
    double sum_r2 = 0.0;
    for (const auto& x : points.interior) {
        const double r = eta_residual(system, jet_fn(x), x);
        report.per_point_residuals.emplace_back(x, r);
        sum_r2 += r * r;
    }
    report.residual_term = sum_r2 / static_cast<double>(points.interior.size());

    if (options.boundary_mode != BoundaryMode::none && !points.boundary.empty()) {
        double sum_b = 0.0;
        for (const auto& x : points.boundary) {
            const double eta = jet_fn(x).value;
            if (options.boundary_mode == BoundaryMode::exp_zero) {
                sum_b += std::exp(-2.0 * eta);
            } else {
                const double diff = eta - options.eta_target;
                sum_b += diff * diff;
            }
        }
        report.boundary_term = sum_b / static_cast<double>(points.boundary.size());
    }
    report.total = report.residual_term + report.boundary_term;
    return report;
}

}  // namespace

LossReport loss(const PotentialNetwork& net, const DynamicalSystem& system,
                const CollocationSet& points, const LossOptions& options) {
    return report_impl([&](const Eigen::VectorXd& x) { return evaluate_jet(net, x); }, system,
                       points, options);
}

LossReport loss_from_jets(const JetFn& jet_fn, const DynamicalSystem& system,
                          const CollocationSet& points, const LossOptions& options) {
    return report_impl(jet_fn, system, points, options);
}

Eigen::VectorXd loss_gradient(const PotentialNetwork& net, const DynamicalSystem& system,
                              const CollocationSet& points, const LossOptions& options,
                              int threads) {
    const ResidualTable table = build_residual_table(system, points.interior);
    const Eigen::MatrixXd boundary = points_matrix(points.boundary, system.dimension());
    Eigen::VectorXd grad;
    loss_value_and_gradient(net, system.diffusion(), table, boundary, options, threads, &grad);
    return grad;
}

void write_residual_csv(const std::string& path, const Eigen::MatrixXd& points,
                        const Eigen::VectorXd& residuals) {
    if (points.cols() != residuals.size())
        throw std::invalid_argument("points/residuals size mismatch");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (Eigen::Index a = 1; a <= points.rows(); ++a) os << "x" << a << ",";
    os << "r,r_sq\n";
    for (Eigen::Index p = 0; p < points.cols(); ++p) {
        for (Eigen::Index a = 0; a < points.rows(); ++a) os << csv_double(points(a, p)) << ",";
        const double r = residuals[p];
        os << csv_double(r) << "," << csv_double(r * r) << "\n";
    }
}

}  // namespace fpk
