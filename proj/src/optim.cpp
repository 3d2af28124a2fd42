#include "fpk/optim.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "fpk/csv.hpp"

namespace fpk {

void OptimizerSettings::validate() const {
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0))
        throw std::invalid_argument("Wolfe constants need 0 < c1 < c2 < 1");
    if (max_line_search_evals < 1)
        throw std::invalid_argument("max_line_search_evals must be >= 1");
    if (!(step_min > 0.0 && step_min < step_max))
        throw std::invalid_argument("need 0 < step_min < step_max");
    if (!(grad_tol >= 0.0)) throw std::invalid_argument("grad_tol must be >= 0");
}

void OptimTrace::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "iteration,loss,grad_norm,step,fevals\n";
    for (const auto& row : rows) {
        os << row.iteration << "," << csv_double(row.loss) << "," << csv_double(row.grad_norm)
           << "," << csv_double(row.step) << "," << row.fevals << "\n";
    }
}

namespace {

enum class SearchStatus { ok, capped, armijo_only, failed };

struct SearchOutcome {
    SearchStatus status = SearchStatus::failed;
    double step = 0.0;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int evals = 0;
};

// Minimizer of the cubic Hermite interpolant through two (a, phi, dphi)
// samples (Nocedal & Wright eq. 3.59). NaN signals the caller to bisect.
double cubic_minimizer(double a0, double f0, double d0, double a1, double f1, double d1) {
    const double dted = d0 + d1 - 3.0 * (f0 - f1) / (a0 - a1);
    const double disc = dted * dted - d0 * d1;
    if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double sq = std::copysign(std::sqrt(disc), a1 - a0);
    const double denom = d1 - d0 + 2.0 * sq;
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return a1 - (a1 - a0) * (d1 + sq - dted) / denom;
}

SearchOutcome search(const Objective& objective, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& direction, double f0, double dphi0,
                     double initial_step, const OptimizerSettings& settings) {
    SearchOutcome out;
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd trial(x.size());

    auto eval = [&](double a) {
        trial = x + a * direction;
        ++out.evals;
        return objective(trial, grad);
    };
    auto armijo_fails = [&](double a, double phi) {
        return !std::isfinite(phi) || phi > f0 + settings.c1 * a * dphi0;
    };
    auto accept = [&](double a, double phi, bool curvature) {
        out.step = a;
        out.value = phi;
        out.gradient = grad;
        out.status = curvature ? SearchStatus::ok
                               : (a >= settings.step_max ? SearchStatus::capped
                                                         : SearchStatus::armijo_only);
        return out;
    };

    // zoom phase: lo always satisfies Armijo with the lowest value seen;
    // gradients and values are tracked at both ends for interpolation.
    auto zoom = [&](double a_lo, double f_lo, double d_lo, Eigen::VectorXd g_lo, double a_hi,
                    double f_hi, double d_hi) -> SearchOutcome {
        while (out.evals < settings.max_line_search_evals) {
            const double width = std::abs(a_hi - a_lo);
            if (width < settings.step_min || width < 1e-14 * std::max(1.0, std::abs(a_lo))) break;
            double a = cubic_minimizer(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi);
            const double inner_lo = std::min(a_lo, a_hi) + 0.1 * width;
            const double inner_hi = std::max(a_lo, a_hi) - 0.1 * width;
            if (!std::isfinite(a) || a < inner_lo || a > inner_hi)
                a = 0.5 * (a_lo + a_hi);
            const double phi = eval(a);
            const double dphi = std::isfinite(phi) ? grad.dot(direction)
                                                   : std::numeric_limits<double>::quiet_NaN();
            if (armijo_fails(a, phi) || phi >= f_lo) {
                a_hi = a;
                f_hi = phi;
                d_hi = dphi;
                if (!std::isfinite(phi)) {
                    // interpolation data unusable; fall back to pure bisection
                    f_hi = f_lo + std::abs(f_lo) + 1.0;
                    d_hi = 0.0;
                }
            } else {
                if (std::abs(dphi) <= -settings.c2 * dphi0) return accept(a, phi, true);
                if (dphi * (a_hi - a_lo) >= 0.0) {
                    a_hi = a_lo;
                    f_hi = f_lo;
                    d_hi = d_lo;
                }
                a_lo = a;
                f_lo = phi;
                d_lo = dphi;
                g_lo = grad;
            }
        }
        if (a_lo > 0.0) {
            grad = g_lo;
            return accept(a_lo, f_lo, false);  // Armijo point, curvature unmet
        }
        out.status = SearchStatus::failed;
        return out;
    };

    double a_prev = 0.0;
    double f_prev = f0;
    double d_prev = dphi0;
    Eigen::VectorXd g_prev;  // gradient at a_prev; empty only while a_prev == 0
    double a = std::min(std::max(initial_step, settings.step_min), settings.step_max);
    bool first = true;
    while (out.evals < settings.max_line_search_evals) {
        const double phi = eval(a);
        const double dphi = std::isfinite(phi) ? grad.dot(direction)
                                               : std::numeric_limits<double>::quiet_NaN();
        if (armijo_fails(a, phi) || (!first && phi >= f_prev))
            return zoom(a_prev, f_prev, d_prev, g_prev, a,
                        std::isfinite(phi) ? phi : f_prev + std::abs(f_prev) + 1.0,
                        std::isfinite(dphi) ? dphi : 0.0);
        if (std::abs(dphi) <= -settings.c2 * dphi0) return accept(a, phi, true);
        if (dphi >= 0.0) return zoom(a, phi, dphi, grad, a_prev, f_prev, d_prev);
        if (a >= settings.step_max) return accept(a, phi, false);  // capped
        a_prev = a;
        f_prev = phi;
        d_prev = dphi;
        g_prev = grad;
        a = std::min(2.0 * a, settings.step_max);
        first = false;
    }
    out.status = SearchStatus::failed;
    return out;
}

}  // namespace

LineSearchResult wolfe_line_search(const Objective& objective, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& direction, double initial_step,
                                   const OptimizerSettings& settings) {
    settings.validate();
    Eigen::VectorXd g0(x.size());
    const double f0 = objective(x, g0);
    if (!std::isfinite(f0)) throw std::invalid_argument("objective not finite at start point");
    const double dphi0 = g0.dot(direction);
    if (!(dphi0 < 0.0)) throw std::invalid_argument("direction is not a descent direction");

    const SearchOutcome out = search(objective, x, direction, f0, dphi0, initial_step, settings);
    if (out.status == SearchStatus::failed || out.status == SearchStatus::armijo_only)
        throw std::runtime_error("line search bracketing exhausted");
    LineSearchResult result;
    result.step = out.step;
    result.value = out.value;
    result.gradient = out.gradient;
    result.evals = out.evals + 1;  // counting the start-point evaluation
    result.curvature_ok = out.status == SearchStatus::ok;
    return result;
}

MinimizeResult minimize(const Objective& objective, const Eigen::VectorXd& x0,
                        const OptimizerSettings& settings) {
    settings.validate();
    const Eigen::Index p = x0.size();

    MinimizeResult result;
    Eigen::VectorXd x = x0;
    Eigen::VectorXd g(p);
    double f = objective(x, g);
    int fevals = 1;
    if (!std::isfinite(f))
        throw std::invalid_argument("objective not finite at starting point");

    result.x = x;
    result.value = f;
    result.grad_norm = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
    result.trace.rows.push_back({0, f, result.grad_norm, 0.0, 1});

    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(p, p);
    bool scaled = false;

    for (int iter = 1; iter <= settings.max_iters; ++iter) {
        const double gnorm = g.cwiseAbs().maxCoeff();
        if (gnorm <= settings.grad_tol) {
            result.trace.termination = "gradient_tolerance";
            break;
        }
        Eigen::VectorXd d = -(h * g);
        double dphi0 = g.dot(d);
        if (!(dphi0 < 0.0)) {
            h.setIdentity();  // curvature estimate went bad; restart from steepest descent
            d = -g;
            dphi0 = g.dot(d);
        }
        const double init_step = scaled ? 1.0 : std::min(1.0, 1.0 / std::max(gnorm, 1e-12));

        const SearchOutcome ls = search(objective, x, d, f, dphi0, init_step, settings);
        fevals += ls.evals;
        if (ls.status == SearchStatus::failed || !(ls.value < f)) {
            result.trace.termination = "line_search_failure";
            break;
        }

        const Eigen::VectorXd s = ls.step * d;
        const Eigen::VectorXd y = ls.gradient - g;
        x += s;
        f = ls.value;
        g = ls.gradient;

        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            if (!scaled) {
                h = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(p, p);
                scaled = true;
            }
            const Eigen::VectorXd hy = h * y;
            const double yhy = y.dot(hy);
            h += ((sy + yhy) / (sy * sy)) * (s * s.transpose());
            const Eigen::MatrixXd shy = s * hy.transpose();
            h -= (shy + shy.transpose()) / sy;
        }

        result.iterations = iter;
        const double new_gnorm = g.cwiseAbs().maxCoeff();
        result.trace.rows.push_back({iter, f, new_gnorm, ls.step, ls.evals});
        if (f < result.value) {
            result.value = f;
            result.x = x;
            result.grad_norm = new_gnorm;
        }
        if (iter == settings.max_iters) result.trace.termination = "max_iters";
    }
    if (result.trace.termination.empty()) result.trace.termination = "gradient_tolerance";
    result.trace.total_fevals = fevals;
    return result;
}

}  // namespace fpk
