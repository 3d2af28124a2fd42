#include <CLI11.hpp>
#include <Eigen/Dense>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "fpk/config.hpp"
#include "fpk/csv.hpp"
#include "fpk/run.hpp"

namespace {

std::string default_out_dir(const std::string& cli_value) {
    if (!cli_value.empty()) return cli_value;
    if (const char* env = std::getenv("SOLVER_OUT_DIR"); env && *env) return env;
    return "solver_out";
}

int cmd_run(const std::string& config_path, const std::string& out_dir, int threads,
            bool deterministic) {
    fpk::TrainingConfig config = fpk::load_config(config_path);
    fpk::RunOptions options;
    options.out_dir = default_out_dir(out_dir);
    options.threads = threads;
    options.deterministic = deterministic;
    return fpk::run_experiment(std::move(config), options);
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const std::string& csv_path) {
    std::string csv;
    const std::string table = fpk::compare_record_files(path_a, path_b, &csv);
    std::cout << table;
    if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        if (!os) {
            std::cerr << "cannot open '" << csv_path << "' for writing\n";
            return 1;
        }
        os << csv;
    }
    return 0;
}

int cmd_dump_solution(const std::string& net_path, double dx, std::vector<double> lo,
                      std::vector<double> hi, const std::string& out_path) {
    const fpk::PotentialNetwork net = fpk::load_snapshot(net_path);
    if (lo.empty()) lo.assign(static_cast<std::size_t>(net.n), -2.0);
    if (hi.empty()) hi.assign(static_cast<std::size_t>(net.n), 2.0);
    if (lo.size() == 1 && net.n > 1) lo.assign(static_cast<std::size_t>(net.n), lo[0]);
    if (hi.size() == 1 && net.n > 1) hi.assign(static_cast<std::size_t>(net.n), hi[0]);
    const fpk::Domain domain = fpk::make_domain(
        Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size())),
        Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size())));
    const fpk::CollocationSet grid = fpk::uniform_grid(domain, dx);
    std::vector<Eigen::VectorXd> points = grid.interior;
    points.insert(points.end(), grid.boundary.begin(), grid.boundary.end());
    const double n0 = fpk::normalize(net, domain, dx);
    const fpk::SolutionField field =
        fpk::solution_field(net, fpk::points_matrix(points, net.n), n0);
    fpk::write_solution_csv(field, out_path);
    std::cout << "wrote " << points.size() << " rows to " << out_path << " (N0 = " << n0
              << ")\n";
    return 0;
}

// Quick randomized invariant checks across the library; used as a field
// smoke test rather than a replacement for the unit suites.
int cmd_check(int threads) {
    int failures = 0;
    auto report = [&](const char* name, bool ok) {
        std::printf("%-52s %s\n", name, ok ? "ok" : "FAIL");
        if (!ok) ++failures;
    };
    std::mt19937_64 rng(20240817);
    auto uniform = [&](double a, double b) {
        return a + (b - a) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };

    // parser round trip on random expressions
    {
        bool ok = true;
        const std::vector<std::string> sources = {
            "x1^2*x2 - sin(x1)/(2+cos(x2))", "tanh(x1*x2) + exp(-x1^2)",
            "((x1-1)*(x2+2))^3 - 4.5e-1*x1", "-x2^2 + x1/(x2^2+1)"};
        for (const auto& src : sources) {
            const auto expr = fpk::parse_drift(src, 2);
            const auto reparsed = fpk::parse_drift(fpk::to_string(expr), 2);
            for (int t = 0; t < 20 && ok; ++t) {
                const double x[2] = {uniform(-2, 2), uniform(-2, 2)};
                ok = std::abs(expr->eval(x) - reparsed->eval(x)) <= 1e-14 * (1 + std::abs(expr->eval(x)));
            }
        }
        report("expression print/parse round trip", ok);
    }

    // symbolic divergence vs finite differences on the built-ins
    {
        bool ok = true;
        for (const char* name : {"vdp", "vdp_rayleigh", "ou1d"}) {
            const auto system = fpk::make_builtin(name, 0.3162);
            for (int t = 0; t < 50 && ok; ++t) {
                Eigen::VectorXd x(system.dimension());
                for (int a = 0; a < system.dimension(); ++a) x[a] = uniform(-2, 2);
                double fd = 0.0;
                const double h = 1e-6;
                for (int a = 0; a < system.dimension(); ++a) {
                    Eigen::VectorXd xp = x, xm = x;
                    xp[a] += h;
                    xm[a] -= h;
                    fd += (system.drift_at(xp)[a] - system.drift_at(xm)[a]) / (2 * h);
                }
                ok = std::abs(system.divergence_at(x) - fd) <= 1e-6 * (1.0 + std::abs(fd));
            }
        }
        report("drift divergence matches finite differences", ok);
    }

    // network jet vs finite differences
    {
        const auto net = fpk::init_network(2, 16, 7);
        Eigen::VectorXd x(2);
        x << 0.37, -0.81;
        const auto jet = fpk::evaluate_jet(net, x);
        bool ok = true;
        const double h = 1e-5;
        for (int a = 0; a < 2 && ok; ++a) {
            Eigen::VectorXd xp = x, xm = x;
            xp[a] += h;
            xm[a] -= h;
            const double fd = (net.value_at(xp) - net.value_at(xm)) / (2 * h);
            ok = std::abs(jet.gradient[a] - fd) <= 1e-6 * (1.0 + std::abs(fd));
        }
        report("network jet gradient matches finite differences", ok);
    }

    // transport marginals + dual feasibility on random instances
    {
        bool ok = true;
        for (int t = 0; t < 5 && ok; ++t) {
            const int m = 6 + static_cast<int>(rng() % 10);
            std::vector<Eigen::VectorXd> pts;
            std::vector<double> res;
            for (int i = 0; i < m; ++i) {
                Eigen::VectorXd p(2);
                p << uniform(-1, 1), uniform(-1, 1);
                pts.push_back(p);
                res.push_back(uniform(0, 3));
            }
            const auto ens = fpk::build_ensemble(pts, res);
            const auto cost = fpk::cost_matrix(ens.points, fpk::CostMode::euclidean);
            const auto plan = fpk::solve_transport(ens, cost);
            ok = plan.marginal_error < 1e-9;
            for (int i = 0; i < m && ok; ++i)
                for (int j = 0; j < m && ok; ++j)
                    ok = cost(i, j) - plan.row_duals[i] - plan.col_duals[j] >= -1e-9;
        }
        report("transport plan marginals and dual feasibility", ok);
    }

    // loss gradient vs finite differences on a small instance
    {
        const auto system = fpk::make_builtin("vdp_rayleigh", 0.3162);
        const auto domain = fpk::make_domain(Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2));
        const auto grid = fpk::uniform_grid(domain, 0.5);
        auto net = fpk::init_network(2, 6, 11);
        const fpk::LossOptions opts;
        const Eigen::VectorXd grad = fpk::loss_gradient(net, system, grid, opts, threads);
        Eigen::VectorXd theta = net.flatten();
        bool ok = true;
        for (int k = 0; k < theta.size() && ok; k += 7) {
            const double h = 1e-6 * std::max(1.0, std::abs(theta[k]));
            Eigen::VectorXd tp = theta, tm = theta;
            tp[k] += h;
            tm[k] -= h;
            const double fp =
                fpk::loss(fpk::unflatten(tp, 2, 6), system, grid, opts).total;
            const double fm =
                fpk::loss(fpk::unflatten(tm, 2, 6), system, grid, opts).total;
            const double fd = (fp - fm) / (2 * h);
            ok = std::abs(grad[k] - fd) <= 1e-5 * (1.0 + std::abs(fd));
        }
        report("loss gradient matches finite differences", ok);
    }

    std::printf("%s\n", failures == 0 ? "all checks passed" : "CHECKS FAILED");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stationary Fokker-Planck solver with transport-guided collocation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int threads = 0;
    bool deterministic = false;
    auto* run = app.add_subcommand("run", "train a solution from a JSON config");
    run->add_option("--config", config_path, "config JSON path")->required();
    run->add_option("--out", out_dir, "output directory (default: $SOLVER_OUT_DIR or solver_out)");
    run->add_option("--threads", threads, "worker threads (0 = hardware)");
    run->add_flag("--deterministic", deterministic, "require a seed; fixed-order reductions");

    std::string record_a;
    std::string record_b;
    std::string csv_path;
    auto* compare = app.add_subcommand("compare", "tabulate two run records side by side");
    compare->add_option("a", record_a, "first run_record.json")->required();
    compare->add_option("b", record_b, "second run_record.json")->required();
    compare->add_option("--csv", csv_path, "also write the table as CSV");

    std::string net_path;
    std::string dump_out = "solution.csv";
    double dump_dx = 0.05;
    std::vector<double> dump_lo;
    std::vector<double> dump_hi;
    auto* dump = app.add_subcommand("dump-solution", "evaluate a network snapshot on a grid");
    dump->add_option("--net", net_path, "network snapshot JSON")->required();
    dump->add_option("--dx", dump_dx, "grid spacing");
    dump->add_option("--lo", dump_lo, "domain lower bounds (scalar replicates)");
    dump->add_option("--hi", dump_hi, "domain upper bounds (scalar replicates)");
    dump->add_option("--out", dump_out, "output CSV path");

    int check_threads = 0;
    auto* check = app.add_subcommand("check", "run the invariant self-test suite");
    check->add_option("--threads", check_threads, "worker threads");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, threads, deterministic);
        if (compare->parsed()) return cmd_compare(record_a, record_b, csv_path);
        if (dump->parsed())
            return cmd_dump_solution(net_path, dump_dx, dump_lo, dump_hi, dump_out);
        if (check->parsed()) return cmd_check(check_threads);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
