#include "fpk/run.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "fpk/config.hpp"
#include "fpk/csv.hpp"
#include "fpk/parallel.hpp"

namespace fpk {

namespace {

using nlohmann::json;

std::string iso_utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json entry_to_json(const RunRecordEntry& e) {
    json j;
    j["iteration"] = e.iteration;
    j["train_interior"] = e.train_interior;
    j["train_boundary"] = e.train_boundary;
    j["eps_pde_eta"] = e.eps_pde_eta;
    j["eps_pde_rho"] = e.eps_pde_rho ? json(*e.eps_pde_rho) : json(nullptr);
    j["eps_rho"] = e.eps_rho ? json(*e.eps_rho) : json(nullptr);
    j["loss"] = e.loss;
    j["grad_norm"] = e.grad_norm;
    j["optim_iterations"] = e.optim_iterations;
    j["wall_ms"] = e.wall_ms;
    j["added_points_file"] = e.added_points_file;
    return j;
}

RunRecordEntry entry_from_json(const json& j) {
    RunRecordEntry e;
    e.iteration = j.at("iteration").get<int>();
    e.train_interior = j.at("train_interior").get<int>();
    e.train_boundary = j.at("train_boundary").get<int>();
    e.eps_pde_eta = j.at("eps_pde_eta").get<double>();
    if (!j.at("eps_pde_rho").is_null()) e.eps_pde_rho = j.at("eps_pde_rho").get<double>();
    if (!j.at("eps_rho").is_null()) e.eps_rho = j.at("eps_rho").get<double>();
    e.loss = j.at("loss").get<double>();
    e.grad_norm = j.at("grad_norm").get<double>();
    e.optim_iterations = j.at("optim_iterations").get<int>();
    e.wall_ms = j.at("wall_ms").get<double>();
    e.added_points_file = j.value("added_points_file", std::string());
    return e;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << text;
}

}  // namespace

json run_record_to_json(const RunRecord& record) {
    json j;
    j["label"] = record.label;
    j["entries"] = json::array();
    for (const auto& e : record.entries) j["entries"].push_back(entry_to_json(e));
    return j;
}

RunRecord run_record_from_json(const json& j) {
    RunRecord record;
    record.label = j.at("label").get<std::string>();
    for (const auto& e : j.at("entries")) record.entries.push_back(entry_from_json(e));
    return record;
}

RunRecord load_run_record(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open run record '" + path + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("corrupt run record '" + path + "': " + e.what());
    }
    return run_record_from_json(j);
}

json metrics_to_json(const Metrics& metrics) {
    json j;
    j["eps_pde"] = metrics.eps_pde;
    j["eps_rho"] = metrics.eps_rho ? json(*metrics.eps_rho) : json(nullptr);
    j["N0"] = metrics.n0;
    j["N_U"] = metrics.n_test_interior;
    j["form"] = metrics.form;
    j["iteration"] = metrics.iteration;
    return j;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot hash missing file '" + path + "'");
    std::uint64_t hash = 14695981039346656037ull;
    char buf[8192];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        const std::streamsize got = is.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ull;
        }
        if (got < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016" PRIx64, hash);
    return hex;
}

int run_experiment(TrainingConfig config, const RunOptions& options) {
    namespace fs = std::filesystem;
    if (options.deterministic && !config.has_seed)
        throw std::invalid_argument("deterministic mode requires a seed in the config");
    if (!config.has_seed) {
        std::random_device rd;
        config.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        config.has_seed = true;
    }
    fs::create_directories(options.out_dir);

    const std::string started = iso_utc_now();
    std::vector<std::string> written;
    auto out_path = [&](const std::string& name) { return options.out_dir + "/" + name; };

    TrainerOptions trainer_opts;
    trainer_opts.threads = resolve_threads(options.threads);
    trainer_opts.out_dir = options.out_dir;
    trainer_opts.verbose = true;

    json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["started_at"] = started;
    manifest["seed"] = config.seed;
    manifest["deterministic"] = options.deterministic;
    manifest["threads"] = trainer_opts.threads;
    manifest["config"] = config_to_json(config);

    int status = 0;
    try {
        const TrainingOutcome outcome = run_training(config, trainer_opts);
        const DynamicalSystem system = config.make_system();

        for (int i = 0; i <= config.n_ot; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "trace_%03d.csv", i);
            written.emplace_back(name);
            if (i > 0) {
                std::snprintf(name, sizeof(name), "added_points_%03d.csv", i);
                written.emplace_back(name);
            }
        }

        save_snapshot(outcome.net, config.seed, out_path("network.json"));
        written.emplace_back("network.json");

        write_collocation_csv(outcome.train_set, out_path("train_set.csv"));
        written.emplace_back("train_set.csv");

        const double n0 = normalize(outcome.net, config.domain(), config.dx_quad);
        std::vector<Eigen::VectorXd> grid_points = outcome.test_set.interior;
        grid_points.insert(grid_points.end(), outcome.test_set.boundary.begin(),
                           outcome.test_set.boundary.end());
        const SolutionField field = solution_field(
            outcome.net, points_matrix(grid_points, system.dimension()), n0);
        write_solution_csv(field, out_path("solution.csv"));
        written.emplace_back("solution.csv");

        const ResidualTable test_table =
            build_residual_table(system, outcome.test_set.interior);
        const Eigen::VectorXd residuals = eta_residuals_batch(
            outcome.net, system.diffusion(), test_table, trainer_opts.threads);
        write_residual_csv(out_path("residuals.csv"), test_table.x, residuals);
        written.emplace_back("residuals.csv");

        write_text_file(out_path("run_record.json"),
                        run_record_to_json(outcome.record).dump(2) + "\n");
        written.emplace_back("run_record.json");

        Metrics metrics;
        const RunRecordEntry& last = outcome.record.entries.back();
        metrics.form = config.eps_pde_form == ResidualForm::eta ? "eta" : "rho";
        if (config.eps_pde_form == ResidualForm::eta) {
            metrics.eps_pde = last.eps_pde_eta;
        } else if (last.eps_pde_rho) {
            metrics.eps_pde = *last.eps_pde_rho;
        } else {
            throw std::runtime_error("rho-form eps_pde unavailable (exp(-eta) overflow)");
        }
        metrics.eps_rho = last.eps_rho;
        metrics.n_test_interior = static_cast<int>(outcome.test_set.interior.size());
        metrics.n0 = n0;
        metrics.iteration = last.iteration;
        write_text_file(out_path("metrics.json"), metrics_to_json(metrics).dump(2) + "\n");
        written.emplace_back("metrics.json");
    } catch (const std::exception& e) {
        manifest["error"] = e.what();
        status = 1;
    }

    json outputs = json::array();
    for (const auto& name : written) {
        if (!fs::exists(out_path(name))) continue;
        outputs.push_back({{"file", name}, {"fnv1a64", file_hash_hex(out_path(name))}});
    }
    manifest["outputs"] = outputs;
    manifest["finished_at"] = iso_utc_now();
    write_text_file(out_path("manifest.json"), manifest.dump(2) + "\n");
    return status;
}

namespace {

std::string format_eps(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", *v);
    return buf;
}

}  // namespace

std::string compare_records(const RunRecord& a, const RunRecord& b, std::string* csv_out) {
    if (a.entries.empty() || b.entries.empty())
        throw std::invalid_argument("run record has no entries");

    struct Row {
        std::string label;
        int n_s;
        std::optional<double> eps_pde;
        std::optional<double> eps_rho;
        double wall_s;
        double ratio;
    };
    auto summarize = [](const RunRecord& r) {
        const RunRecordEntry& last = r.entries.back();
        double wall = 0.0;
        for (const auto& e : r.entries) wall += e.wall_ms;
        return Row{r.label, last.train_interior, last.eps_pde_eta, last.eps_rho, wall / 1000.0,
                   1.0};
    };
    Row ra = summarize(a);
    Row rb = summarize(b);
    ra.ratio = 1.0;
    rb.ratio = static_cast<double>(rb.n_s) / static_cast<double>(ra.n_s);

    std::ostringstream text;
    char line[256];
    std::snprintf(line, sizeof(line), "%-28s %8s %12s %12s %10s %12s\n", "label", "N_S",
                  "eps_pde", "eps_rho", "wall_s", "sample_ratio");
    text << line;
    for (const Row& r : {ra, rb}) {
        std::snprintf(line, sizeof(line), "%-28s %8d %12s %12s %10.1f %12.4f\n",
                      r.label.c_str(), r.n_s, format_eps(r.eps_pde).c_str(),
                      format_eps(r.eps_rho).c_str(), r.wall_s, r.ratio);
        text << line;
    }

    if (csv_out) {
        std::ostringstream csv;
        csv << "label,n_s,eps_pde,eps_rho,wall_s,sample_ratio\n";
        for (const Row& r : {ra, rb}) {
            csv << r.label << "," << r.n_s << "," << format_eps(r.eps_pde) << ","
                << format_eps(r.eps_rho) << "," << csv_double(r.wall_s) << ","
                << csv_double(r.ratio) << "\n";
        }
        *csv_out = csv.str();
    }
    return text.str();
}

std::string compare_record_files(const std::string& path_a, const std::string& path_b,
                                 std::string* csv_out) {
    return compare_records(load_run_record(path_a), load_run_record(path_b), csv_out);
}

}  // namespace fpk
