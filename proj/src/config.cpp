#include "fpk/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace fpk {

namespace {

using nlohmann::json;

const std::set<std::string> kTopLevelKeys = {
    "system",        "sigma2",
    "dimension",     "custom_drift",
    "domain_lower",  "domain_upper",
    "dx_train",      "dx_test",
    "dx_quad",       "top_m",
    "n_ot",          "hidden",
    "optimizer",     "boundary_mode",
    "eta_target",    "eps_pde_form",
    "cost_mode",     "ot_solver",
    "exact_threshold", "sinkhorn_epsilon_rel",
    "sinkhorn_max_sweeps", "sinkhorn_marginal_tol",
    "seed",          "label"};

const std::set<std::string> kOptimizerKeys = {
    "max_iters", "grad_tol", "c1", "c2", "max_line_search_evals", "step_min", "step_max"};

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw std::invalid_argument("unknown config key '" + it.key() + "' in " + where);
    }
}

Eigen::VectorXd vector_from(const json& j, const std::string& key) {
    const auto values = j.get<std::vector<double>>();
    if (values.empty()) throw std::invalid_argument("'" + key + "' must be a non-empty array");
    return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                             static_cast<Eigen::Index>(values.size()));
}

void apply_system_defaults(TrainingConfig& c, bool had_domain, bool had_dx_train) {
    struct Preset {
        double lo, hi, dx_train;
        int dim;
    };
    Preset preset{};
    if (c.system == "vdp_rayleigh") preset = {-2.0, 2.0, 0.25, 2};
    else if (c.system == "vdp") preset = {-4.0, 4.0, 0.1, 2};
    else if (c.system == "ou1d") preset = {-4.0, 4.0, 0.1, 1};
    else {
        if (!had_domain)
            throw std::invalid_argument("custom systems must specify domain_lower/domain_upper");
        return;
    }
    if (!had_domain) {
        c.domain_lower = Eigen::VectorXd::Constant(preset.dim, preset.lo);
        c.domain_upper = Eigen::VectorXd::Constant(preset.dim, preset.hi);
    }
    if (!had_dx_train) c.dx_train = preset.dx_train;
}

}  // namespace

TrainingConfig config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config root must be a JSON object");
    reject_unknown(j, kTopLevelKeys, "config");

    TrainingConfig c;
    c.system = j.value("system", std::string("vdp_rayleigh"));
    c.sigma2 = j.value("sigma2", 0.1);
    c.dimension = j.value("dimension", 0);
    if (j.contains("custom_drift"))
        c.custom_drift = j.at("custom_drift").get<std::vector<std::string>>();

    const bool had_domain = j.contains("domain_lower") || j.contains("domain_upper");
    if (j.contains("domain_lower") != j.contains("domain_upper"))
        throw std::invalid_argument("domain_lower and domain_upper must be given together");
    if (had_domain) {
        c.domain_lower = vector_from(j.at("domain_lower"), "domain_lower");
        c.domain_upper = vector_from(j.at("domain_upper"), "domain_upper");
    }
    const bool had_dx_train = j.contains("dx_train");
    if (had_dx_train) c.dx_train = j.at("dx_train").get<double>();
    c.dx_test = j.value("dx_test", 0.05);
    c.dx_quad = j.value("dx_quad", c.dx_test);
    c.top_m = j.value("top_m", 200);
    c.n_ot = j.value("n_ot", 10);
    c.hidden = j.value("hidden", 48);

    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        if (!o.is_object()) throw std::invalid_argument("'optimizer' must be an object");
        reject_unknown(o, kOptimizerKeys, "optimizer");
        c.optimizer.max_iters = o.value("max_iters", c.optimizer.max_iters);
        c.optimizer.grad_tol = o.value("grad_tol", c.optimizer.grad_tol);
        c.optimizer.c1 = o.value("c1", c.optimizer.c1);
        c.optimizer.c2 = o.value("c2", c.optimizer.c2);
        c.optimizer.max_line_search_evals =
            o.value("max_line_search_evals", c.optimizer.max_line_search_evals);
        c.optimizer.step_min = o.value("step_min", c.optimizer.step_min);
        c.optimizer.step_max = o.value("step_max", c.optimizer.step_max);
    }

    const std::string boundary = j.value("boundary_mode", std::string("exp_zero"));
    if (boundary == "exp_zero") c.boundary_mode = BoundaryMode::exp_zero;
    else if (boundary == "eta_target") c.boundary_mode = BoundaryMode::eta_target;
    else if (boundary == "none") c.boundary_mode = BoundaryMode::none;
    else throw std::invalid_argument("boundary_mode must be exp_zero, eta_target, or none");
    c.eta_target = j.value("eta_target", 10.0);

    const std::string form = j.value("eps_pde_form", std::string("eta"));
    if (form == "eta") c.eps_pde_form = ResidualForm::eta;
    else if (form == "rho") c.eps_pde_form = ResidualForm::rho;
    else throw std::invalid_argument("eps_pde_form must be eta or rho");

    const std::string cost = j.value("cost_mode", std::string("euclidean"));
    if (cost == "euclidean") c.cost_mode = CostMode::euclidean;
    else if (cost == "sq_euclidean") c.cost_mode = CostMode::sq_euclidean;
    else throw std::invalid_argument("cost_mode must be euclidean or sq_euclidean");

    c.ot_solver = j.value("ot_solver", std::string("auto"));
    c.exact_threshold = j.value("exact_threshold", 512);
    c.sinkhorn_epsilon_rel = j.value("sinkhorn_epsilon_rel", 0.01);
    c.sinkhorn_max_sweeps = j.value("sinkhorn_max_sweeps", 10000);
    c.sinkhorn_marginal_tol = j.value("sinkhorn_marginal_tol", 1e-9);

    if (j.contains("seed")) {
        c.seed = j.at("seed").get<std::uint64_t>();
        c.has_seed = true;
    }
    c.label = j.value("label", c.system + (c.n_ot > 0 ? "/ot" : "/baseline"));

    apply_system_defaults(c, had_domain, had_dx_train);
    c.validate();
    return c;
}

TrainingConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config parse error in '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

nlohmann::json config_to_json(const TrainingConfig& c) {
    json j;
    j["system"] = c.system;
    j["sigma2"] = c.sigma2;
    if (c.system == "custom") {
        j["dimension"] = c.dimension;
        j["custom_drift"] = c.custom_drift;
    }
    j["domain_lower"] =
        std::vector<double>(c.domain_lower.data(), c.domain_lower.data() + c.domain_lower.size());
    j["domain_upper"] =
        std::vector<double>(c.domain_upper.data(), c.domain_upper.data() + c.domain_upper.size());
    j["dx_train"] = c.dx_train;
    j["dx_test"] = c.dx_test;
    j["dx_quad"] = c.dx_quad;
    j["top_m"] = c.top_m;
    j["n_ot"] = c.n_ot;
    j["hidden"] = c.hidden;
    j["optimizer"] = {{"max_iters", c.optimizer.max_iters},
                      {"grad_tol", c.optimizer.grad_tol},
                      {"c1", c.optimizer.c1},
                      {"c2", c.optimizer.c2},
                      {"max_line_search_evals", c.optimizer.max_line_search_evals},
                      {"step_min", c.optimizer.step_min},
                      {"step_max", c.optimizer.step_max}};
    j["boundary_mode"] = c.boundary_mode == BoundaryMode::exp_zero     ? "exp_zero"
                         : c.boundary_mode == BoundaryMode::eta_target ? "eta_target"
                                                                       : "none";
    j["eta_target"] = c.eta_target;
    j["eps_pde_form"] = c.eps_pde_form == ResidualForm::eta ? "eta" : "rho";
    j["cost_mode"] = c.cost_mode == CostMode::euclidean ? "euclidean" : "sq_euclidean";
    j["ot_solver"] = c.ot_solver;
    j["exact_threshold"] = c.exact_threshold;
    j["sinkhorn_epsilon_rel"] = c.sinkhorn_epsilon_rel;
    j["sinkhorn_max_sweeps"] = c.sinkhorn_max_sweeps;
    j["sinkhorn_marginal_tol"] = c.sinkhorn_marginal_tol;
    if (c.has_seed) j["seed"] = c.seed;
    j["label"] = c.label;
    return j;
}

}  // namespace fpk
