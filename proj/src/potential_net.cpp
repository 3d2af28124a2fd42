#include "fpk/potential_net.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>
#include <stdexcept>

namespace fpk {

Eigen::VectorXd PotentialNetwork::flatten() const {
    Eigen::VectorXd theta(parameter_count());
    int at = 0;
    for (int k = 0; k < hidden; ++k)
        for (int a = 0; a < n; ++a) theta[at++] = w1(k, a);
    theta.segment(at, hidden) = b1;
    at += hidden;
    theta.segment(at, hidden) = w2;
    at += hidden;
    theta[at] = b2;
    return theta;
}

void PotentialNetwork::set_parameters(const Eigen::VectorXd& theta) {
    if (theta.size() != parameter_count())
        throw std::invalid_argument("parameter vector length mismatch");
    int at = 0;
    for (int k = 0; k < hidden; ++k)
        for (int a = 0; a < n; ++a) w1(k, a) = theta[at++];
    b1 = theta.segment(at, hidden);
    at += hidden;
    w2 = theta.segment(at, hidden);
    at += hidden;
    b2 = theta[at];
}

double PotentialNetwork::value_at(const Eigen::VectorXd& x) const {
    return w2.dot((w1 * x + b1).array().tanh().matrix()) + b2;
}

PotentialNetwork unflatten(const Eigen::VectorXd& theta, int n, int hidden) {
    PotentialNetwork net;
    net.n = n;
    net.hidden = hidden;
    net.w1.resize(hidden, n);
    net.b1.resize(hidden);
    net.w2.resize(hidden);
    net.set_parameters(theta);
    return net;
}

namespace {

// Uniform in [0,1) from the top 53 bits of the engine output; keeps the
// draw sequence independent of the standard library's distribution
// implementation.
double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double symmetric_uniform(std::mt19937_64& rng, double limit) {
    return (2.0 * unit_uniform(rng) - 1.0) * limit;
}

}  // namespace

PotentialNetwork init_network(int n, int hidden, std::uint64_t seed) {
    if (n < 1 || hidden < 1) throw std::invalid_argument("network dimensions must be >= 1");
    PotentialNetwork net;
    net.n = n;
    net.hidden = hidden;
    net.w1.resize(hidden, n);
    net.b1 = Eigen::VectorXd::Zero(hidden);
    net.w2.resize(hidden);
    net.b2 = 0.0;
    std::mt19937_64 rng(seed);
    const double limit1 = std::sqrt(6.0 / (n + hidden));
    for (int k = 0; k < hidden; ++k)
        for (int a = 0; a < n; ++a) net.w1(k, a) = symmetric_uniform(rng, limit1);
    const double limit2 = std::sqrt(6.0 / (hidden + 1));
    for (int k = 0; k < hidden; ++k) net.w2[k] = symmetric_uniform(rng, limit2);
    return net;
}

NetworkJet evaluate_jet(const PotentialNetwork& net, const Eigen::VectorXd& x) {
    if (x.size() != net.n) throw std::invalid_argument("input dimension mismatch");
    const Eigen::ArrayXd s = (net.w1 * x + net.b1).array().tanh();
    const Eigen::ArrayXd ds = 1.0 - s.square();
    const Eigen::ArrayXd dds = -2.0 * s * ds;

    NetworkJet jet;
    jet.value = net.w2.dot(s.matrix()) + net.b2;
    jet.gradient = net.w1.transpose() * (net.w2.array() * ds).matrix();
    const Eigen::VectorXd bh = (net.w2.array() * dds).matrix();
    // each rank-one term is exactly symmetric, so the sum is too
    jet.hessian.setZero(net.n, net.n);
    for (int k = 0; k < net.hidden; ++k)
        jet.hessian += bh[k] * net.w1.row(k).transpose() * net.w1.row(k);
    return jet;
}

ParameterJacobians parameter_jacobians(const PotentialNetwork& net, const Eigen::VectorXd& x) {
    if (x.size() != net.n) throw std::invalid_argument("input dimension mismatch");
    const int n = net.n;
    const int hid = net.hidden;
    const int p = net.parameter_count();
    const Eigen::ArrayXd s = (net.w1 * x + net.b1).array().tanh();
    const Eigen::ArrayXd ds = 1.0 - s.square();
    const Eigen::ArrayXd dds = -2.0 * s * ds;
    const Eigen::ArrayXd ddds = (6.0 * s.square() - 2.0) * ds;

    ParameterJacobians jac;
    jac.value.setZero(p);
    jac.gradient.setZero(n, p);
    jac.hessian.setZero(n * n, p);

    const int at_b1 = hid * n;
    const int at_w2 = hid * n + hid;
    const int at_b2 = hid * n + 2 * hid;

    for (int k = 0; k < hid; ++k) {
        const double w2k = net.w2[k];
        const auto w1k = net.w1.row(k);
        for (int a = 0; a < n; ++a) {
            const int col = k * n + a;
            jac.value[col] = w2k * ds[k] * x[a];
            for (int i = 0; i < n; ++i) {
                jac.gradient(i, col) =
                    w2k * (dds[k] * x[a] * w1k[i] + (a == i ? ds[k] : 0.0));
                for (int j = 0; j < n; ++j) {
                    double v = ddds[k] * x[a] * w1k[i] * w1k[j];
                    if (a == i) v += dds[k] * w1k[j];
                    if (a == j) v += dds[k] * w1k[i];
                    jac.hessian(i * n + j, col) = w2k * v;
                }
            }
        }
        jac.value[at_b1 + k] = w2k * ds[k];
        jac.value[at_w2 + k] = s[k];
        for (int i = 0; i < n; ++i) {
            jac.gradient(i, at_b1 + k) = w2k * dds[k] * w1k[i];
            jac.gradient(i, at_w2 + k) = ds[k] * w1k[i];
            for (int j = 0; j < n; ++j) {
                jac.hessian(i * n + j, at_b1 + k) = w2k * ddds[k] * w1k[i] * w1k[j];
                jac.hessian(i * n + j, at_w2 + k) = dds[k] * w1k[i] * w1k[j];
            }
        }
    }
    jac.value[at_b2] = 1.0;
    return jac;
}

void save_snapshot(const PotentialNetwork& net, std::uint64_t seed, const std::string& path) {
    nlohmann::json j;
    j["n"] = net.n;
    j["H"] = net.hidden;
    std::vector<double> w1_flat;
    w1_flat.reserve(static_cast<std::size_t>(net.hidden) * net.n);
    for (int k = 0; k < net.hidden; ++k)
        for (int a = 0; a < net.n; ++a) w1_flat.push_back(net.w1(k, a));
    j["W1"] = w1_flat;
    j["b1"] = std::vector<double>(net.b1.data(), net.b1.data() + net.b1.size());
    j["w2"] = std::vector<double>(net.w2.data(), net.w2.data() + net.w2.size());
    j["b2"] = net.b2;
    j["seed"] = seed;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
}

PotentialNetwork load_snapshot(const std::string& path, std::uint64_t* seed_out) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(is);
    PotentialNetwork net;
    net.n = j.at("n").get<int>();
    net.hidden = j.at("H").get<int>();
    if (net.n < 1 || net.hidden < 1) throw std::runtime_error("corrupt snapshot dimensions");
    const auto w1_flat = j.at("W1").get<std::vector<double>>();
    const auto b1 = j.at("b1").get<std::vector<double>>();
    const auto w2 = j.at("w2").get<std::vector<double>>();
    if (w1_flat.size() != static_cast<std::size_t>(net.hidden) * net.n ||
        b1.size() != static_cast<std::size_t>(net.hidden) ||
        w2.size() != static_cast<std::size_t>(net.hidden))
        throw std::runtime_error("corrupt snapshot arrays");
    net.w1.resize(net.hidden, net.n);
    for (int k = 0; k < net.hidden; ++k)
        for (int a = 0; a < net.n; ++a)
            net.w1(k, a) = w1_flat[static_cast<std::size_t>(k) * net.n + a];
    net.b1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), static_cast<Eigen::Index>(b1.size()));
    net.w2 = Eigen::Map<const Eigen::VectorXd>(w2.data(), static_cast<Eigen::Index>(w2.size()));
    net.b2 = j.at("b2").get<double>();
    if (seed_out) *seed_out = j.at("seed").get<std::uint64_t>();
    return net;
}

}  // namespace fpk
