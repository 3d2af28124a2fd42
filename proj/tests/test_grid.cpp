#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "fpk/grid.hpp"

using fpk::CollocationSet;
using fpk::make_domain;
using fpk::uniform_grid;

namespace {

fpk::Domain box2(double lo, double hi) {
    return make_domain(Eigen::Vector2d(lo, lo), Eigen::Vector2d(hi, hi));
}

bool on_bound(const Eigen::VectorXd& p, const fpk::Domain& d) {
    for (int a = 0; a < d.dimension(); ++a)
        if (p[a] == d.lower[a] || p[a] == d.upper[a]) return true;
    return false;
}

}  // namespace

TEST_CASE("interior counts match the reference experiments") {
    CHECK(uniform_grid(box2(-2, 2), 0.25).interior.size() == 225);
    CHECK(uniform_grid(box2(-2, 2), 0.05).interior.size() == 6241);
    CHECK(uniform_grid(box2(-4, 4), 0.1).interior.size() == 6241);
    CHECK(uniform_grid(box2(-4, 4), 0.05).interior.size() == 25281);
}

TEST_CASE("three-node line") {
    Eigen::VectorXd lo(1), hi(1);
    lo << 0.0;
    hi << 1.0;
    const auto set = uniform_grid(make_domain(lo, hi), 0.5);
    REQUIRE(set.interior.size() == 1);
    CHECK(set.interior[0][0] == doctest::Approx(0.5));
    REQUIRE(set.boundary.size() == 2);
    CHECK(set.boundary[0][0] == 0.0);
    CHECK(set.boundary[1][0] == 1.0);
}

TEST_CASE("boundary points sit exactly on the box; interior points do not") {
    const auto domain = box2(-2, 2);
    const auto set = uniform_grid(domain, 0.5);
    for (const auto& p : set.boundary) CHECK(on_bound(p, domain));
    for (const auto& p : set.interior) CHECK_FALSE(on_bound(p, domain));
}

TEST_CASE("interior count formula over random grids") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const int n = 1 + static_cast<int>(rng() % 3);
        Eigen::VectorXd lo(n), hi(n), dx(n);
        long long expect_interior = 1;
        long long expect_total = 1;
        for (int a = 0; a < n; ++a) {
            const int k = 3 + static_cast<int>(rng() % 6);  // nodes per axis
            lo[a] = -1.0 - static_cast<double>(rng() % 3);
            dx[a] = 0.25;
            hi[a] = lo[a] + dx[a] * (k - 1);
            expect_interior *= k - 2;
            expect_total *= k;
        }
        const auto set = uniform_grid(make_domain(lo, hi), dx);
        CHECK(static_cast<long long>(set.interior.size()) == expect_interior);
        CHECK(static_cast<long long>(set.interior.size() + set.boundary.size()) == expect_total);
    }
}

TEST_CASE("generation is deterministic") {
    const auto a = uniform_grid(box2(-2, 2), 0.25);
    const auto b = uniform_grid(box2(-2, 2), 0.25);
    REQUIRE(a.interior.size() == b.interior.size());
    for (std::size_t i = 0; i < a.interior.size(); ++i)
        CHECK(a.interior[i] == b.interior[i]);
}

TEST_CASE("grid construction errors") {
    CHECK_THROWS_AS(uniform_grid(box2(-2, 2), 0.3), std::invalid_argument);
    CHECK_THROWS_AS(uniform_grid(box2(-2, 2), 4.0), std::invalid_argument);  // 2 nodes
    CHECK_THROWS_AS(make_domain(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)),
                    std::invalid_argument);
}

TEST_CASE("append extends the interior with clipping and exact dedup") {
    const auto base = uniform_grid(box2(-2, 2), 0.25);
    REQUIRE(base.interior.size() == 225);

    std::vector<Eigen::VectorXd> fresh;
    for (int i = 0; i < 200; ++i)
        fresh.push_back(Eigen::Vector2d(-1.9 + 0.017 * i, 0.0123 + 1e-4 * i));
    const auto grown = fpk::append_points(base, fresh);
    CHECK(grown.interior.size() == 425);
    CHECK(grown.boundary.size() == base.boundary.size());

    // duplicate of an existing interior point: size unchanged
    const auto dup = fpk::append_points(grown, {grown.interior[10]});
    CHECK(dup.interior.size() == 425);

    // ten rounds of 200 distinct points on top of 225
    CollocationSet acc = base;
    for (int round = 0; round < 10; ++round) {
        std::vector<Eigen::VectorXd> batch;
        for (int i = 0; i < 200; ++i)
            batch.push_back(Eigen::Vector2d(-1.8 + 0.017 * i + 1e-6 * round,
                                            -0.71 + 3e-4 * i + 1e-5 * round));
        acc = fpk::append_points(acc, batch);
    }
    CHECK(acc.interior.size() == 2225);

    // out-of-box points are clipped onto the closed box
    const auto clipped = fpk::append_points(base, {Eigen::Vector2d(5.0, 0.017)});
    CHECK(clipped.interior.back()[0] == 2.0);
    CHECK(clipped.interior.back()[1] == doctest::Approx(0.017));

    CHECK_THROWS_AS(fpk::append_points(base, {Eigen::VectorXd::Zero(3)}),
                    std::invalid_argument);
}

TEST_CASE("collocation CSV dump") {
    const auto set = uniform_grid(box2(-1, 1), 0.5);
    const std::string path = "grid_dump_test.csv";
    fpk::write_collocation_csv(set, path);
    std::ifstream is(path);
    REQUIRE(is.good());
    std::string line;
    std::getline(is, line);
    CHECK(line == "x1,x2,tag");
    std::size_t rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == set.interior.size() + set.boundary.size());
    std::remove(path.c_str());
}
