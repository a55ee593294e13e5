#include <cmath>
#include <set>

#include "cotrain/bounds.hpp"
#include "cotrain/errors.hpp"
#include "cotrain/rng.hpp"
#include "doctest.h"

using namespace cotrain;

TEST_CASE("xi bound worked example") {
    const double cross[] = {0.35};
    const double eps2[] = {0.2};
    const double eps1[] = {0.2};
    auto r = error_bounds(100, 10, 1, 0.2, 0.2, cross, cross, eps1, eps2);
    CHECK(r.theta == doctest::Approx(0.15));
    CHECK(r.xi1 == doctest::Approx(0.2 * std::sqrt(11000.0) / 100 - 0.015).epsilon(1e-12));
    CHECK(r.xi1 == doctest::Approx(0.19476).epsilon(1e-4));
    CHECK(r.theta_condition);
    CHECK(r.xi1 < 0.2);
}

TEST_CASE("xi bound boundaries") {
    // theta exactly i * eps / 2 does not satisfy the strict inequality
    const double cross[] = {0.3, 0.3};
    const double eps[] = {0.2, 0.2};
    auto r = error_bounds(50, 4, 2, 0.2, 0.2, cross, cross, eps, eps);
    CHECK(r.theta == doctest::Approx(0.2));
    CHECK_FALSE(r.theta_condition);

    for (std::size_t i = 0; i < 5; ++i) CHECK(xi_bound(0.3, 40, 0, i, 0.7) == 0.3);
    auto zero = error_bounds(40, 4, 0, 0.1, 0.25, {}, {}, {}, {});
    CHECK(zero.theta == 0.0);
    CHECK(zero.delta == 0.0);
    CHECK(zero.xi1 == 0.1);
    CHECK(zero.xi2 == 0.25);
}

TEST_CASE("xi bound implication on random tuples") {
    Rng rng(2024);
    std::size_t violations = 0;
    for (int t = 0; t < 10000; ++t) {
        const std::size_t l = 1 + rng.index(500);
        const std::size_t u = 1 + rng.index(50);
        const std::size_t i = 1 + rng.index(40);
        const double e1 = rng.uniform(1e-6, 0.5), e2 = rng.uniform(1e-6, 0.5);
        const double theta = i * e1 / 2 * (1.0 + rng.uniform(1e-9, 2.0));
        const double delta = i * e2 / 2 * (1.0 + rng.uniform(1e-9, 2.0));
        if (!(xi_bound(e1, l, u, i, theta) < e1)) ++violations;
        if (!(xi_bound(e2, l, u, i, delta) < e2)) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("required labeled count") {
    CHECK(required_labeled_count(0.1, 0.1, 1000, 1000, 0.05, 0.0) == 2120);
    const double clean = 2.0 / (0.15 * 0.15) * std::log(2.0 * 500 / 0.1);
    CHECK(required_labeled_count(0.15, 0.15, 500, 500, 0.1, 1e-12) == std::size_t(std::ceil(clean)));
    const double step = 2.0 / (0.1 * 0.1 * 0.8 * 0.8) * std::log(2.0);
    const double a = double(required_labeled_count(0.1, 0.1, 1000, 1000, 0.05, 0.1));
    const double b = double(required_labeled_count(0.1, 0.1, 2000, 2000, 0.05, 0.1));
    CHECK(std::abs((b - a) - step) < 1.0);
    // the larger requirement of the two views wins
    CHECK(required_labeled_count(0.1, 0.2, 1000, 1000, 0.05, 0.0) == 2120);
    CHECK_THROWS_AS(required_labeled_count(0.1, 0.1, 1000, 1000, 0.05, 0.5), DomainError);
    CHECK_THROWS_AS(required_labeled_count(0.6, 0.1, 1000, 1000, 0.05, 0.0), DomainError);
}

TEST_CASE("disagreement thresholds") {
    CHECK(initial_disagreement_threshold(0.1, 0.2) == doctest::Approx(0.25));
    CHECK(initial_disagreement_threshold(0.12, 0.12) == doctest::Approx(0.18));
    CHECK(initial_disagreement_threshold(0, 0) == 0.0);
    CHECK(expected_disagreement_cond_indep(0.1, 0.2) == doctest::Approx(0.26));
    CHECK(expected_disagreement_cond_indep(0, 0) == 0.0);
    for (double e : {0.0, 0.3, 0.9}) CHECK(expected_disagreement_cond_indep(0.5, e) == doctest::Approx(0.5));
}

TEST_CASE("expansion masses") {
    const std::size_t a[] = {1, 2}, b[] = {2, 3};
    auto m = expansion_measure(a, b, 4);
    CHECK(m.symmetric_difference == 0.5);
    CHECK(m.both == 0.25);
    CHECK(m.neither == 0.25);
    const std::size_t h1[] = {0, 1}, h2[] = {2, 3};
    auto d = expansion_measure(h1, h2, 4);
    CHECK(d.symmetric_difference == 1.0);
    CHECK(d.both == 0.0);
    CHECK(d.neither == 0.0);
    CHECK(expansion_measure(a, a, 4).symmetric_difference == 0.0);
    CHECK_THROWS_AS(expansion_measure(a, b, 0), DomainError);
}

namespace {
void recount(const std::vector<int>& h1, const std::vector<int>& h2, const std::vector<int>& truth, double& err2,
             double& d) {
    std::size_t e = 0, diff = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        e += h2[i] != truth[i];
        diff += h1[i] != h2[i];
    }
    err2 = double(e) / double(truth.size());
    d = double(diff) / double(truth.size());
}
}  // namespace

TEST_CASE("disagreement pair construction") {
    std::vector<int> truth(10, 1), h1(10, 1);
    h1[4] = -1;  // err(h1) = 0.1
    auto p = construct_disagreement_pair(h1, truth, 0.1, 0.2, 0.3);
    double e, d;
    recount(h1, p.h2, truth, e, d);
    CHECK(e == doctest::Approx(0.2));
    CHECK(d == doctest::Approx(0.3));
    CHECK(p.corrected_errors == std::vector<std::size_t>{4});
    CHECK(p.new_errors.size() == 2);

    auto c1 = construct_disagreement_pair(h1, truth, 0.1, 0.3, 0.2);
    CHECK(c1.construction_case == 1);
    CHECK(c1.new_errors.size() == 2);
    recount(h1, c1.h2, truth, e, d);
    CHECK(e == doctest::Approx(0.3));
    CHECK(d == doctest::Approx(0.2));

    auto same = construct_disagreement_pair(h1, truth, 0.1, 0.1, 0.0);
    CHECK(same.h2 == h1);

    CHECK_THROWS_AS(construct_disagreement_pair(h1, truth, 0.1, 0.2, 0.05), InfeasibleError);
    CHECK_THROWS_AS(construct_disagreement_pair(h1, truth, 0.1, 0.2, 0.35), InfeasibleError);
    CHECK_THROWS_AS(construct_disagreement_pair(h1, truth, 0.1, 0.2, 0.4), InfeasibleError);
}

TEST_CASE("disagreement pair construction over an enumerated grid") {
    const std::size_t n = 12;
    Rng rng(9);
    std::size_t built = 0;
    for (std::size_t errs = 0; errs <= 6; ++errs) {
        std::vector<int> truth(n), h1(n);
        for (std::size_t i = 0; i < n; ++i) truth[i] = rng.sign();
        h1 = truth;
        for (std::size_t i = 0; i < errs; ++i) h1[i] = -h1[i];
        const double a = double(errs) / n;
        for (std::size_t bc = 0; bc <= 6; ++bc)
            for (std::size_t dc = 0; dc <= n; ++dc) {
                const double b = double(bc) / n, dd = double(dc) / n;
                const bool feasible = dc + errs >= bc && dc + bc >= errs && dc <= errs + bc &&
                                      (errs + bc - dc) % 2 == 0;
                if (!feasible) {
                    CHECK_THROWS(construct_disagreement_pair(h1, truth, a, b, dd));
                    continue;
                }
                auto p = construct_disagreement_pair(h1, truth, a, b, dd);
                double e, d;
                recount(h1, p.h2, truth, e, d);
                CHECK(e == doctest::Approx(b));
                CHECK(d == doctest::Approx(dd));
                ++built;
            }
    }
    CHECK(built > 50);
}
