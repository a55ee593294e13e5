#include <cmath>
#include <limits>
#include <numbers>

#include "cotrain/errors.hpp"
#include "cotrain/insufficient.hpp"
#include "cotrain/rng.hpp"
#include "doctest.h"

using namespace cotrain;

namespace {

Example point(std::size_t id, double x1, double x2, std::optional<int> label = std::nullopt) {
    Example e;
    e.id = id;
    e.view1 = {x1};
    e.view2 = {x2};
    e.label = label;
    return e;
}

// Fixed hypothesis sets: margin tanh(w x / 2) per view, ignoring the training set.
EnsembleTrainer fixed_trainer(std::vector<double> w1, std::vector<double> w2) {
    return [=](std::span<const Example>, int view) {
        std::vector<ClassifierModel> out;
        for (double w : view == 1 ? w1 : w2) out.push_back(ClassifierModel::linear(view, ViewSchema::numeric(1), {w}, 0.0));
        return out;
    };
}

}  // namespace

TEST_CASE("insufficiency from posteriors") {
    std::vector<double> half(10, 0.5), sure = {0.0, 1.0, 1.0, 0.0}, noisy = {0.1, 0.9, 0.9, 0.1, 0.9};
    CHECK(measure_insufficiency(half).upsilon == 1.0);
    CHECK(measure_insufficiency(sure).upsilon == 0.0);
    auto p = measure_insufficiency(noisy);
    CHECK(p.upsilon == doctest::Approx(0.2));
    CHECK(p.eta == doctest::Approx(0.1));
    CHECK(p.n_mc == 5);
    Oracle empty;
    CHECK_THROWS_AS(measure_insufficiency(empty, 1), CapabilityError);
    CHECK_THROWS_AS(measure_insufficiency(std::vector<double>{}), EvaluationError);

    UniformBallSpec s;
    s.n = 20000;
    s.noise = 0.2;
    auto g = gen_uniform_ball_linear(s);
    auto prof = measure_insufficiency(g.oracle, 1);
    CHECK(std::abs(prof.upsilon - 2.0 * prof.eta) <= 3.0 / std::sqrt(double(s.n)));
    CHECK(prof.upsilon == doctest::Approx(0.4));
}

TEST_CASE("margin coverage identity") {
    auto c = coverage_from_masks({1, 1, 0, 0}, {0, 1, 1, 0});
    CHECK(c.mu1 == 0.5);
    CHECK(c.mu2 == 0.5);
    CHECK(c.nu == 0.5);
    CHECK(c.mu == 0.75);
    CHECK(c.mu_direct == 0.75);

    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + rng.index(97);
        std::vector<char> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.uniform() < 0.4;
            b[i] = rng.uniform() < 0.6;
        }
        auto r = coverage_from_masks(a, b);
        CHECK(r.mu == r.mu_direct);
        CHECK(std::abs(r.mu - (r.nu + r.mu1 + r.mu2) / 2.0) <= 4 * std::numeric_limits<double>::epsilon());
        CHECK(r.mu >= std::max(r.mu1, r.mu2));
        CHECK(r.mu <= std::min(1.0, r.mu1 + r.mu2));
    }
    CHECK_THROWS_AS(coverage_from_masks({}, {}), EvaluationError);

    std::vector<Example> u = {point(0, 10, 0), point(1, 10, 10), point(2, 0, 10), point(3, 0, 0)};
    auto trainer = fixed_trainer({1.0}, {1.0});
    auto f1 = trainer({}, 1), f2 = trainer({}, 2);
    auto m = margin_coverage(f1, f2, u, 0.9, 0.9);
    CHECK(m.mu == 0.75);
    CHECK(m.nu == 0.5);
    auto same = margin_coverage(f1, f1, u, 0.9, 0.9);
    CHECK(same.nu == 0.0);
    CHECK(same.mu == same.mu1);
    auto none = margin_coverage(f1, f2, u, 1.0, 1.0);
    CHECK(none.mu == 0.0);
    CHECK_THROWS_AS(margin_coverage(f1, f2, u, 0.0, 0.5), DomainError);
}

TEST_CASE("margin co-training rounds") {
    std::vector<Example> l = {point(100, 1, 1, 1), point(101, -1, -1, -1)};
    std::vector<Example> u = {point(0, 3, 0), point(1, 0, -3), point(2, 0.1, 0.1)};
    auto never = margin_cotrain(l, u, fixed_trainer({1.0}, {1.0}), 1.0, 1.0);
    CHECK(never.rounds.size() == 1);
    CHECK(never.training.size() == 2);
    CHECK(never.rounds[0].claimed == 0);

    auto r = margin_cotrain(l, u, fixed_trainer({1.0}, {1.0}), 0.5, 0.5, {ScanOrder::pairwise, 100, {1, -1, 1}});
    REQUIRE(r.rounds.size() == 2);
    CHECK(r.rounds[0].claimed == 2);
    CHECK(r.rounds[0].claimed_by1 == 1);
    CHECK(r.rounds[0].claimed_by2 == 1);
    CHECK(*r.rounds[0].pseudo_accuracy == 1.0);
    CHECK(r.training.size() == 4);
    CHECK(r.training[2].pseudo->label == 1);
    CHECK(r.training[3].pseudo->label == -1);
    CHECK(r.training[3].pseudo->source_view == 2);
    CHECK(r.rounds[1].claimed == 0);

    // both views confident with opposite signs: the first model scanned wins
    std::vector<Example> clash = {point(0, 4, -4)};
    auto c = margin_cotrain(l, clash, fixed_trainer({1.0}, {1.0}), 0.5, 0.5);
    CHECK(c.rounds[0].claimed_by1 == 1);
    CHECK(c.rounds[0].conflicts == 1);
    CHECK(c.training.back().pseudo->label == 1);

    // pairwise scan tests f2 before the second view-1 model; view-major does not
    auto pair = margin_cotrain(l, clash, fixed_trainer({0.01, 1.0}, {1.0}), 0.5, 0.5);
    CHECK(pair.rounds[0].claimed_by2 == 1);
    auto major = margin_cotrain(l, clash, fixed_trainer({0.01, 1.0}, {1.0}), 0.5, 0.5, {ScanOrder::view_major});
    CHECK(major.rounds[0].claimed_by1 == 1);

    const auto jsonl = r.to_jsonl();
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 2);
}

TEST_CASE("adaptive gate and threshold update") {
    CHECK(adaptive_gate_threshold(1000, 100) == doctest::Approx(364.1588833612779));
    CHECK(adaptive_threshold(0.45, 0.4, 1000, 100, 1000) == doctest::Approx(0.45 - 0.4 * (1 - 1e4 / std::pow(1000.0, 1.5))));
    CHECK(adaptive_threshold(0.45, 0.4, 1000, 100, 1000) == doctest::Approx(0.1765).epsilon(1e-3));
    CHECK(adaptive_gate_coverage(1000, 100) == doctest::Approx(364.1588833612779 / 900));
    double prev = 1.0;
    for (double m = 400; m <= 1000; m += 50) {
        const double g = adaptive_threshold(0.45, 0.4, 1000, 100, m);
        CHECK(g < prev);
        prev = g;
    }

    auto fixture = [](std::size_t confident) {
        std::vector<Example> l, u;
        for (std::size_t i = 0; i < 100; ++i) l.push_back(point(i, i % 2 ? 1 : -1, 0, i % 2 ? 1 : -1));
        for (std::size_t i = 0; i < 900; ++i) u.push_back(point(100 + i, i < confident ? 10.0 : 0.0, 0.0));
        return adaptive_margin_cotrain(l, u, fixed_trainer({1.0}, {1.0}), {0.4, 0.4}, {0.05, 0.05});
    };
    auto stop = fixture(300);
    CHECK_FALSE(stop.gate_passed);
    CHECK(stop.rounds.size() == 1);
    CHECK(stop.rounds[0].claimed == 300);
    CHECK(stop.training.size() == 100);

    auto go = fixture(500);
    CHECK(go.gate_passed);
    REQUIRE(go.rounds.size() == 2);
    CHECK(go.rounds[1].training_size == 600);
    CHECK(go.rounds[1].gamma1 == doctest::Approx(0.45 - 0.4 * (1 - 1e4 / std::pow(600.0, 1.5))));
    CHECK(go.rounds[1].gamma2 == go.rounds[1].gamma1);
    CHECK(go.rounds[1].claimed == 0);
    CHECK(go.training.size() == 600);

    // the update only leaves (0,1] when the extra margin is negative; it is then clamped with a flag
    std::vector<Example> l = {point(0, 1, 1, 1)};
    std::vector<Example> u;
    for (std::size_t i = 0; i < 99; ++i) u.push_back(point(1 + i, i < 90 ? 10.0 : 0.01 * double(i), 0.0));
    auto clamp = adaptive_margin_cotrain(l, u, fixed_trainer({1.0}, {1.0}), {0.9, 0.9}, {-0.2, -0.2});
    REQUIRE(clamp.rounds.size() >= 2);
    CHECK(clamp.gate_passed);
    CHECK(adaptive_threshold(0.7, 0.9, 100, 1, 91) < 0.0);
    CHECK(clamp.rounds[1].clamped1);
    CHECK(clamp.rounds[1].gamma1 == 0.05);
    CHECK(clamp.rounds[1].claimed == 9);
}

TEST_CASE("approximate KL") {
    CHECK(approx_kl(25, 100) == doctest::Approx(std::log(4.0)));
    CHECK(approx_kl(7, 7) == 0.0);
    CHECK(approx_kl(10, 100) - approx_kl(20, 100) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(approx_kl(0, 10), DomainError);
    CHECK_THROWS_AS(approx_kl(11, 10), DomainError);
}

TEST_CASE("margin Lipschitz estimate") {
    MarginCandidate ref{{0.1, -0.2, 0.3}, 0.1};
    std::vector<MarginCandidate> only = {ref};
    CHECK_FALSE(estimate_margin_lipschitz(only, ref).defined);
    std::vector<MarginCandidate> worse = {{{0.3, -0.2, 0.3}, 0.2}};
    auto e = estimate_margin_lipschitz(worse, ref);
    CHECK(e.defined);
    CHECK(e.value == doctest::Approx(2.0));
    std::vector<MarginCandidate> better = {{{0.3, -0.2, 0.3}, 0.05}};
    CHECK_THROWS_AS(estimate_margin_lipschitz(better, ref), PreconditionError);

    // unit-ball linear family: rotate the optimal direction by theta, error theta/pi
    UniformBallSpec s;
    s.n = 5000;
    s.dim1 = 3;
    s.seed = 21;
    auto g = gen_uniform_ball_linear(s);
    const auto& w = g.oracle.w_star1;
    std::vector<double> u = {w[1], -w[0], 0.0};
    double un = std::hypot(u[0], u[1]);
    if (un < 1e-9) u = {1, 0, 0}, un = 1;
    for (auto& v : u) v /= un;
    MarginCandidate best;
    for (const auto& ex : g.data.examples) best.margins.push_back(ex.view1[0] * w[0] + ex.view1[1] * w[1] + ex.view1[2] * w[2]);
    std::vector<MarginCandidate> fam;
    for (double theta = 0.1; theta < 3.1; theta += 0.2) {
        MarginCandidate c;
        c.error = theta / std::numbers::pi;
        for (const auto& ex : g.data.examples) {
            double m = 0;
            for (int k = 0; k < 3; ++k) m += ex.view1[k] * (std::cos(theta) * w[k] + std::sin(theta) * u[k]);
            c.margins.push_back(m);
        }
        fam.push_back(c);
    }
    auto lip = estimate_margin_lipschitz(fam, best);
    CHECK(lip.defined);
    CHECK(lip.value <= std::numbers::pi + 0.2);
}

TEST_CASE("probabilistic margin") {
    std::vector<double> grid = {0.5, 0.75, 1.0};
    std::vector<double> m = {0.9, -0.8, 1.0, -0.3, 0.2};
    std::vector<int> perfect = {1, -1, 1, -1, 1};
    for (double v : estimate_probabilistic_margin(m, perfect, grid)) CHECK(v == 0.0);
    std::vector<int> small_wrong = {1, -1, 1, 1, -1};
    for (double v : estimate_probabilistic_margin(m, small_wrong, grid)) CHECK(v == 0.0);
    std::vector<int> big_wrong = {-1, -1, -1, -1, 1};
    auto r = estimate_probabilistic_margin(m, big_wrong, grid);
    CHECK(r[0] == doctest::Approx(0.4));
    CHECK(r[2] == doctest::Approx(0.2));
    CHECK(r[2] <= r[1]);
    CHECK(r[1] <= r[0]);
    std::vector<double> bad_grid = {0.4};
    CHECK_THROWS_AS(estimate_probabilistic_margin(m, perfect, bad_grid), DomainError);
    CHECK_THROWS_AS(estimate_probabilistic_margin({}, {}, grid), EvaluationError);
}

TEST_CASE("pseudo-labels under ground-truth thresholds are clean") {
    InsufficientSpec spec;
    spec.n = 5000;
    spec.seed = 12;
    spec.mu1 = 0.6;
    spec.mu2 = 0.7;
    spec.complementary = true;
    auto g = gen_insufficient_two_view(spec);
    auto split = split_dataset(g.data, SplitSpec{0.2, 10, 10, 12});
    auto trainer = make_ensemble_trainer(LearnerKind::linear_margin, {}, g.data.schema1, g.data.schema2, 5, 12);
    auto f1 = trainer(split.labeled, 1), f2 = trainer(split.labeled, 2);
    const double d1 = margin_deviation(f1, g.data.examples, g.oracle.bayes_margin1);
    const double d2 = margin_deviation(f2, g.data.examples, g.oracle.bayes_margin2);
    const double g1 = d1 + 0.05, g2 = d2 + 0.05;
    REQUIRE(g1 <= 1.0);
    REQUIRE(g2 <= 1.0);
    MarginCotrainOptions opts;
    opts.truth = g.oracle.truth;
    auto r = margin_cotrain(split.labeled, split.unlabeled, trainer, g1, g2, opts);
    CHECK(r.rounds[0].claimed > 0);
    CHECK(*r.rounds[0].pseudo_accuracy == 1.0);
}
