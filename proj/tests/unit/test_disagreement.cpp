#include <cmath>
#include <set>

#include "cotrain/disagreement.hpp"
#include "cotrain/generators.hpp"
#include "doctest.h"

using namespace cotrain;

namespace {

std::vector<Example> pool_from_scores(const std::vector<double>& scores) {
    std::vector<Example> pool;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        Example e;
        e.id = i;
        e.view1 = {scores[i]};
        e.view2 = {scores[i]};
        pool.push_back(e);
    }
    return pool;
}

struct Setup {
    Split split;
    TwoViewDataset data;
};

Setup cond_indep_setup(std::uint64_t seed, std::size_t n = 600, std::size_t a = 3, std::size_t b = 9) {
    CondIndependentSpec g;
    g.n = n;
    g.seed = seed;
    auto gen = gen_cond_independent(g);
    Setup s{split_dataset(gen.data, SplitSpec{0.25, a, b, seed}), gen.data};
    return s;
}

}  // namespace

TEST_CASE("confident selection sorts by margin") {
    auto pool = pool_from_scores({0.9, 0.7, -0.8, -0.2, 0.1});
    auto model = ClassifierModel::linear(1, ViewSchema::numeric(1), {1.0}, 0.0);
    auto batch = select_from_pool(model, pool, 1, 1, SelectionStrategy::confident, 0, 0);
    REQUIRE(batch.examples.size() == 2);
    CHECK(batch.examples[0].id == 0);
    CHECK(batch.examples[0].pseudo->label == 1);
    CHECK(batch.examples[1].id == 2);
    CHECK(batch.examples[1].pseudo->label == -1);
    CHECK_FALSE(batch.shortfall);

    auto ties = pool_from_scores({0.5, 0.5, 0.5, -0.5});
    auto tb = select_from_pool(model, ties, 2, 1, SelectionStrategy::confident, 0, 0);
    CHECK(tb.examples[0].id == 0);
    CHECK(tb.examples[1].id == 1);
}

TEST_CASE("abstaining model yields an empty batch") {
    auto pool = pool_from_scores({0.9, -0.7, 0.3});
    auto abstain = ClassifierModel::constant(1, ViewSchema::numeric(1), 0.0);
    auto batch = select_from_pool(abstain, pool, 1, 3, SelectionStrategy::confident, 0, 0);
    CHECK(batch.examples.empty());
    CHECK(batch.shortfall);
}

TEST_CASE("random selection is reproducible and removes from U") {
    std::vector<double> scores;
    for (int i = 0; i < 200; ++i) scores.push_back(std::sin(i * 1.7));
    auto model = ClassifierModel::linear(1, ViewSchema::numeric(1), {1.0}, 0.0);
    auto u1 = pool_from_scores(scores), u2 = pool_from_scores(scores);
    auto b1 = select_and_label(model, u1, 75, 2, 3, SelectionStrategy::random, 42);
    auto b2 = select_and_label(model, u2, 75, 2, 3, SelectionStrategy::random, 42);
    REQUIRE(b1.examples.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) CHECK(b1.examples[k].id == b2.examples[k].id);
    CHECK(u1.size() == 195);
    std::set<std::size_t> left;
    for (const auto& e : u1) left.insert(e.id);
    for (const auto& e : b1.examples) {
        CHECK(left.count(e.id) == 0);
        CHECK(e.pseudo->label == (scores[e.id] > 0 ? 1 : -1));
    }
}

TEST_CASE("zero rounds returns the initial pair") {
    auto s = cond_indep_setup(1);
    ProcessConfig cfg;
    cfg.rounds = 0;
    auto r = run_disagreement_process(s.split.labeled, s.split.unlabeled, s.data.schema1, s.data.schema2, {}, cfg,
                                      s.split.test);
    CHECK(r.trace.size() == 1);
    CHECK(r.trace.stop == StopReason::round_budget);
    CHECK(r.trace.rounds[0].bounds.xi1 == r.trace.rounds[0].err1);
}

TEST_CASE("sigma grows by c + d per round and L stays intact") {
    auto s = cond_indep_setup(2);
    ProcessConfig cfg;
    cfg.rounds = 10;
    cfg.per_round_pos = 1;
    cfg.per_round_neg = 3;
    cfg.seed = 2;
    auto r = run_disagreement_process(s.split.labeled, s.split.unlabeled, s.data.schema1, s.data.schema2, {}, cfg,
                                      s.split.test);
    REQUIRE(r.trace.stop == StopReason::round_budget);
    CHECK(r.trace.size() == 11);
    for (const auto& rec : r.trace.rounds) {
        CHECK(rec.sigma1_size == 12 + 4 * rec.round);
        CHECK(rec.sigma2_size == 12 + 4 * rec.round);
        CHECK(rec.cross12.size() == rec.round);
    }
    for (std::size_t k = 0; k < s.split.labeled.size(); ++k) {
        CHECK(r.sigma1[k].label == s.split.labeled[k].label);
        CHECK_FALSE(r.sigma1[k].pseudo.has_value());
    }
    for (std::size_t k = s.split.labeled.size(); k < r.sigma1.size(); ++k) {
        CHECK_FALSE(r.sigma1[k].label.has_value());
        CHECK(r.sigma1[k].pseudo->source_view == 2);
    }
    // the estimated bound at round i uses cross terms minus earlier bounds
    const auto& last = r.trace.rounds.back();
    double theta = 0;
    for (std::size_t k = 0; k < last.round; ++k) theta += last.cross12[k] - r.trace.rounds[k].bounds.xi2;
    CHECK(last.bounds.theta == doctest::Approx(theta));
    double oracle_theta = 0;
    for (std::size_t k = 0; k < last.round; ++k) oracle_theta += last.cross12[k] - r.trace.rounds[k].err2;
    CHECK(last.oracle_bounds.theta == doctest::Approx(oracle_theta));
}

TEST_CASE("identical learners on a shared view never disagree") {
    auto s = cond_indep_setup(3);
    for (auto& e : s.split.labeled) e.view2 = e.view1;
    for (auto& e : s.split.unlabeled) e.view2 = e.view1;
    for (auto& e : s.split.test) e.view2 = e.view1;
    for (auto sel : {SelectionStrategy::confident, SelectionStrategy::random}) {
        ProcessConfig cfg;
        cfg.rounds = 8;
        cfg.selection = sel;
        auto r = run_disagreement_process(s.split.labeled, s.split.unlabeled, s.data.schema1, s.data.schema1, {},
                                          cfg, s.split.test);
        for (const auto& rec : r.trace.rounds) CHECK(rec.d12 == 0.0);
    }
}

TEST_CASE("stop reasons are recorded") {
    auto s = cond_indep_setup(4, 80, 3, 3);
    ProcessConfig cfg;
    cfg.rounds = 1000;
    cfg.pool_size = 10;
    cfg.per_round_pos = 2;
    cfg.per_round_neg = 2;
    auto r = run_disagreement_process(s.split.labeled, s.split.unlabeled, s.data.schema1, s.data.schema2, {}, cfg,
                                      s.split.test);
    CHECK(r.trace.stop != StopReason::round_budget);

    // labeled positives far to the right, every unlabeled point on the negative side
    std::vector<Example> L, U, T;
    for (int i = 0; i < 6; ++i) {
        Example e;
        e.id = std::size_t(i);
        const double x = i < 3 ? 10.0 + i : -1.0 + 0.5 * i;
        e.view1 = e.view2 = {x};
        e.label = i < 3 ? 1 : -1;
        L.push_back(e);
        T.push_back(e);
    }
    for (int i = 0; i < 30; ++i) {
        Example e;
        e.id = std::size_t(100 + i);
        e.view1 = e.view2 = {-2.0 - 0.1 * i};
        U.push_back(e);
    }
    ProcessConfig c2;
    c2.rounds = 5;
    c2.pool_size = 10;
    auto r2 = run_disagreement_process(L, U, ViewSchema::numeric(1), ViewSchema::numeric(1), {}, c2, T);
    CHECK(r2.trace.stop == StopReason::no_positive_in_pool);
    CHECK(r2.trace.size() == 1);
    CHECK(r2.trace.rounds[0].shortfall1);
}

TEST_CASE("unlabeled exhaustion stops the process cleanly") {
    std::vector<Example> L, U;
    for (int i = 0; i < 4; ++i) {
        Example e;
        e.id = std::size_t(i);
        e.view1 = e.view2 = {i < 2 ? 1.0 + i : -1.0 - i};
        e.label = i < 2 ? 1 : -1;
        L.push_back(e);
    }
    for (int i = 0; i < 6; ++i) {
        Example e;
        e.id = std::size_t(10 + i);
        e.view1 = e.view2 = {i % 2 ? 2.0 + i : -2.0 - i};
        U.push_back(e);
    }
    ProcessConfig cfg;
    cfg.rounds = 50;
    cfg.pool_size = 6;
    cfg.per_round_pos = 1;
    cfg.per_round_neg = 1;
    auto r = run_disagreement_process(L, U, ViewSchema::numeric(1), ViewSchema::numeric(1), {}, cfg, L);
    CHECK(r.trace.stop == StopReason::unlabeled_exhausted);
    CHECK(r.trace.rounds.back().unlabeled_left == 0);
}

TEST_CASE("convergence monitor") {
    RoundTrace flat;
    for (std::size_t i = 0; i < 8; ++i) {
        RoundRecord r;
        r.round = i;
        r.d12 = 0.3;
        flat.rounds.push_back(r);
        flat.margins1.push_back({1, -1, 1});
        flat.margins2.push_back({1, 1, 1});
    }
    auto c = convergence_monitor(flat, 0.02, 5);
    CHECK(c.converged);
    CHECK(*c.round == 0);

    RoundTrace osc = flat;
    for (std::size_t i = 0; i < osc.rounds.size(); ++i) osc.rounds[i].d12 = 0.3 + (i % 2 ? 0.04 : 0.0);
    CHECK_FALSE(convergence_monitor(osc, 0.02, 5).converged);

    RoundTrace drift = flat;
    for (std::size_t i = 0; i < drift.rounds.size(); ++i) drift.margins1[i] = {i % 2 ? 1.0 : -1.0, -1, 1};
    CHECK_FALSE(convergence_monitor(drift, 0.02, 5).converged);

    RoundTrace settle = flat;
    settle.rounds[0].d12 = 0.1;
    settle.rounds[1].d12 = 0.2;
    auto s = convergence_monitor(settle, 0.02, 5);
    CHECK(s.converged);
    CHECK(*s.round == 2);

    CHECK_FALSE(convergence_monitor(flat, 0.02, 9).converged);
}

TEST_CASE("trace emission") {
    auto s = cond_indep_setup(5);
    ProcessConfig cfg;
    cfg.rounds = 3;
    auto r = run_disagreement_process(s.split.labeled, s.split.unlabeled, s.data.schema1, s.data.schema2, {}, cfg,
                                      s.split.test);
    const auto csv = r.trace.to_csv();
    CHECK(csv.rfind("round,err1,err2,disagreement\n", 0) == 0);
    const auto jsonl = r.trace.to_jsonl();
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 4);
    CHECK(jsonl.find("\"stop\":\"round_budget\"") != std::string::npos);
    CHECK(jsonl.find("\"confident_caveat\":true") != std::string::npos);
}
