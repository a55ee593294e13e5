#include <cmath>
#include <vector>

#include "cotrain/learners.hpp"
#include "cotrain/rng.hpp"
#include "json.hpp"
#include "doctest.h"

using namespace cotrain;

namespace {

ViewSchema categorical_schema(std::vector<std::size_t> arities) {
    ViewSchema s;
    for (std::size_t j = 0; j < arities.size(); ++j) {
        FeatureInfo f{"c" + std::to_string(j), FeatureKind::categorical, {}};
        for (std::size_t v = 0; v < arities[j]; ++v) f.categories.push_back(std::to_string(v));
        s.features.push_back(f);
    }
    return s;
}

struct Data {
    std::vector<FeatureVector> x;
    std::vector<int> y;
    ViewSample sample() const {
        ViewSample s;
        for (std::size_t i = 0; i < x.size(); ++i) s.add(x[i], y[i]);
        return s;
    }
};

}  // namespace

TEST_CASE("separable binary feature is fit exactly") {
    Data d{{{0}, {0}, {1}, {1}}, {-1, -1, 1, 1}};
    for (auto kind : {LearnerKind::naive_bayes, LearnerKind::linear_margin}) {
        auto m = train_erm(d.sample(), categorical_schema({2}), kind, 1);
        CHECK(m.train_error() == 0.0);
        CHECK(m.predict({1}) == 1);
        CHECK(m.predict({0}) == -1);
    }
    Data num{{{-2.0}, {-1.0}, {1.0}, {2.0}}, {-1, -1, 1, 1}};
    for (auto kind : {LearnerKind::naive_bayes, LearnerKind::linear_margin}) {
        auto m = train_erm(num.sample(), ViewSchema::numeric(1), kind, 1);
        CHECK(m.train_error() == 0.0);
    }
}

TEST_CASE("xor under a linear learner") {
    Data d{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {-1, 1, 1, -1}};
    // Exhaustive oracle: best linear sign pattern over the 4 points.
    double best = 1.0;
    for (double w1 = -2; w1 <= 2; w1 += 0.5)
        for (double w2 = -2; w2 <= 2; w2 += 0.5)
            for (double b = -2.25; b <= 2.25; b += 0.5) {
                int wrong = 0;
                for (std::size_t i = 0; i < 4; ++i) wrong += (w1 * d.x[i][0] + w2 * d.x[i][1] + b) * d.y[i] <= 0;
                best = std::min(best, wrong / 4.0);
            }
    CHECK(best == 0.25);
    auto m = train_erm(d.sample(), ViewSchema::numeric(2), LearnerKind::linear_margin, 1);
    CHECK(m.train_error() >= best);
    CHECK((m.train_error() == 0.25 || m.train_error() == 0.5));
    auto again = train_erm(d.sample(), ViewSchema::numeric(2), LearnerKind::linear_margin, 1);
    CHECK(again.train_error() == m.train_error());
}

TEST_CASE("naive bayes matches hand-computed smoothed posteriors") {
    // value 0: 3 positives, 1 negative; value 1: 1 positive, 3 negatives
    Data d{{{0}, {0}, {0}, {1}, {0}, {1}, {1}, {1}}, {1, 1, 1, 1, -1, -1, -1, -1}};
    auto m = train_erm(d.sample(), categorical_schema({2}), LearnerKind::naive_bayes, 1);
    // P(v=0|+) = (3+1)/(4+2), P(v=0|-) = (1+1)/(4+2), equal priors
    const double p_pos = 4.0 / 6.0 * 0.5, p_neg = 2.0 / 6.0 * 0.5;
    const double post = p_pos / (p_pos + p_neg);
    CHECK(m.predict_margin({0}) == doctest::Approx(2 * post - 1).epsilon(1e-12));
    CHECK(m.predict_margin({1}) == doctest::Approx(1 - 2 * post).epsilon(1e-12));
}

TEST_CASE("margin is 2p-1 of the posterior") {
    ViewSchema none;
    Data balanced{{{}, {}, {}, {}}, {1, 1, -1, -1}};
    auto prior_only = train_erm(balanced.sample(), none, LearnerKind::naive_bayes, 1);
    CHECK(prior_only.predict_margin(FeatureVector{}) == 0.0);
    CHECK(prior_only.predict(FeatureVector{}) == 0);

    Data skewed{std::vector<FeatureVector>(10), {1, 1, 1, 1, 1, 1, 1, 1, 1, -1}};
    auto nine = train_erm(skewed.sample(), none, LearnerKind::naive_bayes, 1);
    CHECK(nine.predict_margin(FeatureVector{}) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("linear margin saturates monotonically") {
    auto m = ClassifierModel::linear(1, ViewSchema::numeric(1), {1.0}, 0.0);
    double prev = -1.0;
    for (double s : {0.0, 0.5, 1.0, 5.0, 20.0, 100.0, 1e6}) {
        double v = m.predict_margin({s});
        CHECK(v >= prev);
        CHECK(v <= 1.0);
        prev = v;
    }
    CHECK(prev == doctest::Approx(1.0));
}

TEST_CASE("training edge cases") {
    ViewSample empty;
    CHECK_THROWS(train_erm(empty, ViewSchema::numeric(1), LearnerKind::naive_bayes, 1));
    Data one{{{1.0}, {2.0}}, {1, 1}};
    auto m = train_erm(one.sample(), ViewSchema::numeric(1), LearnerKind::linear_margin, 2);
    CHECK(m.single_class());
    CHECK(m.predict({-5.0}) == 1);
    CHECK(m.view_id() == 2);
    CHECK_THROWS(m.predict_margin(FeatureVector{1.0, 2.0}));
}

TEST_CASE("error rate examples") {
    std::vector<Example> sample(1051);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        sample[i].id = i;
        sample[i].view1 = {0.0};
        sample[i].view2 = {0.0};
        sample[i].label = i < 230 ? 1 : -1;
    }
    auto plus = ClassifierModel::constant(1, ViewSchema::numeric(1), 1.0);
    auto r = error_rate(plus, sample);
    CHECK(r.error == doctest::Approx(821.0 / 1051.0));
    CHECK(r.error + r.accuracy + r.uncertainty == doctest::Approx(1.0));

    auto abstain = ClassifierModel::constant(1, ViewSchema::numeric(1), 0.0);
    auto a = error_rate(abstain, sample);
    CHECK(a.error == 0.0);
    CHECK(a.uncertainty == 1.0);

    std::vector<Example> none;
    CHECK_THROWS(error_rate(plus, none));
}

TEST_CASE("disagreement properties") {
    Rng rng(11);
    const std::size_t n = 100;
    std::vector<double> f(n), g(n), h(n), truth(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        f[i] = rng.uniform(-1, 1);
        g[i] = rng.uniform(-1, 1);
        h[i] = rng.uniform(-1, 1);
        y[i] = rng.sign();
        truth[i] = y[i];
    }
    CHECK(disagreement(f, f) == 0.0);
    CHECK(disagreement(f, g) == disagreement(g, f));
    CHECK(disagreement(f, h) <= disagreement(f, g) + disagreement(g, h) + 1e-15);
    CHECK(evaluate_margins(f, y).error == doctest::Approx(disagreement(f, truth)).epsilon(1e-15));

    std::vector<double> neg(n);
    for (std::size_t i = 0; i < n; ++i) neg[i] = -f[i];
    CHECK(disagreement(f, neg) == 1.0);

    std::vector<double> a(n, 1.0), b(n, 1.0);
    for (std::size_t i = 0; i < 26; ++i) b[i * 3] = -1.0;
    CHECK(disagreement(a, b) == doctest::Approx(0.26));

    std::vector<double> z1{0.0, 0.0, 1.0}, z2{0.0, 1.0, 1.0};
    CHECK(disagreement(z1, z2) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("naive bayes is optimal over cell labelings of one categorical feature") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Data d;
        for (int i = 0; i < 30; ++i) {
            const double v = static_cast<double>(rng.index(3));
            d.x.push_back({v});
            d.y.push_back(rng.bernoulli(0.3 + 0.2 * v) ? 1 : -1);
        }
        LearnerOptions sharp;
        sharp.laplace_alpha = 1e-9;
        auto m = train_erm(d.sample(), categorical_schema({3}), LearnerKind::naive_bayes, 1, sharp);
        double best = 1.0;
        for (int mask = 0; mask < 8; ++mask) {
            int wrong = 0;
            for (std::size_t i = 0; i < d.x.size(); ++i) {
                const int pred = (mask >> static_cast<int>(d.x[i][0])) & 1 ? 1 : -1;
                wrong += pred != d.y[i];
            }
            best = std::min(best, wrong / 30.0);
        }
        CHECK(m.train_error() <= best + 1e-12);
    }
}

TEST_CASE("naive bayes parameters are locally optimal under perturbation") {
    Rng rng(8);
    const auto schema = categorical_schema({4});
    LearnerOptions sharp;
    sharp.laplace_alpha = 1e-9;
    for (int trial = 0; trial < 10; ++trial) {
        Data d;
        for (int i = 0; i < 40; ++i) {
            d.x.push_back({static_cast<double>(rng.index(4))});
            d.y.push_back(rng.bernoulli(0.2 + 0.2 * d.x.back()[0]) ? 1 : -1);
        }
        auto sample = d.sample();
        auto m = train_erm(sample, schema, LearnerKind::naive_bayes, 1, sharp);
        auto doc = nlohmann::json::parse(m.to_json());
        for (double delta : {-0.05, -0.01, 0.01, 0.05}) {
            auto& table = doc["parameters"]["cat_log_ratio"];
            for (std::size_t j = 0; j < table.size(); ++j)
                for (std::size_t v = 0; v < table[j].size(); ++v) {
                    auto tweaked = doc;
                    tweaked["parameters"]["cat_log_ratio"][j][v] = table[j][v].get<double>() + delta;
                    auto alt = ClassifierModel::from_json(tweaked.dump(), schema);
                    CHECK(error_rate(alt, sample).error >= error_rate(m, sample).error);
                }
        }
    }
}

TEST_CASE("model json round trip") {
    Rng rng(3);
    Data d;
    for (int i = 0; i < 40; ++i) {
        d.x.push_back({rng.normal(), static_cast<double>(rng.index(2))});
        d.y.push_back(d.x.back()[0] > 0 ? 1 : -1);
    }
    ViewSchema schema = ViewSchema::numeric(1);
    schema.features.push_back({"cat", FeatureKind::categorical, {"p", "q"}});
    for (auto kind : {LearnerKind::naive_bayes, LearnerKind::linear_margin}) {
        auto m = train_erm(d.sample(), schema, kind, 2);
        auto back = ClassifierModel::from_json(m.to_json(), schema);
        CHECK(back.kind() == kind);
        for (const auto& x : d.x) CHECK(back.predict_margin(x) == m.predict_margin(x));
        CHECK_THROWS(ClassifierModel::from_json(m.to_json(), ViewSchema::numeric(2)));
    }
}
