#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cotrain/dataset.hpp"

namespace cotrain {

enum class LearnerKind { naive_bayes, linear_margin };

std::string to_string(LearnerKind k);
LearnerKind learner_kind_from_string(const std::string& s);

struct LearnerOptions {
    double laplace_alpha = 1.0;
    int iterations = 500;
    double step = 0.1;
    double l2 = 0.0;
    double variance_floor = 1e-3;  // numeric features under naive-bayes
};

// A single-view labeled sample. Pointers refer into caller-owned storage.
struct ViewSample {
    std::vector<const FeatureVector*> x;
    std::vector<int> y;

    void add(const FeatureVector& f, int label) {
        x.push_back(&f);
        y.push_back(label);
    }
    std::size_t size() const { return x.size(); }
    bool empty() const { return x.empty(); }
};

// Sample from examples carrying a training label (true or pseudo).
ViewSample view_sample(std::span<const Example> data, int view);

class ClassifierModel {
public:
    ClassifierModel() = default;

    int view_id() const { return view_id_; }
    LearnerKind kind() const { return kind_; }
    std::size_t train_size() const { return train_size_; }
    double train_error() const { return train_error_; }
    // Set when the training data contained a single class.
    bool single_class() const { return single_class_; }

    double predict_margin(const FeatureVector& x) const;
    int predict(const FeatureVector& x) const;  // -1, 0 (abstain), +1
    double margin(const Example& e) const { return predict_margin(e.view(view_id_)); }

    // Parameter 2-norm for linear models, 1 for naive-bayes.
    double norm() const;

    std::string to_json() const;
    static ClassifierModel from_json(const std::string& text, const ViewSchema& schema);

    // A linear-margin model with explicit weights on raw (unscaled) inputs.
    static ClassifierModel linear(int view_id, const ViewSchema& schema, std::vector<double> weights, double bias);
    // Always returns the given margin.
    static ClassifierModel constant(int view_id, const ViewSchema& schema, double margin);

    friend ClassifierModel train_erm(const ViewSample&, const ViewSchema&, LearnerKind, int, const LearnerOptions&,
                                     std::uint64_t);

    const std::vector<double>& linear_weights() const { return weights_; }
    double linear_bias() const { return bias_; }

private:
    double nb_log_odds(const FeatureVector& x) const;
    void encode(const FeatureVector& x, std::vector<double>& out) const;
    void check_arity(const FeatureVector& x) const;

    int view_id_ = 1;
    LearnerKind kind_ = LearnerKind::linear_margin;
    ViewSchema schema_;
    std::size_t train_size_ = 0;
    double train_error_ = 0.0;
    bool single_class_ = false;
    bool constant_ = false;
    double constant_margin_ = 0.0;

    // naive-bayes
    double log_prior_odds_ = 0.0;
    std::vector<std::vector<double>> cat_log_ratio_;  // per feature, per category: log P(v|+)/P(v|-)
    std::vector<double> mean_pos_, mean_neg_, var_pos_, var_neg_;

    // linear-margin on encoded inputs: score = w . ((x - shift) / scale) + b
    std::vector<double> shift_, scale_;
    std::vector<double> weights_;
    double bias_ = 0.0;
};

// Empirical risk minimization on one view. Empty data throws; single-class
// data yields a constant model with single_class() set.
ClassifierModel train_erm(const ViewSample& data, const ViewSchema& schema, LearnerKind kind, int view_id,
                          const LearnerOptions& opts = {}, std::uint64_t seed = 0);

struct EvalReport {
    double error = 0.0;
    double accuracy = 0.0;
    double uncertainty = 0.0;
    std::size_t n_eval = 0;
};

int sign_of(double m);

EvalReport evaluate_margins(std::span<const double> margins, std::span<const int> labels);
EvalReport error_rate(const ClassifierModel& model, std::span<const Example> sample);
EvalReport error_rate(const ClassifierModel& model, const ViewSample& sample);

// Fraction of positions whose signs differ (0 is its own sign).
double disagreement(std::span<const double> a, std::span<const double> b);
double disagreement(const ClassifierModel& a, const ClassifierModel& b, std::span<const Example> sample);

std::vector<double> margins_on(const ClassifierModel& model, std::span<const Example> sample);

}  // namespace cotrain
