#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cotrain/dataset.hpp"
#include "cotrain/generators.hpp"
#include "cotrain/learners.hpp"

namespace cotrain {

struct InsufficiencyProfile {
    double upsilon = 0.0;  // 1 - mean |2 phi - 1|
    double eta = 0.0;      // mean (1/2 - |phi - 1/2|)
    std::size_t n_mc = 0;
};

// posteriors: P(y=+1 | x_v) over a sample.
InsufficiencyProfile measure_insufficiency(std::span<const double> posteriors);
// Throws CapabilityError when the oracle carries no posteriors.
InsufficiencyProfile measure_insufficiency(const Oracle& oracle, int view);

struct MarginCoverage {
    double mu1 = 0.0, mu2 = 0.0;
    double mu = 0.0;         // (nu + mu1 + mu2) / 2
    double mu_direct = 0.0;  // covered by at least one view, counted
    double nu = 0.0;         // covered by exactly one view
    double gamma1 = 0.0, gamma2 = 0.0;
    std::size_t n = 0;
    std::vector<char> covered1, covered2;
};

// covered_v[i]: some model of view v reaches |margin| >= gamma_v on instance i.
MarginCoverage coverage_from_masks(std::vector<char> covered1, std::vector<char> covered2);
MarginCoverage margin_coverage(std::span<const ClassifierModel> models1, std::span<const ClassifierModel> models2,
                               std::span<const Example> unlabeled, double gamma1, double gamma2);

// Hypothesis set of one view, trained on the current training set.
using EnsembleTrainer = std::function<std::vector<ClassifierModel>(std::span<const Example> training, int view)>;

// k ERM models per view: when the sample holds at least 2k examples, model j
// leaves out every example whose position is j mod k; otherwise the k models
// are seed restarts on the full sample.
EnsembleTrainer make_ensemble_trainer(LearnerKind kind, const LearnerOptions& opts, ViewSchema schema1,
                                      ViewSchema schema2, std::size_t k = 5, std::uint64_t seed = 0);

enum class ScanOrder {
    pairwise,    // for f1: for f2: test f1 then f2
    view_major,  // every view-1 model, then every view-2 model
};

struct MarginRound {
    std::size_t round = 0;
    std::size_t training_size = 0;  // m_i
    double gamma1 = 0.0, gamma2 = 0.0;
    std::size_t claimed = 0;  // |T_i|
    std::size_t claimed_by1 = 0, claimed_by2 = 0;
    std::size_t conflicts = 0;  // claimed while the other view confidently said the opposite
    bool clamped1 = false, clamped2 = false;
    std::optional<double> pseudo_accuracy;  // when truth is supplied
    std::vector<std::size_t> claimed_ids;
    std::vector<int> claimed_labels;
};

struct MarginCotrainResult {
    std::vector<ClassifierModel> models1, models2;  // F^C_v
    std::vector<MarginRound> rounds;
    std::vector<Example> training;  // final rho
    bool gate_passed = true;        // adaptive variant only
    double gate_threshold = 0.0;    // adaptive variant only

    std::string to_jsonl() const;
};

struct MarginCotrainOptions {
    ScanOrder scan = ScanOrder::pairwise;
    std::size_t max_rounds = 1000;
    // truth[id] in {-1,+1}; empty when unavailable
    std::vector<int> truth;
};

// Fixed-threshold variant: loop until a round claims nothing.
MarginCotrainResult margin_cotrain(std::span<const Example> labeled, std::vector<Example> unlabeled,
                                   const EnsembleTrainer& trainer, double gamma1, double gamma2,
                                   const MarginCotrainOptions& opts = {});

struct AdaptiveOptions {
    MarginCotrainOptions base;
    double gamma_floor = 0.05;
};

// cube_root(n^2 m0) - m0
double adaptive_gate_threshold(double n, double m0);
// Coverage needed so that |T_0| clears the gate when every covered instance is claimed.
double adaptive_gate_coverage(double n, double m0);
// gamma0 - gap * (1 - n sqrt(m0) / m^1.5)
double adaptive_threshold(double gamma0, double gap, double n, double m0, double m);

// gap_v stands for C_v (R_v - eta_v); gamma0_v = gap_v + extra_margin_v.
MarginCotrainResult adaptive_margin_cotrain(std::span<const Example> labeled, std::vector<Example> unlabeled,
                                            const EnsembleTrainer& trainer, std::array<double, 2> gap,
                                            std::array<double, 2> extra_margin, const AdaptiveOptions& opts = {});

// ln(|omega| / |lambda|)
double approx_kl(std::size_t lambda_size, std::size_t omega_size);

struct MarginCandidate {
    std::vector<double> margins;  // over a shared sample
    double error = 0.0;
};

struct LipschitzEstimate {
    bool defined = false;
    double value = 0.0;
    std::size_t pairs_used = 0;
};

// max |f(x) - f_ref(x)| / (err(f) - err(f_ref)) over candidates with a positive gap.
LipschitzEstimate estimate_margin_lipschitz(std::span<const MarginCandidate> candidates,
                                            const MarginCandidate& reference);

// Mass of instances predicted wrongly with |margin| >= gamma, per grid value in [1/2, 1].
std::vector<double> estimate_probabilistic_margin(std::span<const double> margins, std::span<const int> truth,
                                                  std::span<const double> gamma_grid);

// Largest |f(x) - f_star(x)| over the models and sample; a ground-truth stand-in
// for the margin gap C (R - eta) when true margins are known.
double margin_deviation(std::span<const ClassifierModel> models, std::span<const Example> sample,
                        std::span<const double> true_margin_by_id);

// Expected error of the sign of each margin under known posteriors, averaged;
// abstentions cost 1/2.
double expected_error(std::span<const double> margins, std::span<const double> posteriors);

}  // namespace cotrain
