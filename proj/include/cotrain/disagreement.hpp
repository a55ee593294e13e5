#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cotrain/bounds.hpp"
#include "cotrain/dataset.hpp"
#include "cotrain/learners.hpp"

namespace cotrain {

enum class SelectionStrategy { random, confident };

std::string to_string(SelectionStrategy s);
SelectionStrategy selection_from_string(const std::string& s);

struct ProcessConfig {
    std::size_t rounds = 30;
    std::size_t per_round_pos = 1;
    std::size_t per_round_neg = 3;
    std::size_t pool_size = 75;
    SelectionStrategy selection = SelectionStrategy::confident;
    std::uint64_t seed = 0;
    bool frozen_eval_sample = true;  // cross-disagreements on the initial U

    std::size_t per_round() const { return per_round_pos + per_round_neg; }
    void validate() const;
};

struct LabelBatch {
    std::vector<Example> examples;  // carry pseudo-labels
    std::size_t positives = 0;
    std::size_t negatives = 0;
    bool shortfall = false;      // fewer than c positives available
    bool neg_shortfall = false;  // fewer than d negatives available
};

// Labels c positives and d negatives from an already drawn pool.
LabelBatch select_from_pool(const ClassifierModel& model, std::span<const Example> pool, std::size_t c,
                            std::size_t d, SelectionStrategy strategy, std::uint64_t seed, int round);

// Draws a fresh pool of min(pool_size, |U|) from U, selects, and removes the
// selected instances from U.
LabelBatch select_and_label(const ClassifierModel& model, std::vector<Example>& unlabeled, std::size_t pool_size,
                            std::size_t c, std::size_t d, SelectionStrategy strategy, std::uint64_t seed,
                            int round = 0);

enum class StopReason { round_budget, unlabeled_exhausted, no_positive_in_pool };
std::string to_string(StopReason r);

struct RoundRecord {
    std::size_t round = 0;
    double err1 = 0.0, err2 = 0.0;
    double d12 = 0.0;
    std::vector<double> cross12;  // d(h1^i, h2^k), k < i
    std::vector<double> cross21;  // d(h1^k, h2^i), k < i
    ErrorBoundResult bounds;        // with earlier xi standing in for unknown errors
    ErrorBoundResult oracle_bounds; // with test-set errors for every round
    std::size_t sigma1_size = 0, sigma2_size = 0;
    std::size_t unlabeled_left = 0;
    std::size_t added_to_sigma1 = 0, added_to_sigma2 = 0;
    bool shortfall1 = false, shortfall2 = false;
};

struct RoundTrace {
    std::vector<RoundRecord> rounds;
    StopReason stop = StopReason::round_budget;
    std::size_t labeled_size = 0;
    std::size_t per_round = 0;
    bool confident_caveat = false;  // bounds are proved for random selection
    // Signs of h_v^i on the evaluation sample, kept for drift and cross terms.
    std::vector<std::vector<double>> margins1, margins2;

    std::size_t size() const { return rounds.size(); }
    std::string round_json(std::size_t i) const;
    std::string to_jsonl() const;
    std::string to_csv() const;  // round,err1,err2,disagreement
};

struct ProcessResult {
    ClassifierModel model1, model2;
    RoundTrace trace;
    std::vector<Example> sigma1, sigma2;
};

struct LearnerPair {
    LearnerKind kind1 = LearnerKind::linear_margin;
    LearnerKind kind2 = LearnerKind::linear_margin;
    LearnerOptions options1, options2;
};

ProcessResult run_disagreement_process(std::span<const Example> labeled, std::vector<Example> unlabeled,
                                       const ViewSchema& schema1, const ViewSchema& schema2,
                                       const LearnerPair& learners, const ProcessConfig& cfg,
                                       std::span<const Example> test);

struct ConvergenceResult {
    bool converged = false;
    std::optional<std::size_t> round;
};

ConvergenceResult convergence_monitor(const RoundTrace& trace, double eps, std::size_t window);

}  // namespace cotrain
