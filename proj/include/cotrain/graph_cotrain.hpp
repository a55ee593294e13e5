#pragma once

#include <span>
#include <string>
#include <vector>

#include "cotrain/graph.hpp"

namespace cotrain {

struct GraphRound {
    std::vector<std::size_t> s1, s2;  // S_v^k at the start of the round
    std::vector<std::size_t> t1, t2;  // newly labeled in this round
    std::vector<Seed> seeds1, seeds2; // labels handed to view v by the other view
};

struct GraphCotrainResult {
    std::vector<std::size_t> initial_s1, initial_s2;
    std::vector<GraphRound> rounds;
    std::vector<double> f1, f2;  // final scores per view
    bool all_labeled = false;    // S1 = S2 = L u U at the end

    // f_v agrees with truth on every unlabeled node, in both views.
    bool correct_on(std::span<const int> truth, std::span<const std::size_t> unlabeled) const;
    std::string to_jsonl() const;
};

// labeled: (node, +1/-1); every other node is treated as unlabeled.
GraphCotrainResult graph_cotrain(const GraphMatrix& p1, const GraphMatrix& p2, std::span<const Seed> labeled);

struct NecessaryCondition {
    bool holds = false;
    std::vector<std::size_t> unreachable;
};

NecessaryCondition check_necessary_condition(const GraphMatrix& p1, const GraphMatrix& p2,
                                             std::span<const Seed> labeled);

enum class SuccessMode { perfect, nonperfect };

struct SuccessWitness {
    int round = -1;  // -1: initial propagation from L
    int view = 0;
    std::size_t component = 0;
    std::size_t node = 0;
    double positive = 0.0;
    double negative = 0.0;
    ContributionVerdict verdict = ContributionVerdict::incorrect;
};

struct SuccessCheck {
    bool predicts_success = false;
    bool reachability = false;
    std::vector<std::size_t> unreachable;
    std::vector<SuccessWitness> witnesses;  // nodes with negative >= positive
    std::size_t excluded_nodes = 0;         // exact ties
};

// Throws PreconditionError naming the first edge joining nodes of different truth.
void validate_perfect(const GraphMatrix& p, std::span<const int> truth);

SuccessCheck check_success(const GraphMatrix& p1, const GraphMatrix& p2, std::span<const Seed> labeled,
                           std::span<const int> truth, SuccessMode mode);

struct EpsilonGoodness {
    bool is_eps_good = false;
    std::vector<double> purity;  // per component of P
    bool seed_majority_condition = true;
    std::size_t components_checked = 0;
};

// view: which graph of the co-training context P plays (1 or 2).
EpsilonGoodness epsilon_goodness(const GraphMatrix& p, std::span<const int> truth, double eps, double gamma,
                                 const GraphCotrainResult* context = nullptr, int view = 1);

}  // namespace cotrain
