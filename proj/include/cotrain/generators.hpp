#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cotrain/dataset.hpp"
#include "cotrain/graph.hpp"

namespace cotrain {

enum class Region { view1_only, view2_only, both, neither };

// Ground truth travelling next to a generated dataset. Only evaluation code
// should read it; indices follow example ids.
struct Oracle {
    std::vector<int> truth;
    std::vector<double> posterior1, posterior2;  // P(y=+1 | x_v)
    std::vector<double> bayes_margin1, bayes_margin2;  // 2 * posterior - 1
    std::vector<Region> region;  // insufficient-view generator only
    std::vector<double> w_star1, w_star2;  // uniform-ball generator only

    const std::vector<double>& posterior(int v) const { return v == 1 ? posterior1 : posterior2; }
    const std::vector<double>& bayes_margin(int v) const { return v == 1 ? bayes_margin1 : bayes_margin2; }
    bool has_posteriors() const { return !posterior1.empty(); }
    std::string to_json() const;
};

struct GeneratedData {
    TwoViewDataset data;
    Oracle oracle;
};

struct CondIndependentSpec {
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    double error1 = 0.1, error2 = 0.2;  // Bayes error of each view
    std::size_t dim1 = 2, dim2 = 2;
};

// y uniform; view v holds dim_v Gaussian coordinates with mean y * mu_v so the
// per-view Bayes rule sign(sum x) has the requested error.
GeneratedData gen_cond_independent(const CondIndependentSpec& spec);

struct UniformBallSpec {
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    std::size_t dim1 = 2, dim2 = 2;
    double noise = 0.0;  // label flip probability
    std::vector<double> w_star1, w_star2;  // random unit vectors when empty
};

GeneratedData gen_uniform_ball_linear(const UniformBallSpec& spec);

struct InsufficientSpec {
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    double mu1 = 0.5, mu2 = 0.5;  // informative mass per view
    double nu = 1.0;              // mass informative in exactly one view
    bool complementary = false;   // forces coverage 1 (nu derived from mu1, mu2)
    std::size_t dim1 = 1, dim2 = 1;
    double uninformative_halfwidth = 0.25;
};

struct RegionMasses {
    double view1_only = 0, view2_only = 0, both = 0, neither = 0;
};

RegionMasses insufficient_regions(const InsufficientSpec& spec);
GeneratedData gen_insufficient_two_view(const InsufficientSpec& spec);

// Margin pairs for combination analysis: outside the disagreement region both
// margins share a side; inside it the correct and wrong magnitudes are drawn
// independently.
struct MarginPairSpec {
    std::size_t n = 10000;
    std::uint64_t seed = 0;
    double both_right = 0.6, both_wrong = 0.1;  // the rest disagrees
    double gain_exponent = 1.0;  // |f_G| = U^(1/k), so P(|f_G| < t) = t^k
    double risk_max = 0.6;       // |f_R| uniform on (0, risk_max]
};

struct MarginPairs {
    std::vector<double> f1, f2;
    std::vector<int> truth;
};

MarginPairs gen_margin_pairs(const MarginPairSpec& spec);

struct StructuredGraphs {
    GraphMatrix p1, p2;
    std::vector<int> truth;
    std::vector<std::size_t> labeled;

    std::vector<Seed> labeled_seeds() const;
    std::vector<std::size_t> unlabeled() const;
};

struct StructuredGraphSpec {
    std::size_t n = 4;
    std::vector<std::vector<std::size_t>> components1, components2;
    std::vector<int> truth;        // when empty, derived from purity1
    std::vector<double> purity1;   // per component of P1
    std::vector<std::size_t> labeled;
    bool random_weights = false;
    std::uint64_t seed = 0;
};

// Truth labels with component c of the partition holding round(purity*size)
// nodes of its majority label (+1 for even c, -1 for odd c).
std::vector<int> truth_from_purity(std::size_t n, const std::vector<std::vector<std::size_t>>& components,
                                   const std::vector<double>& purity);

StructuredGraphs gen_structured_graphs(const StructuredGraphSpec& spec);

// All set partitions of {0..n-1} with at most max_blocks blocks.
std::vector<std::vector<std::vector<std::size_t>>> set_partitions(std::size_t n, std::size_t max_blocks);

// Visits every perfect two-view instance on n nodes: all pairs of partitions
// with at most max_blocks components, truth constant on the components of the
// joined partition (alternating signs), and every nonempty labeled subset.
// Returns the number of instances visited.
std::size_t enumerate_structured_graphs(std::size_t n, std::size_t max_blocks,
                                        const std::function<void(const StructuredGraphs&)>& visit);

}  // namespace cotrain
