#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cotrain {

// Upper bound on a classifier's error after i rounds of exchange, given the
// accumulated cross-disagreement surplus.
double xi_bound(double eps0, std::size_t l, std::size_t u, std::size_t round, double surplus);

struct ErrorBoundResult {
    double theta = 0.0;
    double delta = 0.0;
    double xi1 = 0.0;
    double xi2 = 0.0;
    bool theta_condition = false;  // theta > i * eps1^0 / 2
    bool delta_condition = false;  // delta > i * eps2^0 / 2
};

// cross12[k] = d(h1^i, h2^k), cross21[k] = d(h1^k, h2^i), eps1[k], eps2[k] for k < i.
ErrorBoundResult error_bounds(std::size_t l, std::size_t u, std::size_t round, double eps1_0, double eps2_0,
                               std::span<const double> cross12, std::span<const double> cross21,
                               std::span<const double> eps1, std::span<const double> eps2);

std::size_t required_labeled_count(double eps1_0, double eps2_0, double h1_size, double h2_size, double delta,
                                   double noise);

double initial_disagreement_threshold(double eps1_0, double eps2_0);

double expected_disagreement_cond_indep(double eps1, double eps2);

struct ExpansionMasses {
    double symmetric_difference = 0.0;
    double both = 0.0;
    double neither = 0.0;
};

// Masses under the uniform measure on {0, ..., universe_size-1}.
ExpansionMasses expansion_measure(std::span<const std::size_t> s1, std::span<const std::size_t> s2,
                                  std::size_t universe_size);

struct DisagreementPair {
    std::vector<int> h2;
    int construction_case = 0;  // 1: flip correct points only, 2: keep part of h1's errors
    std::vector<std::size_t> kept_errors;       // h1 errors that stay wrong
    std::vector<std::size_t> corrected_errors;  // h1 errors flipped to correct
    std::vector<std::size_t> new_errors;        // correct points flipped to wrong
};

// Builds h2 with error b and disagreement target_d against h1 on n equiprobable points.
DisagreementPair construct_disagreement_pair(std::span<const int> h1, std::span<const int> truth, double a, double b,
                                             double target_d);

}  // namespace cotrain
