#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "cotrain/dataset.hpp"
#include "cotrain/learners.hpp"

namespace cotrain {

// sign(f1 + f2); exact zero abstains.
int combine_margins(double f1, double f2);

struct GainRisk {
    double c_gain = 0.0;  // sum over DIS of |f_G| / n
    double c_risk = 0.0;  // sum over DIS of |f_R| / n
    double dis_mass = 0.0;
    std::size_t dis_count = 0;
    std::size_t abstentions = 0;  // DIS members where a margin is exactly 0; left out of both sums
    bool empty = true;
    std::vector<double> gain_margins;  // |f_G| per usable DIS member
    std::vector<double> risk_margins;  // |f_R|, same order
};

GainRisk confidence_gain_risk(std::span<const double> f1, std::span<const double> f2, std::span<const int> truth);
GainRisk confidence_gain_risk(const ClassifierModel& m1, const ClassifierModel& m2, std::span<const Example> sample);

struct BoundPair {
    double lower = 0.0;
    double upper = 0.0;
    bool lower_clamped = false;  // d exceeded err1 + err2
    bool beats_better_single = false;
};

// risk_moment: sum over DIS of |f_R|^k divided by the full sample size.
BoundPair combination_bounds(double err1, double err2, double dis_mass, double c_t, double k, double risk_moment);

struct TsybakovFit {
    double c_t = 1.0;
    double k = 0.0;
    bool degenerate = false;
    std::vector<double> t;    // evaluation points (deciles of the sample)
    std::vector<double> cdf;  // P(|f_G| < t) at each point
    // C_T t^k >= cdf at every evaluation point
    bool majorizes() const;
};

// Envelope C_T t^k over the empirical CDF of |f_G| on DIS. Needs 10 samples
// unless every value is equal.
TsybakovFit tsybakov_fit(std::span<const double> gain_margins);

double coreg_loss(double risk1, double risk2, double norm1, double norm2, double disagreement_u,
                  const std::array<double, 3>& alpha);
double coreg_loss(const ClassifierModel& m1, const ClassifierModel& m2, std::span<const Example> labeled,
                  std::span<const Example> unlabeled, const std::array<double, 3>& alpha);

// A member of a finite hypothesis grid, described by its margins.
struct GridHypothesis {
    std::string name;
    std::vector<double> margins_labeled;
    std::vector<double> margins_unlabeled;
    std::vector<double> margins_selection;  // optional: picks the pair; falls back to the unlabeled margins
    double norm = 1.0;
};

struct CoregPairResult {
    std::size_t g1 = 0, g2 = 0;  // indices of the minimum-disagreement ERM pair
    double g_pair_loss = 0.0;
    double optimal_pair_loss = 0.0;
    bool holds = false;
    std::size_t erm_count1 = 0, erm_count2 = 0;
};

// Filters each grid to the members of minimum empirical risk on L (margin * y <= 0
// counts as a loss), picks the pair with least disagreement, and compares the
// co-regularized losses. The designated optimal pair must survive the filter.
CoregPairResult coreg_pair_check(std::span<const GridHypothesis> grid1, std::span<const GridHypothesis> grid2,
                        std::span<const int> labels, std::size_t optimal1, std::size_t optimal2,
                        const std::array<double, 3>& alpha);

struct CombinationReport {
    double err1 = 0.0, err2 = 0.0;  // margin * y <= 0 counts as an error
    double err_com = 0.0;
    double lower_bound = 0.0;
    double upper_bound = 0.0;
    double c_gain = 0.0, c_risk = 0.0;
    double c_t = 1.0, k = 0.0;
    bool beats_better_single = false;
    bool lower_clamped = false;
    bool fit_available = false;
    double dis_mass = 0.0;
    std::size_t n = 0;
    std::size_t dis_abstentions = 0;

    std::string to_json() const;
};

CombinationReport analyze_combination(std::span<const double> f1, std::span<const double> f2,
                                      std::span<const int> truth);

}  // namespace cotrain
