#include "cotrain/combiner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cotrain/errors.hpp"
#include "json.hpp"

namespace cotrain {

int combine_margins(double f1, double f2) {
    const double s = f1 + f2;
    return s > 0 ? 1 : (s < 0 ? -1 : 0);
}

GainRisk confidence_gain_risk(std::span<const double> f1, std::span<const double> f2, std::span<const int> truth) {
    if (f1.size() != f2.size() || f1.size() != truth.size())
        throw PreconditionError("margins and labels differ in length");
    if (f1.empty()) throw EvaluationError("confidence gain needs a nonempty sample");
    GainRisk g;
    const double n = double(f1.size());
    for (std::size_t i = 0; i < f1.size(); ++i) {
        if (sign_of(f1[i]) == sign_of(f2[i])) continue;
        ++g.dis_count;
        if (f1[i] == 0.0 || f2[i] == 0.0) {
            ++g.abstentions;
            continue;
        }
        const bool first_right = f1[i] * truth[i] > 0;
        const double good = std::abs(first_right ? f1[i] : f2[i]);
        const double bad = std::abs(first_right ? f2[i] : f1[i]);
        g.gain_margins.push_back(good);
        g.risk_margins.push_back(bad);
        g.c_gain += good;
        g.c_risk += bad;
    }
    g.c_gain /= n;
    g.c_risk /= n;
    g.dis_mass = double(g.dis_count) / n;
    g.empty = g.dis_count == 0;
    return g;
}

GainRisk confidence_gain_risk(const ClassifierModel& m1, const ClassifierModel& m2, std::span<const Example> sample) {
    std::vector<double> a, b;
    std::vector<int> y;
    for (const auto& e : sample) {
        if (!e.label) throw PreconditionError("confidence gain needs labeled examples");
        a.push_back(m1.margin(e));
        b.push_back(m2.margin(e));
        y.push_back(*e.label);
    }
    return confidence_gain_risk(a, b, y);
}

BoundPair combination_bounds(double err1, double err2, double dis_mass, double c_t, double k, double risk_moment) {
    if (c_t < 0.0 || k < 0.0 || risk_moment < 0.0) throw DomainError("envelope parameters must be nonnegative");
    BoundPair b;
    b.lower = (err1 + err2 - dis_mass) / 2.0;
    if (b.lower < 0.0) {
        b.lower = 0.0;
        b.lower_clamped = true;
    }
    b.upper = b.lower + c_t * risk_moment;
    // Stated for the better classifier in the role of f1.
    const double lo = std::min(err1, err2), hi = std::max(err1, err2);
    b.beats_better_single = c_t * risk_moment < (lo - hi + dis_mass) / 2.0;
    return b;
}

bool TsybakovFit::majorizes() const {
    for (std::size_t j = 0; j < t.size(); ++j)
        if (c_t * std::pow(t[j], k) < cdf[j] - 1e-12) return false;
    return true;
}

TsybakovFit tsybakov_fit(std::span<const double> gain_margins) {
    TsybakovFit fit;
    if (gain_margins.empty()) throw EvaluationError("envelope fit needs samples");
    std::vector<double> v(gain_margins.begin(), gain_margins.end());
    std::sort(v.begin(), v.end());
    if (v.front() == v.back()) {
        fit.degenerate = true;
        fit.t = {v.front()};
        fit.cdf = {0.0};
        return fit;
    }
    if (v.size() < 10) throw EvaluationError("envelope fit needs at least 10 samples");

    const double n = double(v.size());
    for (int j = 1; j <= 10; ++j) {
        const std::size_t idx = std::min(v.size() - 1, std::size_t(std::ceil(j * n / 10.0)) - 1);
        const double tj = v[idx];
        const double below = double(std::lower_bound(v.begin(), v.end(), tj) - v.begin());
        fit.t.push_back(tj);
        fit.cdf.push_back(below / n);
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (std::size_t j = 0; j < fit.t.size(); ++j) {
        if (fit.cdf[j] <= 0.0 || fit.t[j] <= 0.0) continue;
        const double x = std::log(fit.t[j]), y = std::log(fit.cdf[j]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    double c_reg = 0.0;
    const double denom = double(m) * sxx - sx * sx;
    if (m >= 2 && std::abs(denom) > 1e-300) {
        fit.k = std::max(0.0, (double(m) * sxy - sx * sy) / denom);
        c_reg = std::exp((sy - fit.k * sx) / double(m));
    }
    double need = 0.0;
    for (std::size_t j = 0; j < fit.t.size(); ++j) {
        if (fit.cdf[j] <= 0.0) continue;
        need = std::max(need, fit.cdf[j] / std::pow(fit.t[j], fit.k));
    }
    fit.c_t = std::max(c_reg, need);
    if (fit.c_t <= 0.0) fit.c_t = std::numeric_limits<double>::min();
    return fit;
}

double coreg_loss(double risk1, double risk2, double norm1, double norm2, double disagreement_u,
                  const std::array<double, 3>& alpha) {
    return 0.5 * (risk1 + risk2) + alpha[0] * norm1 + alpha[1] * norm2 + alpha[2] * disagreement_u;
}

namespace {

double margin_risk(std::span<const double> margins, std::span<const int> labels) {
    if (margins.size() != labels.size()) throw PreconditionError("labeled margins and labels differ in length");
    if (margins.empty()) throw EvaluationError("empirical risk needs labeled data");
    std::size_t bad = 0;
    for (std::size_t i = 0; i < margins.size(); ++i) bad += margins[i] * labels[i] <= 0.0;
    return double(bad) / double(margins.size());
}

double sign_disagreement(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw PreconditionError("margin vectors differ in length");
    if (a.empty()) return 0.0;
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += sign_of(a[i]) != sign_of(b[i]);
    return double(d) / double(a.size());
}

}  // namespace

double coreg_loss(const ClassifierModel& m1, const ClassifierModel& m2, std::span<const Example> labeled,
                  std::span<const Example> unlabeled, const std::array<double, 3>& alpha) {
    std::vector<double> a, b, ua, ub;
    std::vector<int> y;
    for (const auto& e : labeled) {
        if (!e.label) throw PreconditionError("labeled set contains an unlabeled example");
        a.push_back(m1.margin(e));
        b.push_back(m2.margin(e));
        y.push_back(*e.label);
    }
    for (const auto& e : unlabeled) {
        ua.push_back(m1.margin(e));
        ub.push_back(m2.margin(e));
    }
    return coreg_loss(margin_risk(a, y), margin_risk(b, y), m1.norm(), m2.norm(), sign_disagreement(ua, ub), alpha);
}

CoregPairResult coreg_pair_check(std::span<const GridHypothesis> grid1, std::span<const GridHypothesis> grid2,
                        std::span<const int> labels, std::size_t optimal1, std::size_t optimal2,
                        const std::array<double, 3>& alpha) {
    if (optimal1 >= grid1.size() || optimal2 >= grid2.size()) throw PreconditionError("optimal pair not in the grid");
    auto erm = [&](std::span<const GridHypothesis> grid, std::vector<double>& risks) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& h : grid) {
            risks.push_back(margin_risk(h.margins_labeled, labels));
            best = std::min(best, risks.back());
        }
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (risks[i] <= best + 1e-12) keep.push_back(i);
        return keep;
    };
    std::vector<double> r1, r2;
    const auto e1 = erm(grid1, r1), e2 = erm(grid2, r2);
    if (e1.empty() || e2.empty()) throw PreconditionError("no empirical risk minimizer in the grid");
    if (std::find(e1.begin(), e1.end(), optimal1) == e1.end() || std::find(e2.begin(), e2.end(), optimal2) == e2.end())
        throw PreconditionError("designated optimal pair does not minimize empirical risk on L");

    auto selection = [](const GridHypothesis& h) -> const std::vector<double>& {
        return h.margins_selection.empty() ? h.margins_unlabeled : h.margins_selection;
    };
    CoregPairResult out;
    out.erm_count1 = e1.size();
    out.erm_count2 = e2.size();
    double best = std::numeric_limits<double>::infinity();
    for (auto i : e1)
        for (auto j : e2) {
            const double d = sign_disagreement(selection(grid1[i]), selection(grid2[j]));
            if (d < best) {
                best = d;
                out.g1 = i;
                out.g2 = j;
            }
        }
    auto loss = [&](std::size_t i, std::size_t j) {
        return coreg_loss(r1[i], r2[j], grid1[i].norm, grid2[j].norm,
                          sign_disagreement(grid1[i].margins_unlabeled, grid2[j].margins_unlabeled), alpha);
    };
    out.g_pair_loss = loss(out.g1, out.g2);
    out.optimal_pair_loss = loss(optimal1, optimal2);
    out.holds = out.g_pair_loss <= out.optimal_pair_loss;
    return out;
}

CombinationReport analyze_combination(std::span<const double> f1, std::span<const double> f2,
                                      std::span<const int> truth) {
    const auto gr = confidence_gain_risk(f1, f2, truth);
    CombinationReport r;
    r.n = f1.size();
    std::size_t e1 = 0, e2 = 0, ec = 0;
    for (std::size_t i = 0; i < r.n; ++i) {
        e1 += f1[i] * truth[i] <= 0.0;
        e2 += f2[i] * truth[i] <= 0.0;
        ec += (f1[i] + f2[i]) * truth[i] <= 0.0;
    }
    const double n = double(r.n);
    r.err1 = double(e1) / n;
    r.err2 = double(e2) / n;
    r.err_com = double(ec) / n;
    r.c_gain = gr.c_gain;
    r.c_risk = gr.c_risk;
    r.dis_mass = gr.dis_mass;
    r.dis_abstentions = gr.abstentions;

    double moment = 0.0;
    try {
        const auto fit = tsybakov_fit(gr.gain_margins);
        r.c_t = fit.c_t;
        r.k = fit.k;
        r.fit_available = true;
        for (double m : gr.risk_margins) moment += std::pow(m, r.k);
        moment /= n;
    } catch (const EvaluationError&) {
        r.fit_available = false;
    }
    const auto b = combination_bounds(r.err1, r.err2, r.dis_mass, r.c_t, r.k, moment);
    r.lower_bound = b.lower;
    r.lower_clamped = b.lower_clamped;
    if (r.fit_available) {
        r.upper_bound = b.upper;
        r.beats_better_single = b.beats_better_single;
    } else {
        // Without a fit the disagreed region can only be bounded by its mass.
        r.upper_bound = b.lower + r.dis_mass;
        r.beats_better_single = false;
    }
    return r;
}

std::string CombinationReport::to_json() const {
    nlohmann::json j{{"err1", err1},
                     {"err2", err2},
                     {"err_com", err_com},
                     {"lower_bound", lower_bound},
                     {"upper_bound", upper_bound},
                     {"C_G", c_gain},
                     {"C_R", c_risk},
                     {"C_T", c_t},
                     {"k", k},
                     {"beats_better_single", beats_better_single},
                     {"lower_clamped", lower_clamped},
                     {"fit_available", fit_available},
                     {"dis_mass", dis_mass},
                     {"dis_abstentions", dis_abstentions},
                     {"n", n}};
    return j.dump();
}

}  // namespace cotrain
