#include "cotrain/disagreement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "cotrain/errors.hpp"
#include "cotrain/rng.hpp"
#include "json.hpp"

namespace cotrain {

std::string to_string(SelectionStrategy s) { return s == SelectionStrategy::random ? "random" : "confident"; }

SelectionStrategy selection_from_string(const std::string& s) {
    if (s == "random") return SelectionStrategy::random;
    if (s == "confident") return SelectionStrategy::confident;
    throw ConfigError("unknown selection strategy '" + s + "'");
}

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::round_budget: return "round_budget";
        case StopReason::unlabeled_exhausted: return "unlabeled_exhausted";
        case StopReason::no_positive_in_pool: return "no_positive_in_pool";
    }
    return "?";
}

void ProcessConfig::validate() const {
    if (per_round() < 1) throw ConfigError("per-round counts c + d must be at least 1");
    if (pool_size < per_round()) throw ConfigError("pool size must be at least c + d");
}

LabelBatch select_from_pool(const ClassifierModel& model, std::span<const Example> pool, std::size_t c,
                            std::size_t d, SelectionStrategy strategy, std::uint64_t seed, int round) {
    struct Scored {
        std::size_t idx;
        double margin;
    };
    std::vector<Scored> pos, neg;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double m = model.margin(pool[i]);
        if (m > 0)
            pos.push_back({i, m});
        else if (m < 0)
            neg.push_back({i, m});
    }
    if (strategy == SelectionStrategy::confident) {
        std::sort(pos.begin(), pos.end(), [&](const Scored& a, const Scored& b) {
            return a.margin != b.margin ? a.margin > b.margin : pool[a.idx].id < pool[b.idx].id;
        });
        std::sort(neg.begin(), neg.end(), [&](const Scored& a, const Scored& b) {
            return a.margin != b.margin ? a.margin < b.margin : pool[a.idx].id < pool[b.idx].id;
        });
    } else {
        Rng rng(seed);
        rng.shuffle(pos);
        rng.shuffle(neg);
    }
    LabelBatch batch;
    batch.shortfall = pos.size() < c;
    batch.neg_shortfall = neg.size() < d;
    auto take = [&](const std::vector<Scored>& from, std::size_t k, int label) {
        for (std::size_t j = 0; j < std::min(k, from.size()); ++j) {
            Example e = pool[from[j].idx];
            e.label.reset();
            e.pseudo = PseudoLabel{label, round, model.view_id()};
            batch.examples.push_back(std::move(e));
        }
    };
    take(pos, c, 1);
    take(neg, d, -1);
    batch.positives = std::min(c, pos.size());
    batch.negatives = std::min(d, neg.size());
    return batch;
}

namespace {

std::vector<Example> draw_pool(const std::vector<Example>& unlabeled, std::size_t pool_size, std::uint64_t seed) {
    Rng rng(seed);
    auto idx = rng.sample_without_replacement(unlabeled.size(), pool_size);
    std::vector<Example> pool;
    pool.reserve(idx.size());
    for (auto i : idx) pool.push_back(unlabeled[i]);
    return pool;
}

void remove_ids(std::vector<Example>& unlabeled, const std::unordered_set<std::size_t>& ids) {
    unlabeled.erase(std::remove_if(unlabeled.begin(), unlabeled.end(),
                                   [&](const Example& e) { return ids.count(e.id) > 0; }),
                    unlabeled.end());
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

LabelBatch select_and_label(const ClassifierModel& model, std::vector<Example>& unlabeled, std::size_t pool_size,
                            std::size_t c, std::size_t d, SelectionStrategy strategy, std::uint64_t seed,
                            int round) {
    if (unlabeled.empty()) throw std::invalid_argument("select_and_label: empty unlabeled set");
    auto pool = draw_pool(unlabeled, pool_size, derive_seed(seed, 1));
    auto batch = select_from_pool(model, pool, c, d, strategy, derive_seed(seed, 2), round);
    std::unordered_set<std::size_t> chosen;
    for (const auto& e : batch.examples) chosen.insert(e.id);
    remove_ids(unlabeled, chosen);
    return batch;
}

ProcessResult run_disagreement_process(std::span<const Example> labeled, std::vector<Example> unlabeled,
                                       const ViewSchema& schema1, const ViewSchema& schema2,
                                       const LearnerPair& learners, const ProcessConfig& cfg,
                                       std::span<const Example> test) {
    cfg.validate();
    if (labeled.empty()) throw std::invalid_argument("run_disagreement_process: empty labeled set");
    if (unlabeled.empty()) throw std::invalid_argument("run_disagreement_process: empty unlabeled set");

    ProcessResult res;
    res.sigma1.assign(labeled.begin(), labeled.end());
    res.sigma2.assign(labeled.begin(), labeled.end());
    RoundTrace& tr = res.trace;
    tr.labeled_size = labeled.size();
    tr.per_round = cfg.per_round();
    tr.confident_caveat = cfg.selection == SelectionStrategy::confident;

    const std::vector<Example> frozen = unlabeled;
    std::vector<ClassifierModel> hist1, hist2;
    std::vector<double> err1_hist, err2_hist, xi1_hist, xi2_hist;

    for (std::size_t i = 0;; ++i) {
        auto h1 = train_erm(view_sample(res.sigma1, 1), schema1, learners.kind1, 1, learners.options1);
        auto h2 = train_erm(view_sample(res.sigma2, 2), schema2, learners.kind2, 2, learners.options2);

        RoundRecord rec;
        rec.round = i;
        rec.sigma1_size = res.sigma1.size();
        rec.sigma2_size = res.sigma2.size();
        rec.unlabeled_left = unlabeled.size();
        rec.err1 = test.empty() ? nan() : error_rate(h1, test).error;
        rec.err2 = test.empty() ? nan() : error_rate(h2, test).error;

        std::span<const Example> eval = cfg.frozen_eval_sample ? std::span<const Example>(frozen)
                                                               : std::span<const Example>(unlabeled);
        if (eval.empty()) eval = frozen;
        auto m1 = margins_on(h1, eval);
        auto m2 = margins_on(h2, eval);
        rec.d12 = disagreement(m1, m2);
        for (std::size_t k = 0; k < i; ++k) {
            if (cfg.frozen_eval_sample) {
                rec.cross12.push_back(disagreement(m1, tr.margins2[k]));
                rec.cross21.push_back(disagreement(tr.margins1[k], m2));
            } else {
                rec.cross12.push_back(disagreement(m1, margins_on(hist2[k], eval)));
                rec.cross21.push_back(disagreement(margins_on(hist1[k], eval), m2));
            }
        }

        err1_hist.push_back(rec.err1);
        err2_hist.push_back(rec.err2);
        const std::size_t u = cfg.per_round();
        const double e10 = err1_hist[0], e20 = err2_hist[0];
        // Unknown errors of earlier rounds are replaced by their bounds.
        std::vector<double> est1(xi1_hist), est2(xi2_hist);
        if (!est1.empty()) {
            est1[0] = e10;
            est2[0] = e20;
        }
        rec.bounds = error_bounds(labeled.size(), u, i, e10, e20, rec.cross12, rec.cross21, est1, est2);
        rec.oracle_bounds =
            error_bounds(labeled.size(), u, i, e10, e20, rec.cross12, rec.cross21, err1_hist, err2_hist);
        xi1_hist.push_back(rec.bounds.xi1);
        xi2_hist.push_back(rec.bounds.xi2);

        tr.margins1.push_back(std::move(m1));
        tr.margins2.push_back(std::move(m2));
        if (!cfg.frozen_eval_sample) {
            hist1.push_back(h1);
            hist2.push_back(h2);
        }
        res.model1 = h1;
        res.model2 = h2;

        auto finish = [&](StopReason why) {
            tr.rounds.push_back(std::move(rec));
            tr.stop = why;
        };
        if (i == cfg.rounds) {
            finish(StopReason::round_budget);
            break;
        }
        if (unlabeled.empty()) {
            finish(StopReason::unlabeled_exhausted);
            break;
        }
        const std::uint64_t round_seed = derive_seed(cfg.seed, i);
        auto pool = draw_pool(unlabeled, cfg.pool_size, derive_seed(round_seed, 1));
        const std::uint64_t pick_seed = derive_seed(round_seed, 2);
        auto b1 = select_from_pool(h1, pool, cfg.per_round_pos, cfg.per_round_neg, cfg.selection, pick_seed, int(i));
        auto b2 = select_from_pool(h2, pool, cfg.per_round_pos, cfg.per_round_neg, cfg.selection, pick_seed, int(i));
        rec.shortfall1 = b1.shortfall;
        rec.shortfall2 = b2.shortfall;
        if (b1.positives == 0 || b2.positives == 0) {
            finish(StopReason::no_positive_in_pool);
            break;
        }
        std::unordered_set<std::size_t> chosen;
        for (auto& e : b1.examples) {
            chosen.insert(e.id);
            res.sigma2.push_back(e);
        }
        for (auto& e : b2.examples) {
            chosen.insert(e.id);
            res.sigma1.push_back(e);
        }
        rec.added_to_sigma2 = b1.examples.size();
        rec.added_to_sigma1 = b2.examples.size();
        remove_ids(unlabeled, chosen);
        tr.rounds.push_back(std::move(rec));
    }
    return res;
}

std::string RoundTrace::round_json(std::size_t i) const {
    const RoundRecord& r = rounds.at(i);
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    auto bounds = [&](const ErrorBoundResult& b) {
        return nlohmann::json{{"theta", num(b.theta)},
                              {"delta", num(b.delta)},
                              {"xi1", num(b.xi1)},
                              {"xi2", num(b.xi2)},
                              {"theta_condition", b.theta_condition},
                              {"delta_condition", b.delta_condition}};
    };
    nlohmann::json j;
    j["round"] = r.round;
    j["err1"] = num(r.err1);
    j["err2"] = num(r.err2);
    j["d12"] = r.d12;
    j["cross12"] = r.cross12;
    j["cross21"] = r.cross21;
    j["bounds"] = bounds(r.bounds);
    j["oracle_bounds"] = bounds(r.oracle_bounds);
    j["sigma1_size"] = r.sigma1_size;
    j["sigma2_size"] = r.sigma2_size;
    j["unlabeled_left"] = r.unlabeled_left;
    j["added_to_sigma1"] = r.added_to_sigma1;
    j["added_to_sigma2"] = r.added_to_sigma2;
    j["shortfall1"] = r.shortfall1;
    j["shortfall2"] = r.shortfall2;
    j["labeled_size"] = labeled_size;
    j["per_round"] = per_round;
    j["confident_caveat"] = confident_caveat;
    if (i + 1 == rounds.size()) j["stop"] = to_string(stop);
    return j.dump();
}

std::string RoundTrace::to_jsonl() const {
    std::string out;
    for (std::size_t i = 0; i < rounds.size(); ++i) out += round_json(i) + "\n";
    return out;
}

std::string RoundTrace::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "round,err1,err2,disagreement\n";
    for (const auto& r : rounds) os << r.round << ',' << r.err1 << ',' << r.err2 << ',' << r.d12 << '\n';
    return os.str();
}

ConvergenceResult convergence_monitor(const RoundTrace& trace, double eps, std::size_t window) {
    ConvergenceResult out;
    const std::size_t T = trace.size();
    if (window == 0 || T < window) return out;
    const bool have_margins = trace.margins1.size() == T && trace.margins2.size() == T;
    for (std::size_t N = 0; N + window <= T; ++N) {
        bool ok = true;
        for (std::size_t t = N + 1; t < T && ok; ++t) {
            if (std::abs(trace.rounds[t].d12 - trace.rounds[N].d12) > eps) ok = false;
            if (ok && have_margins) {
                if (disagreement(trace.margins1[t], trace.margins1[N]) > eps) ok = false;
                if (disagreement(trace.margins2[t], trace.margins2[N]) > eps) ok = false;
            }
        }
        if (ok) {
            out.converged = true;
            out.round = N;
            return out;
        }
    }
    return out;
}

}  // namespace cotrain
