#include "cotrain/graph_cotrain.hpp"

#include <algorithm>
#include <sstream>

#include "cotrain/errors.hpp"
#include "json.hpp"

namespace cotrain {

namespace {

double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

std::vector<std::size_t> members(const std::vector<char>& in) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < in.size(); ++i)
        if (in[i]) out.push_back(i);
    return out;
}

struct ViewState {
    std::vector<double> f;
    std::vector<char> in_s;
};

// One propagation step for a view: its own labeled set stays clamped at its
// current sign and the other view's extra nodes enter as seeds.
struct StepOutcome {
    std::vector<Seed> seeds;
    std::vector<Seed> clamp;
    std::vector<std::size_t> newly;
    PropagationResult result;
};

StepOutcome propagate_step(const GraphMatrix& p, const ViewState& self, const ViewState& other) {
    StepOutcome out;
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (self.in_s[i])
            out.clamp.push_back({i, sgn(self.f[i])});
        else if (other.in_s[i])
            out.seeds.push_back({i, sgn(other.f[i])});
    }
    std::vector<Seed> all = out.clamp;
    all.insert(all.end(), out.seeds.begin(), out.seeds.end());
    out.result = propagate_labels(p, all);
    for (std::size_t i = 0; i < n; ++i)
        if (!self.in_s[i] && out.result.f[i] != 0.0) out.newly.push_back(i);
    return out;
}

}  // namespace

bool GraphCotrainResult::correct_on(std::span<const int> truth, std::span<const std::size_t> unlabeled) const {
    for (auto t : unlabeled)
        if (!(f1[t] * truth[t] > 0 && f2[t] * truth[t] > 0)) return false;
    return true;
}

std::string GraphCotrainResult::to_jsonl() const {
    std::string out;
    for (std::size_t k = 0; k < rounds.size(); ++k) {
        const auto& r = rounds[k];
        nlohmann::json j;
        j["round"] = k;
        j["s1_size"] = r.s1.size();
        j["s2_size"] = r.s2.size();
        j["newly_labeled_view1"] = r.t1;
        j["newly_labeled_view2"] = r.t2;
        out += j.dump() + "\n";
    }
    return out;
}

GraphCotrainResult graph_cotrain(const GraphMatrix& p1, const GraphMatrix& p2, std::span<const Seed> labeled) {
    if (p1.size() != p2.size()) throw std::invalid_argument("shape error: graphs differ in size");
    const std::size_t n = p1.size();
    GraphCotrainResult res;

    auto init = [&](const GraphMatrix& p) {
        ViewState s;
        auto r = propagate_labels(p, labeled);
        s.f = r.f;
        s.in_s.assign(n, 0);
        for (auto i : r.labeled_set) s.in_s[i] = 1;
        for (const auto& l : labeled) s.in_s[l.node] = 1;
        return s;
    };
    ViewState v1 = init(p1), v2 = init(p2);
    res.initial_s1 = members(v1.in_s);
    res.initial_s2 = members(v2.in_s);

    // Each productive round labels at least one new node, so n + 1 rounds bound the loop.
    for (std::size_t guard = 0; guard <= n + 1; ++guard) {
        if (v1.in_s == v2.in_s) break;
        GraphRound round;
        round.s1 = members(v1.in_s);
        round.s2 = members(v2.in_s);
        auto step1 = propagate_step(p1, v1, v2);
        auto step2 = propagate_step(p2, v2, v1);
        round.seeds1 = step1.seeds;
        round.seeds2 = step2.seeds;
        round.t1 = step1.newly;
        round.t2 = step2.newly;
        for (auto i : step1.newly) {
            v1.f[i] = step1.result.f[i];
            v1.in_s[i] = 1;
        }
        for (auto i : step2.newly) {
            v2.f[i] = step2.result.f[i];
            v2.in_s[i] = 1;
        }
        res.rounds.push_back(std::move(round));
    }
    res.f1 = v1.f;
    res.f2 = v2.f;
    res.all_labeled = std::all_of(v1.in_s.begin(), v1.in_s.end(), [](char c) { return c; }) &&
                      std::all_of(v2.in_s.begin(), v2.in_s.end(), [](char c) { return c; });
    return res;
}

NecessaryCondition check_necessary_condition(const GraphMatrix& p1, const GraphMatrix& p2,
                                             std::span<const Seed> labeled) {
    const auto pc = combinative_graph(p1, p2);
    std::vector<char> has_label(pc.components().size(), 0), is_l(pc.size(), 0);
    for (const auto& l : labeled) {
        has_label[pc.component_of(l.node)] = 1;
        is_l[l.node] = 1;
    }
    NecessaryCondition out;
    for (std::size_t i = 0; i < pc.size(); ++i)
        if (!is_l[i] && !has_label[pc.component_of(i)]) out.unreachable.push_back(i);
    out.holds = out.unreachable.empty();
    return out;
}

void validate_perfect(const GraphMatrix& p, std::span<const int> truth) {
    if (truth.size() != p.size()) throw PreconditionError("truth labels must cover every node");
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j)
            if (p.weights()(Eigen::Index(i), Eigen::Index(j)) > 0 && truth[i] != truth[j])
                throw PreconditionError("graph is not perfect: edge " + std::to_string(i) + " - " + std::to_string(j) +
                                        " joins different labels");
}

SuccessCheck check_success(const GraphMatrix& p1, const GraphMatrix& p2, std::span<const Seed> labeled,
                           std::span<const int> truth, SuccessMode mode) {
    if (truth.size() != p1.size()) throw PreconditionError("truth labels must cover every node");
    SuccessCheck out;
    if (mode == SuccessMode::perfect) {
        validate_perfect(p1, truth);
        validate_perfect(p2, truth);
    }
    auto nc = check_necessary_condition(p1, p2, labeled);
    out.reachability = nc.holds;
    out.unreachable = nc.unreachable;
    if (mode == SuccessMode::perfect) {
        out.predicts_success = nc.holds;
        return out;
    }

    auto record = [&](const ContributionReport& rep, int round, int view, const std::vector<char>& consider) {
        for (const auto& c : rep.nodes) {
            if (!consider[c.node]) continue;
            if (c.verdict == ContributionVerdict::excluded) ++out.excluded_nodes;
            if (c.verdict == ContributionVerdict::incorrect || c.verdict == ContributionVerdict::excluded)
                out.witnesses.push_back({round, view, c.component, c.node, c.positive, c.negative, c.verdict});
        }
    };

    const std::size_t n = p1.size();
    std::vector<char> unl(n, 1);
    for (const auto& l : labeled) unl[l.node] = 0;
    const auto run = graph_cotrain(p1, p2, labeled);
    record(compute_contributions(p1, labeled, truth), -1, 1, unl);
    record(compute_contributions(p2, labeled, truth), -1, 2, unl);

    for (std::size_t k = 0; k < run.rounds.size(); ++k) {
        const auto& r = run.rounds[k];
        for (int view = 1; view <= 2; ++view) {
            const GraphMatrix& p = view == 1 ? p1 : p2;
            const auto& s = view == 1 ? r.s1 : r.s2;
            const auto& seeds = view == 1 ? r.seeds1 : r.seeds2;
            if (seeds.empty()) continue;
            std::vector<char> in_s(n, 0), is_seed(n, 0);
            for (auto i : s) in_s[i] = 1;
            for (const auto& sd : seeds) is_seed[sd.node] = 1;
            // Components outside S_v^k that received at least one seed.
            std::vector<char> touched(p.components().size(), 0), clean(p.components().size(), 1);
            for (std::size_t i = 0; i < n; ++i) {
                if (in_s[i]) clean[p.component_of(i)] = 0;
                if (is_seed[i]) touched[p.component_of(i)] = 1;
            }
            std::vector<char> consider(n, 0);
            for (std::size_t i = 0; i < n; ++i) {
                const auto c = p.component_of(i);
                consider[i] = touched[c] && clean[c] && !is_seed[i];
            }
            record(compute_contributions(p, seeds, truth), int(k), view, consider);
        }
    }
    bool dominated = std::none_of(out.witnesses.begin(), out.witnesses.end(), [](const SuccessWitness& w) {
        return w.verdict == ContributionVerdict::incorrect;
    });
    out.predicts_success = nc.holds && dominated;
    return out;
}

EpsilonGoodness epsilon_goodness(const GraphMatrix& p, std::span<const int> truth, double eps, double gamma,
                                 const GraphCotrainResult* context, int view) {
    if (eps < 0.0 || eps >= 1.0) throw DomainError("epsilon must lie in [0,1)");
    if (truth.size() != p.size()) throw PreconditionError("truth labels must cover every node");
    EpsilonGoodness out;
    const auto& comps = p.components();
    std::vector<int> majority(comps.size(), -1);
    out.is_eps_good = true;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        std::size_t pos = 0;
        for (auto i : comps[c]) pos += truth[i] > 0;
        const std::size_t neg = comps[c].size() - pos;
        const double pur = double(std::max(pos, neg)) / double(comps[c].size());
        out.purity.push_back(pur);
        majority[c] = pos > neg ? 1 : -1;
        if (pur < 1.0 - eps - 1e-12) out.is_eps_good = false;
    }
    if (!context) return out;

    const std::size_t n = p.size();
    for (const auto& r : context->rounds) {
        const auto& s = view == 1 ? r.s1 : r.s2;
        const auto& seeds = view == 1 ? r.seeds1 : r.seeds2;
        std::vector<char> clean(comps.size(), 1);
        for (auto i : s) clean[p.component_of(i)] = 0;
        std::vector<std::size_t> agree(comps.size(), 0), against(comps.size(), 0);
        std::vector<char> touched(comps.size(), 0);
        for (const auto& sd : seeds) {
            if (sd.node >= n) continue;
            const auto c = p.component_of(sd.node);
            touched[c] = 1;
            if (sd.value * majority[c] > 0)
                ++agree[c];
            else if (sd.value * majority[c] < 0)
                ++against[c];
        }
        for (std::size_t c = 0; c < comps.size(); ++c) {
            if (!touched[c] || !clean[c]) continue;
            ++out.components_checked;
            const double size = double(comps[c].size());
            if (!(double(agree[c]) / size > double(against[c]) / size + gamma)) out.seed_majority_condition = false;
        }
    }
    return out;
}

}  // namespace cotrain
