#include "cotrain/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "cotrain/combiner.hpp"
#include "cotrain/disagreement.hpp"
#include "cotrain/errors.hpp"
#include "cotrain/generators.hpp"
#include "cotrain/graph_cotrain.hpp"
#include "cotrain/insufficient.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cotrain {

std::string to_string(Command c) {
    switch (c) {
        case Command::gen_data: return "gen-data";
        case Command::run_disagreement: return "run-disagreement";
        case Command::run_graph: return "run-graph";
        case Command::run_insufficient: return "run-insufficient";
        case Command::run_combination: return "run-combination";
        case Command::report: return "report";
    }
    return "?";
}

Command command_from_string(const std::string& s) {
    for (auto c : {Command::gen_data, Command::run_disagreement, Command::run_graph, Command::run_insufficient,
                   Command::run_combination, Command::report})
        if (to_string(c) == s) return c;
    throw UsageError("unknown command '" + s + "'");
}

const std::vector<KeySpec>& config_keys() {
    using K = KeyType;
    static const std::vector<KeySpec> keys = {
        {"output", K::text, "", "output directory", {}, true},
        {"seed", K::integer, "1", "seed of the first run; run r uses seed + r", {}},
        {"repetitions", K::integer, "1", "number of independent runs", {}},
        {"threads", K::integer, "0", "worker threads (0: hardware concurrency)", {}},
        {"data", K::text, "", "two-view CSV file (instead of a generator)", {}},
        {"columns", K::text, "label=0,view1=1..1,view2=2..2", "CSV column map", {}},
        {"generator", K::choice, "", "synthetic data family",
         {"", "cond-independent", "uniform-ball-linear", "insufficient-two-view", "margin-pairs", "structured-graphs"}},
        {"n", K::integer, "1000", "generated instances", {}},
        {"error1", K::real, "0.1", "view-1 Bayes error (cond-independent)", {}},
        {"error2", K::real, "0.2", "view-2 Bayes error (cond-independent)", {}},
        {"dim1", K::integer, "2", "view-1 dimension", {}},
        {"dim2", K::integer, "2", "view-2 dimension", {}},
        {"noise", K::real, "0.1", "label flip probability (uniform-ball-linear)", {}},
        {"mu1", K::real, "0.5", "view-1 informative mass (insufficient-two-view)", {}},
        {"mu2", K::real, "0.5", "view-2 informative mass (insufficient-two-view)", {}},
        {"nu", K::real, "0.5", "mass informative in exactly one view", {}},
        {"complementary", K::boolean, "false", "every instance informative in some view", {}},
        {"both_right", K::real, "0.6", "margin-pairs: mass where both are right", {}},
        {"both_wrong", K::real, "0.1", "margin-pairs: mass where both are wrong", {}},
        {"gain_exponent", K::real, "1", "margin-pairs: exponent of the correct-side margin law", {}},
        {"risk_max", K::real, "0.6", "margin-pairs: largest wrong-side margin", {}},
        {"components1", K::text, "0,1|2,3", "structured-graphs: view-1 partition", {}},
        {"components2", K::text, "1,2|3|0", "structured-graphs: view-2 partition", {}},
        {"graph_truth", K::text, "", "structured-graphs: truth per node, comma separated", {}},
        {"graph_labeled", K::text, "0", "structured-graphs: labeled nodes", {}},
        {"convention", K::text, "", "a-b-c-d: labeled positives/negatives, per-round positives/negatives", {}},
        {"test_fraction", K::real, "0.25", "share of labeled rows held out", {}},
        {"labeled_pos", K::integer, "3", "initial labeled positives (a)", {}},
        {"labeled_neg", K::integer, "9", "initial labeled negatives (b)", {}},
        {"per_round_pos", K::integer, "1", "positives labeled per round (c)", {}},
        {"per_round_neg", K::integer, "3", "negatives labeled per round (d)", {}},
        {"rounds", K::integer, "30", "round budget", {}},
        {"pool_size", K::integer, "75", "unlabeled pool drawn per round", {}},
        {"selection", K::choice, "confident", "pseudo-label selection", {"confident", "random"}},
        {"learner1", K::choice, "linear-margin", "view-1 learner", {"naive-bayes", "linear-margin"}},
        {"learner2", K::choice, "linear-margin", "view-2 learner", {"naive-bayes", "linear-margin"}},
        {"l2", K::real, "0", "l2 penalty of the linear learner", {}},
        {"delta", K::real, "0.05", "confidence parameter", {}},
        {"frozen_eval", K::boolean, "true", "cross disagreements on the initial unlabeled set", {}},
        {"convergence_eps", K::real, "0.02", "convergence tolerance", {}},
        {"convergence_window", K::integer, "5", "rounds that must stay within tolerance", {}},
        {"similarity", K::choice, "rbf", "graph similarity", {"rbf", "cosine", "overlap"}},
        {"sigma", K::real, "1", "rbf width", {}},
        {"graph_threshold", K::real, "0.5", "similarities below this are dropped", {}},
        {"graph_eps", K::real, "0.1", "purity slack for the epsilon-good check", {}},
        {"graph_gamma", K::real, "0", "margin of the seed-majority condition", {}},
        {"gamma1", K::real, "0", "view-1 margin threshold (0: derive from gap + extra_margin)", {}},
        {"gamma2", K::real, "0", "view-2 margin threshold (0: derive from gap + extra_margin)", {}},
        {"gap1", K::real, "0", "view-1 margin gap (0: measure against true margins)", {}},
        {"gap2", K::real, "0", "view-2 margin gap (0: measure against true margins)", {}},
        {"extra_margin", K::real, "0.05", "margin added on top of the gap", {}},
        {"adaptive", K::boolean, "false", "lower the thresholds as the training set grows", {}},
        {"gamma_floor", K::real, "0.05", "lowest threshold after an update", {}},
        {"ensemble_k", K::integer, "5", "models per view", {}},
        {"scan_order", K::choice, "pairwise", "claim order", {"pairwise", "view-major"}},
        {"size_multiplier", K::real, "1", "constant in front of the unlabeled sample-size rate", {}},
    };
    return keys;
}

namespace {

const KeySpec* find_key(const std::string& name) {
    for (const auto& k : config_keys())
        if (k.name == name) return &k;
    return nullptr;
}

std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, bool& out) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return out = true, true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return out = false, true;
    return false;
}

void check_value(const KeySpec& k, const std::string& v) {
    auto bad = [&](const std::string& what) {
        throw UsageError("key '" + k.name + "': expected " + what + ", got '" + v + "'");
    };
    switch (k.type) {
        case KeyType::integer: {
            long long x = 0;
            auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
            if (ec != std::errc() || p != v.data() + v.size()) bad("an integer");
            break;
        }
        case KeyType::real: {
            double x = 0;
            auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
            if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x)) bad("a number");
            break;
        }
        case KeyType::boolean: {
            bool b;
            if (!parse_bool(v, b)) bad("true or false");
            break;
        }
        case KeyType::choice:
            if (std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end()) bad("one of the listed choices");
            break;
        case KeyType::text: break;
    }
}

void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const KeySpec* k = find_key(key);
    if (!k) throw UsageError("unknown key '" + key + "'");
    check_value(*k, value);
    cfg.values[key] = value;
}

}  // namespace

const std::string& ExperimentConfig::text(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw UsageError("missing key '" + key + "'");
    return it->second;
}

long long ExperimentConfig::integer(const std::string& key) const { return std::stoll(text(key)); }

double ExperimentConfig::real(const std::string& key) const { return std::stod(text(key)); }

bool ExperimentConfig::flag(const std::string& key) const {
    bool b = false;
    parse_bool(text(key), b);
    return b;
}

bool ExperimentConfig::has(const std::string& key) const {
    auto it = values.find(key);
    return it != values.end() && !it->second.empty();
}

std::string ExperimentConfig::echo() const {
    std::string out = "command=" + to_string(command) + "\n";
    for (const auto& [k, v] : values) out += k + "=" + v + "\n";
    return out;
}

ExperimentConfig parse_config(Command command, const std::string& file_text,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
    ExperimentConfig cfg;
    cfg.command = command;
    for (const auto& k : config_keys())
        if (!k.required) cfg.values[k.name] = k.default_value;

    std::istringstream in(file_text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        if (key == "command") {
            if (trim(line.substr(eq + 1)) != to_string(command))
                throw UsageError("key 'command': file was written for '" + trim(line.substr(eq + 1)) + "'");
            continue;
        }
        set_value(cfg, key, trim(line.substr(eq + 1)));
    }
    for (const auto& [k, v] : overrides) set_value(cfg, k, v);

    for (const auto& k : config_keys())
        if (k.required && !cfg.has(k.name)) throw UsageError("missing required key '" + k.name + "'");

    if (cfg.has("convention")) {
        const std::string conv = cfg.text("convention");
        std::vector<std::string> parts;
        std::stringstream ss(conv);
        std::string p;
        while (std::getline(ss, p, '-')) parts.push_back(p);
        if (parts.size() != 4) throw UsageError("key 'convention': expected a-b-c-d, got '" + conv + "'");
        const char* names[] = {"labeled_pos", "labeled_neg", "per_round_pos", "per_round_neg"};
        for (int i = 0; i < 4; ++i) {
            check_value(*find_key(names[i]), parts[i]);
            cfg.values[names[i]] = parts[i];
        }
    }
    for (const char* k : {"repetitions", "n", "dim1", "dim2", "ensemble_k", "convergence_window"})
        if (cfg.integer(k) < 1) throw UsageError(std::string("key '") + k + "': must be at least 1");
    for (const char* k : {"seed", "threads", "labeled_pos", "labeled_neg", "per_round_pos", "per_round_neg", "rounds",
                          "pool_size"})
        if (cfg.integer(k) < 0) throw UsageError(std::string("key '") + k + "': must be nonnegative");
    const double tf = cfg.real("test_fraction");
    if (tf < 0.0 || tf >= 1.0) throw UsageError("key 'test_fraction': must lie in [0,1)");
    if (cfg.real("sigma") <= 0.0) throw UsageError("key 'sigma': must be positive");
    const double delta = cfg.real("delta");
    if (delta <= 0.0 || delta >= 1.0) throw UsageError("key 'delta': must lie in (0,1)");

    const bool needs_data = command != Command::report && !(command == Command::run_combination &&
                                                            cfg.text("generator") == "margin-pairs");
    if (needs_data && !cfg.has("data") && !cfg.has("generator"))
        throw UsageError("missing required key 'generator' (or 'data')");
    if (cfg.has("data") && cfg.has("generator")) throw UsageError("key 'data': conflicts with 'generator'");
    return cfg;
}

namespace {

struct RunInput {
    TwoViewDataset data;
    std::optional<Oracle> oracle;
};

RunInput make_input(const ExperimentConfig& cfg, std::uint64_t seed, const TwoViewDataset* loaded) {
    if (loaded) return {*loaded, std::nullopt};
    const std::string gen = cfg.text("generator");
    const auto n = std::size_t(cfg.integer("n"));
    GeneratedData g;
    if (gen == "cond-independent") {
        CondIndependentSpec s;
        s.n = n;
        s.seed = seed;
        s.error1 = cfg.real("error1");
        s.error2 = cfg.real("error2");
        s.dim1 = std::size_t(cfg.integer("dim1"));
        s.dim2 = std::size_t(cfg.integer("dim2"));
        g = gen_cond_independent(s);
    } else if (gen == "uniform-ball-linear") {
        UniformBallSpec s;
        s.n = n;
        s.seed = seed;
        s.noise = cfg.real("noise");
        s.dim1 = std::size_t(cfg.integer("dim1"));
        s.dim2 = std::size_t(cfg.integer("dim2"));
        g = gen_uniform_ball_linear(s);
    } else if (gen == "insufficient-two-view") {
        InsufficientSpec s;
        s.n = n;
        s.seed = seed;
        s.mu1 = cfg.real("mu1");
        s.mu2 = cfg.real("mu2");
        s.nu = cfg.real("nu");
        s.complementary = cfg.flag("complementary");
        s.dim1 = std::size_t(cfg.integer("dim1"));
        s.dim2 = std::size_t(cfg.integer("dim2"));
        g = gen_insufficient_two_view(s);
    } else {
        throw ConfigError("generator '" + gen + "' does not produce a two-view dataset for this command");
    }
    return {std::move(g.data), std::move(g.oracle)};
}

SplitSpec split_spec(const ExperimentConfig& cfg, std::uint64_t seed) {
    return SplitSpec{cfg.real("test_fraction"), std::size_t(cfg.integer("labeled_pos")),
                     std::size_t(cfg.integer("labeled_neg")), seed};
}

LearnerOptions learner_options(const ExperimentConfig& cfg) {
    LearnerOptions o;
    o.l2 = cfg.real("l2");
    return o;
}

struct RunOutput {
    std::string jsonl;
    std::string csv;  // optional plot-ready trace
    json summary;
};

RunOutput run_disagreement_once(const ExperimentConfig& cfg, std::uint64_t seed, const TwoViewDataset* loaded) {
    auto in = make_input(cfg, seed, loaded);
    auto split = split_dataset(in.data, split_spec(cfg, seed));
    ProcessConfig pc;
    pc.rounds = std::size_t(cfg.integer("rounds"));
    pc.per_round_pos = std::size_t(cfg.integer("per_round_pos"));
    pc.per_round_neg = std::size_t(cfg.integer("per_round_neg"));
    pc.pool_size = std::size_t(cfg.integer("pool_size"));
    pc.selection = selection_from_string(cfg.text("selection"));
    pc.seed = seed;
    pc.frozen_eval_sample = cfg.flag("frozen_eval");
    LearnerPair lp;
    lp.kind1 = learner_kind_from_string(cfg.text("learner1"));
    lp.kind2 = learner_kind_from_string(cfg.text("learner2"));
    lp.options1 = lp.options2 = learner_options(cfg);
    auto res = run_disagreement_process(split.labeled, split.unlabeled, in.data.schema1, in.data.schema2, lp, pc,
                                        split.test);
    const auto& tr = res.trace;
    const auto conv = convergence_monitor(tr, cfg.real("convergence_eps"), std::size_t(cfg.integer("convergence_window")));
    bool theta_all = true, delta_all = true;
    for (std::size_t i = 1; i < tr.rounds.size(); ++i) {
        theta_all = theta_all && tr.rounds[i].bounds.theta_condition;
        delta_all = delta_all && tr.rounds[i].bounds.delta_condition;
    }
    const auto& first = tr.rounds.front();
    const auto& last = tr.rounds.back();
    const double threshold = initial_disagreement_threshold(first.err1, first.err2);
    json s{{"seed", seed},
           {"rounds_run", tr.rounds.size() - 1},
           {"stop", to_string(tr.stop)},
           {"initial_err1", first.err1},
           {"initial_err2", first.err2},
           {"initial_disagreement", first.d12},
           {"initial_disagreement_threshold", threshold},
           {"initial_disagreement_sufficient", first.d12 > threshold},
           {"final_err1", last.err1},
           {"final_err2", last.err2},
           {"final_disagreement", last.d12},
           {"converged", conv.converged},
           {"theta_condition_all_rounds", theta_all},
           {"delta_condition_all_rounds", delta_all}};
    s["convergence_round"] = conv.round ? json(*conv.round) : json(nullptr);
    return {tr.to_jsonl(), tr.to_csv(), s};
}

RunOutput run_graph_once(const ExperimentConfig& cfg, std::uint64_t seed, const TwoViewDataset* loaded) {
    StructuredGraphs sg;
    std::vector<Seed> seeds;
    std::vector<int> truth;
    std::vector<std::size_t> unlabeled;
    if (!loaded && cfg.text("generator") == "structured-graphs") {
        auto parse_partition = [](const std::string& text) {
            std::vector<std::vector<std::size_t>> comps;
            std::stringstream ss(text);
            std::string block;
            while (std::getline(ss, block, '|')) {
                comps.emplace_back();
                std::stringstream bs(block);
                std::string tok;
                while (std::getline(bs, tok, ',')) comps.back().push_back(std::stoul(trim(tok)));
            }
            return comps;
        };
        StructuredGraphSpec spec;
        spec.components1 = parse_partition(cfg.text("components1"));
        spec.components2 = parse_partition(cfg.text("components2"));
        std::size_t n = 0;
        for (const auto& c : spec.components1) n += c.size();
        spec.n = n;
        if (cfg.has("graph_truth")) {
            std::stringstream ts(cfg.text("graph_truth"));
            std::string tok;
            while (std::getline(ts, tok, ',')) spec.truth.push_back(std::stoi(trim(tok)));
        } else {
            spec.truth.assign(n, 1);
        }
        std::stringstream ls(cfg.text("graph_labeled"));
        std::string tok;
        while (std::getline(ls, tok, ',')) spec.labeled.push_back(std::stoul(trim(tok)));
        spec.seed = seed;
        sg = gen_structured_graphs(spec);
        seeds = sg.labeled_seeds();
        truth = sg.truth;
        unlabeled = sg.unlabeled();
    } else {
        auto in = make_input(cfg, seed, loaded);
        auto split = split_dataset(in.data, split_spec(cfg, seed));
        std::vector<const Example*> nodes;
        for (const auto& e : split.labeled) nodes.push_back(&e);
        for (const auto& e : split.unlabeled) nodes.push_back(&e);
        for (const auto& e : split.test) nodes.push_back(&e);
        std::vector<FeatureVector> x1, x2;
        std::vector<int> lab;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            x1.push_back(nodes[i]->view1);
            x2.push_back(nodes[i]->view2);
            const bool is_l = i < split.labeled.size();
            lab.push_back(is_l ? *nodes[i]->label : 0);
            if (is_l) seeds.push_back({i, double(*nodes[i]->label)});
            else unlabeled.push_back(i);
            int t = nodes[i]->label ? *nodes[i]->label : split.hidden.label_of(nodes[i]->id);
            truth.push_back(t);
        }
        GraphBuildOptions go;
        go.similarity = similarity_from_string(cfg.text("similarity"));
        go.sigma = cfg.real("sigma");
        go.threshold = cfg.real("graph_threshold");
        sg.p1 = build_graph(x1, lab, go);
        sg.p2 = build_graph(x2, lab, go);
    }
    auto res = graph_cotrain(sg.p1, sg.p2, seeds);
    auto nc = check_necessary_condition(sg.p1, sg.p2, seeds);
    std::vector<int> eval_truth = truth;
    for (auto& t : eval_truth)
        if (t == 0) t = 1;  // unknown truth only matters for the contribution split, reported below
    const bool truth_complete = std::none_of(truth.begin(), truth.end(), [](int t) { return t == 0; });
    json s{{"seed", seed},
           {"nodes", sg.p1.size()},
           {"components1", sg.p1.components().size()},
           {"components2", sg.p2.components().size()},
           {"rounds", res.rounds.size()},
           {"all_labeled", res.all_labeled},
           {"necessary_condition", nc.holds},
           {"unreachable", nc.unreachable.size()}};
    auto score = [&](const std::vector<double>& f) {
        std::size_t wrong = 0, judged = 0, unsure = 0;
        for (auto i : unlabeled) {
            if (truth[i] == 0) continue;
            ++judged;
            if (f[i] == 0.0) ++unsure;
            else wrong += (f[i] > 0 ? 1 : -1) != truth[i];
        }
        return std::make_pair(judged ? double(wrong) / double(judged) : 0.0,
                              judged ? double(unsure) / double(judged) : 0.0);
    };
    const auto [e1, u1] = score(res.f1);
    const auto [e2, u2] = score(res.f2);
    s["final_err1"] = e1;
    s["final_err2"] = e2;
    s["final_uncertain1"] = u1;
    s["final_uncertain2"] = u2;
    if (truth_complete) {
        auto sc = check_success(sg.p1, sg.p2, seeds, truth, SuccessMode::nonperfect);
        s["predicts_success"] = sc.predicts_success;
        s["incorrect_witnesses"] = std::count_if(sc.witnesses.begin(), sc.witnesses.end(), [](const SuccessWitness& w) {
            return w.verdict == ContributionVerdict::incorrect;
        });
        s["excluded_nodes"] = sc.excluded_nodes;
        auto g1 = epsilon_goodness(sg.p1, truth, cfg.real("graph_eps"), cfg.real("graph_gamma"), &res, 1);
        auto g2 = epsilon_goodness(sg.p2, truth, cfg.real("graph_eps"), cfg.real("graph_gamma"), &res, 2);
        s["eps_good1"] = g1.is_eps_good;
        s["eps_good2"] = g2.is_eps_good;
        s["seed_margin_condition1"] = g1.seed_majority_condition;
        s["seed_margin_condition2"] = g2.seed_majority_condition;
    }
    // One line per round, with the initial propagation as round 0.
    std::string jsonl;
    const double n = double(sg.p1.size());
    auto line = [&](std::size_t k, std::size_t a, std::size_t b, const std::vector<std::size_t>& t1,
                    const std::vector<std::size_t>& t2) {
        json j{{"round", k}, {"labeled1", double(a) / n}, {"labeled2", double(b) / n},
               {"newly_labeled_view1", t1}, {"newly_labeled_view2", t2}};
        jsonl += j.dump() + "\n";
    };
    line(0, res.initial_s1.size(), res.initial_s2.size(), res.initial_s1, res.initial_s2);
    for (std::size_t k = 0; k < res.rounds.size(); ++k) {
        const auto& r = res.rounds[k];
        line(k + 1, r.s1.size() + r.t1.size(), r.s2.size() + r.t2.size(), r.t1, r.t2);
    }
    return {jsonl, "", s};
}

RunOutput run_insufficient_once(const ExperimentConfig& cfg, std::uint64_t seed, const TwoViewDataset* loaded) {
    auto in = make_input(cfg, seed, loaded);
    auto split = split_dataset(in.data, split_spec(cfg, seed));
    const auto trainer =
        make_ensemble_trainer(learner_kind_from_string(cfg.text("learner1")), learner_options(cfg), in.data.schema1,
                              in.data.schema2, std::size_t(cfg.integer("ensemble_k")), seed);
    const auto f1 = trainer(split.labeled, 1), f2 = trainer(split.labeled, 2);
    const bool oracle = in.oracle && in.oracle->has_posteriors();
    std::array<double, 2> gap = {cfg.real("gap1"), cfg.real("gap2")};
    for (int v = 0; v < 2; ++v) {
        if (gap[v] > 0.0) continue;
        if (!oracle) throw CapabilityError("margin gap must be given on data without true margins");
        gap[v] = margin_deviation(v == 0 ? f1 : f2, in.data.examples, in.oracle->bayes_margin(v + 1));
    }
    const double extra = cfg.real("extra_margin");
    std::array<double, 2> gamma = {cfg.real("gamma1"), cfg.real("gamma2")};
    for (int v = 0; v < 2; ++v)
        if (gamma[v] <= 0.0) gamma[v] = gap[v] + extra;

    MarginCotrainOptions mo;
    mo.scan = cfg.text("scan_order") == "pairwise" ? ScanOrder::pairwise : ScanOrder::view_major;
    if (in.oracle) mo.truth = in.oracle->truth;
    const auto coverage = margin_coverage(f1, f2, split.unlabeled, std::min(gamma[0], 1.0), std::min(gamma[1], 1.0));

    MarginCotrainResult res;
    if (cfg.flag("adaptive")) {
        AdaptiveOptions ao;
        ao.base = mo;
        ao.gamma_floor = cfg.real("gamma_floor");
        res = adaptive_margin_cotrain(split.labeled, split.unlabeled, trainer, gap, {extra, extra}, ao);
    } else {
        res = margin_cotrain(split.labeled, split.unlabeled, trainer, gamma[0], gamma[1], mo);
    }

    json s{{"seed", seed},
           {"gap1", gap[0]},
           {"gap2", gap[1]},
           {"gamma1", gamma[0]},
           {"gamma2", gamma[1]},
           {"mu1", coverage.mu1},
           {"mu2", coverage.mu2},
           {"mu", coverage.mu},
           {"nu", coverage.nu},
           {"rounds", res.rounds.size()},
           {"final_training_size", res.training.size()},
           {"gate_passed", res.gate_passed},
           {"gate_threshold", res.gate_threshold},
           {"round0_pseudo_accuracy",
            res.rounds.front().pseudo_accuracy ? json(*res.rounds.front().pseudo_accuracy) : json(nullptr)},
           {"size_multiplier", cfg.real("size_multiplier")}};
    for (int v = 1; v <= 2; ++v) {
        const auto& models = v == 1 ? res.models1 : res.models2;
        double worst = 0.0;
        for (const auto& m : models) {
            std::vector<double> margins;
            std::vector<double> post;
            std::vector<int> y;
            for (const auto& e : split.test) {
                margins.push_back(m.margin(e));
                y.push_back(*e.label);
                if (oracle) post.push_back(in.oracle->posterior(v)[e.id]);
            }
            if (margins.empty()) break;
            worst = std::max(worst, oracle ? expected_error(margins, post) : evaluate_margins(margins, y).error);
        }
        s["max_ensemble_error" + std::to_string(v)] = worst;
        if (oracle) s["bayes_error" + std::to_string(v)] = measure_insufficiency(*in.oracle, v).eta;
    }
    return {res.to_jsonl(), "", s};
}

RunOutput run_combination_once(const ExperimentConfig& cfg, std::uint64_t seed, const TwoViewDataset* loaded) {
    CombinationReport rep;
    if (!loaded && cfg.text("generator") == "margin-pairs") {
        MarginPairSpec s;
        s.n = std::size_t(cfg.integer("n"));
        s.seed = seed;
        s.both_right = cfg.real("both_right");
        s.both_wrong = cfg.real("both_wrong");
        s.gain_exponent = cfg.real("gain_exponent");
        s.risk_max = cfg.real("risk_max");
        auto mp = gen_margin_pairs(s);
        rep = analyze_combination(mp.f1, mp.f2, mp.truth);
    } else {
        auto in = make_input(cfg, seed, loaded);
        auto split = split_dataset(in.data, split_spec(cfg, seed));
        const auto opts = learner_options(cfg);
        auto m1 = train_erm(view_sample(split.labeled, 1), in.data.schema1,
                            learner_kind_from_string(cfg.text("learner1")), 1, opts, seed);
        auto m2 = train_erm(view_sample(split.labeled, 2), in.data.schema2,
                            learner_kind_from_string(cfg.text("learner2")), 2, opts, seed);
        std::vector<double> a, b;
        std::vector<int> y;
        for (const auto& e : split.test) {
            a.push_back(m1.margin(e));
            b.push_back(m2.margin(e));
            y.push_back(*e.label);
        }
        if (y.empty()) throw EvaluationError("combination needs a nonempty test split");
        rep = analyze_combination(a, b, y);
    }
    json j = json::parse(rep.to_json());
    j["round"] = 0;
    json s = j;
    s["seed"] = seed;
    return {j.dump() + "\n", "", s};
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << body;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentOutcome gen_data(const ExperimentConfig& cfg) {
    const fs::path out = cfg.text("output");
    fs::create_directories(out);
    const auto seed = std::uint64_t(cfg.integer("seed"));
    ExperimentOutcome o;
    if (cfg.text("generator") == "structured-graphs") {
        ExperimentConfig c = cfg;
        auto r = run_graph_once(c, seed, nullptr);
        o.table = r.summary.dump(2) + "\n";
    } else if (cfg.text("generator") == "margin-pairs") {
        MarginPairSpec s;
        s.n = std::size_t(cfg.integer("n"));
        s.seed = seed;
        s.both_right = cfg.real("both_right");
        s.both_wrong = cfg.real("both_wrong");
        s.gain_exponent = cfg.real("gain_exponent");
        s.risk_max = cfg.real("risk_max");
        auto mp = gen_margin_pairs(s);
        std::string csv = "label,f1,f2\n";
        for (std::size_t i = 0; i < mp.truth.size(); ++i)
            csv += (mp.truth[i] > 0 ? "+1," : "-1,") + format_number(mp.f1[i]) + "," + format_number(mp.f2[i]) + "\n";
        write_file(out / "margins.csv", csv);
        o.table = "wrote " + (out / "margins.csv").string() + "\n";
    } else {
        auto in = make_input(cfg, seed, nullptr);
        const auto cols = write_csv(in.data, (out / "data.csv").string());
        write_file(out / "oracle.json", in.oracle->to_json());
        write_file(out / "columns.txt", cols.to_string() + "\n");
        o.table = "wrote " + (out / "data.csv").string() + " (columns " + cols.to_string() + ")\n";
    }
    write_file(out / "config.echo", cfg.echo());
    o.runs_ok = 1;
    return o;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> aggregate_columns(Command c) {
    switch (c) {
        case Command::run_disagreement: return {{"err1", "err1"}, {"err2", "err2"}, {"d12", "disagreement"}};
        case Command::run_graph: return {{"labeled1", "labeled1"}, {"labeled2", "labeled2"}};
        case Command::run_insufficient:
            return {{"m", "training_size"}, {"gamma1", "gamma1"}, {"gamma2", "gamma2"}, {"claimed", "claimed"}};
        case Command::run_combination:
            return {{"err1", "err1"}, {"err2", "err2"}, {"err_com", "err_com"}, {"lower_bound", "lower_bound"},
                    {"upper_bound", "upper_bound"}};
        default: return {};
    }
}

std::string aggregate_csv(const std::vector<std::string>& run_jsonl,
                          const std::vector<std::pair<std::string, std::string>>& columns) {
    // sums[round][metric] over the runs that reached the round
    std::vector<std::vector<std::vector<double>>> vals;
    for (const auto& text : run_jsonl) {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = json::parse(line);
            const auto r = j.at("round").get<std::size_t>();
            if (vals.size() <= r) vals.resize(r + 1, std::vector<std::vector<double>>(columns.size()));
            for (std::size_t c = 0; c < columns.size(); ++c) {
                const auto& v = j.at(columns[c].first);
                if (v.is_number()) vals[r][c].push_back(v.get<double>());
            }
        }
    }
    std::string out = "round";
    for (const auto& c : columns) out += "," + c.second + "_mean," + c.second + "_std";
    out += ",runs\n";
    for (std::size_t r = 0; r < vals.size(); ++r) {
        out += std::to_string(r);
        std::size_t runs = 0;
        for (const auto& xs : vals[r]) {
            runs = std::max(runs, xs.size());
            double mean = 0.0, var = 0.0;
            for (double x : xs) mean += x;
            if (!xs.empty()) mean /= double(xs.size());
            for (double x : xs) var += (x - mean) * (x - mean);
            const double sd = xs.size() > 1 ? std::sqrt(var / double(xs.size() - 1)) : 0.0;
            out += "," + (xs.empty() ? std::string("") : format_number(mean)) + "," +
                   (xs.empty() ? std::string("") : format_number(sd));
        }
        out += "," + std::to_string(runs) + "\n";
    }
    return out;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
    if (cfg.command == Command::report) return recompute_report(cfg.text("output"));
    if (cfg.command == Command::gen_data) return gen_data(cfg);

    const fs::path out = cfg.text("output");
    fs::create_directories(out / "runs");
    write_file(out / "config.echo", cfg.echo());

    std::optional<TwoViewDataset> loaded;
    if (cfg.has("data")) loaded = load_csv(cfg.text("data"), ColumnMap::parse(cfg.text("columns")));
    const TwoViewDataset* shared = loaded ? &*loaded : nullptr;

    const auto reps = std::size_t(cfg.integer("repetitions"));
    const auto base = std::uint64_t(cfg.integer("seed"));
    std::vector<std::optional<RunOutput>> results(reps);
    std::vector<std::string> errors(reps);

    auto one = [&](std::size_t r) {
        const std::uint64_t seed = base + r;
        try {
            switch (cfg.command) {
                case Command::run_disagreement: results[r] = run_disagreement_once(cfg, seed, shared); break;
                case Command::run_graph: results[r] = run_graph_once(cfg, seed, shared); break;
                case Command::run_insufficient: results[r] = run_insufficient_once(cfg, seed, shared); break;
                case Command::run_combination: results[r] = run_combination_once(cfg, seed, shared); break;
                default: break;
            }
            const auto& res = *results[r];
            write_file(out / "runs" / (std::to_string(seed) + ".jsonl"), res.jsonl);
            if (!res.csv.empty()) write_file(out / "runs" / (std::to_string(seed) + ".csv"), res.csv);
        } catch (const std::exception& e) {
            results[r].reset();
            errors[r] = e.what();
        }
    };

    std::size_t workers = std::size_t(cfg.integer("threads"));
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, reps);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t r; (r = next.fetch_add(1)) < reps;) one(r);
        });
    for (auto& t : pool) t.join();

    ExperimentOutcome o;
    std::vector<std::string> traces;
    json summary{{"command", to_string(cfg.command)}, {"runs", json::array()}, {"failures", json::array()}};
    for (std::size_t r = 0; r < reps; ++r) {
        if (results[r]) {
            ++o.runs_ok;
            traces.push_back(results[r]->jsonl);
            summary["runs"].push_back(results[r]->summary);
        } else {
            ++o.runs_failed;
            summary["failures"].push_back({{"seed", base + r}, {"error", errors[r]}});
        }
    }
    summary["runs_ok"] = o.runs_ok;
    summary["runs_failed"] = o.runs_failed;
    write_file(out / "summary.json", summary.dump(2) + "\n");
    write_file(out / "aggregate.csv", aggregate_csv(traces, aggregate_columns(cfg.command)));

    std::ostringstream table;
    if (cfg.command == Command::run_combination) {
        table << "seed      lower      empirical  upper      beats-best\n";
        for (const auto& s : summary["runs"]) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%-9llu %-10.5f %-10.5f %-10.5f %s\n",
                          (unsigned long long)s["seed"].get<std::uint64_t>(), s["lower_bound"].get<double>(),
                          s["err_com"].get<double>(), s["upper_bound"].get<double>(),
                          s["beats_better_single"].get<bool>() ? "holds" : "fails");
            table << buf;
        }
    }
    table << "runs ok: " << o.runs_ok << ", failed: " << o.runs_failed << "\n";
    for (std::size_t r = 0; r < reps; ++r)
        if (!results[r]) table << "seed " << base + r << " failed: " << errors[r] << "\n";
    o.table = table.str();
    o.exit_code = (o.runs_ok == 0 && reps > 0) ? 1 : 0;
    return o;
}

ExperimentOutcome recompute_report(const std::string& output_dir) {
    const fs::path dir = output_dir;
    if (!fs::exists(dir / "config.echo")) throw UsageError("key 'output': no config.echo in " + output_dir);
    const std::string echo = read_file(dir / "config.echo");
    std::istringstream in(echo);
    std::string first;
    std::getline(in, first);
    if (first.rfind("command=", 0) != 0) throw UsageError("key 'output': config.echo lacks a command line");
    const Command c = command_from_string(first.substr(8));

    std::vector<std::pair<std::uint64_t, fs::path>> files;
    if (fs::exists(dir / "runs"))
        for (const auto& e : fs::directory_iterator(dir / "runs"))
            if (e.path().extension() == ".jsonl") files.emplace_back(std::stoull(e.path().stem().string()), e.path());
    std::sort(files.begin(), files.end());
    std::vector<std::string> traces;
    for (const auto& [seed, p] : files) traces.push_back(read_file(p));
    const std::string csv = aggregate_csv(traces, aggregate_columns(c));
    write_file(dir / "aggregate.csv", csv);
    ExperimentOutcome o;
    o.runs_ok = traces.size();
    o.table = csv;
    o.exit_code = traces.empty() ? 1 : 0;
    return o;
}

}  // namespace cotrain
