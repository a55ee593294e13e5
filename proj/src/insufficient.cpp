#include "cotrain/insufficient.hpp"

#include <algorithm>
#include <cmath>

#include "cotrain/errors.hpp"
#include "cotrain/rng.hpp"
#include "json.hpp"

namespace cotrain {

InsufficiencyProfile measure_insufficiency(std::span<const double> posteriors) {
    if (posteriors.empty()) throw EvaluationError("insufficiency needs a nonempty sample");
    InsufficiencyProfile p;
    double margin = 0.0, bayes = 0.0;
    for (double phi : posteriors) {
        if (!(phi >= 0.0 && phi <= 1.0)) throw DomainError("posterior outside [0,1]");
        margin += std::abs(2.0 * phi - 1.0);
        bayes += 0.5 - std::abs(phi - 0.5);
    }
    const double n = double(posteriors.size());
    p.upsilon = std::clamp(1.0 - margin / n, 0.0, 1.0);
    p.eta = bayes / n;
    p.n_mc = posteriors.size();
    return p;
}

InsufficiencyProfile measure_insufficiency(const Oracle& oracle, int view) {
    if (!oracle.has_posteriors()) throw CapabilityError("true posteriors are unavailable for this data");
    return measure_insufficiency(oracle.posterior(view));
}

MarginCoverage coverage_from_masks(std::vector<char> covered1, std::vector<char> covered2) {
    if (covered1.size() != covered2.size()) throw PreconditionError("coverage masks differ in length");
    if (covered1.empty()) throw EvaluationError("coverage needs a nonempty unlabeled set");
    MarginCoverage c;
    c.n = covered1.size();
    std::size_t one = 0, two = 0, either = 0, exactly_one = 0;
    for (std::size_t i = 0; i < c.n; ++i) {
        const bool a = covered1[i], b = covered2[i];
        one += a;
        two += b;
        either += a || b;
        exactly_one += a != b;
    }
    const double n = double(c.n);
    c.mu1 = double(one) / n;
    c.mu2 = double(two) / n;
    c.nu = double(exactly_one) / n;
    // Integer form of the identity keeps it exact: one + two + exactly_one == 2 * either.
    c.mu = double(one + two + exactly_one) / (2.0 * n);
    c.mu_direct = double(either) / n;
    c.covered1 = std::move(covered1);
    c.covered2 = std::move(covered2);
    return c;
}

namespace {

std::vector<char> covered_by(std::span<const ClassifierModel> models, std::span<const Example> u, double gamma) {
    std::vector<char> out(u.size(), 0);
    for (std::size_t i = 0; i < u.size(); ++i)
        for (const auto& m : models)
            if (std::abs(m.margin(u[i])) >= gamma) {
                out[i] = 1;
                break;
            }
    return out;
}

void check_gamma(double g) {
    if (!(g > 0.0 && g <= 1.0)) throw DomainError("margin threshold must lie in (0,1]");
}

}  // namespace

MarginCoverage margin_coverage(std::span<const ClassifierModel> models1, std::span<const ClassifierModel> models2,
                               std::span<const Example> unlabeled, double gamma1, double gamma2) {
    check_gamma(gamma1);
    check_gamma(gamma2);
    auto c = coverage_from_masks(covered_by(models1, unlabeled, gamma1), covered_by(models2, unlabeled, gamma2));
    c.gamma1 = gamma1;
    c.gamma2 = gamma2;
    return c;
}

EnsembleTrainer make_ensemble_trainer(LearnerKind kind, const LearnerOptions& opts, ViewSchema schema1,
                                      ViewSchema schema2, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw ConfigError("ensemble size must be positive");
    return [=](std::span<const Example> training, int view) {
        const ViewSchema& schema = view == 1 ? schema1 : schema2;
        const ViewSample full = view_sample(training, view);
        std::vector<ClassifierModel> models;
        models.reserve(k);
        for (std::size_t j = 0; j < k; ++j) {
            const std::uint64_t s = derive_seed(seed, j * 2 + std::uint64_t(view));
            if (full.size() >= 2 * k) {
                ViewSample part;
                for (std::size_t i = 0; i < full.size(); ++i)
                    if (i % k != j) part.add(*full.x[i], full.y[i]);
                models.push_back(train_erm(part, schema, kind, view, opts, s));
            } else {
                models.push_back(train_erm(full, schema, kind, view, opts, s));
            }
        }
        return models;
    };
}

namespace {

struct Claim {
    int view = 0;  // 0: unclaimed
    int label = 0;
    bool conflict = false;
};

Claim scan_instance(const std::vector<double>& m1, const std::vector<double>& m2, double g1, double g2,
                    ScanOrder order) {
    Claim c;
    auto hit = [](double m, double g) { return std::abs(m) >= g; };
    if (order == ScanOrder::pairwise) {
        for (std::size_t a = 0; a < m1.size() && !c.view; ++a)
            for (std::size_t b = 0; b < m2.size(); ++b) {
                if (hit(m1[a], g1)) {
                    c = {1, m1[a] > 0 ? 1 : -1, false};
                    break;
                }
                if (hit(m2[b], g2)) {
                    c = {2, m2[b] > 0 ? 1 : -1, false};
                    break;
                }
            }
    } else {
        for (double m : m1)
            if (hit(m, g1)) {
                c = {1, m > 0 ? 1 : -1, false};
                break;
            }
        if (!c.view)
            for (double m : m2)
                if (hit(m, g2)) {
                    c = {2, m > 0 ? 1 : -1, false};
                    break;
                }
    }
    if (c.view) {
        const auto& other = c.view == 1 ? m2 : m1;
        const double g = c.view == 1 ? g2 : g1;
        for (double m : other)
            if (hit(m, g) && (m > 0 ? 1 : -1) != c.label) c.conflict = true;
    }
    return c;
}

// One pass of the claiming loop; claimed instances move from U into T with pseudo-labels.
std::vector<Example> claim_round(std::vector<Example>& unlabeled, const std::vector<ClassifierModel>& f1,
                                 const std::vector<ClassifierModel>& f2, MarginRound& rec,
                                 const MarginCotrainOptions& opts) {
    std::vector<Example> taken, kept;
    std::size_t correct = 0, judged = 0;
    std::vector<double> m1(f1.size()), m2(f2.size());
    for (auto& e : unlabeled) {
        for (std::size_t a = 0; a < f1.size(); ++a) m1[a] = f1[a].margin(e);
        for (std::size_t b = 0; b < f2.size(); ++b) m2[b] = f2[b].margin(e);
        const Claim c = scan_instance(m1, m2, rec.gamma1, rec.gamma2, opts.scan);
        if (!c.view) {
            kept.push_back(std::move(e));
            continue;
        }
        (c.view == 1 ? rec.claimed_by1 : rec.claimed_by2)++;
        rec.conflicts += c.conflict;
        rec.claimed_ids.push_back(e.id);
        rec.claimed_labels.push_back(c.label);
        if (e.id < opts.truth.size() && opts.truth[e.id] != 0) {
            ++judged;
            correct += opts.truth[e.id] == c.label;
        }
        e.label.reset();
        e.pseudo = PseudoLabel{c.label, int(rec.round), c.view};
        taken.push_back(std::move(e));
    }
    unlabeled = std::move(kept);
    rec.claimed = taken.size();
    if (judged) rec.pseudo_accuracy = double(correct) / double(judged);
    return taken;
}

}  // namespace

MarginCotrainResult margin_cotrain(std::span<const Example> labeled, std::vector<Example> unlabeled,
                                   const EnsembleTrainer& trainer, double gamma1, double gamma2,
                                   const MarginCotrainOptions& opts) {
    check_gamma(gamma1);
    check_gamma(gamma2);
    MarginCotrainResult out;
    out.training.assign(labeled.begin(), labeled.end());
    for (std::size_t i = 0;; ++i) {
        out.models1 = trainer(out.training, 1);
        out.models2 = trainer(out.training, 2);
        MarginRound rec;
        rec.round = i;
        rec.training_size = out.training.size();
        rec.gamma1 = gamma1;
        rec.gamma2 = gamma2;
        auto t = claim_round(unlabeled, out.models1, out.models2, rec, opts);
        out.rounds.push_back(std::move(rec));
        if (t.empty() || i + 1 >= opts.max_rounds) break;
        for (auto& e : t) out.training.push_back(std::move(e));
    }
    return out;
}

double adaptive_gate_threshold(double n, double m0) { return std::cbrt(n * n * m0) - m0; }

double adaptive_gate_coverage(double n, double m0) {
    if (n <= m0) throw DomainError("gate coverage needs unlabeled data");
    return adaptive_gate_threshold(n, m0) / (n - m0);
}

double adaptive_threshold(double gamma0, double gap, double n, double m0, double m) {
    if (m <= 0.0) throw DomainError("training size must be positive");
    return gamma0 - gap * (1.0 - n * std::sqrt(m0) / std::pow(m, 1.5));
}

MarginCotrainResult adaptive_margin_cotrain(std::span<const Example> labeled, std::vector<Example> unlabeled,
                                            const EnsembleTrainer& trainer, std::array<double, 2> gap,
                                            std::array<double, 2> extra_margin, const AdaptiveOptions& opts) {
    if (labeled.empty()) throw PreconditionError("adaptive co-training needs labeled data");
    const std::array<double, 2> gamma0 = {gap[0] + extra_margin[0], gap[1] + extra_margin[1]};
    check_gamma(gamma0[0]);
    check_gamma(gamma0[1]);
    const double m0 = double(labeled.size());
    const double n = m0 + double(unlabeled.size());

    MarginCotrainResult out;
    out.gate_threshold = adaptive_gate_threshold(n, m0);
    out.training.assign(labeled.begin(), labeled.end());
    std::array<double, 2> gamma = gamma0;
    std::array<bool, 2> clamped = {false, false};
    std::size_t t0 = 0;

    for (std::size_t i = 0;; ++i) {
        out.models1 = trainer(out.training, 1);
        out.models2 = trainer(out.training, 2);
        MarginRound rec;
        rec.round = i;
        rec.training_size = out.training.size();
        rec.gamma1 = gamma[0];
        rec.gamma2 = gamma[1];
        rec.clamped1 = clamped[0];
        rec.clamped2 = clamped[1];
        auto t = claim_round(unlabeled, out.models1, out.models2, rec, opts.base);
        out.rounds.push_back(rec);
        if (i == 0) {
            t0 = t.size();
            out.gate_passed = double(t0) > out.gate_threshold;
        }
        if (!out.gate_passed || t.empty() || i + 1 >= opts.base.max_rounds) break;

        const double m_next = double(out.training.size() + t.size());
        for (int v = 0; v < 2; ++v) {
            double g = adaptive_threshold(gamma0[v], gap[v], n, m0, m_next);
            clamped[v] = !(g > 0.0 && g <= 1.0);
            if (g <= 0.0) g = opts.gamma_floor;
            if (g > 1.0) g = 1.0;
            gamma[v] = g;
        }
        for (auto& e : t) out.training.push_back(std::move(e));
    }
    return out;
}

std::string MarginCotrainResult::to_jsonl() const {
    std::string out;
    for (const auto& r : rounds) {
        nlohmann::json j{{"round", r.round},
                         {"m", r.training_size},
                         {"gamma1", r.gamma1},
                         {"gamma2", r.gamma2},
                         {"claimed", r.claimed},
                         {"claimed_by1", r.claimed_by1},
                         {"claimed_by2", r.claimed_by2},
                         {"conflicts", r.conflicts},
                         {"clamped1", r.clamped1},
                         {"clamped2", r.clamped2},
                         {"gate_passed", gate_passed},
                         {"gate_threshold", gate_threshold}};
        j["pseudo_accuracy"] = r.pseudo_accuracy ? nlohmann::json(*r.pseudo_accuracy) : nlohmann::json(nullptr);
        out += j.dump();
        out += '\n';
    }
    return out;
}

double approx_kl(std::size_t lambda_size, std::size_t omega_size) {
    if (lambda_size == 0) throw DomainError("approximate KL needs a nonempty subset");
    if (lambda_size > omega_size) throw DomainError("subset larger than the reference set");
    return std::log(double(omega_size) / double(lambda_size));
}

LipschitzEstimate estimate_margin_lipschitz(std::span<const MarginCandidate> candidates,
                                            const MarginCandidate& reference) {
    LipschitzEstimate est;
    for (const auto& c : candidates) {
        if (c.margins.size() != reference.margins.size())
            throw PreconditionError("candidate and reference margins cover different samples");
        const double gap = c.error - reference.error;
        if (gap < -1e-12) throw PreconditionError("reference error exceeds a candidate's error");
        if (gap <= 1e-15) continue;
        double worst = 0.0;
        for (std::size_t i = 0; i < c.margins.size(); ++i)
            worst = std::max(worst, std::abs(c.margins[i] - reference.margins[i]));
        est.value = std::max(est.value, worst / gap);
        est.defined = true;
        ++est.pairs_used;
    }
    return est;
}

std::vector<double> estimate_probabilistic_margin(std::span<const double> margins, std::span<const int> truth,
                                                  std::span<const double> gamma_grid) {
    if (margins.empty()) throw EvaluationError("probabilistic margin needs a nonempty sample");
    if (margins.size() != truth.size()) throw PreconditionError("margins and labels differ in length");
    std::vector<double> out;
    for (double g : gamma_grid) {
        if (!(g >= 0.5 && g <= 1.0)) throw DomainError("margin grid values must lie in [1/2, 1]");
        std::size_t bad = 0;
        for (std::size_t i = 0; i < margins.size(); ++i)
            bad += std::abs(margins[i]) >= g && margins[i] * truth[i] < 0;
        out.push_back(double(bad) / double(margins.size()));
    }
    return out;
}

double margin_deviation(std::span<const ClassifierModel> models, std::span<const Example> sample,
                        std::span<const double> true_margin_by_id) {
    double worst = 0.0;
    for (const auto& e : sample) {
        if (e.id >= true_margin_by_id.size()) throw PreconditionError("no true margin for example id");
        for (const auto& m : models) worst = std::max(worst, std::abs(m.margin(e) - true_margin_by_id[e.id]));
    }
    return worst;
}

double expected_error(std::span<const double> margins, std::span<const double> posteriors) {
    if (margins.empty()) throw EvaluationError("expected error needs a nonempty sample");
    if (margins.size() != posteriors.size()) throw PreconditionError("margins and posteriors differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < margins.size(); ++i)
        total += margins[i] > 0 ? 1.0 - posteriors[i] : (margins[i] < 0 ? posteriors[i] : 0.5);
    return total / double(margins.size());
}

}  // namespace cotrain
