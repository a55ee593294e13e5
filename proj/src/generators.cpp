#include "cotrain/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cotrain/errors.hpp"
#include "cotrain/rng.hpp"
#include "json.hpp"

namespace cotrain {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double logistic(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_prob(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0,1]");
}

std::vector<double> random_unit(Rng& rng, std::size_t d) {
    std::vector<double> w(d);
    double s = 0;
    do {
        s = 0;
        for (auto& v : w) {
            v = rng.normal();
            s += v * v;
        }
    } while (s == 0);
    for (auto& v : w) v /= std::sqrt(s);
    return w;
}

std::vector<double> uniform_ball(Rng& rng, std::size_t d) {
    auto x = random_unit(rng, d);
    const double r = std::pow(rng.uniform(), 1.0 / double(d));
    for (auto& v : x) v *= r;
    return x;
}

// Splits n into integer counts proportional to masses (largest remainder).
std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& masses) {
    std::vector<std::size_t> counts(masses.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t k = 0; k < masses.size(); ++k) {
        const double exact = masses[k] * double(n);
        counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        used += counts[k];
        rem.push_back({exact - double(counts[k]), k});
    }
    std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; used < n && k < rem.size(); ++k, ++used) ++counts[rem[k].second];
    return counts;
}

}  // namespace

std::string Oracle::to_json() const {
    nlohmann::json j;
    j["truth"] = truth;
    j["posterior1"] = posterior1;
    j["posterior2"] = posterior2;
    j["bayes_margin1"] = bayes_margin1;
    j["bayes_margin2"] = bayes_margin2;
    std::vector<std::string> reg;
    for (auto r : region)
        reg.push_back(r == Region::view1_only ? "view1" : r == Region::view2_only ? "view2" : r == Region::both ? "both" : "neither");
    j["region"] = reg;
    j["w_star1"] = w_star1;
    j["w_star2"] = w_star2;
    return j.dump();
}

GeneratedData gen_cond_independent(const CondIndependentSpec& spec) {
    for (double e : {spec.error1, spec.error2})
        if (!(e >= 0.0 && e < 0.5)) throw ConfigError("view error rates must lie in [0, 1/2)");
    if (spec.dim1 < 1 || spec.dim2 < 1) throw ConfigError("dimensions must be at least 1");
    GeneratedData g;
    g.data.schema1 = ViewSchema::numeric(spec.dim1, "a");
    g.data.schema2 = ViewSchema::numeric(spec.dim2, "b");
    Rng rng(spec.seed);
    const double mu1 = spec.error1 > 0 ? normal_quantile(1.0 - spec.error1) / std::sqrt(double(spec.dim1)) : 0.0;
    const double mu2 = spec.error2 > 0 ? normal_quantile(1.0 - spec.error2) / std::sqrt(double(spec.dim2)) : 0.0;
    auto draw_view = [&](int y, double err, double mu, std::size_t dim, double& post) {
        FeatureVector x(dim);
        double sum = 0;
        for (auto& v : x) {
            v = err > 0 ? y * mu + rng.normal() : double(y);
            sum += v;
        }
        post = err > 0 ? logistic(2.0 * mu * sum) : (y > 0 ? 1.0 : 0.0);
        return x;
    };
    for (std::size_t i = 0; i < spec.n; ++i) {
        Example e;
        e.id = i;
        const int y = rng.sign();
        e.label = y;
        double p1, p2;
        e.view1 = draw_view(y, spec.error1, mu1, spec.dim1, p1);
        e.view2 = draw_view(y, spec.error2, mu2, spec.dim2, p2);
        g.data.examples.push_back(std::move(e));
        g.oracle.truth.push_back(y);
        g.oracle.posterior1.push_back(p1);
        g.oracle.posterior2.push_back(p2);
        g.oracle.bayes_margin1.push_back(2 * p1 - 1);
        g.oracle.bayes_margin2.push_back(2 * p2 - 1);
    }
    return g;
}

GeneratedData gen_uniform_ball_linear(const UniformBallSpec& spec) {
    if (spec.dim1 < 2 || spec.dim2 < 2) throw ConfigError("uniform-ball dimensions must be at least 2");
    if (!(spec.noise >= 0.0 && spec.noise < 0.5)) throw ConfigError("noise must lie in [0, 1/2)");
    Rng rng(spec.seed);
    auto unit = [&](const std::vector<double>& given, std::size_t d) {
        if (given.empty()) return random_unit(rng, d);
        if (given.size() != d) throw ConfigError("w_star dimension mismatch");
        double s = 0;
        for (double v : given) s += v * v;
        if (std::abs(s - 1.0) > 1e-9) throw ConfigError("w_star must have unit norm");
        return given;
    };
    GeneratedData g;
    g.oracle.w_star1 = unit(spec.w_star1, spec.dim1);
    g.oracle.w_star2 = unit(spec.w_star2, spec.dim2);
    g.data.schema1 = ViewSchema::numeric(spec.dim1, "a");
    g.data.schema2 = ViewSchema::numeric(spec.dim2, "b");
    auto draw = [&](const std::vector<double>& w, int side) {
        auto x = uniform_ball(rng, w.size());
        double dot = 0;
        for (std::size_t k = 0; k < w.size(); ++k) dot += w[k] * x[k];
        if ((dot > 0 ? 1 : -1) != side)
            for (std::size_t k = 0; k < w.size(); ++k) x[k] -= 2 * dot * w[k];
        return x;
    };
    for (std::size_t i = 0; i < spec.n; ++i) {
        const int clean = rng.sign();
        const int y = rng.bernoulli(spec.noise) ? -clean : clean;
        Example e;
        e.id = i;
        e.label = y;
        e.view1 = draw(g.oracle.w_star1, clean);
        e.view2 = draw(g.oracle.w_star2, clean);
        const double post = clean > 0 ? 1.0 - spec.noise : spec.noise;
        g.data.examples.push_back(std::move(e));
        g.oracle.truth.push_back(y);
        g.oracle.posterior1.push_back(post);
        g.oracle.posterior2.push_back(post);
        g.oracle.bayes_margin1.push_back(2 * post - 1);
        g.oracle.bayes_margin2.push_back(2 * post - 1);
    }
    return g;
}

RegionMasses insufficient_regions(const InsufficientSpec& spec) {
    check_prob(spec.mu1, "mu1");
    check_prob(spec.mu2, "mu2");
    const double nu = spec.complementary ? 2.0 - spec.mu1 - spec.mu2 : spec.nu;
    check_prob(nu, "nu");
    RegionMasses r;
    r.both = (spec.mu1 + spec.mu2 - nu) / 2.0;
    r.view1_only = spec.mu1 - r.both;
    r.view2_only = spec.mu2 - r.both;
    r.neither = 1.0 - (r.view1_only + r.view2_only + r.both);
    const double tol = 1e-12;
    if (r.both < -tol || r.view1_only < -tol || r.view2_only < -tol || r.neither < -tol)
        throw ConfigError("infeasible coverage targets: mu = (nu + mu1 + mu2)/2 cannot be realized");
    r.both = std::max(r.both, 0.0);
    r.view1_only = std::max(r.view1_only, 0.0);
    r.view2_only = std::max(r.view2_only, 0.0);
    r.neither = std::max(r.neither, 0.0);
    return r;
}

GeneratedData gen_insufficient_two_view(const InsufficientSpec& spec) {
    if (spec.dim1 < 1 || spec.dim2 < 1) throw ConfigError("dimensions must be at least 1");
    if (!(spec.uninformative_halfwidth > 0 && spec.uninformative_halfwidth < 1))
        throw ConfigError("uninformative half-width must lie in (0,1)");
    const auto masses = insufficient_regions(spec);
    const auto counts =
        apportion(spec.n, {masses.view1_only, masses.view2_only, masses.both, masses.neither});
    std::vector<Region> regions;
    const Region kinds[] = {Region::view1_only, Region::view2_only, Region::both, Region::neither};
    for (std::size_t k = 0; k < 4; ++k) regions.insert(regions.end(), counts[k], kinds[k]);
    Rng rng(spec.seed);
    rng.shuffle(regions);

    GeneratedData g;
    g.data.schema1 = ViewSchema::numeric(spec.dim1, "a");
    g.data.schema2 = ViewSchema::numeric(spec.dim2, "b");
    const double h = spec.uninformative_halfwidth;
    auto draw = [&](bool informative, int y, std::size_t dim) {
        FeatureVector x(dim);
        x[0] = informative ? y * rng.uniform(1.0, 2.0) : rng.uniform(-h, h);
        for (std::size_t k = 1; k < dim; ++k) x[k] = rng.uniform(-h, h);
        return x;
    };
    for (std::size_t i = 0; i < spec.n; ++i) {
        const Region r = regions[i];
        const bool inf1 = r == Region::view1_only || r == Region::both;
        const bool inf2 = r == Region::view2_only || r == Region::both;
        const int y = rng.sign();
        Example e;
        e.id = i;
        e.label = y;
        e.view1 = draw(inf1, y, spec.dim1);
        e.view2 = draw(inf2, y, spec.dim2);
        const double p1 = inf1 ? (y > 0 ? 1.0 : 0.0) : 0.5;
        const double p2 = inf2 ? (y > 0 ? 1.0 : 0.0) : 0.5;
        g.data.examples.push_back(std::move(e));
        g.oracle.truth.push_back(y);
        g.oracle.posterior1.push_back(p1);
        g.oracle.posterior2.push_back(p2);
        g.oracle.bayes_margin1.push_back(2 * p1 - 1);
        g.oracle.bayes_margin2.push_back(2 * p2 - 1);
        g.oracle.region.push_back(r);
    }
    return g;
}

MarginPairs gen_margin_pairs(const MarginPairSpec& spec) {
    check_prob(spec.both_right, "both_right");
    check_prob(spec.both_wrong, "both_wrong");
    if (spec.both_right + spec.both_wrong > 1.0) throw ConfigError("agreement masses exceed 1");
    if (spec.gain_exponent <= 0) throw ConfigError("gain exponent must be positive");
    if (!(spec.risk_max > 0 && spec.risk_max <= 1)) throw ConfigError("risk_max must lie in (0,1]");
    Rng rng(spec.seed);
    MarginPairs out;
    auto magnitude = [&]() { return 1.0 - rng.uniform(); };  // (0, 1]
    for (std::size_t i = 0; i < spec.n; ++i) {
        const int y = rng.sign();
        const double u = rng.uniform();
        double a, b;
        if (u < spec.both_right) {
            a = y * magnitude();
            b = y * magnitude();
        } else if (u < spec.both_right + spec.both_wrong) {
            a = -y * magnitude();
            b = -y * magnitude();
        } else {
            const double gain = std::pow(magnitude(), 1.0 / spec.gain_exponent);
            const double risk = spec.risk_max * magnitude();
            if (rng.bernoulli(0.5)) {
                a = y * gain;
                b = -y * risk;
            } else {
                a = -y * risk;
                b = y * gain;
            }
        }
        out.f1.push_back(a);
        out.f2.push_back(b);
        out.truth.push_back(y);
    }
    return out;
}

std::vector<Seed> StructuredGraphs::labeled_seeds() const {
    std::vector<Seed> s;
    for (auto i : labeled) s.push_back({i, double(truth[i])});
    return s;
}

std::vector<std::size_t> StructuredGraphs::unlabeled() const {
    std::vector<char> is_l(truth.size(), 0);
    for (auto i : labeled) is_l[i] = 1;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (!is_l[i]) out.push_back(i);
    return out;
}

namespace {

void check_partition(std::size_t n, const std::vector<std::vector<std::size_t>>& comps) {
    std::vector<int> seen(n, 0);
    for (const auto& c : comps) {
        if (c.empty()) throw ConfigError("empty component");
        for (auto i : c) {
            if (i >= n) throw ConfigError("component member out of range");
            if (seen[i]++) throw ConfigError("node " + std::to_string(i) + " appears in two components");
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!seen[i]) throw ConfigError("node " + std::to_string(i) + " is in no component");
}

GraphMatrix clique_graph(std::size_t n, const std::vector<std::vector<std::size_t>>& comps, Rng* rng) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
    for (const auto& c : comps)
        for (std::size_t a = 0; a < c.size(); ++a)
            for (std::size_t b = a + 1; b < c.size(); ++b) {
                const double v = rng ? rng->uniform(0.1, 1.0) : 1.0;
                w(Eigen::Index(c[a]), Eigen::Index(c[b])) = v;
                w(Eigen::Index(c[b]), Eigen::Index(c[a])) = v;
            }
    return GraphMatrix::from_weights(std::move(w));
}

}  // namespace

std::vector<int> truth_from_purity(std::size_t n, const std::vector<std::vector<std::size_t>>& components,
                                   const std::vector<double>& purity) {
    check_partition(n, components);
    if (!purity.empty() && purity.size() != components.size())
        throw ConfigError("one purity target per component is required");
    std::vector<int> truth(n, 0);
    for (std::size_t c = 0; c < components.size(); ++c) {
        const double p = purity.empty() ? 1.0 : purity[c];
        const double exact = p * double(components[c].size());
        const double rounded = std::round(exact);
        if (p < 0.5 || p > 1.0 || std::abs(exact - rounded) > 1e-9)
            throw ConfigError("purity " + std::to_string(p) + " infeasible for component of size " +
                              std::to_string(components[c].size()));
        const int major = c % 2 == 0 ? 1 : -1;
        for (std::size_t k = 0; k < components[c].size(); ++k)
            truth[components[c][k]] = k < static_cast<std::size_t>(rounded) ? major : -major;
    }
    return truth;
}

StructuredGraphs gen_structured_graphs(const StructuredGraphSpec& spec) {
    check_partition(spec.n, spec.components1);
    check_partition(spec.n, spec.components2);
    if (spec.components1.size() > 4 || spec.components2.size() > 4)
        throw ConfigError("at most 4 components per graph");
    StructuredGraphs g;
    Rng rng(spec.seed);
    g.p1 = clique_graph(spec.n, spec.components1, spec.random_weights ? &rng : nullptr);
    g.p2 = clique_graph(spec.n, spec.components2, spec.random_weights ? &rng : nullptr);
    if (!spec.truth.empty()) {
        if (spec.truth.size() != spec.n) throw ConfigError("truth vector length mismatch");
        g.truth = spec.truth;
    } else {
        g.truth = truth_from_purity(spec.n, spec.components1, spec.purity1);
    }
    for (auto i : spec.labeled)
        if (i >= spec.n) throw ConfigError("labeled node out of range");
    g.labeled = spec.labeled;
    return g;
}

std::vector<std::vector<std::vector<std::size_t>>> set_partitions(std::size_t n, std::size_t max_blocks) {
    std::vector<std::vector<std::vector<std::size_t>>> out;
    std::vector<std::size_t> code(n, 0);
    // restricted growth strings
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t blocks) {
        if (i == n) {
            std::vector<std::vector<std::size_t>> p(blocks);
            for (std::size_t k = 0; k < n; ++k) p[code[k]].push_back(k);
            out.push_back(std::move(p));
            return;
        }
        for (std::size_t b = 0; b <= blocks && b < max_blocks; ++b) {
            code[i] = b;
            rec(i + 1, std::max(blocks, b + 1));
        }
    };
    if (n == 0) return {{}};
    rec(0, 0);
    return out;
}

std::size_t enumerate_structured_graphs(std::size_t n, std::size_t max_blocks,
                                        const std::function<void(const StructuredGraphs&)>& visit) {
    if (n > 12) throw ConfigError("exhaustive mode supports at most 12 nodes");
    const auto parts = set_partitions(n, max_blocks);
    std::size_t count = 0;
    for (const auto& a : parts) {
        for (const auto& b : parts) {
            StructuredGraphs g;
            g.p1 = clique_graph(n, a, nullptr);
            g.p2 = clique_graph(n, b, nullptr);
            // truth constant on components of the joined partition
            const auto joined = combinative_graph(g.p1, g.p2);
            g.truth.assign(n, 0);
            for (std::size_t c = 0; c < joined.components().size(); ++c)
                for (auto i : joined.components()[c]) g.truth[i] = c % 2 == 0 ? 1 : -1;
            for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
                g.labeled.clear();
                for (std::size_t i = 0; i < n; ++i)
                    if (mask >> i & 1) g.labeled.push_back(i);
                visit(g);
                ++count;
            }
        }
    }
    return count;
}

}  // namespace cotrain
