#include "cotrain/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cotrain/errors.hpp"

namespace cotrain {

namespace {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

using Index = Eigen::Index;

}  // namespace

GraphMatrix::GraphMatrix(std::size_t n) : weights_(Eigen::MatrixXd::Zero(Index(n), Index(n))) { finalize(); }

GraphMatrix GraphMatrix::from_weights(Eigen::MatrixXd weights) {
    if (weights.rows() != weights.cols()) throw std::invalid_argument("shape error: graph matrix must be square");
    if ((weights.array() < 0).any() || !weights.allFinite())
        throw std::invalid_argument("graph weights must be finite and nonnegative");
    GraphMatrix g;
    g.weights_ = std::move(weights);
    g.finalize();
    return g;
}

void GraphMatrix::finalize() {
    const std::size_t n = size();
    transition_ = weights_;
    isolated_.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = weights_.row(Index(i)).sum();
        if (s > 0)
            transition_.row(Index(i)) /= s;
        else
            isolated_[i] = true;
    }
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (weights_(Index(i), Index(j)) > 0 || weights_(Index(j), Index(i)) > 0) uf.unite(i, j);
    components_.clear();
    component_of_.assign(n, 0);
    std::vector<std::size_t> root_to_comp(n, SIZE_MAX);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = uf.find(i);
        if (root_to_comp[r] == SIZE_MAX) {
            root_to_comp[r] = components_.size();
            components_.emplace_back();
        }
        component_of_[i] = root_to_comp[r];
        components_[root_to_comp[r]].push_back(i);
    }
}

double GraphMatrix::max_row_defect() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
        if (!isolated_[i]) worst = std::max(worst, std::abs(transition_.row(Index(i)).sum() - 1.0));
    return worst;
}

Similarity similarity_from_string(const std::string& s) {
    if (s == "rbf") return Similarity::rbf;
    if (s == "cosine") return Similarity::cosine;
    if (s == "overlap" || s == "categorical-overlap") return Similarity::overlap;
    throw ConfigError("unknown similarity '" + s + "'");
}

GraphMatrix build_graph(std::span<const FeatureVector> features, std::span<const int> labels,
                        const GraphBuildOptions& opts) {
    if (opts.similarity == Similarity::rbf && opts.sigma <= 0) throw ConfigError("rbf sigma must be positive");
    if (opts.threshold <= 0 || opts.threshold > 1) throw ConfigError("graph threshold must lie in (0,1]");
    const std::size_t n = features.size();
    if (!labels.empty() && labels.size() != n) throw std::invalid_argument("label vector length mismatch");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(Index(n), Index(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& a = features[i];
            const auto& b = features[j];
            if (a.size() != b.size()) throw std::invalid_argument("shape error: feature arity differs");
            double s = 0.0;
            if (opts.similarity == Similarity::rbf) {
                double d2 = 0;
                for (std::size_t k = 0; k < a.size(); ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
                s = std::exp(-d2 / (2 * opts.sigma * opts.sigma));
            } else if (opts.similarity == Similarity::cosine) {
                double dot = 0, na = 0, nb = 0;
                for (std::size_t k = 0; k < a.size(); ++k) {
                    dot += a[k] * b[k];
                    na += a[k] * a[k];
                    nb += b[k] * b[k];
                }
                s = (na > 0 && nb > 0) ? std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0) : 0.0;
            } else {
                std::size_t same = 0;
                for (std::size_t k = 0; k < a.size(); ++k) same += a[k] == b[k];
                s = a.empty() ? 0.0 : double(same) / double(a.size());
            }
            if (s < opts.threshold) s = 0.0;
            if (!labels.empty() && labels[i] != 0 && labels[j] != 0) s = labels[i] == labels[j] ? 1.0 : 0.0;
            w(Index(i), Index(j)) = w(Index(j), Index(i)) = s;
        }
    }
    return GraphMatrix::from_weights(std::move(w));
}

GraphMatrix combinative_graph(const GraphMatrix& p1, const GraphMatrix& p2) {
    if (p1.size() != p2.size()) throw std::invalid_argument("shape error: graphs differ in size");
    return GraphMatrix::from_weights(p1.weights().cwiseMax(p2.weights()));
}

std::string format_graph(const GraphMatrix& g) {
    std::ostringstream os;
    os << g.size() << '\n';
    char buf[64];
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double w = g.weights()(Index(i), Index(j));
            if (w != 0.0) {
                std::snprintf(buf, sizeof buf, "%.17g", w);
                os << i << ' ' << j << ' ' << buf << '\n';
            }
        }
    return os.str();
}

GraphMatrix parse_graph(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    long long n = -1;
    Eigen::MatrixXd w;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        if (n < 0) {
            if (!(ls >> n)) continue;
            if (n < 0) throw ParseError("graph header: negative node count");
            w = Eigen::MatrixXd::Zero(n, n);
            continue;
        }
        long long i, j;
        double v;
        if (!(ls >> i)) continue;
        if (!(ls >> j >> v)) throw ParseError("graph line " + std::to_string(line_no) + ": expected 'i j weight'");
        if (i < 0 || j < 0 || i >= n || j >= n)
            throw ParseError("graph line " + std::to_string(line_no) + ": node index out of range");
        if (v < 0 || !std::isfinite(v)) throw ParseError("graph line " + std::to_string(line_no) + ": bad weight");
        w(i, j) = v;
    }
    if (n < 0) throw ParseError("graph file without node-count header");
    return GraphMatrix::from_weights(std::move(w));
}

void write_graph(const GraphMatrix& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << format_graph(g);
}

GraphMatrix read_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_graph(buf.str());
}

void PropagationResult::evaluate_against(std::span<const int> truth, std::span<const std::size_t> nodes) {
    std::size_t wrong = 0, right = 0, none = 0;
    for (auto t : nodes) {
        if (f[t] == 0.0)
            ++none;
        else if (f[t] * truth[t] > 0)
            ++right;
        else
            ++wrong;
    }
    const double n = nodes.empty() ? 1.0 : double(nodes.size());
    error = double(wrong) / n;
    accuracy = double(right) / n;
    uncertainty = double(none) / n;
}

namespace {

struct ComponentSystem {
    std::vector<std::size_t> unl, lab;
    Eigen::MatrixXd i_minus_puu;
    Eigen::MatrixXd pul;
    Eigen::VectorXd y;
};

ComponentSystem component_system(const GraphMatrix& p, const std::vector<std::size_t>& comp,
                                 const std::vector<double>& clamp, const std::vector<char>& is_seed) {
    ComponentSystem s;
    for (auto v : comp) (is_seed[v] ? s.lab : s.unl).push_back(v);
    const Index nu = Index(s.unl.size()), nl = Index(s.lab.size());
    s.i_minus_puu = Eigen::MatrixXd::Identity(nu, nu);
    s.pul.resize(nu, nl);
    s.y.resize(nl);
    for (Index a = 0; a < nu; ++a) {
        for (Index b = 0; b < nu; ++b) s.i_minus_puu(a, b) -= p(s.unl[std::size_t(a)], s.unl[std::size_t(b)]);
        for (Index b = 0; b < nl; ++b) s.pul(a, b) = p(s.unl[std::size_t(a)], s.lab[std::size_t(b)]);
    }
    for (Index b = 0; b < nl; ++b) s.y(b) = clamp[s.lab[std::size_t(b)]];
    return s;
}

std::string describe_component(std::size_t idx, const std::vector<std::size_t>& comp) {
    std::ostringstream os;
    os << "component " << idx << " {";
    for (std::size_t k = 0; k < comp.size() && k < 12; ++k) os << (k ? "," : "") << comp[k];
    if (comp.size() > 12) os << ",...";
    os << "}";
    return os.str();
}

Eigen::MatrixXd solve_component(const ComponentSystem& s, const Eigen::MatrixXd& rhs, std::size_t idx,
                                const std::vector<std::size_t>& comp) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(s.i_minus_puu);
    if (!lu.isInvertible())
        throw NumericError("singular propagation system in " + describe_component(idx, comp));
    return lu.solve(rhs);
}

}  // namespace

PropagationResult propagate_labels(const GraphMatrix& p, std::span<const Seed> seeds, const PropagationOptions& opts) {
    const std::size_t n = p.size();
    std::vector<double> clamp(n, 0.0);
    std::vector<char> is_seed(n, 0);
    for (const auto& s : seeds) {
        if (s.node >= n) throw std::invalid_argument("seed node out of range");
        if (is_seed[s.node]) throw std::invalid_argument("duplicate seed node " + std::to_string(s.node));
        is_seed[s.node] = 1;
        clamp[s.node] = s.value;
    }
    PropagationResult r;
    r.f.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (is_seed[i]) r.f[i] = clamp[i];

    if (opts.method == PropagationMethod::closed_form) {
        const auto& comps = p.components();
        for (std::size_t c = 0; c < comps.size(); ++c) {
            auto sys = component_system(p, comps[c], clamp, is_seed);
            if (sys.lab.empty() || sys.unl.empty()) continue;
            Eigen::VectorXd fu = solve_component(sys, sys.pul * sys.y, c, comps[c]);
            for (std::size_t a = 0; a < sys.unl.size(); ++a) r.f[sys.unl[a]] = fu(Index(a));
        }
    } else {
        Eigen::VectorXd f = Eigen::Map<Eigen::VectorXd>(r.f.data(), Index(n));
        const Eigen::MatrixXd& P = p.transition();
        std::size_t it = 0;
        for (; it < opts.max_iterations; ++it) {
            Eigen::VectorXd next = P * f;
            double change = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (is_seed[i]) next(Index(i)) = clamp[i];
                change = std::max(change, std::abs(next(Index(i)) - f(Index(i))));
            }
            f.swap(next);
            if (change < opts.tolerance) break;
        }
        r.iterations = it + 1;
        for (std::size_t i = 0; i < n; ++i) r.f[i] = f(Index(i));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_seed[i] && std::abs(r.f[i]) <= kNoIdea) r.f[i] = 0.0;
        if (r.f[i] != 0.0) r.labeled_set.push_back(i);
    }
    return r;
}

std::string to_string(ContributionVerdict v) {
    switch (v) {
        case ContributionVerdict::correct: return "correct";
        case ContributionVerdict::incorrect: return "incorrect";
        case ContributionVerdict::excluded: return "excluded";
        case ContributionVerdict::unreached: return "unreached";
    }
    return "?";
}

ContributionReport compute_contributions(const GraphMatrix& p, std::span<const Seed> seeds, std::span<const int> truth) {
    const std::size_t n = p.size();
    if (truth.size() != n) throw PreconditionError("contributions need a truth label for every node");
    std::vector<double> clamp(n, 0.0);
    std::vector<char> is_seed(n, 0);
    for (const auto& s : seeds) {
        is_seed[s.node] = 1;
        clamp[s.node] = s.value;
    }
    ContributionReport rep;
    const auto& comps = p.components();
    for (std::size_t c = 0; c < comps.size(); ++c) {
        auto sys = component_system(p, comps[c], clamp, is_seed);
        if (sys.unl.empty()) continue;
        Eigen::MatrixXd contrib;
        if (!sys.lab.empty()) contrib = solve_component(sys, sys.pul, c, comps[c]);
        for (std::size_t a = 0; a < sys.unl.size(); ++a) {
            const std::size_t t = sys.unl[a];
            if (truth[t] != 1 && truth[t] != -1) throw PreconditionError("missing truth label for node " + std::to_string(t));
            NodeContribution nc;
            nc.node = t;
            nc.component = c;
            for (std::size_t b = 0; b < sys.lab.size(); ++b) {
                const double w = contrib(Index(a), Index(b));
                const double yv = sys.y(Index(b));
                nc.f += w * yv;
                if ((yv > 0) == (truth[t] > 0))
                    nc.positive += w * std::abs(yv);
                else
                    nc.negative += w * std::abs(yv);
            }
            const double scale = std::max({1.0, nc.positive, nc.negative});
            if (nc.positive <= kNoIdea && nc.negative <= kNoIdea)
                nc.verdict = ContributionVerdict::unreached;
            else if (std::abs(nc.positive - nc.negative) <= 1e-12 * scale)
                nc.verdict = ContributionVerdict::excluded;
            else
                nc.verdict = nc.positive > nc.negative ? ContributionVerdict::correct : ContributionVerdict::incorrect;
            rep.nodes.push_back(nc);
        }
    }
    return rep;
}

}  // namespace cotrain
