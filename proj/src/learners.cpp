#include "cotrain/learners.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"
#include <stdexcept>

#include "cotrain/errors.hpp"
#include "cotrain/rng.hpp"

namespace cotrain {

namespace {

constexpr int kModelFormatVersion = 1;

double squash(double score) { return std::tanh(0.5 * score); }

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::size_t encoded_size(const ViewSchema& s) {
    std::size_t n = 0;
    for (const auto& f : s.features) n += f.kind == FeatureKind::numeric ? 1 : f.arity();
    return n;
}

}  // namespace

std::string to_string(LearnerKind k) { return k == LearnerKind::naive_bayes ? "naive-bayes" : "linear-margin"; }

LearnerKind learner_kind_from_string(const std::string& s) {
    if (s == "naive-bayes" || s == "nb") return LearnerKind::naive_bayes;
    if (s == "linear-margin" || s == "linear") return LearnerKind::linear_margin;
    throw ConfigError("unknown learner kind '" + s + "'");
}

ViewSample view_sample(std::span<const Example> data, int view) {
    ViewSample s;
    for (const auto& e : data) {
        auto y = e.training_label();
        if (y) s.add(e.view(view), *y);
    }
    return s;
}

int sign_of(double m) { return m > 0 ? 1 : (m < 0 ? -1 : 0); }

void ClassifierModel::check_arity(const FeatureVector& x) const {
    if (x.size() != schema_.size())
        throw std::invalid_argument("shape error: instance has " + std::to_string(x.size()) + " features, model expects " +
                                    std::to_string(schema_.size()));
}

void ClassifierModel::encode(const FeatureVector& x, std::vector<double>& out) const {
    out.assign(shift_.size(), 0.0);
    std::size_t pos = 0;
    for (std::size_t j = 0; j < schema_.size(); ++j) {
        const auto& f = schema_.features[j];
        if (f.kind == FeatureKind::numeric) {
            out[pos] = (x[j] - shift_[pos]) / scale_[pos];
            ++pos;
        } else {
            const auto code = static_cast<long long>(x[j]);
            if (code >= 0 && static_cast<std::size_t>(code) < f.arity()) out[pos + static_cast<std::size_t>(code)] = 1.0;
            pos += f.arity();
        }
    }
}

double ClassifierModel::nb_log_odds(const FeatureVector& x) const {
    double lo = log_prior_odds_;
    for (std::size_t j = 0; j < schema_.size(); ++j) {
        const auto& f = schema_.features[j];
        if (f.kind == FeatureKind::categorical) {
            const auto code = static_cast<long long>(x[j]);
            if (code >= 0 && static_cast<std::size_t>(code) < cat_log_ratio_[j].size())
                lo += cat_log_ratio_[j][static_cast<std::size_t>(code)];
        } else {
            const double dp = x[j] - mean_pos_[j], dn = x[j] - mean_neg_[j];
            lo += -0.5 * std::log(var_pos_[j]) - dp * dp / (2 * var_pos_[j]) + 0.5 * std::log(var_neg_[j]) +
                  dn * dn / (2 * var_neg_[j]);
        }
    }
    return lo;
}

double ClassifierModel::predict_margin(const FeatureVector& x) const {
    check_arity(x);
    if (constant_) return constant_margin_;
    if (kind_ == LearnerKind::naive_bayes) return squash(nb_log_odds(x));
    std::vector<double> enc;
    encode(x, enc);
    double s = bias_;
    for (std::size_t k = 0; k < enc.size(); ++k) s += weights_[k] * enc[k];
    return squash(s);
}

int ClassifierModel::predict(const FeatureVector& x) const { return sign_of(predict_margin(x)); }

double ClassifierModel::norm() const {
    if (kind_ == LearnerKind::naive_bayes || constant_) return 1.0;
    double s = bias_ * bias_;
    for (double w : weights_) s += w * w;
    return std::sqrt(s);
}

ClassifierModel ClassifierModel::linear(int view_id, const ViewSchema& schema, std::vector<double> weights,
                                        double bias) {
    ClassifierModel m;
    m.view_id_ = view_id;
    m.kind_ = LearnerKind::linear_margin;
    m.schema_ = schema;
    const std::size_t dim = encoded_size(schema);
    if (weights.size() != dim) throw std::invalid_argument("linear model weight count does not match schema");
    m.shift_.assign(dim, 0.0);
    m.scale_.assign(dim, 1.0);
    m.weights_ = std::move(weights);
    m.bias_ = bias;
    return m;
}

ClassifierModel ClassifierModel::constant(int view_id, const ViewSchema& schema, double margin) {
    ClassifierModel m;
    m.view_id_ = view_id;
    m.schema_ = schema;
    m.constant_ = true;
    m.constant_margin_ = std::clamp(margin, -1.0, 1.0);
    return m;
}

ClassifierModel train_erm(const ViewSample& data, const ViewSchema& schema, LearnerKind kind, int view_id,
                          const LearnerOptions& opts, std::uint64_t seed) {
    if (data.empty()) throw std::invalid_argument("training error: empty training sample");
    for (const auto* x : data.x)
        if (x->size() != schema.size()) throw std::invalid_argument("shape error in training sample");

    ClassifierModel m;
    m.view_id_ = view_id;
    m.kind_ = kind;
    m.schema_ = schema;
    m.train_size_ = data.size();

    std::size_t n_pos = 0;
    for (int y : data.y) n_pos += y > 0;
    const std::size_t n_neg = data.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        m.constant_ = true;
        m.constant_margin_ = n_pos ? 1.0 : -1.0;
        m.single_class_ = true;
        m.train_error_ = 0.0;
        return m;
    }

    const std::size_t d = schema.size();
    if (kind == LearnerKind::naive_bayes) {
        const double a = opts.laplace_alpha;
        m.log_prior_odds_ = std::log(double(n_pos) / double(n_neg));
        m.cat_log_ratio_.assign(d, {});
        m.mean_pos_.assign(d, 0.0);
        m.mean_neg_.assign(d, 0.0);
        m.var_pos_.assign(d, 1.0);
        m.var_neg_.assign(d, 1.0);
        for (std::size_t j = 0; j < d; ++j) {
            const auto& f = schema.features[j];
            if (f.kind == FeatureKind::categorical) {
                const std::size_t k = f.arity();
                std::vector<double> cp(k, 0.0), cn(k, 0.0);
                for (std::size_t i = 0; i < data.size(); ++i) {
                    const auto code = static_cast<long long>((*data.x[i])[j]);
                    if (code < 0 || static_cast<std::size_t>(code) >= k) continue;
                    (data.y[i] > 0 ? cp : cn)[static_cast<std::size_t>(code)] += 1.0;
                }
                auto& r = m.cat_log_ratio_[j];
                r.resize(k);
                for (std::size_t v = 0; v < k; ++v)
                    r[v] = std::log((cp[v] + a) / (double(n_pos) + a * double(k))) -
                           std::log((cn[v] + a) / (double(n_neg) + a * double(k)));
            } else {
                double sp = 0, sn = 0;
                for (std::size_t i = 0; i < data.size(); ++i) ((data.y[i] > 0) ? sp : sn) += (*data.x[i])[j];
                const double mp = sp / double(n_pos), mn = sn / double(n_neg);
                double vp = 0, vn = 0;
                for (std::size_t i = 0; i < data.size(); ++i) {
                    const double v = (*data.x[i])[j];
                    if (data.y[i] > 0)
                        vp += (v - mp) * (v - mp);
                    else
                        vn += (v - mn) * (v - mn);
                }
                m.mean_pos_[j] = mp;
                m.mean_neg_[j] = mn;
                m.var_pos_[j] = std::max(vp / double(n_pos), opts.variance_floor);
                m.var_neg_[j] = std::max(vn / double(n_neg), opts.variance_floor);
            }
        }
    } else {
        // Encoding: numeric columns standardized, categorical columns one-hot.
        const std::size_t dim = encoded_size(schema);
        m.shift_.assign(dim, 0.0);
        m.scale_.assign(dim, 1.0);
        std::size_t pos = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const auto& f = schema.features[j];
            if (f.kind == FeatureKind::numeric) {
                double s = 0, ss = 0;
                for (const auto* x : data.x) s += (*x)[j];
                const double mean = s / double(data.size());
                for (const auto* x : data.x) ss += ((*x)[j] - mean) * ((*x)[j] - mean);
                const double sd = std::sqrt(ss / double(data.size()));
                m.shift_[pos] = mean;
                m.scale_[pos] = sd > 1e-12 ? sd : 1.0;
                ++pos;
            } else {
                pos += f.arity();
            }
        }
        std::vector<std::vector<double>> enc(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) m.encode(*data.x[i], enc[i]);

        m.weights_.assign(dim, 0.0);
        m.bias_ = 0.0;
        if (seed != 0) {
            Rng rng(seed);
            for (auto& w : m.weights_) w = 0.1 * rng.normal();
        }
        std::vector<double> grad(dim);
        const double inv_n = 1.0 / double(data.size());
        for (int it = 0; it < opts.iterations; ++it) {
            std::fill(grad.begin(), grad.end(), 0.0);
            double gb = 0.0;
            for (std::size_t i = 0; i < data.size(); ++i) {
                double s = m.bias_;
                for (std::size_t k = 0; k < dim; ++k) s += m.weights_[k] * enc[i][k];
                const double y = data.y[i];
                const double g = -y * sigmoid(-y * s) * inv_n;
                for (std::size_t k = 0; k < dim; ++k) grad[k] += g * enc[i][k];
                gb += g;
            }
            for (std::size_t k = 0; k < dim; ++k) m.weights_[k] -= opts.step * (grad[k] + opts.l2 * m.weights_[k]);
            m.bias_ -= opts.step * gb;
        }
    }

    // An abstention is scored as half an error, the expected cost of a coin-flip tie break.
    double wrong = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double p = m.predict_margin(*data.x[i]) * data.y[i];
        wrong += p < 0 ? 1.0 : (p == 0 ? 0.5 : 0.0);
    }
    m.train_error_ = wrong / double(data.size());
    return m;
}

std::string ClassifierModel::to_json() const {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["kind"] = to_string(kind_);
    j["view_id"] = view_id_;
    j["schema_hash"] = schema_.hash();
    j["train_size"] = train_size_;
    j["train_error"] = train_error_;
    j["single_class"] = single_class_;
    nlohmann::json p;
    p["constant"] = constant_;
    p["constant_margin"] = constant_margin_;
    p["log_prior_odds"] = log_prior_odds_;
    p["cat_log_ratio"] = cat_log_ratio_;
    p["mean_pos"] = mean_pos_;
    p["mean_neg"] = mean_neg_;
    p["var_pos"] = var_pos_;
    p["var_neg"] = var_neg_;
    p["shift"] = shift_;
    p["scale"] = scale_;
    p["weights"] = weights_;
    p["bias"] = bias_;
    j["parameters"] = p;
    return j.dump();
}

ClassifierModel ClassifierModel::from_json(const std::string& text, const ViewSchema& schema) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model json: ") + e.what());
    }
    if (j.value("format_version", 0) != kModelFormatVersion) throw ParseError("unsupported model format version");
    if (j.at("schema_hash").get<std::uint64_t>() != schema.hash()) throw ParseError("model schema hash mismatch");
    ClassifierModel m;
    m.schema_ = schema;
    m.kind_ = learner_kind_from_string(j.at("kind").get<std::string>());
    m.view_id_ = j.at("view_id").get<int>();
    m.train_size_ = j.at("train_size").get<std::size_t>();
    m.train_error_ = j.at("train_error").get<double>();
    m.single_class_ = j.at("single_class").get<bool>();
    const auto& p = j.at("parameters");
    m.constant_ = p.at("constant").get<bool>();
    m.constant_margin_ = p.at("constant_margin").get<double>();
    m.log_prior_odds_ = p.at("log_prior_odds").get<double>();
    m.cat_log_ratio_ = p.at("cat_log_ratio").get<std::vector<std::vector<double>>>();
    m.mean_pos_ = p.at("mean_pos").get<std::vector<double>>();
    m.mean_neg_ = p.at("mean_neg").get<std::vector<double>>();
    m.var_pos_ = p.at("var_pos").get<std::vector<double>>();
    m.var_neg_ = p.at("var_neg").get<std::vector<double>>();
    m.shift_ = p.at("shift").get<std::vector<double>>();
    m.scale_ = p.at("scale").get<std::vector<double>>();
    m.weights_ = p.at("weights").get<std::vector<double>>();
    m.bias_ = p.at("bias").get<double>();
    return m;
}

EvalReport evaluate_margins(std::span<const double> margins, std::span<const int> labels) {
    if (margins.empty()) throw std::invalid_argument("evaluation error: empty sample");
    if (margins.size() != labels.size()) throw std::invalid_argument("evaluation error: size mismatch");
    std::size_t wrong = 0, right = 0, abstain = 0;
    for (std::size_t i = 0; i < margins.size(); ++i) {
        const double p = margins[i] * labels[i];
        if (margins[i] == 0.0)
            ++abstain;
        else if (p < 0)
            ++wrong;
        else
            ++right;
    }
    const double n = double(margins.size());
    return {double(wrong) / n, double(right) / n, double(abstain) / n, margins.size()};
}

std::vector<double> margins_on(const ClassifierModel& model, std::span<const Example> sample) {
    std::vector<double> out;
    out.reserve(sample.size());
    for (const auto& e : sample) out.push_back(model.margin(e));
    return out;
}

EvalReport error_rate(const ClassifierModel& model, std::span<const Example> sample) {
    std::vector<double> m;
    std::vector<int> y;
    for (const auto& e : sample) {
        if (!e.label) throw std::invalid_argument("evaluation error: example without true label");
        m.push_back(model.margin(e));
        y.push_back(*e.label);
    }
    return evaluate_margins(m, y);
}

EvalReport error_rate(const ClassifierModel& model, const ViewSample& sample) {
    std::vector<double> m;
    for (const auto* x : sample.x) m.push_back(model.predict_margin(*x));
    return evaluate_margins(m, sample.y);
}

double disagreement(std::span<const double> a, std::span<const double> b) {
    if (a.empty()) throw std::invalid_argument("evaluation error: empty sample");
    if (a.size() != b.size()) throw std::invalid_argument("evaluation error: size mismatch");
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += sign_of(a[i]) != sign_of(b[i]);
    return double(diff) / double(a.size());
}

double disagreement(const ClassifierModel& a, const ClassifierModel& b, std::span<const Example> sample) {
    const auto ma = margins_on(a, sample);
    const auto mb = margins_on(b, sample);
    return disagreement(ma, mb);
}

}  // namespace cotrain
