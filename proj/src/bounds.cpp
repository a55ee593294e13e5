#include "cotrain/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cotrain/errors.hpp"

namespace cotrain {

double xi_bound(double eps0, std::size_t l, std::size_t u, std::size_t round, double surplus) {
    if (l == 0) throw DomainError("labeled count must be positive");
    const double L = double(l);
    if (round == 0) return eps0;
    return eps0 * std::sqrt(L * L + double(round) * double(u) * L) / L - double(u) * surplus / L;
}

ErrorBoundResult error_bounds(std::size_t l, std::size_t u, std::size_t round, double eps1_0, double eps2_0,
                               std::span<const double> cross12, std::span<const double> cross21,
                               std::span<const double> eps1, std::span<const double> eps2) {
    if (cross12.size() < round || cross21.size() < round || eps1.size() < round || eps2.size() < round)
        throw std::invalid_argument("error_bounds: history shorter than the round index");
    ErrorBoundResult r;
    for (std::size_t k = 0; k < round; ++k) {
        r.theta += cross12[k] - eps2[k];
        r.delta += cross21[k] - eps1[k];
    }
    r.xi1 = xi_bound(eps1_0, l, u, round, r.theta);
    r.xi2 = xi_bound(eps2_0, l, u, round, r.delta);
    r.theta_condition = round > 0 && r.theta > double(round) * eps1_0 / 2.0;
    r.delta_condition = round > 0 && r.delta > double(round) * eps2_0 / 2.0;
    return r;
}

std::size_t required_labeled_count(double eps1_0, double eps2_0, double h1_size, double h2_size, double delta,
                                   double noise) {
    if (noise < 0.0 || noise >= 0.5) throw DomainError("noise rate must lie in [0, 1/2)");
    if (delta <= 0.0 || delta >= 1.0) throw DomainError("confidence delta must lie in (0, 1)");
    auto one = [&](double eps, double h) {
        if (eps <= 0.0 || eps >= 0.5) throw DomainError("initial error must lie in (0, 1/2)");
        if (h < 1.0) throw DomainError("hypothesis space size must be at least 1");
        const double g = 1.0 - 2.0 * noise;
        return 2.0 / (eps * eps * g * g) * std::log(2.0 * h / delta);
    };
    const double need = std::max(one(eps1_0, h1_size), one(eps2_0, h2_size));
    return static_cast<std::size_t>(std::ceil(need - 1e-9));
}

double initial_disagreement_threshold(double eps1_0, double eps2_0) {
    return std::max(eps1_0 + eps2_0 / 2.0, eps2_0 + eps1_0 / 2.0);
}

double expected_disagreement_cond_indep(double eps1, double eps2) {
    return (1.0 - eps1) * eps2 + eps1 * (1.0 - eps2);
}

ExpansionMasses expansion_measure(std::span<const std::size_t> s1, std::span<const std::size_t> s2,
                                  std::size_t universe_size) {
    if (universe_size == 0) throw DomainError("empty universe");
    std::vector<char> in1(universe_size, 0), in2(universe_size, 0);
    for (auto x : s1) {
        if (x >= universe_size) throw std::invalid_argument("set member outside the universe");
        in1[x] = 1;
    }
    for (auto x : s2) {
        if (x >= universe_size) throw std::invalid_argument("set member outside the universe");
        in2[x] = 1;
    }
    std::size_t sym = 0, both = 0, neither = 0;
    for (std::size_t i = 0; i < universe_size; ++i) {
        sym += in1[i] != in2[i];
        both += in1[i] && in2[i];
        neither += !in1[i] && !in2[i];
    }
    const double n = double(universe_size);
    return {double(sym) / n, double(both) / n, double(neither) / n};
}

namespace {

std::size_t to_count(double mass, std::size_t n, const char* what) {
    const double c = mass * double(n);
    const double r = std::round(c);
    if (std::abs(c - r) > 1e-9 || r < 0) throw InfeasibleError(std::string(what) + " is not a multiple of 1/n");
    return static_cast<std::size_t>(r);
}

}  // namespace

DisagreementPair construct_disagreement_pair(std::span<const int> h1, std::span<const int> truth, double a, double b,
                                             double target_d) {
    const std::size_t n = h1.size();
    if (n == 0 || truth.size() != n) throw std::invalid_argument("labelings must be non-empty and equally long");
    std::vector<std::size_t> wrong, right;
    for (std::size_t i = 0; i < n; ++i) (h1[i] != truth[i] ? wrong : right).push_back(i);
    if (wrong.size() != to_count(a, n, "a")) throw std::invalid_argument("err(h1) does not equal a");
    const double tol = 1e-12;
    if (target_d < std::abs(a - b) - tol || target_d > a + b + tol)
        throw InfeasibleError("target disagreement outside [|a-b|, a+b]");
    if (b < 0 || b > 1) throw InfeasibleError("b outside [0,1]");

    // keep (a+b-d)/2 of h1's errors, correct the rest, and spend (d+b-a)/2 on new errors
    const std::size_t keep = to_count((a + b - target_d) / 2.0, n, "(a+b-d)/2");
    const std::size_t fresh = to_count((target_d + b - a) / 2.0, n, "(d+b-a)/2");
    if (keep > wrong.size() || fresh > right.size()) throw InfeasibleError("construction sets exceed the space");

    DisagreementPair out;
    out.h2.assign(h1.begin(), h1.end());
    out.construction_case = (b >= a && keep == wrong.size()) ? 1 : 2;
    for (std::size_t k = 0; k < wrong.size(); ++k) {
        if (k < keep) {
            out.kept_errors.push_back(wrong[k]);
        } else {
            out.corrected_errors.push_back(wrong[k]);
            out.h2[wrong[k]] = truth[wrong[k]];
        }
    }
    for (std::size_t k = 0; k < fresh; ++k) {
        out.new_errors.push_back(right[k]);
        out.h2[right[k]] = -truth[right[k]];
    }
    return out;
}

}  // namespace cotrain
