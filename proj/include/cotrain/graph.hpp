#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cotrain/dataset.hpp"

namespace cotrain {

// Nonnegative weight matrix with its row-normalized transition matrix.
class GraphMatrix {
public:
    GraphMatrix() = default;
    explicit GraphMatrix(std::size_t n);
    static GraphMatrix from_weights(Eigen::MatrixXd weights);

    std::size_t size() const { return static_cast<std::size_t>(weights_.rows()); }
    const Eigen::MatrixXd& weights() const { return weights_; }
    const Eigen::MatrixXd& transition() const { return transition_; }
    double operator()(std::size_t i, std::size_t j) const { return transition_(Eigen::Index(i), Eigen::Index(j)); }

    bool isolated(std::size_t i) const { return isolated_[i]; }
    // Connected components of the undirected support; each sorted, ordered by smallest member.
    const std::vector<std::vector<std::size_t>>& components() const { return components_; }
    std::size_t component_of(std::size_t i) const { return component_of_[i]; }

    // Largest |row sum - 1| over non-isolated rows.
    double max_row_defect() const;

private:
    void finalize();

    Eigen::MatrixXd weights_;
    Eigen::MatrixXd transition_;
    std::vector<bool> isolated_;
    std::vector<std::vector<std::size_t>> components_;
    std::vector<std::size_t> component_of_;
};

enum class Similarity { rbf, cosine, overlap };
Similarity similarity_from_string(const std::string& s);

struct GraphBuildOptions {
    Similarity similarity = Similarity::rbf;
    double sigma = 1.0;
    double threshold = 0.5;
};

// labels[i]: +1/-1 for labeled nodes, 0 otherwise.
GraphMatrix build_graph(std::span<const FeatureVector> features, std::span<const int> labels,
                        const GraphBuildOptions& opts);

GraphMatrix combinative_graph(const GraphMatrix& p1, const GraphMatrix& p2);

std::string format_graph(const GraphMatrix& g);
GraphMatrix parse_graph(const std::string& text);
void write_graph(const GraphMatrix& g, const std::string& path);
GraphMatrix read_graph(const std::string& path);

struct Seed {
    std::size_t node;
    double value;  // usually +1 / -1
};

enum class PropagationMethod { closed_form, iterative };

struct PropagationOptions {
    PropagationMethod method = PropagationMethod::closed_form;
    double tolerance = 1e-13;
    std::size_t max_iterations = 200000;
};

// Scores with |f| at or below this are treated as "no idea".
inline constexpr double kNoIdea = 1e-12;

struct PropagationResult {
    std::vector<double> f;
    std::vector<std::size_t> labeled_set;  // nodes with f != 0
    std::size_t iterations = 0;
    // Filled by evaluate_against over unlabeled nodes.
    double error = 0.0, accuracy = 0.0, uncertainty = 0.0;

    bool labeled(std::size_t i) const { return f[i] != 0.0; }
    void evaluate_against(std::span<const int> truth, std::span<const std::size_t> nodes);
};

PropagationResult propagate_labels(const GraphMatrix& p, std::span<const Seed> seeds,
                                   const PropagationOptions& opts = {});

enum class ContributionVerdict { correct, incorrect, excluded, unreached };
std::string to_string(ContributionVerdict v);

struct NodeContribution {
    std::size_t node;
    std::size_t component;
    double positive = 0.0;
    double negative = 0.0;
    double f = 0.0;
    ContributionVerdict verdict = ContributionVerdict::unreached;
};

struct ContributionReport {
    std::vector<NodeContribution> nodes;
};

// Splits each unlabeled node's score into the parts pushed by seeds whose
// label matches the node's truth and by seeds that do not.
ContributionReport compute_contributions(const GraphMatrix& p, std::span<const Seed> seeds, std::span<const int> truth);

}  // namespace cotrain
