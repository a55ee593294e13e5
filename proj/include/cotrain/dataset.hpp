#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cotrain {

using FeatureVector = std::vector<double>;

enum class FeatureKind { numeric, categorical };

struct FeatureInfo {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    std::vector<std::string> categories;  // code -> token, categorical only

    std::size_t arity() const { return categories.size(); }
};

struct ViewSchema {
    std::vector<FeatureInfo> features;

    std::size_t size() const { return features.size(); }
    // Stable digest of names, kinds and category tables.
    std::uint64_t hash() const;
    static ViewSchema numeric(std::size_t dim, const std::string& prefix = "x");
};

struct PseudoLabel {
    int label = 0;
    int round = 0;
    int source_view = 0;
};

struct Example {
    std::size_t id = 0;
    FeatureVector view1;
    FeatureVector view2;
    std::optional<int> label;
    std::optional<PseudoLabel> pseudo;

    const FeatureVector& view(int v) const { return v == 1 ? view1 : view2; }
    // Label used for training: the true label when present, else the pseudo-label.
    std::optional<int> training_label() const;
    void set_pseudo(const PseudoLabel& p);
};

struct TwoViewDataset {
    ViewSchema schema1;
    ViewSchema schema2;
    std::vector<Example> examples;
    bool shared_view = false;  // both views read the same columns

    std::size_t size() const { return examples.size(); }
    const ViewSchema& schema(int v) const { return v == 1 ? schema1 : schema2; }
    std::size_t count_label(int y) const;
    std::size_t count_unlabeled() const;
};

// Column mapping for CSV files: 0-based inclusive ranges.
struct ColumnMap {
    std::size_t label = 0;
    std::size_t view1_first = 0, view1_last = 0;
    std::size_t view2_first = 0, view2_last = 0;

    // Parses "view1=1..57,view2=58..90,label=0".
    static ColumnMap parse(const std::string& text);
    std::string to_string() const;
};

struct LoadReport {
    std::size_t n = 0, positives = 0, negatives = 0, unlabeled = 0;
    double positive_fraction() const { return n ? double(positives) / double(n) : 0.0; }
};

TwoViewDataset load_csv(const std::string& path, const ColumnMap& columns,
                        LoadReport* report = nullptr);
TwoViewDataset parse_csv(const std::string& text, const ColumnMap& columns,
                         LoadReport* report = nullptr);

// Writes label, view1 and view2 columns (view2 omitted when the views are
// shared). Returns the column map that reloads the file.
ColumnMap write_csv(const TwoViewDataset& ds, const std::string& path);
std::string format_csv(const TwoViewDataset& ds, ColumnMap* columns = nullptr);

struct SplitSpec {
    double test_fraction = 0.25;
    std::size_t labeled_pos = 0;
    std::size_t labeled_neg = 0;
    std::uint64_t seed = 0;
};

// True labels of unlabeled-set members, reachable only from evaluation code.
class HiddenLabels {
public:
    HiddenLabels() = default;
    explicit HiddenLabels(std::size_t n) : labels_(n, 0) {}
    void set(std::size_t id, int y);
    // 0 when unknown.
    int label_of(std::size_t id) const;
    bool known(std::size_t id) const { return label_of(id) != 0; }

private:
    std::vector<int> labels_;
};

struct Split {
    std::vector<Example> labeled;
    std::vector<Example> unlabeled;  // labels stripped
    std::vector<Example> test;
    HiddenLabels hidden;

    std::vector<std::size_t> labeled_ids() const;
    std::vector<std::size_t> unlabeled_ids() const;
    std::vector<std::size_t> test_ids() const;
};

Split split_dataset(const TwoViewDataset& ds, const SplitSpec& spec);

// Attaches hidden labels back onto a copy of unlabeled examples.
std::vector<Example> reveal(const std::vector<Example>& unlabeled, const HiddenLabels& hidden);

}  // namespace cotrain
