#include "cotrain/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cotrain/errors.hpp"
#include "cotrain/rng.hpp"

namespace cotrain {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = b + s.size();
    if (*b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

std::size_t parse_index(const std::string& s) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError("bad column index '" + s + "'");
    return v;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::uint64_t ViewSchema::hash() const {
    // FNV-1a over a canonical text form
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    };
    for (const auto& f : features) {
        mix(f.name);
        mix(f.kind == FeatureKind::numeric ? "num" : "cat");
        for (const auto& c : f.categories) mix(c);
    }
    return h;
}

ViewSchema ViewSchema::numeric(std::size_t dim, const std::string& prefix) {
    ViewSchema s;
    for (std::size_t j = 0; j < dim; ++j) s.features.push_back({prefix + std::to_string(j), FeatureKind::numeric, {}});
    return s;
}

std::optional<int> Example::training_label() const {
    if (label) return label;
    if (pseudo) return pseudo->label;
    return std::nullopt;
}

void Example::set_pseudo(const PseudoLabel& p) {
    if (label) return;  // true labels win
    pseudo = p;
}

std::size_t TwoViewDataset::count_label(int y) const {
    return static_cast<std::size_t>(std::count_if(examples.begin(), examples.end(),
                                                  [y](const Example& e) { return e.label && *e.label == y; }));
}

std::size_t TwoViewDataset::count_unlabeled() const {
    return static_cast<std::size_t>(
        std::count_if(examples.begin(), examples.end(), [](const Example& e) { return !e.label; }));
}

ColumnMap ColumnMap::parse(const std::string& text) {
    ColumnMap m;
    bool have_label = false, have1 = false, have2 = false;
    std::stringstream ss(text);
    std::string item;
    auto range = [](const std::string& v, std::size_t& first, std::size_t& last) {
        auto dots = v.find("..");
        if (dots == std::string::npos) {
            first = last = parse_index(trim(v));
        } else {
            first = parse_index(trim(v.substr(0, dots)));
            last = parse_index(trim(v.substr(dots + 2)));
        }
        if (last < first) throw ConfigError("empty column range '" + v + "'");
    };
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("column mapping entry without '=': " + item);
        std::string key = trim(item.substr(0, eq));
        std::string val = trim(item.substr(eq + 1));
        if (key == "label") {
            m.label = parse_index(val);
            have_label = true;
        } else if (key == "view1") {
            range(val, m.view1_first, m.view1_last);
            have1 = true;
        } else if (key == "view2") {
            range(val, m.view2_first, m.view2_last);
            have2 = true;
        } else {
            throw ConfigError("unknown column mapping key '" + key + "'");
        }
    }
    if (!have_label || !have1) throw ConfigError("column mapping needs label and view1");
    if (!have2) {
        m.view2_first = m.view1_first;
        m.view2_last = m.view1_last;
    }
    const bool same = m.view1_first == m.view2_first && m.view1_last == m.view2_last;
    const bool overlap = m.view1_first <= m.view2_last && m.view2_first <= m.view1_last;
    if (overlap && !same) throw ConfigError("view column ranges overlap");
    auto inside = [&](std::size_t a, std::size_t b) { return m.label >= a && m.label <= b; };
    if (inside(m.view1_first, m.view1_last) || inside(m.view2_first, m.view2_last))
        throw ConfigError("label column lies inside a view range");
    return m;
}

std::string ColumnMap::to_string() const {
    std::ostringstream os;
    os << "view1=" << view1_first << ".." << view1_last << ",view2=" << view2_first << ".." << view2_last
       << ",label=" << label;
    return os.str();
}

TwoViewDataset parse_csv(const std::string& text, const ColumnMap& columns, LoadReport* report) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header row");
    const auto header = split_fields(line);
    const std::size_t width = header.size();
    const std::size_t max_col =
        std::max({columns.label, columns.view1_last, columns.view2_last});
    if (max_col >= width)
        throw ConfigError("column mapping refers to column " + std::to_string(max_col) + " but header has " +
                          std::to_string(width));

    std::vector<std::vector<std::string>> rows;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row_no;
        auto fields = split_fields(line);
        if (fields.size() != width)
            throw ParseError("row " + std::to_string(row_no) + ": expected " + std::to_string(width) +
                             " fields, got " + std::to_string(fields.size()));
        rows.push_back(std::move(fields));
    }

    TwoViewDataset ds;
    ds.shared_view = columns.view1_first == columns.view2_first && columns.view1_last == columns.view2_last;

    // Column kinds: numeric when every value parses as a number.
    std::map<std::size_t, FeatureInfo> infos;
    std::map<std::size_t, std::map<std::string, std::size_t>> codes;
    auto prepare = [&](std::size_t first, std::size_t last) {
        for (std::size_t c = first; c <= last; ++c) {
            if (infos.count(c)) continue;
            FeatureInfo info;
            info.name = header[c];
            bool numeric = true;
            double tmp;
            for (const auto& r : rows)
                if (!parse_number(r[c], tmp)) {
                    numeric = false;
                    break;
                }
            info.kind = numeric ? FeatureKind::numeric : FeatureKind::categorical;
            if (!numeric) {
                auto& table = codes[c];
                for (const auto& r : rows)
                    if (table.emplace(r[c], info.categories.size()).second) info.categories.push_back(r[c]);
            }
            infos[c] = std::move(info);
        }
    };
    prepare(columns.view1_first, columns.view1_last);
    prepare(columns.view2_first, columns.view2_last);
    for (std::size_t c = columns.view1_first; c <= columns.view1_last; ++c) ds.schema1.features.push_back(infos[c]);
    for (std::size_t c = columns.view2_first; c <= columns.view2_last; ++c) ds.schema2.features.push_back(infos[c]);

    auto value = [&](const std::vector<std::string>& r, std::size_t c) {
        if (infos[c].kind == FeatureKind::numeric) {
            double v;
            parse_number(r[c], v);
            return v;
        }
        return static_cast<double>(codes[c].at(r[c]));
    };

    LoadReport rep;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        Example ex;
        ex.id = i;
        const std::string& lab = r[columns.label];
        if (lab == "+1" || lab == "1")
            ex.label = 1;
        else if (lab == "-1")
            ex.label = -1;
        else if (lab != "?")
            throw ParseError("row " + std::to_string(i + 1) + ": bad label '" + lab + "'");
        for (std::size_t c = columns.view1_first; c <= columns.view1_last; ++c) ex.view1.push_back(value(r, c));
        for (std::size_t c = columns.view2_first; c <= columns.view2_last; ++c) ex.view2.push_back(value(r, c));
        if (!ex.label)
            ++rep.unlabeled;
        else if (*ex.label > 0)
            ++rep.positives;
        else
            ++rep.negatives;
        ds.examples.push_back(std::move(ex));
    }
    rep.n = ds.examples.size();
    if (report) *report = rep;
    return ds;
}

TwoViewDataset load_csv(const std::string& path, const ColumnMap& columns, LoadReport* report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), columns, report);
}

std::string format_csv(const TwoViewDataset& ds, ColumnMap* columns) {
    std::ostringstream os;
    ColumnMap m;
    m.label = 0;
    m.view1_first = 1;
    m.view1_last = ds.schema1.size();
    if (ds.shared_view) {
        m.view2_first = m.view1_first;
        m.view2_last = m.view1_last;
    } else {
        m.view2_first = m.view1_last + 1;
        m.view2_last = m.view1_last + ds.schema2.size();
    }
    os << "label";
    for (const auto& f : ds.schema1.features) os << ',' << quote_if_needed(f.name);
    if (!ds.shared_view)
        for (const auto& f : ds.schema2.features) os << ',' << quote_if_needed(f.name);
    os << '\n';
    auto cell = [](const FeatureInfo& f, double v) {
        if (f.kind == FeatureKind::numeric) return format_double(v);
        return quote_if_needed(f.categories.at(static_cast<std::size_t>(v)));
    };
    for (const auto& ex : ds.examples) {
        os << (ex.label ? (*ex.label > 0 ? "+1" : "-1") : "?");
        for (std::size_t j = 0; j < ex.view1.size(); ++j) os << ',' << cell(ds.schema1.features[j], ex.view1[j]);
        if (!ds.shared_view)
            for (std::size_t j = 0; j < ex.view2.size(); ++j) os << ',' << cell(ds.schema2.features[j], ex.view2[j]);
        os << '\n';
    }
    if (columns) *columns = m;
    return os.str();
}

ColumnMap write_csv(const TwoViewDataset& ds, const std::string& path) {
    ColumnMap m;
    const std::string text = format_csv(ds, &m);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out << text;
    return m;
}

void HiddenLabels::set(std::size_t id, int y) {
    if (id >= labels_.size()) labels_.resize(id + 1, 0);
    labels_[id] = y;
}

int HiddenLabels::label_of(std::size_t id) const { return id < labels_.size() ? labels_[id] : 0; }

namespace {
std::vector<std::size_t> ids_of(const std::vector<Example>& v) {
    std::vector<std::size_t> out;
    out.reserve(v.size());
    for (const auto& e : v) out.push_back(e.id);
    return out;
}
}  // namespace

std::vector<std::size_t> Split::labeled_ids() const { return ids_of(labeled); }
std::vector<std::size_t> Split::unlabeled_ids() const { return ids_of(unlabeled); }
std::vector<std::size_t> Split::test_ids() const { return ids_of(test); }

Split split_dataset(const TwoViewDataset& ds, const SplitSpec& spec) {
    if (spec.test_fraction < 0.0 || spec.test_fraction > 1.0) throw ConfigError("test_fraction outside [0,1]");
    const std::size_t n = ds.size();
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(order);

    std::vector<std::size_t> labeled_pool;
    for (auto i : order)
        if (ds.examples[i].label) labeled_pool.push_back(i);
    if (labeled_pool.size() < n_test)
        throw InfeasibleError("test set needs " + std::to_string(n_test) + " labeled examples, only " +
                              std::to_string(labeled_pool.size()) + " available");

    std::vector<char> role(n, 'u');  // t = test, l = labeled, u = unlabeled
    for (std::size_t k = 0; k < n_test; ++k) role[labeled_pool[k]] = 't';

    std::size_t pos = 0, neg = 0;
    for (auto i : order) {
        if (role[i] != 'u' || !ds.examples[i].label) continue;
        const int y = *ds.examples[i].label;
        if (y > 0 && pos < spec.labeled_pos) {
            role[i] = 'l';
            ++pos;
        } else if (y < 0 && neg < spec.labeled_neg) {
            role[i] = 'l';
            ++neg;
        }
    }
    if (pos < spec.labeled_pos || neg < spec.labeled_neg) {
        std::ostringstream os;
        os << "infeasible split: need " << spec.labeled_pos << " positives and " << spec.labeled_neg
           << " negatives outside the test set, short by " << (spec.labeled_pos - pos) << " positives and "
           << (spec.labeled_neg - neg) << " negatives";
        throw InfeasibleError(os.str());
    }

    Split out;
    out.hidden = HiddenLabels(n);
    // Members are emitted in shuffled order so membership lists are seed-dependent but reproducible.
    for (auto i : order) {
        const Example& e = ds.examples[i];
        if (role[i] == 't') {
            out.test.push_back(e);
        } else if (role[i] == 'l') {
            out.labeled.push_back(e);
        } else {
            Example copy = e;
            if (copy.label) out.hidden.set(copy.id, *copy.label);
            copy.label.reset();
            copy.pseudo.reset();
            out.unlabeled.push_back(std::move(copy));
        }
    }
    return out;
}

std::vector<Example> reveal(const std::vector<Example>& unlabeled, const HiddenLabels& hidden) {
    std::vector<Example> out = unlabeled;
    for (auto& e : out)
        if (hidden.known(e.id)) e.label = hidden.label_of(e.id);
    return out;
}

}  // namespace cotrain
