#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cotrain {

// Bad keys, bad values or missing required settings. Maps to exit status 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Command { gen_data, run_disagreement, run_graph, run_insufficient, run_combination, report };

std::string to_string(Command c);
Command command_from_string(const std::string& s);

enum class KeyType { integer, real, boolean, text, choice };

struct KeySpec {
    std::string name;
    KeyType type;
    std::string default_value;  // empty with required = true means no default
    std::string help;
    std::vector<std::string> choices;
    bool required = false;
};

// Every recognized configuration key, in echo order.
const std::vector<KeySpec>& config_keys();

class ExperimentConfig {
public:
    Command command = Command::run_disagreement;

    const std::string& text(const std::string& key) const;
    long long integer(const std::string& key) const;
    double real(const std::string& key) const;
    bool flag(const std::string& key) const;
    bool has(const std::string& key) const;

    // key=value lines, sorted by key, including the command.
    std::string echo() const;

    std::map<std::string, std::string> values;
};

// Parses the flat key=value file body, then applies overrides in order.
// Throws UsageError naming the first offending key.
ExperimentConfig parse_config(Command command, const std::string& file_text,
                              const std::vector<std::pair<std::string, std::string>>& overrides);

struct ExperimentOutcome {
    int exit_code = 0;
    std::size_t runs_ok = 0;
    std::size_t runs_failed = 0;
    std::string table;  // human-readable summary for stdout
};

// Runs every repetition and writes runs/<seed>.jsonl, aggregate.csv,
// summary.json and config.echo under the configured output directory.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

// Per-round mean and standard deviation of the listed metrics over runs.
// columns: (jsonl field, csv column stem).
std::string aggregate_csv(const std::vector<std::string>& run_jsonl,
                          const std::vector<std::pair<std::string, std::string>>& columns);

// Metrics aggregated for a command.
std::vector<std::pair<std::string, std::string>> aggregate_columns(Command c);

// Recomputes aggregate.csv in an output directory from its runs/*.jsonl.
ExperimentOutcome recompute_report(const std::string& output_dir);

}  // namespace cotrain
