#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "cotrain/experiment.hpp"

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cotrain::UsageError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Co-training experiments: generators, runs, traces and bound checks"};
    app.require_subcommand(1);

    struct Sub {
        CLI::App* app;
        std::string config_path;
        std::map<std::string, std::string> flags;
    };
    std::vector<cotrain::Command> commands = {
        cotrain::Command::gen_data,         cotrain::Command::run_disagreement, cotrain::Command::run_graph,
        cotrain::Command::run_insufficient, cotrain::Command::run_combination,  cotrain::Command::report};
    std::vector<Sub> subs(commands.size());
    for (std::size_t i = 0; i < commands.size(); ++i) {
        auto& s = subs[i];
        s.app = app.add_subcommand(cotrain::to_string(commands[i]));
        s.app->add_option("--config,-c", s.config_path, "key=value configuration file");
        for (const auto& k : cotrain::config_keys()) {
            std::string help = k.help;
            if (!k.default_value.empty()) help += " [" + k.default_value + "]";
            s.app->add_option("--" + k.name, s.flags[k.name], help);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    for (std::size_t i = 0; i < commands.size(); ++i) {
        auto& s = subs[i];
        if (!s.app->parsed()) continue;
        try {
            std::vector<std::pair<std::string, std::string>> overrides;
            for (const auto& k : cotrain::config_keys())
                if (s.app->count("--" + k.name) > 0) overrides.emplace_back(k.name, s.flags[k.name]);
            const std::string text = s.config_path.empty() ? std::string() : read_text(s.config_path);
            const auto cfg = cotrain::parse_config(commands[i], text, overrides);
            const auto outcome = cotrain::run_experiment(cfg);
            std::cout << outcome.table;
            return outcome.exit_code;
        } catch (const cotrain::UsageError& e) {
            std::cerr << "usage error: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}
