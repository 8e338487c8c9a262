#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "interpconv/commands.hpp"
#include "interpconv/errors.hpp"

int main(int argc, char** argv) {
    using namespace interpconv;

    CLI::App app{"Interpretable CNN toolkit: synthetic part data, training, evaluation, visualization"};
    app.require_subcommand(1);

    std::string config_file;
    std::vector<std::string> overrides;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "TOML-style run configuration")->check(CLI::ExistingFile);
        sub->add_option("--set", overrides, "Override a key, e.g. --set train.epochs=5");
    };

    struct Entry {
        const char* name;
        const char* help;
        void (*run)(const RunConfig&);
    };
    const Entry entries[] = {
        {"gen-data", "Generate the synthetic train/test datasets", cli::cmd_gen_data},
        {"train", "Train a network and write the checkpoint and logs", cli::cmd_train},
        {"eval", "Compute the interpretability report for a checkpoint", cli::cmd_eval},
        {"viz", "Write receptive-field overlays and part heat maps", cli::cmd_viz},
        {"compare", "Train and evaluate the interpretable network and its ordinary baseline", cli::cmd_compare},
    };
    std::vector<std::pair<CLI::App*, const Entry*>> subs;
    for (const auto& e : entries) {
        auto* sub = app.add_subcommand(e.name, e.help);
        add_common(sub);
        subs.emplace_back(sub, &e);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::config_error;
    }

    try {
        const auto config = load_run_config(config_file, overrides);
        for (const auto& [sub, entry] : subs) {
            if (sub->parsed()) entry->run(config);
        }
    } catch (const std::exception& e) {
        std::cerr << "interpconv: " << e.what() << std::endl;
        return cli::exit_code_for(e);
    }
    return cli::ok;
}
