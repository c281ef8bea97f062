#include <cstdlib>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace curvcone;
using namespace curvcone::cli;

int main(int argc, char** argv) {
    CLI::App app{"Curvature-condition checks, bending and conformal constructions near points"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    const std::map<std::string, std::string> about{
        {"check", "margin of an operator against a curvature condition"},
        {"bend", "bend a rotationally symmetric model to a cylinder and verify it"},
        {"conformal", "conformal flattening near a point and its verification"},
        {"rescale", "rescaled submersion error and the admissible t range"},
        {"average", "Haar orbit average of an operator over O(d+1)"},
        {"oracle", "closed forms against finite-difference oracles"}};
    std::map<std::string, std::map<std::string, std::string>> flags;
    std::map<std::string, std::string> config_path;
    for (const auto& name : command_names()) {
        CLI::App* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("--config", config_path[name], "key = value config file");
        for (const auto& k : command_keys(name)) sub->add_option("--" + k.key, flags[name][k.key], k.help);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    std::string name = sub->get_name();
    RunConfig cfg(name);
    try {
        if (!config_path[name].empty()) merge_config_file(cfg, config_path[name]);
        for (const auto& k : command_keys(name))
            if (sub->count("--" + k.key) > 0) cfg.set(k.key, flags[name][k.key]);
        if (!cfg.has("threads"))
            if (const char* env = std::getenv("CURVCONE_THREADS"); env && *env) cfg.set("threads", env);
    } catch (const InputError& e) {
        std::cerr << "curvcone: invalid input: " << e.what() << "\n";
        return 2;
    }
    return execute(cfg, std::cout, std::cerr);
}
