#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "larp/runtime.hpp"
#include "larp/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"larp: role-playing language-agent runtime"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;

    CLI::App* run = app.add_subcommand("run", "run a scenario to completion");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed, "override the scenario seed")
        ->each([&](const std::string&) { seed_set = true; });

    std::string repl_scenario;
    CLI::App* repl_cmd = app.add_subcommand("repl", "interactive session");
    repl_cmd->add_option("scenario", repl_scenario, "scenario file")->required();

    std::string bundle_path, character_id, store;
    CLI::App* inspect = app.add_subcommand("inspect", "dump one store from a saved bundle");
    inspect->add_option("bundle", bundle_path, "bundle file")->required();
    inspect->add_option("character", character_id, "character id")->required();
    inspect->add_option("store", store, "wm|ltm|kb|skills")->required();

    std::string validate_path;
    CLI::App* validate = app.add_subcommand("validate", "parse and validate a scenario");
    validate->add_option("scenario", validate_path, "scenario file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            larp::ScenarioFile scenario = larp::load_scenario(scenario_path);
            if (seed_set) scenario.seed = seed;
            std::filesystem::create_directories(out_dir);
            larp::Runtime runtime(scenario,
                                  (std::filesystem::path(out_dir) / "training_pairs.log").string());
            std::string transcript;
            for (const std::string& line : runtime.run_all()) transcript += line + "\n";
            {
                std::ofstream f(std::filesystem::path(out_dir) / "transcript.txt",
                                std::ios::binary);
                if (!f) throw larp::IoFailure("cannot write transcript");
                f << transcript;
            }
            runtime.save_bundle((std::filesystem::path(out_dir) / "final.bundle").string());
            std::cout << transcript;
            return 0;
        }
        if (*repl_cmd) return larp::repl(repl_scenario, std::cin, std::cout);
        if (*inspect) {
            std::cout << larp::inspect_bundle(bundle_path, character_id, store);
            return 0;
        }
        if (*validate) {
            larp::load_scenario(validate_path);
            std::cout << "ok\n";
            return 0;
        }
    } catch (const larp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
