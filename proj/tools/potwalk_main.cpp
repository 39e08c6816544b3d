#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "potwalk/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"potwalk: lattice lab for random walks in random potentials"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    int workers = -1;
    std::string out_dir;
    long long max_cells = 0;
    bool describe = false;

    for (const std::string& name : potwalk::subcommand_names()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment configuration (JSON)");
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_option("--workers", workers, "cap the replica fan-out (0 = hardware)");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--max-cells", max_cells, "memory guard: refuse windows above this cell count");
        sub->add_flag("--describe", describe, "print the resolved configuration and exit");
    }

    CLI11_PARSE(app, argc, argv);
    std::string sub = app.get_subcommands().front()->get_name();

    try {
        nlohmann::json config = nlohmann::json::object();
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw potwalk::ValidationError("cannot read config file " + config_path);
            is >> config;
        }
        potwalk::RunOverrides ov;
        if (app.get_subcommands().front()->count("--seed")) ov.seed = seed;
        if (workers >= 0) ov.workers = workers;
        if (!out_dir.empty()) ov.out_dir = out_dir;
        if (max_cells > 0) ov.max_cells = max_cells;
        ov.describe = describe;
        potwalk::run_subcommand(sub, config, ov, std::cout);
        return 0;
    } catch (const potwalk::Error& e) {
        std::cerr << potwalk::error_json(e) << std::endl;
        return potwalk::exit_code_for(e);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << R"({"error":"ValidationError","message":")" << e.what() << R"("})" << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << R"({"error":"Internal","message":")" << e.what() << R"("})" << std::endl;
        return 1;
    }
}
