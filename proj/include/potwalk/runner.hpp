#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "potwalk/estimate.hpp"

namespace potwalk {

// Resolved experiment configuration. Raw JSON in, defaults filled, every
// cross-field constraint checked before any computation starts.
struct ExperimentConfig {
    int dimension = 2;
    std::uint64_t seed = 1;
    int workers = 0; // 0 = hardware concurrency
    std::string out_dir = "out";
    long long max_cells = 64000000;
    SolveParams solve;
    DistributionSpec distribution;
    double M = 1.0;
    int N = 4;

    int window_radius = 16;
    std::vector<Coord> target;
    std::vector<double> beta_values{1, 2, 4, 8, 16};
    RaySchedule schedule;
    double lambda = 0;
    std::vector<double> lambda_grid;
    double lambda_step = 0.25;
    std::vector<double> x;
    double r = 0.25;
    std::vector<int> n_values{10, 20, 40};
    int replicas = 20;
    std::vector<double> t_values{4, 8, 16};
    double shape_t = 16;
    int resolution = 96;
    double enlargement = -1; // negative -> sqrt(t)
    std::vector<std::pair<double, double>> s_grid;
    std::vector<Site> fan; // empty -> default fan
    std::string cost_kind = "a";
    double clearing_eps = 0.25;
    int clearing_radius = 1;
    // warning heuristic only; the d = 2 default is an external reference
    // value (see README), not something this project derives
    double pc_warning_threshold = 0.592746;

    nlohmann::json resolved; // the fully resolved configuration
    std::string config_hash; // 16 hex digits over the resolved form

    static ExperimentConfig from_json(const nlohmann::json& j);
};

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out_dir;
    std::optional<long long> max_cells;
    bool describe = false;
};

// Executes one subcommand, writing artifacts under the output directory.
// Throws potwalk::Error subclasses; the CLI maps them to exit codes.
void run_subcommand(const std::string& subcommand, const nlohmann::json& config_json,
                    const RunOverrides& overrides, std::ostream& out);

// Full invariant battery on bundled tiny inputs; returns true when every
// check passes and writes selftest_report.json.
bool selftest(const ExperimentConfig& cfg, std::ostream& out);

int exit_code_for(const Error& e);
std::string error_json(const Error& e);

const std::vector<std::string>& subcommand_names();

} // namespace potwalk
