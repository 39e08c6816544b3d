#pragma once

#include <span>
#include <vector>

#include "potwalk/disorder.hpp"
#include "potwalk/lattice.hpp"

namespace potwalk {

struct SolveParams {
    double tol = 1e-12;     // on the e-scale
    long max_iter = 200000; // Gauss-Seidel sweeps
};

// Weighted-expectation field relative to a target set: e in [0,1] per site,
// e == 1 on the target, walk killed on leaving the window. a = -log e.
struct CostField {
    Window window;
    SiteSet target;
    std::vector<double> e;
    double residual = 0;
    long iterations = 0;
    bool converged = false;

    double e_at_index(Index i) const { return e[static_cast<std::size_t>(i)]; }
    double e_at(const Site& x) const { return e[static_cast<std::size_t>(window.index_of(x))]; }
    double a_at_index(Index i) const;
    double a_at(const Site& x) const { return a_at_index(window.index_of(x)); }
};

// Minimal nonnegative fixed point of
//   f(x) = exp(-V(x)) * (1/2d) * sum over in-window neighbors f,  x not in target,
// with f pinned at 1 on the target. Monotone iteration from the target
// indicator; never throws on non-convergence (flag + residual instead).
CostField solve_cost_field(const PotentialField& field, const SiteSet& target,
                           const SolveParams& params = {});

// a-value at x of the solve with target {y}. Throws MaxIterExceeded if the
// solver did not reach its tolerance.
double travel_cost(const PotentialField& field, const Site& x, const Site& y,
                   const SolveParams& params = {});

// a-value at the origin with target {z in window : z . direction >= t}. The
// window must extend past the hyperplane by `margin` cells.
double hyperplane_cost(const PotentialField& field, std::span<const double> direction,
                       double t, const SolveParams& params = {}, int margin = 2);

// Forward recursion mu_{k+1}(z) = (1/2d) sum_{w ~ z} exp(-V(w)) mu_k(w).
struct TimeProfile {
    Window window;
    Site start;
    int horizon = 0;
    std::vector<double> total_mass; // size horizon+1; entry k is Z_k
    std::vector<double> absorbed;   // per-step absorbed weight (all zero without a target)
    std::vector<double> final_mass; // per-site weights at the horizon
    std::vector<std::pair<int, std::vector<double>>> snapshots;
};

// Exact per-site endpoint weights after n steps; requires the window to
// contain B(start, n) so the walk cannot exit.
TimeProfile endpoint_measure(const PotentialField& field, const Site& start, int n,
                             std::span<const int> snapshot_times = {});

struct LdpPoint {
    double prob = 0;
    double rate = kInf; // -log(prob)/n, +inf when prob == 0
};

// P_{n,V}[S_n in n D(center, radius)] and its empirical rate.
LdpPoint ldp_probability(const PotentialField& field, int n,
                         std::span<const double> center, double radius);
LdpPoint ldp_point_from_profile(const TimeProfile& profile, int n,
                                std::span<const double> center, double radius);

// Time stepping with absorption: mass standing on the target at step k is
// recorded into absorbed[k] and removed before the weighted step.
TimeProfile absorption_profile(const PotentialField& field, const Site& start,
                               const SiteSet& target, int horizon);

// -log of the absorbed weight over steps [s1, s2].
double time_windowed_cost(const PotentialField& field, const Site& start,
                          const SiteSet& target, int s1, int s2);

// Zero-temperature travel cost: min over nn paths of the potential sum,
// charged site by site excluding the endpoint. Unreachable -> +inf.
std::vector<double> fpp_distance_field(const PotentialField& field, const Site& source);
double fpp_distance(const PotentialField& field, const Site& source, const Site& target);

// CSV rows: time, absorbed, total_mass
void write_time_profile_csv(const TimeProfile& profile, std::ostream& os);

} // namespace potwalk
