#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "potwalk/approx.hpp"
#include "potwalk/costsolve.hpp"
#include "potwalk/disorder.hpp"
#include "potwalk/renorm.hpp"

namespace potwalk {

// Replica fan-out with slot-indexed results: output independent of the
// worker count, exceptions rethrown in replica order.
std::vector<double> parallel_replicas(int count, int workers,
                                      const std::function<double(int)>& fn);

struct SampleStats {
    double mean = 0;
    double se = 0; // standard error of the mean over finite samples
    int inf_count = 0;
};
SampleStats stats_of(const std::vector<double>& samples);

struct RaySchedule {
    Site direction;            // primitive integer vector
    std::vector<int> n_values; // increasing
    int replicas = 10;
    double margin_mult = 1.0;  // scales the base window margin
    void validate() const;
};

enum class CostKind { PlainA, RelocatedAm, RenormAhat };
const char* cost_kind_name(CostKind k);

struct EstimateContext {
    DistributionSpec spec;
    std::uint64_t seed = 1;
    int workers = 1;
    SolveParams solve;
    double M = 1.0;                   // renorm threshold (RenormAhat only)
    int N = 4;                        // renorm block size (RenormAhat only)
    long long max_cells = 1LL << 62;  // refuse windows above this budget
};

struct NormEstimate {
    Site direction;
    double lambda = 0;
    CostKind kind = CostKind::PlainA;
    std::vector<int> n_values;
    std::vector<std::vector<double>> samples; // [n_idx][replica], values cost(0, n x)/n
    std::vector<SampleStats> per_n;
    bool doubling_ok = true; // mean(2n) <= mean(n) + 2(se_n + se_2n) wherever the schedule pairs up
    int enlarged_count = 0;  // replicas whose macro components forced a window retry

    double alpha_hat() const { return per_n.back().mean; }
    double alpha_se() const { return per_n.back().se; }
};

NormEstimate estimate_alpha(const EstimateContext& ctx, const RaySchedule& schedule,
                            double lambda, CostKind kind);

// sup over the fan of x . y / alpha(y); throws DegenerateNorm when a fan
// value is nonpositive within its 2 se band.
std::vector<double> dual_norm(const std::vector<Site>& fan,
                              const std::vector<double>& alpha,
                              const std::vector<double>& alpha_se,
                              const std::vector<std::vector<double>>& eval_points);

std::vector<Site> default_fan(int dim);

struct RateCurve {
    std::vector<double> x; // evaluation point
    Site direction;        // integer ray q*x
    int scale_q = 1;
    std::vector<double> lambdas;
    std::vector<NormEstimate> per_lambda;          // alpha_lambda(direction)/q estimates
    std::vector<std::pair<double, double>> refined; // (lambda, alpha_lambda(x) - lambda) probes
    double I_hat = 0;
    double argmax_lambda = 0;
    bool diverges = false; // ||x||_1 > 1
};

RateCurve rate_function(const EstimateContext& ctx, const std::vector<double>& x,
                        const std::vector<double>& lambda_grid, const RaySchedule& schedule,
                        int refine_iters = 10);

struct ShapeRaster {
    double t = 0;
    double enlargement = 0;
    int resolution = 0;
    double half_width = 0; // raster covers [-half_width, half_width]^2 in rescaled units
    std::vector<std::uint8_t> cells_at;          // t^-1 A_t(circ) membership
    std::vector<std::uint8_t> cells_at_enlarged; // t^-1 A_t^e membership
    std::vector<std::uint8_t> cells_k;           // fan-interpolated unit ball
    double cell_area = 0;
    double symdiff_area = 0;
    double symdiff_enlarged_area = 0;
};

// d = 2. One solve with target {0}; raster membership via the floor map,
// K from positively homogeneous interpolation of the fan values.
ShapeRaster shape_raster(const PotentialField& field, double t, int resolution,
                         double enlargement, const std::vector<Site>& fan,
                         const std::vector<double>& fan_alpha,
                         const SolveParams& params = {});

struct HyperplaneReport {
    std::vector<double> direction;
    std::vector<double> t_values;
    std::vector<std::vector<double>> samples; // [t_idx][replica] of a*(x,t)/t
    std::vector<SampleStats> per_t;
    double dual_reference = 0; // 1/alpha*(x) from the supplied fan
};

HyperplaneReport hyperplane_convergence(const EstimateContext& ctx,
                                        const std::vector<double>& direction,
                                        const std::vector<double>& t_values, int replicas,
                                        const std::vector<Site>& fan,
                                        const std::vector<double>& fan_alpha, int margin = 6);

struct VelocityReport {
    Site direction;
    double lambda = 0;
    double deriv_plus = 0, deriv_minus = 0, deriv_sym = 0, richardson_gap = 0;
    double alpha_lambda = 0;
    struct Row {
        int n = 0;
        double s1 = 0, s2 = 0;
        SampleStats stats;
        bool intersects_derivative = false;
    };
    std::vector<Row> rows;
};

VelocityReport velocity_profile(const EstimateContext& ctx, const Site& direction,
                                double lambda, double lambda_step,
                                const std::vector<std::pair<double, double>>& s_grid,
                                const RaySchedule& schedule);

struct LdpPanel {
    std::vector<double> x;
    double r = 0;
    std::vector<int> n_values;
    std::vector<std::vector<double>> rate_samples;  // [n_idx][replica]
    std::vector<std::vector<double>> zrate_samples; // -(1/n) log Z_n
    std::vector<SampleStats> rate_stats, zrate_stats;
};

LdpPanel ldp_panel(const EstimateContext& ctx, const std::vector<double>& x, double r,
                   const std::vector<int>& n_values, int replicas);

} // namespace potwalk
