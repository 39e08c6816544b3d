#include "potwalk/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

namespace potwalk {

namespace {

std::string fmt(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_site(const Site& s) {
    std::string out;
    for (int k = 0; k < s.dim(); ++k) out += (k ? ";" : "") + std::to_string(s[k]);
    return out;
}

std::string hash_hex(const std::string& text) {
    std::uint64_t h = 0x2545f4914f6cdd1dULL;
    for (char c : text) h = splitmix64(h ^ static_cast<unsigned char>(c));
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open output file " + path.string());
    os << content;
}

std::vector<double> json_doubles(const nlohmann::json& j) {
    std::vector<double> out;
    for (const auto& v : j) out.push_back(v.get<double>());
    return out;
}

Site json_site(const nlohmann::json& j, int dim) {
    if (static_cast<int>(j.size()) != dim) throw ValidationError("vector has wrong dimension");
    Site s = Site::zero(dim);
    for (int k = 0; k < dim; ++k) s[k] = j[static_cast<std::size_t>(k)].get<Coord>();
    return s;
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.dimension = j.value("dimension", 2);
    if (c.dimension < 2 || c.dimension > kMaxDim)
        throw ValidationError("dimension must lie in [2, " + std::to_string(kMaxDim) + "]");
    c.seed = j.value("seed", std::uint64_t{1});
    c.workers = j.value("workers", 0);
    if (c.workers < 0) throw ValidationError("workers must be >= 0");
    c.out_dir = j.value("out_dir", std::string("out"));
    c.max_cells = j.value("max_cells", 64000000LL);
    if (c.max_cells <= 0) throw ValidationError("max_cells must be positive");
    c.solve.tol = j.value("tol", 1e-12);
    c.solve.max_iter = j.value("max_iter", 200000L);
    if (c.solve.tol <= 0) throw ValidationError("tol must be > 0");

    if (j.contains("distribution")) c.distribution = DistributionSpec::from_json(j.at("distribution"));
    else c.distribution = DistributionSpec::constant(1.0);

    c.M = j.value("M", 1.0);
    if (c.M < 0) throw ValidationError("M must be >= 0");
    c.N = j.value("N", 4);
    if (c.N < 2 || c.N % 2 != 0) throw ValidationError("N must be an even integer >= 2");

    c.window_radius = j.value("window_radius", 16);
    if (c.window_radius < 1) throw ValidationError("window_radius must be >= 1");
    if (j.contains("target"))
        for (const auto& v : j.at("target")) c.target.push_back(v.get<Coord>());
    if (j.contains("beta_values")) c.beta_values = json_doubles(j.at("beta_values"));
    for (std::size_t k = 0; k < c.beta_values.size(); ++k) {
        if (c.beta_values[k] <= 0) throw ValidationError("beta values must be positive");
        if (k > 0 && c.beta_values[k] <= c.beta_values[k - 1]) throw ValidationError("beta values must increase");
    }

    c.schedule.direction = Site::zero(c.dimension);
    c.schedule.direction[0] = 1;
    c.schedule.n_values = {4, 8, 16};
    c.schedule.replicas = 20;
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        if (s.contains("direction")) c.schedule.direction = json_site(s.at("direction"), c.dimension);
        if (s.contains("n_values")) {
            c.schedule.n_values.clear();
            for (const auto& v : s.at("n_values")) c.schedule.n_values.push_back(v.get<int>());
        }
        c.schedule.replicas = s.value("replicas", 20);
        c.schedule.margin_mult = s.value("margin_mult", 1.0);
        c.schedule.validate();
    }

    c.lambda = j.value("lambda", 0.0);
    if (c.lambda < 0) throw ValidationError("lambda must be >= 0");
    if (j.contains("lambda_grid")) {
        c.lambda_grid = json_doubles(j.at("lambda_grid"));
        for (std::size_t k = 1; k < c.lambda_grid.size(); ++k)
            if (c.lambda_grid[k] <= c.lambda_grid[k - 1]) throw ValidationError("lambda grid must be sorted");
    } else {
        c.lambda_grid = {0, 0.25, 0.5, 1, 2, 4};
    }
    c.lambda_step = j.value("lambda_step", 0.25);

    if (j.contains("x")) c.x = json_doubles(j.at("x"));
    else c.x = std::vector<double>(static_cast<std::size_t>(c.dimension), 0.0);
    if (static_cast<int>(c.x.size()) != c.dimension) throw ValidationError("x has wrong dimension");
    c.r = j.value("r", 0.25);
    if (j.contains("n_values")) {
        c.n_values.clear();
        for (const auto& v : j.at("n_values")) c.n_values.push_back(v.get<int>());
        for (std::size_t k = 0; k < c.n_values.size(); ++k) {
            if (c.n_values[k] <= 0) throw ValidationError("n values must be positive");
            if (k > 0 && c.n_values[k] <= c.n_values[k - 1]) throw ValidationError("n values must increase");
        }
    }
    c.replicas = j.value("replicas", 20);
    if (c.replicas <= 0) throw ValidationError("replicas must be >= 1");
    if (j.contains("t_values")) c.t_values = json_doubles(j.at("t_values"));
    c.shape_t = j.value("shape_t", 16.0);
    c.resolution = j.value("resolution", 96);
    c.enlargement = j.value("enlargement", -1.0);
    if (j.contains("s_grid"))
        for (const auto& pair : j.at("s_grid")) {
            if (pair.size() != 2) throw ValidationError("s_grid entries are [s1, s2] pairs");
            c.s_grid.emplace_back(pair[0].get<double>(), pair[1].get<double>());
        }
    else c.s_grid = {{0.25, 0.75}, {0.5, 1.0}, {1.0, 2.0}};
    if (j.contains("fan"))
        for (const auto& f : j.at("fan")) c.fan.push_back(json_site(f, c.dimension));
    c.cost_kind = j.value("cost_kind", std::string("a"));
    if (c.cost_kind != "a" && c.cost_kind != "a_m" && c.cost_kind != "a_hat")
        throw ValidationError("cost_kind must be one of a, a_m, a_hat");
    c.clearing_eps = j.value("clearing_eps", 0.25);
    c.clearing_radius = j.value("clearing_radius", 1);
    c.pc_warning_threshold = j.value("pc_warning_threshold", 0.592746);

    // resolved form: everything that identifies the experiment; execution
    // details (workers, out_dir) stay out so reruns compare byte for byte
    nlohmann::json r;
    r["dimension"] = c.dimension;
    r["seed"] = c.seed;
    r["max_cells"] = c.max_cells;
    r["tol"] = c.solve.tol;
    r["max_iter"] = c.solve.max_iter;
    r["distribution"] = c.distribution.to_json();
    r["M"] = c.M;
    r["N"] = c.N;
    r["window_radius"] = c.window_radius;
    r["target"] = c.target;
    r["beta_values"] = c.beta_values;
    {
        nlohmann::json s;
        std::vector<Coord> dir;
        for (int k = 0; k < c.dimension; ++k) dir.push_back(c.schedule.direction[k]);
        s["direction"] = dir;
        s["n_values"] = c.schedule.n_values;
        s["replicas"] = c.schedule.replicas;
        s["margin_mult"] = c.schedule.margin_mult;
        r["schedule"] = s;
    }
    r["lambda"] = c.lambda;
    r["lambda_grid"] = c.lambda_grid;
    r["lambda_step"] = c.lambda_step;
    r["x"] = c.x;
    r["r"] = c.r;
    r["n_values"] = c.n_values;
    r["replicas"] = c.replicas;
    r["t_values"] = c.t_values;
    r["shape_t"] = c.shape_t;
    r["resolution"] = c.resolution;
    r["enlargement"] = c.enlargement;
    {
        nlohmann::json grid = nlohmann::json::array();
        for (const auto& [s1, s2] : c.s_grid) grid.push_back({s1, s2});
        r["s_grid"] = grid;
    }
    {
        nlohmann::json fj = nlohmann::json::array();
        for (const Site& f : c.fan) {
            std::vector<Coord> v;
            for (int k = 0; k < c.dimension; ++k) v.push_back(f[k]);
            fj.push_back(v);
        }
        r["fan"] = fj;
    }
    r["cost_kind"] = c.cost_kind;
    r["clearing_eps"] = c.clearing_eps;
    r["clearing_radius"] = c.clearing_radius;
    r["pc_warning_threshold"] = c.pc_warning_threshold;
    c.resolved = r;
    c.config_hash = hash_hex(r.dump());
    return c;
}

namespace {

struct Ctx {
    ExperimentConfig cfg;
    std::filesystem::path dir;

    std::string header(const std::string& sub) const {
        return "# potwalk " + sub + " config=" + cfg.config_hash + " seed=" + std::to_string(cfg.seed) + "\n";
    }
    nlohmann::json summary_base(const std::string& sub) const {
        nlohmann::json j;
        j["subcommand"] = sub;
        j["config_hash"] = cfg.config_hash;
        j["seed"] = cfg.seed;
        j["config"] = cfg.resolved;
        return j;
    }
    void check_cells(const Window& w) const {
        if (w.cell_count() > cfg.max_cells)
            throw ValidationError("window " + w.str() + " exceeds max_cells = " + std::to_string(cfg.max_cells));
    }
    EstimateContext estimate_ctx() const {
        EstimateContext e;
        e.spec = cfg.distribution;
        e.seed = cfg.seed;
        e.workers = cfg.workers > 0 ? cfg.workers
                                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        e.solve = cfg.solve;
        e.M = cfg.M;
        e.N = cfg.N;
        e.max_cells = cfg.max_cells;
        return e;
    }
    Site target_site() const {
        if (cfg.target.empty()) throw ValidationError("this subcommand requires a target");
        if (static_cast<int>(cfg.target.size()) != cfg.dimension)
            throw ValidationError("target has wrong dimension");
        Site t = Site::zero(cfg.dimension);
        for (int k = 0; k < cfg.dimension; ++k) t[k] = cfg.target[static_cast<std::size_t>(k)];
        return t;
    }
    std::vector<Site> fan_or_default() const {
        return cfg.fan.empty() ? default_fan(cfg.dimension) : cfg.fan;
    }
};

// ------------------------------------------------------------- subcommands

void cmd_sample(const Ctx& c, std::ostream& out) {
    Window w = Window::box(Site::zero(c.cfg.dimension), c.cfg.window_radius);
    c.check_cells(w);
    PotentialField f = sample_field(c.cfg.distribution, w, c.cfg.seed, 0);

    {
        std::ostringstream os;
        dump_field(f, os);
        write_file(c.dir / "field.bin", os.str());
    }
    {
        std::ostringstream os;
        os << c.header("sample");
        write_field_csv(f, os);
        write_file(c.dir / "field.csv", os.str());
    }
    Masks m = masks(f, c.cfg.M);
    double livable_frac = static_cast<double>(m.livable.sites.size()) / static_cast<double>(w.cell_count());
    double healthy_frac = static_cast<double>(m.healthy.sites.size()) / static_cast<double>(w.cell_count());
    double finite_mean = 0;
    long n_finite = 0;
    for (Index i = 0; i < w.cell_count(); ++i) {
        double v = f.base_at_index(i);
        if (v < kInf) {
            finite_mean += v;
            ++n_finite;
        }
    }
    if (n_finite > 0) finite_mean /= static_cast<double>(n_finite);

    nlohmann::json j = c.summary_base("sample");
    j["livable_fraction"] = livable_frac;
    j["healthy_fraction"] = healthy_frac;
    j["empirical_finite_mean"] = finite_mean;
    j["spec_finite_part_mean"] = c.cfg.distribution.finite_part_mean();
    j["healthy_prob_spec"] = c.cfg.distribution.prob_le(c.cfg.M);
    if (c.cfg.distribution.prob_le(c.cfg.M) <= c.cfg.pc_warning_threshold)
        j["warning"] = "P[V <= M] is at or below the configured percolation warning threshold";
    auto clearing = find_clearing(f, Site::zero(c.cfg.dimension), c.cfg.clearing_eps,
                                  c.cfg.clearing_radius, false, c.cfg.M);
    if (clearing) {
        j["clearing_site"] = fmt_site(clearing->site);
        j["clearing_path_length"] = clearing->path.length();
    } else {
        j["clearing_site"] = nullptr;
    }
    write_file(c.dir / "sample_summary.json", j.dump(2) + "\n");
    out << "sample: window " << w.str() << ", livable " << fmt(livable_frac)
        << ", healthy " << fmt(healthy_frac) << "\n";
}

void cmd_cost(const Ctx& c, std::ostream& out) {
    Window w = Window::box(Site::zero(c.cfg.dimension), c.cfg.window_radius);
    c.check_cells(w);
    Site target = c.target_site();
    if (!w.contains(target))
        throw WindowTooSmall("target " + target.str() + " outside window of radius " +
                             std::to_string(c.cfg.window_radius));
    PotentialField f = sample_field(c.cfg.distribution, w, c.cfg.seed, 0).with_lambda(c.cfg.lambda);
    SiteSet t(w);
    t.insert(target);
    CostField cf = solve_cost_field(f, t, c.cfg.solve);
    if (!cf.converged) throw MaxIterExceeded("cost solve stopped at residual " + fmt(cf.residual));

    std::ostringstream os;
    os << c.header("cost");
    for (int k = 0; k < c.cfg.dimension; ++k) os << "x" << k << ",";
    os << "e,a\n";
    for (Index i = 0; i < w.cell_count(); ++i) {
        Site s = w.site_at(i);
        for (int k = 0; k < c.cfg.dimension; ++k) os << s[k] << ",";
        os << fmt(cf.e_at_index(i)) << "," << fmt(cf.a_at_index(i)) << "\n";
    }
    write_file(c.dir / "cost_field.csv", os.str());

    nlohmann::json j = c.summary_base("cost");
    j["target"] = c.cfg.target;
    j["iterations"] = cf.iterations;
    j["residual"] = cf.residual;
    j["a_origin"] = cf.a_at(Site::zero(c.cfg.dimension));
    // nested-window certificate: the increment of e under window growth
    {
        int inner_radius = std::max(c.cfg.window_radius / 2, 1 + target.linf_norm());
        if (inner_radius < c.cfg.window_radius) {
            Window inner = Window::box(Site::zero(c.cfg.dimension), inner_radius);
            PotentialField fi = sample_field(c.cfg.distribution, inner, c.cfg.seed, 0).with_lambda(c.cfg.lambda);
            SiteSet ti(inner);
            ti.insert(target);
            CostField ci = solve_cost_field(fi, ti, c.cfg.solve);
            if (ci.converged) {
                j["window_convergence"] = {{"inner_radius", inner_radius},
                                           {"e_increment_origin",
                                            cf.e_at(Site::zero(c.cfg.dimension)) -
                                                ci.e_at(Site::zero(c.cfg.dimension))}};
            }
        }
    }
    write_file(c.dir / "cost_summary.json", j.dump(2) + "\n");
    out << "cost: a(0 -> target) = " << fmt(cf.a_at(Site::zero(c.cfg.dimension))) << "\n";
}

void cmd_fpp(const Ctx& c, std::ostream& out) {
    Window w = Window::box(Site::zero(c.cfg.dimension), c.cfg.window_radius);
    c.check_cells(w);
    Site target = c.target_site();
    if (!w.contains(target)) throw WindowTooSmall("target outside window");
    PotentialField f = sample_field(c.cfg.distribution, w, c.cfg.seed, 0);
    std::vector<double> dist = fpp_distance_field(f, Site::zero(c.cfg.dimension));

    {
        std::ostringstream os;
        os << c.header("fpp");
        for (int k = 0; k < c.cfg.dimension; ++k) os << "x" << k << ",";
        os << "fpp\n";
        for (Index i = 0; i < w.cell_count(); ++i) {
            Site s = w.site_at(i);
            for (int k = 0; k < c.cfg.dimension; ++k) os << s[k] << ",";
            os << fmt(dist[static_cast<std::size_t>(i)]) << "\n";
        }
        write_file(c.dir / "fpp_field.csv", os.str());
    }

    // zero-temperature comparison: a_{beta V}(0, target)/beta against the fpp value
    double fpp_val = dist[static_cast<std::size_t>(w.index_of(target))];
    std::ostringstream os;
    os << c.header("fpp");
    os << "beta,scaled_cost,fpp\n";
    nlohmann::json rows = nlohmann::json::array();
    for (double beta : c.cfg.beta_values) {
        std::vector<double> scaled(static_cast<std::size_t>(w.cell_count()));
        for (Index i = 0; i < w.cell_count(); ++i) {
            double v = f.base_at_index(i);
            scaled[static_cast<std::size_t>(i)] = v == kInf ? kInf : beta * v;
        }
        PotentialField fb(w, std::move(scaled), c.cfg.seed, 0);
        double a_beta = travel_cost(fb, Site::zero(c.cfg.dimension), target, c.cfg.solve) / beta;
        os << fmt(beta) << "," << fmt(a_beta) << "," << fmt(fpp_val) << "\n";
        rows.push_back({{"beta", beta}, {"scaled_cost", a_beta}});
    }
    write_file(c.dir / "fpp_beta.csv", os.str());

    nlohmann::json j = c.summary_base("fpp");
    j["target"] = c.cfg.target;
    j["fpp"] = fpp_val;
    j["beta_rows"] = rows;
    write_file(c.dir / "fpp_summary.json", j.dump(2) + "\n");
    out << "fpp: distance = " << fmt(fpp_val) << "\n";
}

void cmd_renorm(const Ctx& c, std::ostream& out) {
    Window w = Window::box(Site::zero(c.cfg.dimension), c.cfg.window_radius);
    c.check_cells(w);
    PotentialField f = sample_field(c.cfg.distribution, w, c.cfg.seed, 0);
    MacroMap macro = build_macro_map(f, c.cfg.M, c.cfg.N);

    std::ostringstream os;
    os << c.header("renorm");
    for (int k = 0; k < c.cfg.dimension; ++k) os << "i" << k << ",";
    os << "good,in_proxy\n";
    for (Index i = 0; i < macro.macro_window.cell_count(); ++i) {
        Site s = macro.macro_window.site_at(i);
        for (int k = 0; k < c.cfg.dimension; ++k) os << s[k] << ",";
        os << int(macro.good[static_cast<std::size_t>(i)]) << ","
           << int(macro.in_proxy[static_cast<std::size_t>(i)]) << "\n";
    }
    write_file(c.dir / "renorm_labels.csv", os.str());

    nlohmann::json j = c.summary_base("renorm");
    j["N"] = macro.N;
    j["M"] = macro.M;
    j["macro_window"] = macro.macro_window.str();
    j["good_fraction"] = macro.good_fraction();
    j["spanning_multiplicity"] = macro.spanning_multiplicity;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& [size, count] : macro.cbar_size_histogram())
        hist.push_back({{"cbar_size", size}, {"count", count}});
    j["cbar_histogram"] = hist;
    try {
        DeltaSets ds = delta_sets_of_site(macro, Site::zero(c.cfg.dimension));
        std::ostringstream os;
        os << c.header("renorm");
        write_siteset_csv(ds.delta_good, os);
        write_file(c.dir / "delta_good_origin.csv", os.str());
        j["delta_good_origin_rle"] = siteset_rle(ds.delta_good);
    } catch (const Error& e) {
        j["delta_good_origin_error"] = e.code();
    }
    write_file(c.dir / "renorm_summary.json", j.dump(2) + "\n");
    out << "renorm: good fraction " << fmt(macro.good_fraction()) << ", multiplicity "
        << macro.spanning_multiplicity << "\n";
}

void write_alpha_csv(const Ctx& c, const std::string& sub, const std::vector<NormEstimate>& ests,
                     const std::filesystem::path& file) {
    std::ostringstream os;
    os << c.header(sub);
    os << "direction,lambda,kind,n,replica,value\n";
    for (const NormEstimate& est : ests)
        for (std::size_t k = 0; k < est.n_values.size(); ++k)
            for (std::size_t r = 0; r < est.samples[k].size(); ++r)
                os << fmt_site(est.direction) << "," << fmt(est.lambda) << "," << cost_kind_name(est.kind)
                   << "," << est.n_values[k] << "," << r << "," << fmt(est.samples[k][r]) << "\n";
    write_file(file, os.str());
}

nlohmann::json estimate_json(const NormEstimate& est) {
    nlohmann::json j;
    j["direction"] = fmt_site(est.direction);
    j["lambda"] = est.lambda;
    j["kind"] = cost_kind_name(est.kind);
    j["alpha_hat"] = est.alpha_hat() == kInf ? nlohmann::json("inf") : nlohmann::json(est.alpha_hat());
    j["alpha_se"] = est.alpha_se() == kInf ? nlohmann::json("inf") : nlohmann::json(est.alpha_se());
    j["doubling_ok"] = est.doubling_ok;
    j["enlarged_count"] = est.enlarged_count;
    nlohmann::json per_n = nlohmann::json::array();
    for (std::size_t k = 0; k < est.n_values.size(); ++k)
        per_n.push_back({{"n", est.n_values[k]},
                         {"mean", est.per_n[k].mean == kInf ? nlohmann::json("inf") : nlohmann::json(est.per_n[k].mean)},
                         {"se", est.per_n[k].se == kInf ? nlohmann::json("inf") : nlohmann::json(est.per_n[k].se)},
                         {"inf_count", est.per_n[k].inf_count}});
    j["per_n"] = per_n;
    return j;
}

CostKind kind_from_string(const std::string& s) {
    if (s == "a") return CostKind::PlainA;
    if (s == "a_m") return CostKind::RelocatedAm;
    if (s == "a_hat") return CostKind::RenormAhat;
    throw ValidationError("unknown cost kind '" + s + "' (use a, a_m or a_hat)");
}

void cmd_alpha(const Ctx& c, std::ostream& out) {
    CostKind kind = kind_from_string(c.cfg.cost_kind);
    NormEstimate est = estimate_alpha(c.estimate_ctx(), c.cfg.schedule, c.cfg.lambda, kind);
    write_alpha_csv(c, "alpha", {est}, c.dir / "alpha.csv");
    nlohmann::json j = c.summary_base("alpha");
    j["estimate"] = estimate_json(est);
    write_file(c.dir / "alpha_summary.json", j.dump(2) + "\n");
    out << "alpha: " << cost_kind_name(kind) << " alpha_hat(" << fmt_site(est.direction)
        << ") = " << fmt(est.alpha_hat()) << " +- " << fmt(est.alpha_se()) << "\n";
}

void cmd_dual(const Ctx& c, std::ostream& out) {
    std::vector<Site> fan = c.fan_or_default();
    EstimateContext ectx = c.estimate_ctx();
    std::vector<NormEstimate> ests;
    std::vector<double> alpha, se;
    for (const Site& dir : fan) {
        RaySchedule s = c.cfg.schedule;
        s.direction = dir;
        ests.push_back(estimate_alpha(ectx, s, c.cfg.lambda, CostKind::PlainA));
        alpha.push_back(ests.back().alpha_hat());
        se.push_back(ests.back().alpha_se());
    }
    std::vector<std::vector<double>> eval;
    for (const Site& dir : fan) {
        std::vector<double> v;
        for (int k = 0; k < c.cfg.dimension; ++k) v.push_back(dir[k]);
        eval.push_back(v);
    }
    std::vector<double> astar = dual_norm(fan, alpha, se, eval);

    write_alpha_csv(c, "dual", ests, c.dir / "dual_alpha.csv");
    std::ostringstream os;
    os << c.header("dual");
    os << "direction,alpha,alpha_se,alpha_star\n";
    for (std::size_t k = 0; k < fan.size(); ++k)
        os << fmt_site(fan[k]) << "," << fmt(alpha[k]) << "," << fmt(se[k]) << "," << fmt(astar[k]) << "\n";
    write_file(c.dir / "dual.csv", os.str());

    nlohmann::json j = c.summary_base("dual");
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < fan.size(); ++k)
        rows.push_back({{"direction", fmt_site(fan[k])}, {"alpha", alpha[k]}, {"alpha_star", astar[k]}});
    j["fan"] = rows;
    write_file(c.dir / "dual_summary.json", j.dump(2) + "\n");
    out << "dual: " << fan.size() << " directions\n";
}

void cmd_rate(const Ctx& c, std::ostream& out) {
    RateCurve curve = rate_function(c.estimate_ctx(), c.cfg.x, c.cfg.lambda_grid, c.cfg.schedule);
    write_alpha_csv(c, "rate", curve.per_lambda, c.dir / "rate.csv");

    nlohmann::json j = c.summary_base("rate");
    j["x"] = curve.x;
    j["direction"] = fmt_site(curve.direction);
    j["scale_q"] = curve.scale_q;
    j["diverges"] = curve.diverges;
    j["I_hat"] = curve.I_hat == kInf ? nlohmann::json("inf") : nlohmann::json(curve.I_hat);
    j["argmax_lambda"] = curve.argmax_lambda;
    nlohmann::json grid = nlohmann::json::array();
    for (std::size_t k = 0; k < curve.lambdas.size(); ++k)
        grid.push_back({{"lambda", curve.lambdas[k]},
                        {"alpha", curve.per_lambda[k].alpha_hat()},
                        {"se", curve.per_lambda[k].alpha_se()}});
    j["grid"] = grid;
    nlohmann::json refined = nlohmann::json::array();
    for (const auto& [lam, g] : curve.refined) refined.push_back({{"lambda", lam}, {"g", g}});
    j["refined"] = refined;
    write_file(c.dir / "rate_summary.json", j.dump(2) + "\n");
    out << "rate: I_hat = " << fmt(curve.I_hat) << " at lambda = " << fmt(curve.argmax_lambda) << "\n";
}

void cmd_shape(const Ctx& c, std::ostream& out) {
    std::vector<Site> fan = c.fan_or_default();
    EstimateContext ectx = c.estimate_ctx();
    std::vector<double> alpha;
    for (const Site& dir : fan) {
        RaySchedule s = c.cfg.schedule;
        s.direction = dir;
        alpha.push_back(estimate_alpha(ectx, s, c.cfg.lambda, CostKind::PlainA).alpha_hat());
    }
    double per_l1 = kInf;
    for (std::size_t k = 0; k < fan.size(); ++k)
        per_l1 = std::min(per_l1, alpha[k] / static_cast<double>(fan[k].l1_norm()));
    int radius = static_cast<int>(std::ceil(1.25 * c.cfg.shape_t / per_l1)) + 4;
    Window w = Window::box(Site::zero(c.cfg.dimension), radius);
    c.check_cells(w);
    PotentialField f = sample_field(c.cfg.distribution, w, c.cfg.seed, 0).with_lambda(c.cfg.lambda);
    double e_t = c.cfg.enlargement >= 0 ? c.cfg.enlargement : std::sqrt(c.cfg.shape_t);
    ShapeRaster raster = shape_raster(f, c.cfg.shape_t, c.cfg.resolution, e_t, fan, alpha, c.cfg.solve);

    std::ostringstream os;
    os << c.header("shape");
    os << "ix,iy,in_at,in_at_enlarged,in_k\n";
    for (int iy = 0; iy < raster.resolution; ++iy)
        for (int ix = 0; ix < raster.resolution; ++ix) {
            std::size_t cell = static_cast<std::size_t>(iy) * raster.resolution + static_cast<std::size_t>(ix);
            os << ix << "," << iy << "," << int(raster.cells_at[cell]) << ","
               << int(raster.cells_at_enlarged[cell]) << "," << int(raster.cells_k[cell]) << "\n";
        }
    write_file(c.dir / "shape_cells.csv", os.str());

    nlohmann::json j = c.summary_base("shape");
    j["t"] = raster.t;
    j["enlargement"] = raster.enlargement;
    j["half_width"] = raster.half_width;
    j["symdiff_area"] = raster.symdiff_area;
    j["symdiff_enlarged_area"] = raster.symdiff_enlarged_area;
    write_file(c.dir / "shape_summary.json", j.dump(2) + "\n");
    out << "shape: symdiff " << fmt(raster.symdiff_area) << " (enlarged " << fmt(raster.symdiff_enlarged_area)
        << ")\n";
}

void cmd_hyperplane(const Ctx& c, std::ostream& out) {
    std::vector<Site> fan = c.fan_or_default();
    EstimateContext ectx = c.estimate_ctx();
    std::vector<double> alpha;
    for (const Site& dir : fan) {
        RaySchedule s = c.cfg.schedule;
        s.direction = dir;
        alpha.push_back(estimate_alpha(ectx, s, c.cfg.lambda, CostKind::PlainA).alpha_hat());
    }
    std::vector<double> x = c.cfg.x;
    bool zero = true;
    for (double v : x) zero = zero && v == 0;
    if (zero) throw ValidationError("hyperplane direction x must be nonzero");

    double t_max = *std::max_element(c.cfg.t_values.begin(), c.cfg.t_values.end());
    double unit = 0;
    for (double v : x) unit += v * v;
    unit = std::sqrt(unit);
    Window probe = Window::box(Site::zero(c.cfg.dimension), static_cast<int>(std::ceil(t_max / unit)) + 8);
    c.check_cells(probe);

    HyperplaneReport rep = hyperplane_convergence(ectx, x, c.cfg.t_values, c.cfg.replicas, fan, alpha);

    std::ostringstream os;
    os << c.header("hyperplane");
    os << "t,replica,value\n";
    for (std::size_t ti = 0; ti < rep.t_values.size(); ++ti)
        for (std::size_t r = 0; r < rep.samples[ti].size(); ++r)
            os << fmt(rep.t_values[ti]) << "," << r << "," << fmt(rep.samples[ti][r]) << "\n";
    write_file(c.dir / "hyperplane.csv", os.str());

    nlohmann::json j = c.summary_base("hyperplane");
    j["dual_reference"] = rep.dual_reference;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t ti = 0; ti < rep.t_values.size(); ++ti)
        rows.push_back({{"t", rep.t_values[ti]}, {"mean", rep.per_t[ti].mean}, {"se", rep.per_t[ti].se}});
    j["per_t"] = rows;
    write_file(c.dir / "hyperplane_summary.json", j.dump(2) + "\n");
    out << "hyperplane: reference 1/alpha* = " << fmt(rep.dual_reference) << "\n";
}

void cmd_ldp(const Ctx& c, std::ostream& out) {
    Window probe = Window::box(Site::zero(c.cfg.dimension), c.cfg.n_values.back());
    c.check_cells(probe);
    LdpPanel panel = ldp_panel(c.estimate_ctx(), c.cfg.x, c.cfg.r, c.cfg.n_values, c.cfg.replicas);

    std::ostringstream os;
    os << c.header("ldp");
    os << "n,replica,rate,zrate\n";
    for (std::size_t k = 0; k < panel.n_values.size(); ++k)
        for (std::size_t r = 0; r < panel.rate_samples[k].size(); ++r)
            os << panel.n_values[k] << "," << r << "," << fmt(panel.rate_samples[k][r]) << ","
               << fmt(panel.zrate_samples[k][r]) << "\n";
    write_file(c.dir / "ldp.csv", os.str());

    // replica-0 mass history, exported per horizon step
    {
        PotentialField f = sample_field(c.cfg.distribution, probe, c.cfg.seed, 0);
        TimeProfile prof = endpoint_measure(f, Site::zero(c.cfg.dimension), c.cfg.n_values.back());
        std::ostringstream ps;
        ps << c.header("ldp");
        write_time_profile_csv(prof, ps);
        write_file(c.dir / "ldp_profile.csv", ps.str());
    }

    nlohmann::json j = c.summary_base("ldp");
    // rate-function reference when a lambda grid is configured
    if (!c.cfg.lambda_grid.empty() && c.cfg.lambda_grid.front() == 0) {
        try {
            RateCurve curve = rate_function(c.estimate_ctx(), c.cfg.x, c.cfg.lambda_grid, c.cfg.schedule, 4);
            j["I_ref"] = curve.I_hat == kInf ? nlohmann::json("inf") : nlohmann::json(curve.I_hat);
        } catch (const Error& e) {
            j["I_ref_error"] = e.code();
        }
    }
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < panel.n_values.size(); ++k)
        rows.push_back({{"n", panel.n_values[k]},
                        {"rate_mean", panel.rate_stats[k].mean == kInf ? nlohmann::json("inf")
                                                                       : nlohmann::json(panel.rate_stats[k].mean)},
                        {"rate_se", panel.rate_stats[k].se == kInf ? nlohmann::json("inf")
                                                                   : nlohmann::json(panel.rate_stats[k].se)},
                        {"rate_inf_count", panel.rate_stats[k].inf_count},
                        {"zrate_mean", panel.zrate_stats[k].mean},
                        {"zrate_se", panel.zrate_stats[k].se}});
    j["per_n"] = rows;
    write_file(c.dir / "ldp_summary.json", j.dump(2) + "\n");
    out << "ldp: " << panel.n_values.size() << " horizons, " << c.cfg.replicas << " replicas\n";
}

void cmd_velocity(const Ctx& c, std::ostream& out) {
    Site dir = Site::zero(c.cfg.dimension);
    bool zero = true;
    for (int k = 0; k < c.cfg.dimension; ++k) {
        double v = c.cfg.x[static_cast<std::size_t>(k)];
        if (std::abs(v - std::lround(v)) > 1e-9)
            throw ValidationError("velocity profile needs an integer direction x");
        dir[k] = static_cast<Coord>(std::lround(v));
        zero = zero && dir[k] == 0;
    }
    if (zero) throw ValidationError("velocity direction must be nonzero");
    if (c.cfg.lambda <= 0) throw ValidationError("velocity profile needs lambda > 0");

    VelocityReport rep = velocity_profile(c.estimate_ctx(), dir, c.cfg.lambda, c.cfg.lambda_step,
                                          c.cfg.s_grid, c.cfg.schedule);

    std::ostringstream os;
    os << c.header("velocity");
    os << "n,s1,s2,mean,se,inf_count,intersects_derivative\n";
    for (const auto& row : rep.rows)
        os << row.n << "," << fmt(row.s1) << "," << fmt(row.s2) << "," << fmt(row.stats.mean) << ","
           << fmt(row.stats.se) << "," << row.stats.inf_count << "," << int(row.intersects_derivative) << "\n";
    write_file(c.dir / "velocity.csv", os.str());

    nlohmann::json j = c.summary_base("velocity");
    j["alpha_lambda"] = rep.alpha_lambda;
    j["deriv_plus"] = rep.deriv_plus;
    j["deriv_minus"] = rep.deriv_minus;
    j["deriv_sym"] = rep.deriv_sym;
    j["richardson_gap"] = rep.richardson_gap;
    write_file(c.dir / "velocity_summary.json", j.dump(2) + "\n");
    out << "velocity: derivative in [" << fmt(rep.deriv_plus) << ", " << fmt(rep.deriv_minus) << "]\n";
}

} // namespace

// ------------------------------------------------------------------ selftest

namespace {

struct CheckList {
    nlohmann::json entries = nlohmann::json::array();
    bool all_ok = true;
    std::ostream& out;
    explicit CheckList(std::ostream& o) : out(o) {}
    void check(const std::string& name, bool ok) {
        entries.push_back({{"name", name}, {"ok", ok}});
        all_ok = all_ok && ok;
        out << (ok ? "ok " : "FAIL ") << name << "\n";
    }
};

} // namespace

bool selftest(const ExperimentConfig& cfg, std::ostream& out) {
    CheckList cl(out);

    { // adjacency basics
        Site o = Site::zero(2);
        auto nb = neighbors(o);
        cl.check("lattice.neighbor_order",
                 nb.size() == 4 && nb[0] == Site{-1, 0} && nb[1] == Site{0, -1} && nb[2] == Site{0, 1} &&
                     nb[3] == Site{1, 0});
        cl.check("lattice.star_count", star_neighbors(o).size() == 8);
    }
    { // components under both adjacencies
        Window w(Site{0, 0}, Site{3, 3});
        SiteSet s(w);
        s.insert(Site{0, 0});
        s.insert(Site{1, 1});
        cl.check("lattice.components", components(s, Adjacency::NN).size() == 2 &&
                                           components(s, Adjacency::Star).size() == 1);
    }
    { // hole detection on a ring
        Window w(Site{-3, -3}, Site{3, 3});
        SiteSet ring(w);
        for (Coord a = -1; a <= 1; ++a)
            for (Coord b = -1; b <= 1; ++b)
                if (a != 0 || b != 0) ring.insert(Site{a, b});
        HoleResult hr = find_holes(ring, w);
        cl.check("lattice.ring_hole", hr.has_hole && hr.holes.size() == 1 && hr.holes[0].size() == 1);
    }
    { // two-site window solve
        PotentialField f(Window(Site{0, 0}, Site{1, 0}), {0.0, 0.0}, 0, 0);
        SiteSet t(f.window());
        t.insert(Site{1, 0});
        CostField cf = solve_cost_field(f, t);
        cl.check("costsolve.two_site", std::abs(cf.e_at(Site{0, 0}) - 0.25) < 1e-15);
        cl.check("costsolve.hyperplane", std::abs(hyperplane_cost(f, std::vector<double>{1, 0}, 1.0, {}, 0) -
                                                  std::log(4.0)) < 1e-12);
    }
    { // endpoint recursion, V = 0
        Window w = Window::box(Site::zero(2), 3);
        PotentialField f(w, std::vector<double>(static_cast<std::size_t>(w.cell_count()), 0.0), 0, 0);
        TimeProfile prof = endpoint_measure(f, Site::zero(2), 2);
        cl.check("costsolve.return_prob",
                 std::abs(prof.final_mass[static_cast<std::size_t>(w.index_of(Site{0, 0}))] - 0.25) < 1e-15);
        cl.check("costsolve.mass_conserved", std::abs(prof.total_mass.back() - 1.0) < 1e-12);
    }
    { // fpp on a unit field
        Window w = Window::box(Site::zero(2), 4);
        PotentialField f(w, std::vector<double>(static_cast<std::size_t>(w.cell_count()), 1.0), 0, 0);
        cl.check("costsolve.fpp_unit", std::abs(fpp_distance(f, Site::zero(2), Site{3, 1}) - 4.0) < 1e-15);
    }
    { // disjoint path families
        bool ok = true;
        for (const Site& x : {Site{3, 0}, Site{2, 2}, Site{-3, 1}}) {
            DisjointPathFamily fam = disjoint_paths(x);
            ok = ok && fam.paths.size() == 4;
            for (const auto& p : fam.paths)
                ok = ok && p.valid() && p.simple() && p.front() == Site::zero(2) && p.back() == x &&
                     p.length() <= x.l1_norm() + 8;
        }
        cl.check("approx.disjoint_paths", ok);
    }
    { // relocated-cost sandwich on one sampled field
        DistributionSpec spec;
        spec.parts.push_back({DistributionSpec::PartKind::Uniform, 0.2, 1.2, 0, 0, 1.0});
        Window w = Window::box(Site::zero(2), 14);
        PotentialField f = sample_field(spec, w, cfg.seed, 7);
        Site a = Site::zero(2), b{4, 2};
        double av = travel_cost(f, a, b), am = a_m_cost(f, a, b);
        double za = z_at(f, a), zb = z_at(f, b), um = u_m_value(f, b);
        double l2d = std::log(4.0);
        cl.check("approx.sandwich", am <= av + za + 2 * l2d + um + 1e-9 &&
                                        av <= am + f.at(a) + zb + 2 * l2d + 1e-9);
    }
    { // renorm facts on one sampled map
        DistributionSpec spec;
        spec.parts.push_back({DistributionSpec::PartKind::Uniform, 0.0, 1.0, 0, 0, 0.95});
        spec.p_inf = 0.05;
        Window w = Window::box(Site::zero(2), 24);
        PotentialField f = sample_field(spec, w, cfg.seed, 11);
        MacroMap macro = build_macro_map(f, 1.0, 4);
        bool ok = macro.good_fraction() > 0;
        for (Index i = 0; i < macro.macro_window.cell_count() && ok; ++i) {
            Site site = macro.macro_window.site_at(i);
            if (!macro.is_good(site)) continue;
            const SiteSet& cc = macro.crossing_cluster(site);
            ok = ok && !cc.empty();
            cc.for_each_index([&](Index j) { ok = ok && f.at(cc.window().site_at(j)) <= macro.M; });
        }
        cl.check("renorm.crossing_healthy", ok);
    }
    { // determinism of replica sampling
        DistributionSpec spec;
        spec.parts.push_back({DistributionSpec::PartKind::Exponential, 0, 0, 1.0, 0, 1.0});
        Window w = Window::box(Site::zero(2), 6);
        PotentialField f1 = sample_field(spec, w, cfg.seed, 3);
        PotentialField f2 = sample_field(spec, w, cfg.seed, 3);
        bool same = true;
        for (Index i = 0; i < w.cell_count(); ++i) same = same && f1.base_at_index(i) == f2.base_at_index(i);
        cl.check("disorder.determinism", same);
    }

    nlohmann::json j;
    j["subcommand"] = "selftest";
    j["config_hash"] = cfg.config_hash;
    j["seed"] = cfg.seed;
    j["checks"] = cl.entries;
    j["all_ok"] = cl.all_ok;
    std::filesystem::create_directories(cfg.out_dir);
    write_file(std::filesystem::path(cfg.out_dir) / "selftest_report.json", j.dump(2) + "\n");
    return cl.all_ok;
}

const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names{"sample", "cost", "fpp", "renorm", "alpha", "dual",
                                                "rate",   "shape", "hyperplane", "ldp", "velocity", "selftest"};
    return names;
}

void run_subcommand(const std::string& subcommand, const nlohmann::json& config_json,
                    const RunOverrides& overrides, std::ostream& out) {
    nlohmann::json j = config_json;
    if (overrides.seed) j["seed"] = *overrides.seed;
    if (overrides.workers) j["workers"] = *overrides.workers;
    if (overrides.out_dir) j["out_dir"] = *overrides.out_dir;
    if (overrides.max_cells) j["max_cells"] = *overrides.max_cells;

    ExperimentConfig cfg = ExperimentConfig::from_json(j);
    if (overrides.describe) {
        out << cfg.resolved.dump(2) << "\n";
        return;
    }

    if (subcommand == "selftest") {
        if (!selftest(cfg, out)) throw ValidationError("selftest found failing invariants");
        return;
    }

    Ctx c{cfg, std::filesystem::path(cfg.out_dir)};
    std::filesystem::create_directories(c.dir);

    if (subcommand == "sample") cmd_sample(c, out);
    else if (subcommand == "cost") cmd_cost(c, out);
    else if (subcommand == "fpp") cmd_fpp(c, out);
    else if (subcommand == "renorm") cmd_renorm(c, out);
    else if (subcommand == "alpha") cmd_alpha(c, out);
    else if (subcommand == "dual") cmd_dual(c, out);
    else if (subcommand == "rate") cmd_rate(c, out);
    else if (subcommand == "shape") cmd_shape(c, out);
    else if (subcommand == "hyperplane") cmd_hyperplane(c, out);
    else if (subcommand == "ldp") cmd_ldp(c, out);
    else if (subcommand == "velocity") cmd_velocity(c, out);
    else throw ValidationError("unknown subcommand '" + subcommand + "'");
}

int exit_code_for(const Error& e) {
    return e.code() == "MaxIterExceeded" ? 3 : 2;
}

std::string error_json(const Error& e) {
    nlohmann::json j;
    j["error"] = e.code();
    j["message"] = e.what();
    return j.dump();
}

} // namespace potwalk
