#include "potwalk/estimate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace potwalk {

std::vector<double> parallel_replicas(int count, int workers, const std::function<double(int)>& fn) {
    if (count < 0) throw ValidationError("negative replica count");
    std::vector<double> out(static_cast<std::size_t>(count), 0.0);
    if (count == 0) return out;
    workers = std::max(1, std::min(workers, count));

    if (workers == 1) {
        for (int r = 0; r < count; ++r) out[static_cast<std::size_t>(r)] = fn(r);
        return out;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            int r = next.fetch_add(1);
            if (r >= count) return;
            try {
                out[static_cast<std::size_t>(r)] = fn(r);
            } catch (...) {
                errors[static_cast<std::size_t>(r)] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int k = 0; k < workers; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

SampleStats stats_of(const std::vector<double>& samples) {
    SampleStats s;
    double sum = 0;
    long n_finite = 0;
    for (double v : samples) {
        if (v == kInf) {
            ++s.inf_count;
            continue;
        }
        sum += v;
        ++n_finite;
    }
    if (s.inf_count > 0) {
        s.mean = kInf;
        s.se = kInf;
        return s;
    }
    if (n_finite == 0) return s;
    s.mean = sum / static_cast<double>(n_finite);
    if (n_finite > 1) {
        double ss = 0;
        for (double v : samples) ss += (v - s.mean) * (v - s.mean);
        s.se = std::sqrt(ss / (static_cast<double>(n_finite) * static_cast<double>(n_finite - 1)));
    }
    return s;
}

void RaySchedule::validate() const {
    if (direction.dim() < 2) throw ValidationError("schedule direction needs dimension >= 2");
    if (direction.l1_norm() == 0) throw ValidationError("schedule direction must be nonzero");
    if (n_values.empty()) throw ValidationError("schedule needs at least one n value");
    for (std::size_t k = 0; k < n_values.size(); ++k) {
        if (n_values[k] <= 0) throw ValidationError("schedule n values must be positive");
        if (k > 0 && n_values[k] <= n_values[k - 1]) throw ValidationError("schedule n values must increase");
    }
    if (replicas <= 0) throw ValidationError("schedule needs replicas >= 1");
    if (margin_mult <= 0) throw ValidationError("margin multiplier must be > 0");
}

const char* cost_kind_name(CostKind k) {
    switch (k) {
    case CostKind::PlainA: return "a";
    case CostKind::RelocatedAm: return "a_m";
    case CostKind::RenormAhat: return "a_hat";
    }
    return "?";
}

namespace {

int base_margin(const RaySchedule& s, CostKind kind, int N) {
    int m = std::max(8, static_cast<int>(std::lround(8.0 * s.margin_mult)));
    if (kind == CostKind::RenormAhat) m = std::max(m, 4 * N);
    return m;
}

Window ray_window(const Site& direction, int n_max, int margin) {
    Site end = n_max * direction;
    std::array<Site, 2> pts{Site::zero(direction.dim()), end};
    return Window::hull(pts).expanded(margin);
}

void check_budget(const EstimateContext& ctx, const Window& w) {
    if (w.cell_count() > ctx.max_cells)
        throw ValidationError("window " + w.str() + " exceeds max_cells = " + std::to_string(ctx.max_cells));
}

} // namespace

NormEstimate estimate_alpha(const EstimateContext& ctx, const RaySchedule& schedule,
                            double lambda, CostKind kind) {
    schedule.validate();
    ctx.spec.validate();
    if (lambda < 0) throw ValidationError("lambda must be >= 0");

    NormEstimate est;
    est.direction = schedule.direction;
    est.lambda = lambda;
    est.kind = kind;
    est.n_values = schedule.n_values;

    const int n_max = schedule.n_values.back();
    const int margin = base_margin(schedule, kind, ctx.N);

    check_budget(ctx, ray_window(schedule.direction, n_max, margin));

    // one row of cost(0, n x)/n per replica, all n values from one field
    auto run_replica = [&](int replica, int extra_margin) {
        Window win = ray_window(schedule.direction, n_max, margin + extra_margin);
        check_budget(ctx, win);
        PotentialField base = sample_field(ctx.spec, win, ctx.seed, static_cast<std::uint32_t>(replica));
        PotentialField field = base.with_lambda(lambda);
        Site origin = Site::zero(schedule.direction.dim());

        std::vector<double> row;
        row.reserve(schedule.n_values.size());
        if (kind == CostKind::RenormAhat) {
            MacroMap macro = build_macro_map(base, ctx.M, ctx.N);
            for (int n : schedule.n_values)
                row.push_back(hat_a(field, origin, n * schedule.direction, macro, ctx.solve) / n);
        } else if (kind == CostKind::RelocatedAm) {
            for (int n : schedule.n_values)
                row.push_back(a_m_cost(field, origin, n * schedule.direction, ctx.solve) / n);
        } else {
            for (int n : schedule.n_values)
                row.push_back(travel_cost(field, origin, n * schedule.direction, ctx.solve) / n);
        }
        return row;
    };

    std::vector<std::vector<double>> rows(static_cast<std::size_t>(schedule.replicas));
    std::vector<std::uint8_t> enlarged(static_cast<std::size_t>(schedule.replicas), 0);
    parallel_replicas(schedule.replicas, ctx.workers, [&](int r) {
        try {
            rows[static_cast<std::size_t>(r)] = run_replica(r, 0);
        } catch (const UnboundedComponent&) {
            // enlarge once so the component machinery fits, then give up
            rows[static_cast<std::size_t>(r)] = run_replica(r, margin + 4 * ctx.N);
            enlarged[static_cast<std::size_t>(r)] = 1;
        }
        return 0.0;
    });
    for (auto e : enlarged) est.enlarged_count += e;

    est.samples.assign(schedule.n_values.size(), std::vector<double>(static_cast<std::size_t>(schedule.replicas)));
    for (int r = 0; r < schedule.replicas; ++r)
        for (std::size_t k = 0; k < schedule.n_values.size(); ++k)
            est.samples[k][static_cast<std::size_t>(r)] = rows[static_cast<std::size_t>(r)][k];
    for (const auto& s : est.samples) est.per_n.push_back(stats_of(s));

    for (std::size_t i = 0; i < est.n_values.size(); ++i)
        for (std::size_t j = i + 1; j < est.n_values.size(); ++j)
            if (est.n_values[j] == 2 * est.n_values[i]) {
                const auto &a = est.per_n[i], &b = est.per_n[j];
                if (a.inf_count == 0 && b.inf_count == 0 && b.mean > a.mean + 2 * (a.se + b.se))
                    est.doubling_ok = false;
            }
    return est;
}

std::vector<Site> default_fan(int dim) {
    std::vector<Site> fan;
    if (dim == 2) {
        for (Coord a : {-2, -1, 0, 1, 2})
            for (Coord b : {-2, -1, 0, 1, 2}) {
                if (a == 0 && b == 0) continue;
                if (std::abs(a) == 2 && std::abs(b) == 2) continue;
                if (std::abs(a) == 2 && b == 0) continue;
                if (a == 0 && std::abs(b) == 2) continue;
                fan.push_back(Site{a, b});
            }
    } else {
        for (int k = 0; k < dim; ++k)
            for (Coord s : {-1, +1}) {
                Site e = Site::zero(dim);
                e[k] = s;
                fan.push_back(e);
            }
        Site diag = Site::zero(dim);
        for (int k = 0; k < dim; ++k) diag[k] = -1;
        while (true) {
            fan.push_back(diag);
            int k = dim - 1;
            while (k >= 0 && diag[k] == 1) diag[k--] = -1;
            if (k < 0) break;
            diag[k] += 2; // components stay in {-1, +1}
        }
    }
    std::sort(fan.begin(), fan.end());
    return fan;
}

std::vector<double> dual_norm(const std::vector<Site>& fan, const std::vector<double>& alpha,
                              const std::vector<double>& alpha_se,
                              const std::vector<std::vector<double>>& eval_points) {
    if (fan.size() != alpha.size() || fan.size() != alpha_se.size())
        throw ValidationError("fan and alpha arrays must align");
    if (fan.empty()) throw ValidationError("empty direction fan");
    for (std::size_t k = 0; k < fan.size(); ++k)
        if (!(alpha[k] - 2 * alpha_se[k] > 0))
            throw DegenerateNorm("alpha(" + fan[k].str() + ") is not positive within 2 se");

    std::vector<double> out;
    for (const auto& x : eval_points) {
        double best = 0;
        for (std::size_t k = 0; k < fan.size(); ++k) {
            double dot = 0;
            for (std::size_t c = 0; c < x.size(); ++c) dot += x[c] * fan[k][static_cast<int>(c)];
            best = std::max(best, dot / alpha[k]);
        }
        out.push_back(best);
    }
    return out;
}

// ------------------------------------------------------------ rate function

namespace {

// smallest q <= 64 with q*x integral
int integral_scale(const std::vector<double>& x) {
    for (int q = 1; q <= 64; ++q) {
        bool ok = true;
        for (double c : x) {
            double scaled = c * q;
            if (std::abs(scaled - std::lround(scaled)) > 1e-9) ok = false;
        }
        if (ok) return q;
    }
    throw ValidationError("evaluation point is not rational with denominator <= 64");
}

} // namespace

RateCurve rate_function(const EstimateContext& ctx, const std::vector<double>& x,
                        const std::vector<double>& lambda_grid, const RaySchedule& schedule,
                        int refine_iters) {
    if (lambda_grid.empty()) throw ValidationError("empty lambda grid");
    for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
        if (lambda_grid[k] < 0) throw ValidationError("lambda grid must be nonnegative");
        if (k > 0 && lambda_grid[k] <= lambda_grid[k - 1]) throw ValidationError("lambda grid must be sorted");
    }
    if (lambda_grid.front() != 0) throw ValidationError("lambda grid must start at 0");

    RateCurve curve;
    curve.x = x;
    curve.lambdas = lambda_grid;

    double l1 = 0;
    for (double c : x) l1 += std::abs(c);
    curve.diverges = l1 > 1 + 1e-12;

    const int q = integral_scale(x);
    curve.scale_q = q;
    Site dir = Site::zero(static_cast<int>(x.size()));
    bool zero = true;
    for (std::size_t k = 0; k < x.size(); ++k) {
        dir[static_cast<int>(k)] = static_cast<Coord>(std::lround(x[k] * q));
        zero = zero && dir[static_cast<int>(k)] == 0;
    }
    curve.direction = dir;

    // alpha_lambda(x) = alpha_lambda(q x)/q; shared replicas across lambda
    auto eval = [&](double lambda) -> NormEstimate {
        if (zero) {
            NormEstimate est;
            est.direction = dir;
            est.lambda = lambda;
            est.n_values = schedule.n_values;
            est.samples.assign(schedule.n_values.size(),
                               std::vector<double>(static_cast<std::size_t>(schedule.replicas), 0.0));
            for (const auto& s : est.samples) est.per_n.push_back(stats_of(s));
            return est;
        }
        RaySchedule s = schedule;
        s.direction = dir;
        NormEstimate est = estimate_alpha(ctx, s, lambda, CostKind::PlainA);
        for (auto& row : est.samples)
            for (double& v : row) v /= q;
        est.per_n.clear();
        for (const auto& row : est.samples) est.per_n.push_back(stats_of(row));
        return est;
    };

    double best_g = -kInf, best_lambda = 0;
    for (double lambda : lambda_grid) {
        curve.per_lambda.push_back(eval(lambda));
        double g = curve.per_lambda.back().alpha_hat() - lambda;
        if (g > best_g) {
            best_g = g;
            best_lambda = lambda;
        }
    }

    // concave refinement between the neighbors of the grid argmax
    if (refine_iters > 0 && lambda_grid.size() >= 2) {
        std::size_t ki = 0;
        for (std::size_t k = 0; k < lambda_grid.size(); ++k)
            if (lambda_grid[k] == best_lambda) ki = k;
        double lo = ki == 0 ? lambda_grid.front() : lambda_grid[ki - 1];
        double hi = ki + 1 >= lambda_grid.size() ? lambda_grid.back() : lambda_grid[ki + 1];
        for (int it = 0; it < refine_iters && hi - lo > 1e-9; ++it) {
            double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
            double g1 = eval(m1).alpha_hat() - m1;
            double g2 = eval(m2).alpha_hat() - m2;
            curve.refined.emplace_back(m1, g1);
            curve.refined.emplace_back(m2, g2);
            if (g1 > best_g) {
                best_g = g1;
                best_lambda = m1;
            }
            if (g2 > best_g) {
                best_g = g2;
                best_lambda = m2;
            }
            if (g1 < g2) lo = m1;
            else hi = m2;
        }
    }

    curve.I_hat = curve.diverges ? kInf : best_g;
    curve.argmax_lambda = best_lambda;
    return curve;
}

// ------------------------------------------------------------ shape raster

namespace {

struct FanGauge {
    std::vector<std::array<double, 2>> u;
    std::vector<double> a;

    FanGauge(const std::vector<Site>& fan, const std::vector<double>& alpha) {
        if (fan.size() != alpha.size() || fan.size() < 3)
            throw ValidationError("shape raster needs an aligned fan with >= 3 directions");
        std::vector<std::size_t> order(fan.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
            return std::atan2(static_cast<double>(fan[i][1]), static_cast<double>(fan[i][0])) <
                   std::atan2(static_cast<double>(fan[j][1]), static_cast<double>(fan[j][0]));
        });
        for (std::size_t k : order) {
            u.push_back({static_cast<double>(fan[k][0]), static_cast<double>(fan[k][1])});
            if (!(alpha[k] > 0)) throw DegenerateNorm("fan alpha must be positive for the gauge");
            a.push_back(alpha[k]);
        }
    }

    // positively homogeneous interpolation between the fan directions
    double operator()(double zx, double zy) const {
        if (zx == 0 && zy == 0) return 0;
        const std::size_t m = u.size();
        for (std::size_t k = 0; k < m; ++k) {
            const auto& p = u[k];
            const auto& n = u[(k + 1) % m];
            double det = p[0] * n[1] - p[1] * n[0];
            if (det <= 0) continue;
            double ca = (zx * n[1] - zy * n[0]) / det;  // coefficient on p
            double cb = (p[0] * zy - p[1] * zx) / det;  // coefficient on n
            if (ca >= -1e-15 && cb >= -1e-15) return std::max(0.0, ca) * a[k] + std::max(0.0, cb) * a[(k + 1) % m];
        }
        throw DegenerateNorm("direction fan does not span the plane");
    }
};

} // namespace

ShapeRaster shape_raster(const PotentialField& field, double t, int resolution,
                         double enlargement, const std::vector<Site>& fan,
                         const std::vector<double>& fan_alpha, const SolveParams& params) {
    const Window& w = field.window();
    if (w.dim() != 2) throw ValidationError("shape raster is implemented for d = 2");
    if (resolution < 4) throw ValidationError("shape raster needs resolution >= 4");
    if (t < 0 || enlargement < 0) throw ValidationError("shape raster needs t >= 0 and enlargement >= 0");
    FanGauge gauge(fan, fan_alpha);

    // required reach: the cheapest direction travels farthest per unit cost
    double per_l1 = kInf;
    for (std::size_t k = 0; k < fan.size(); ++k)
        per_l1 = std::min(per_l1, fan_alpha[k] / static_cast<double>(fan[k].l1_norm()));
    if (t > 0) {
        int reach = static_cast<int>(std::ceil(t / per_l1));
        if (!w.contains(Window::box(Site::zero(2), reach)))
            throw WindowTooSmall("window cannot hold the t-ball of the cheapest fan direction");
    }

    SiteSet target(w);
    target.insert(Site::zero(2));
    CostField cf = solve_cost_field(field, target, params);
    if (!cf.converged) throw MaxIterExceeded("shape solve stopped at residual " + std::to_string(cf.residual));

    SiteSet a_t(w);
    for (Index i = 0; i < w.cell_count(); ++i)
        if (cf.a_at_index(i) <= t) a_t.insert_index(i);

    ShapeRaster out;
    out.t = t;
    out.enlargement = enlargement;
    out.resolution = resolution;

    double radius_k = 0;
    for (std::size_t k = 0; k < fan.size(); ++k) {
        double len = std::hypot(static_cast<double>(fan[k][0]), static_cast<double>(fan[k][1]));
        radius_k = std::max(radius_k, len / fan_alpha[k]);
    }
    out.half_width = 1.5 * radius_k;
    const double step = 2.0 * out.half_width / resolution;
    out.cell_area = step * step;
    const double ts = std::max(t, 1.0); // rescale guard at t = 0

    out.cells_at.assign(static_cast<std::size_t>(resolution) * resolution, 0);
    out.cells_at_enlarged.assign(static_cast<std::size_t>(resolution) * resolution, 0);
    out.cells_k.assign(static_cast<std::size_t>(resolution) * resolution, 0);

    auto lattice_member = [&](double px, double py) {
        Site z{static_cast<Coord>(std::floor(px)), static_cast<Coord>(std::floor(py))};
        return a_t.contains(z);
    };
    auto near_member = [&](double px, double py) {
        int rad = static_cast<int>(std::ceil(enlargement));
        Coord cx = static_cast<Coord>(std::lround(px)), cy = static_cast<Coord>(std::lround(py));
        for (Coord dx = -rad; dx <= rad; ++dx)
            for (Coord dy = -rad; dy <= rad; ++dy) {
                Site z{cx + dx, cy + dy};
                if (!a_t.contains(z)) continue;
                if (std::hypot(px - z[0], py - z[1]) <= enlargement) return true;
            }
        return false;
    };

    long n_sym = 0, n_sym_e = 0;
    for (int iy = 0; iy < resolution; ++iy)
        for (int ix = 0; ix < resolution; ++ix) {
            double cxr = -out.half_width + (ix + 0.5) * step;
            double cyr = -out.half_width + (iy + 0.5) * step;
            std::size_t cell = static_cast<std::size_t>(iy) * resolution + static_cast<std::size_t>(ix);
            bool in_k = gauge(cxr, cyr) <= 1.0;
            bool in_at = lattice_member(ts * cxr, ts * cyr);
            bool in_at_e = in_at || near_member(ts * cxr, ts * cyr);
            out.cells_k[cell] = in_k;
            out.cells_at[cell] = in_at;
            out.cells_at_enlarged[cell] = in_at_e;
            if (in_k != in_at) ++n_sym;
            if (in_k != in_at_e) ++n_sym_e;
        }
    out.symdiff_area = n_sym * out.cell_area;
    out.symdiff_enlarged_area = n_sym_e * out.cell_area;
    return out;
}

// ------------------------------------------------------- hyperplane sweep

HyperplaneReport hyperplane_convergence(const EstimateContext& ctx,
                                        const std::vector<double>& direction,
                                        const std::vector<double>& t_values, int replicas,
                                        const std::vector<Site>& fan,
                                        const std::vector<double>& fan_alpha, int margin) {
    if (t_values.empty()) throw ValidationError("hyperplane sweep needs t values");
    if (replicas <= 0) throw ValidationError("hyperplane sweep needs replicas >= 1");
    const int d = static_cast<int>(direction.size());
    double unit = 0;
    for (double c : direction) unit += c * c;
    unit = std::sqrt(unit);
    if (unit == 0) throw ValidationError("hyperplane direction must be nonzero");

    HyperplaneReport rep;
    rep.direction = direction;
    rep.t_values = t_values;
    double t_max = *std::max_element(t_values.begin(), t_values.end());
    int radius = static_cast<int>(std::ceil(t_max / unit)) + margin + 2;
    Window win = Window::box(Site::zero(d), radius);
    check_budget(ctx, win);

    rep.samples.assign(t_values.size(), std::vector<double>(static_cast<std::size_t>(replicas)));
    for (std::size_t ti = 0; ti < t_values.size(); ++ti) {
        double t = t_values[ti];
        auto vals = parallel_replicas(replicas, ctx.workers, [&](int r) {
            PotentialField f = sample_field(ctx.spec, win, ctx.seed, static_cast<std::uint32_t>(r));
            double c = hyperplane_cost(f, direction, t, ctx.solve, margin);
            return t > 0 ? c / t : c;
        });
        rep.samples[ti] = vals;
        rep.per_t.push_back(stats_of(vals));
    }

    // discretized dual reference: min over the fan of alpha(y) / (x . y)
    double ref = kInf;
    for (std::size_t k = 0; k < fan.size(); ++k) {
        double dot = 0;
        for (int c = 0; c < d; ++c) dot += direction[static_cast<std::size_t>(c)] * fan[k][c];
        if (dot > 0) ref = std::min(ref, fan_alpha[k] / dot);
    }
    rep.dual_reference = ref;
    return rep;
}

// ------------------------------------------------------------ velocity

VelocityReport velocity_profile(const EstimateContext& ctx, const Site& direction,
                                double lambda, double lambda_step,
                                const std::vector<std::pair<double, double>>& s_grid,
                                const RaySchedule& schedule) {
    if (lambda <= 0) throw ValidationError("velocity profile needs lambda > 0");
    if (lambda_step <= 0 || lambda_step > lambda) throw ValidationError("lambda step must lie in (0, lambda]");
    schedule.validate();

    RaySchedule s = schedule;
    s.direction = direction;

    auto alpha_at = [&](double lam) { return estimate_alpha(ctx, s, lam, CostKind::PlainA).alpha_hat(); };

    VelocityReport rep;
    rep.direction = direction;
    rep.lambda = lambda;
    const double h = lambda_step;
    double a0 = alpha_at(lambda);
    double ap = alpha_at(lambda + h), am = alpha_at(lambda - h);
    double ap2 = alpha_at(lambda + h / 2), am2 = alpha_at(lambda - h / 2);
    rep.alpha_lambda = a0;
    rep.deriv_plus = (ap - a0) / h;
    rep.deriv_minus = (a0 - am) / h;
    rep.deriv_sym = (ap - am) / (2 * h);
    rep.richardson_gap = std::abs((ap2 - am2) / h - rep.deriv_sym);

    const int n_max = schedule.n_values.back();
    double s2_max = 0;
    for (const auto& [s1, s2] : s_grid) {
        if (s1 < 0 || s2 < s1) throw ValidationError("velocity windows need 0 <= s1 <= s2");
        s2_max = std::max(s2_max, s2);
    }
    int radius = static_cast<int>(std::ceil(n_max * s2_max)) + 6 * ctx.N + 8;
    Window win = Window::box(Site::zero(direction.dim()), radius);
    check_budget(ctx, win);

    for (int n : schedule.n_values) {
        for (const auto& [s1, s2] : s_grid) {
            auto vals = parallel_replicas(schedule.replicas, ctx.workers, [&](int r) {
                PotentialField base = sample_field(ctx.spec, win, ctx.seed, static_cast<std::uint32_t>(r));
                PotentialField f = base.with_lambda(lambda);
                MacroMap macro = build_macro_map(base, ctx.M, ctx.N);
                DeltaSets from = delta_sets_of_site(macro, Site::zero(direction.dim()));
                Site start = from.delta_good.window().site_at(from.delta_good.first_index());
                DeltaSets to = delta_sets_of_site(macro, n * direction);
                int k1 = static_cast<int>(std::ceil(n * s1));
                int k2 = static_cast<int>(std::floor(n * s2));
                if (k2 < k1) return kInf;
                return time_windowed_cost(f, start, to.delta_good, k1, k2) / n;
            });
            VelocityReport::Row row;
            row.n = n;
            row.s1 = s1;
            row.s2 = s2;
            row.stats = stats_of(vals);
            row.intersects_derivative = s1 < rep.deriv_minus + 1e-12 && s2 > rep.deriv_plus - 1e-12;
            rep.rows.push_back(row);
        }
    }
    return rep;
}

// ------------------------------------------------------------ ldp panel

LdpPanel ldp_panel(const EstimateContext& ctx, const std::vector<double>& x, double r,
                   const std::vector<int>& n_values, int replicas) {
    if (n_values.empty()) throw ValidationError("ldp panel needs n values");
    if (replicas <= 0) throw ValidationError("ldp panel needs replicas >= 1");
    if (r < 0) throw ValidationError("ldp radius must be >= 0");
    const int d = static_cast<int>(x.size());
    const int n_max = *std::max_element(n_values.begin(), n_values.end());
    Window win = Window::box(Site::zero(d), n_max);
    check_budget(ctx, win);

    LdpPanel panel;
    panel.x = x;
    panel.r = r;
    panel.n_values = n_values;
    panel.rate_samples.assign(n_values.size(), std::vector<double>(static_cast<std::size_t>(replicas)));
    panel.zrate_samples.assign(n_values.size(), std::vector<double>(static_cast<std::size_t>(replicas)));

    std::vector<std::vector<std::pair<double, double>>> rows(static_cast<std::size_t>(replicas));
    parallel_replicas(replicas, ctx.workers, [&](int rep) {
        PotentialField f = sample_field(ctx.spec, win, ctx.seed, static_cast<std::uint32_t>(rep));
        TimeProfile prof = endpoint_measure(f, Site::zero(d), n_max, n_values);
        auto& row = rows[static_cast<std::size_t>(rep)];
        for (int n : n_values) {
            LdpPoint pt = ldp_point_from_profile(prof, n, x, r);
            double z = prof.total_mass[static_cast<std::size_t>(n)];
            row.emplace_back(pt.rate, z > 0 ? -std::log(z) / n : kInf);
        }
        return 0.0;
    });
    for (int rep = 0; rep < replicas; ++rep)
        for (std::size_t k = 0; k < n_values.size(); ++k) {
            panel.rate_samples[k][static_cast<std::size_t>(rep)] = rows[static_cast<std::size_t>(rep)][k].first;
            panel.zrate_samples[k][static_cast<std::size_t>(rep)] = rows[static_cast<std::size_t>(rep)][k].second;
        }
    for (std::size_t k = 0; k < n_values.size(); ++k) {
        panel.rate_stats.push_back(stats_of(panel.rate_samples[k]));
        panel.zrate_stats.push_back(stats_of(panel.zrate_samples[k]));
    }
    return panel;
}

} // namespace potwalk
