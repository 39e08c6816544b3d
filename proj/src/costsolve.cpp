#include "potwalk/costsolve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <queue>

namespace potwalk {

double CostField::a_at_index(Index i) const {
    double v = e[static_cast<std::size_t>(i)];
    return v > 0 ? -std::log(v) : kInf;
}

namespace {

// Per-axis neighbor strides with bounds handled through coordinates.
struct Stencil {
    const Window& w;
    std::vector<Index> stride;
    explicit Stencil(const Window& win) : w(win) {
        stride.resize(static_cast<std::size_t>(w.dim()));
        Index s = 1;
        for (int k = w.dim() - 1; k >= 0; --k) {
            stride[static_cast<std::size_t>(k)] = s;
            s *= w.extent(k);
        }
    }
};

SiteSet reembed_target(const Window& w, const SiteSet& target) {
    if (target.window() == w) return target;
    SiteSet t(w);
    target.for_each_index([&](Index i) {
        Site x = target.window().site_at(i);
        if (!w.contains(x)) throw ValidationError("target site " + x.str() + " outside solver window");
        t.insert(x);
    });
    return t;
}

} // namespace

CostField solve_cost_field(const PotentialField& field, const SiteSet& target_in, const SolveParams& params) {
    if (params.tol <= 0) throw ValidationError("solver tolerance must be > 0");
    const Window& w = field.window();
    SiteSet target = reembed_target(w, target_in);
    if (target.empty()) throw EmptyTargetSet("cost solve with empty target");

    const int d = w.dim();
    const Index n = w.cell_count();
    const double inv2d = 1.0 / (2.0 * d);
    Stencil st(w);

    std::vector<double> weight(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) weight[static_cast<std::size_t>(i)] = std::exp(-field.at_index(i));

    std::vector<double> f(static_cast<std::size_t>(n), 0.0);
    target.for_each_index([&](Index i) { f[static_cast<std::size_t>(i)] = 1.0; });

    // one Gauss-Seidel update; monotone because updates only ever increase
    auto update_site = [&](Index i, const Site& x) -> double {
        if (target.contains_index(i)) return 0.0;
        double wgt = weight[static_cast<std::size_t>(i)];
        if (wgt == 0.0) return 0.0;
        double sum = 0;
        for (int k = 0; k < d; ++k) {
            if (x[k] > w.lo()[k]) sum += f[static_cast<std::size_t>(i - st.stride[static_cast<std::size_t>(k)])];
            if (x[k] < w.hi()[k]) sum += f[static_cast<std::size_t>(i + st.stride[static_cast<std::size_t>(k)])];
        }
        double next = wgt * inv2d * sum;
        double& cur = f[static_cast<std::size_t>(i)];
        if (next > cur) {
            double delta = next - cur;
            cur = next;
            return delta;
        }
        return 0.0;
    };

    CostField out;
    out.window = w;
    out.target = target;

    auto step_up = [&](Site& x) {
        for (int k = d - 1; k >= 0; --k) {
            if (x[k] < w.hi()[k]) {
                ++x[k];
                return;
            }
            x[k] = w.lo()[k];
        }
    };
    auto step_down = [&](Site& x) {
        for (int k = d - 1; k >= 0; --k) {
            if (x[k] > w.lo()[k]) {
                --x[k];
                return;
            }
            x[k] = w.hi()[k];
        }
    };

    long iter = 0;
    double delta = kInf;
    while (iter < params.max_iter) {
        delta = 0;
        if (iter % 2 == 0) {
            Site x = w.lo();
            for (Index i = 0; i < n; ++i, step_up(x)) delta = std::max(delta, update_site(i, x));
        } else {
            Site x = w.hi();
            for (Index i = n - 1; i >= 0; --i, step_down(x)) delta = std::max(delta, update_site(i, x));
        }
        ++iter;
        if (delta == 0.0) break; // exact floating-point fixed point
    }

    // balance-equation defect at non-target sites
    double residual = 0;
    {
        Site x = w.lo();
        for (Index i = 0; i < n; ++i, step_up(x)) {
            if (target.contains_index(i)) continue;
            double sum = 0;
            for (int k = 0; k < d; ++k) {
                if (x[k] > w.lo()[k]) sum += f[static_cast<std::size_t>(i - st.stride[static_cast<std::size_t>(k)])];
                if (x[k] < w.hi()[k]) sum += f[static_cast<std::size_t>(i + st.stride[static_cast<std::size_t>(k)])];
            }
            residual = std::max(residual, std::abs(weight[static_cast<std::size_t>(i)] * inv2d * sum - f[static_cast<std::size_t>(i)]));
        }
    }

    out.e = std::move(f);
    out.residual = residual;
    out.iterations = iter;
    out.converged = residual <= params.tol;
    return out;
}

double travel_cost(const PotentialField& field, const Site& x, const Site& y, const SolveParams& params) {
    const Window& w = field.window();
    if (!w.contains(x) || !w.contains(y)) throw WindowTooSmall("travel endpoints must lie in the window");
    if (x == y) return 0.0;
    SiteSet target(w);
    target.insert(y);
    CostField cf = solve_cost_field(field, target, params);
    if (!cf.converged)
        throw MaxIterExceeded("cost solve stopped at residual " + std::to_string(cf.residual));
    return cf.a_at(x);
}

double hyperplane_cost(const PotentialField& field, std::span<const double> direction,
                       double t, const SolveParams& params, int margin) {
    const Window& w = field.window();
    const int d = w.dim();
    if (static_cast<int>(direction.size()) != d) throw ValidationError("direction dimension mismatch");
    double norm = 0;
    for (double c : direction) norm += c * c;
    if (norm == 0) throw ValidationError("hyperplane direction must be nonzero");
    Site origin = Site::zero(d);
    if (!w.contains(origin)) throw WindowTooSmall("hyperplane solve needs the origin in-window");
    if (t <= 0) return 0.0;

    // require the window to reach `margin` cells past the hyperplane
    double best = -kInf;
    for (Index i = 0; i < w.cell_count(); ++i) {
        Site z = w.site_at(i);
        double dot = 0;
        for (int k = 0; k < d; ++k) dot += direction[static_cast<std::size_t>(k)] * z[k];
        best = std::max(best, dot);
    }
    double unit = std::sqrt(norm);
    if (best < t + margin * unit)
        throw WindowTooSmall("window does not extend past the hyperplane by the requested margin");

    SiteSet target(w);
    for (Index i = 0; i < w.cell_count(); ++i) {
        Site z = w.site_at(i);
        double dot = 0;
        for (int k = 0; k < d; ++k) dot += direction[static_cast<std::size_t>(k)] * z[k];
        if (dot >= t) target.insert_index(i);
    }
    CostField cf = solve_cost_field(field, target, params);
    if (!cf.converged)
        throw MaxIterExceeded("hyperplane solve stopped at residual " + std::to_string(cf.residual));
    return cf.a_at(origin);
}

// ------------------------------------------------------------ time stepping

namespace {

TimeProfile run_measure(const PotentialField& field, const Site& start, const SiteSet* target,
                        int horizon, std::span<const int> snapshot_times) {
    const Window& w = field.window();
    const int d = w.dim();
    if (horizon < 0) throw ValidationError("negative horizon");
    if (!w.contains(Window::box(start, horizon)))
        throw WindowTooSmall("window must contain the radius-" + std::to_string(horizon) + " box around the start");

    const Index n = w.cell_count();
    const double inv2d = 1.0 / (2.0 * d);
    Stencil st(w);

    std::vector<double> weight(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) weight[static_cast<std::size_t>(i)] = std::exp(-field.at_index(i));

    std::vector<double> mass(static_cast<std::size_t>(n), 0.0), next(static_cast<std::size_t>(n), 0.0);
    mass[static_cast<std::size_t>(w.index_of(start))] = 1.0;

    TimeProfile prof;
    prof.window = w;
    prof.start = start;
    prof.horizon = horizon;
    prof.total_mass.resize(static_cast<std::size_t>(horizon) + 1, 0.0);
    prof.absorbed.resize(static_cast<std::size_t>(horizon) + 1, 0.0);

    auto want_snapshot = [&](int k) {
        return std::find(snapshot_times.begin(), snapshot_times.end(), k) != snapshot_times.end();
    };

    for (int k = 0;; ++k) {
        if (target) {
            double abs_k = 0;
            target->for_each_index([&](Index i) {
                abs_k += mass[static_cast<std::size_t>(i)];
                mass[static_cast<std::size_t>(i)] = 0.0;
            });
            prof.absorbed[static_cast<std::size_t>(k)] = abs_k;
        }
        double tot = 0;
        for (double m : mass) tot += m;
        prof.total_mass[static_cast<std::size_t>(k)] = tot;
        if (want_snapshot(k)) prof.snapshots.emplace_back(k, mass);
        if (k == horizon) break;

        std::fill(next.begin(), next.end(), 0.0);
        Site x = w.lo();
        for (Index i = 0; i < n; ++i) {
            double m = mass[static_cast<std::size_t>(i)];
            if (m != 0.0) {
                double send = m * weight[static_cast<std::size_t>(i)] * inv2d;
                if (send != 0.0) {
                    for (int kk = 0; kk < d; ++kk) {
                        if (x[kk] > w.lo()[kk]) next[static_cast<std::size_t>(i - st.stride[static_cast<std::size_t>(kk)])] += send;
                        if (x[kk] < w.hi()[kk]) next[static_cast<std::size_t>(i + st.stride[static_cast<std::size_t>(kk)])] += send;
                    }
                }
            }
            for (int k = d - 1; k >= 0; --k) {
                if (x[k] < w.hi()[k]) {
                    ++x[k];
                    break;
                }
                x[k] = w.lo()[k];
            }
        }
        mass.swap(next);
    }
    prof.final_mass = std::move(mass);
    return prof;
}

} // namespace

TimeProfile endpoint_measure(const PotentialField& field, const Site& start, int n,
                             std::span<const int> snapshot_times) {
    return run_measure(field, start, nullptr, n, snapshot_times);
}

LdpPoint ldp_point_from_profile(const TimeProfile& profile, int n,
                                std::span<const double> center, double radius) {
    const Window& w = profile.window;
    const int d = w.dim();
    if (static_cast<int>(center.size()) != d) throw ValidationError("ldp center dimension mismatch");

    const std::vector<double>* mu = nullptr;
    if (n == profile.horizon) mu = &profile.final_mass;
    for (const auto& [k, snap] : profile.snapshots)
        if (k == n) mu = &snap;
    if (!mu) throw ValidationError("no endpoint weights recorded for n = " + std::to_string(n));

    double z = 0;
    for (double m : *mu) z += m;
    if (z <= 0) return {0.0, kInf};

    double hit = 0;
    for (Index i = 0; i < w.cell_count(); ++i) {
        double m = (*mu)[static_cast<std::size_t>(i)];
        if (m == 0.0) continue;
        Site s = w.site_at(i);
        double dist = 0;
        for (int k = 0; k < d; ++k) dist += std::abs(s[k] - n * center[static_cast<std::size_t>(k)]);
        if (dist <= n * radius + 1e-12) hit += m;
    }
    double prob = hit / z;
    return {prob, prob > 0 ? -std::log(prob) / n : kInf};
}

LdpPoint ldp_probability(const PotentialField& field, int n,
                         std::span<const double> center, double radius) {
    TimeProfile prof = endpoint_measure(field, Site::zero(field.dim()), n);
    return ldp_point_from_profile(prof, n, center, radius);
}

TimeProfile absorption_profile(const PotentialField& field, const Site& start,
                               const SiteSet& target, int horizon) {
    SiteSet t = reembed_target(field.window(), target);
    if (t.empty()) throw EmptyTargetSet("absorption profile with empty target");
    return run_measure(field, start, &t, horizon, {});
}

double time_windowed_cost(const PotentialField& field, const Site& start,
                          const SiteSet& target, int s1, int s2) {
    if (s1 < 0 || s2 < s1) throw ValidationError("time window needs 0 <= s1 <= s2");
    TimeProfile prof = absorption_profile(field, start, target, s2);
    double sum = 0;
    for (int k = s1; k <= s2; ++k) sum += prof.absorbed[static_cast<std::size_t>(k)];
    return sum > 0 ? -std::log(sum) : kInf;
}

// ------------------------------------------------------------------ FPP

std::vector<double> fpp_distance_field(const PotentialField& field, const Site& source) {
    const Window& w = field.window();
    const int d = w.dim();
    if (!w.contains(source)) throw ValidationError("fpp source outside window");
    Stencil st(w);

    std::vector<double> dist(static_cast<std::size_t>(w.cell_count()), kInf);
    std::vector<std::int8_t> done(static_cast<std::size_t>(w.cell_count()), 0);
    using Entry = std::pair<double, Index>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

    dist[static_cast<std::size_t>(w.index_of(source))] = 0.0;
    heap.emplace(0.0, w.index_of(source));

    while (!heap.empty()) {
        auto [dv, i] = heap.top();
        heap.pop();
        if (done[static_cast<std::size_t>(i)]) continue;
        done[static_cast<std::size_t>(i)] = 1;
        double vi = field.at_index(i);
        if (vi == kInf) continue; // entering further from an infinite site is impossible
        double through = dv + vi;
        Site x = w.site_at(i);
        for (int k = 0; k < d; ++k) {
            for (int sgn : {-1, +1}) {
                if (sgn < 0 ? x[k] <= w.lo()[k] : x[k] >= w.hi()[k]) continue;
                Index j = i + sgn * st.stride[static_cast<std::size_t>(k)];
                if (done[static_cast<std::size_t>(j)]) continue;
                if (through < dist[static_cast<std::size_t>(j)]) {
                    dist[static_cast<std::size_t>(j)] = through;
                    heap.emplace(through, j);
                }
            }
        }
    }
    return dist;
}

double fpp_distance(const PotentialField& field, const Site& source, const Site& target) {
    return fpp_distance_field(field, source)[static_cast<std::size_t>(field.window().index_of(target))];
}

void write_time_profile_csv(const TimeProfile& profile, std::ostream& os) {
    os << "time,absorbed,total_mass\n";
    for (int k = 0; k <= profile.horizon; ++k) {
        char buf[80];
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", k,
                      profile.absorbed[static_cast<std::size_t>(k)],
                      profile.total_mass[static_cast<std::size_t>(k)]);
        os << buf;
    }
}

} // namespace potwalk
