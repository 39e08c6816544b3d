#include "potwalk/approx.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>

namespace potwalk {

namespace {

// Append the canonical axis-ordered lattice walk from path.back() to `to`
// (endpoint included, current point not repeated).
void walk_to(std::vector<Site>& path, const Site& to) {
    Site cur = path.back();
    for (int k = 0; k < cur.dim(); ++k) {
        while (cur[k] != to[k]) {
            cur[k] += (to[k] > cur[k]) ? 1 : -1;
            path.push_back(cur);
        }
    }
}

std::vector<Site> through(int dim, std::initializer_list<Site> waypoints) {
    std::vector<Site> path{Site::zero(dim)};
    for (const Site& wpt : waypoints) walk_to(path, wpt);
    return path;
}

Site unit(int dim, int axis, Coord v = 1) {
    Site s = Site::zero(dim);
    s[axis] = v;
    return s;
}

// Four interior-disjoint paths from 0 to x in the plane of axes (a0, a1),
// every site keeping coordinate a1 >= -1. Requires x >= 0 componentwise
// with x supported on {a0, a1}.
std::vector<std::vector<Site>> base_plane(int dim, int a0, int a1, Coord m, Coord n) {
    auto pt = [&](Coord u, Coord v) {
        Site s = Site::zero(dim);
        s[a0] = u;
        s[a1] = v;
        return s;
    };
    std::vector<std::vector<Site>> out;
    if (n == 0) { // along axis a0
        out.push_back(through(dim, {pt(m, 0)}));
        out.push_back(through(dim, {pt(0, 1), pt(m, 1), pt(m, 0)}));
        out.push_back(through(dim, {pt(0, -1), pt(m, -1), pt(m, 0)}));
        out.push_back(through(dim, {pt(-1, 0), pt(-1, 2), pt(m + 1, 2), pt(m + 1, 0), pt(m, 0)}));
    } else if (m == 0) { // along axis a1; mirrored so the dip stays at -1
        out.push_back(through(dim, {pt(0, n)}));
        out.push_back(through(dim, {pt(1, 0), pt(1, n), pt(0, n)}));
        out.push_back(through(dim, {pt(-1, 0), pt(-1, n), pt(0, n)}));
        out.push_back(through(dim, {pt(0, -1), pt(2, -1), pt(2, n + 1), pt(0, n + 1), pt(0, n)}));
    } else { // the two rectangle boundaries, meeting only at 0 and (m,n)
        out.push_back(through(dim, {pt(0, n), pt(m, n)}));
        out.push_back(through(dim, {pt(0, -1), pt(m + 1, -1), pt(m + 1, n), pt(m, n)}));
        out.push_back(through(dim, {pt(m, 0), pt(m, n)}));
        out.push_back(through(dim, {pt(-1, 0), pt(-1, n + 1), pt(m, n + 1), pt(m, n)}));
    }
    return out;
}

// Inductive construction over the first `dc` axes; x >= 0 componentwise,
// x != 0, supported on axes < dc. Every produced site keeps coordinate
// (dc-1) at -1 or above, which the next level's detour path relies on.
std::vector<std::vector<Site>> build_paths(const Site& x, int dc) {
    const int dim = x.dim();
    if (dc == 2) return base_plane(dim, 0, 1, x[0], x[1]);

    const Coord xd = x[dc - 1];
    Site tail = x;
    tail[dc - 1] = 0;

    bool tail_zero = true;
    for (int k = 0; k < dc - 1; ++k) tail_zero = tail_zero && tail[k] == 0;

    std::vector<std::vector<Site>> out;

    if (tail_zero) {
        // target on the last axis: plane construction plus one sidestep pair per spare axis
        out = base_plane(dim, 0, dc - 1, 0, xd);
        for (int j = 1; j <= dc - 2; ++j)
            for (Coord s : {+1, -1}) {
                Site side = unit(dim, j, s);
                out.push_back(through(dim, {side, side + x, x}));
            }
        return out;
    }

    std::vector<std::vector<Site>> sub = build_paths(tail, dc - 1);

    if (xd == 0) {
        out = std::move(sub);
        for (Coord s : {+1, -1}) {
            Site lift = unit(dim, dc - 1, s);
            out.push_back(through(dim, {lift, tail + lift, x}));
        }
        return out;
    }

    // prune the arrival step, rise to the target layer, then step in
    for (const std::vector<Site>& p : sub) {
        std::vector<Site> lifted(p.begin(), p.end() - 1);
        Site post = lifted.back();
        for (Coord t = 1; t <= xd; ++t) {
            post[dc - 1] = t;
            lifted.push_back(post);
        }
        lifted.push_back(x);
        out.push_back(std::move(lifted));
    }

    if (tail.l1_norm() > 1) {
        Site down = unit(dim, dc - 1, -1);
        Site up = unit(dim, dc - 1, xd + 1);
        out.push_back(through(dim, {down, tail + down, x}));
        out.push_back(through(dim, {up, tail + up, x}));
    } else {
        // the riser over the origin is taken by the pruned straight path
        out.push_back(through(dim, {tail, x}));
        Site a = unit(dim, dc - 1, -1);
        Site b = a + unit(dim, dc - 2, -2);
        Site c = b;
        c[dc - 1] = xd + 1;
        Site dpt = tail;
        dpt[dc - 1] = xd + 1;
        out.push_back(through(dim, {a, b, c, dpt, x}));
    }
    return out;
}

const DisjointPathFamily& cached_family(const Site& x) {
    static std::mutex mu;
    static std::map<Site, DisjointPathFamily> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(x);
    if (it != cache.end()) return it->second;

    DisjointPathFamily fam;
    fam.origin = Site::zero(x.dim());
    fam.destination = x;
    if (x != fam.origin) {
        Site ax = x;
        for (int k = 0; k < x.dim(); ++k) ax[k] = std::abs(ax[k]);
        std::vector<std::vector<Site>> raw = build_paths(ax, x.dim());
        for (std::vector<Site>& p : raw) {
            for (Site& s : p)
                for (int k = 0; k < x.dim(); ++k)
                    if (x[k] < 0) s[k] = -s[k];
            fam.paths.emplace_back(std::move(p), Adjacency::NN);
        }
    }
    return cache.emplace(x, std::move(fam)).first->second;
}

} // namespace

DisjointPathFamily disjoint_paths(const Site& x) { return cached_family(x); }

DisjointPathFamily disjoint_paths_between(const Site& a, const Site& b) {
    DisjointPathFamily fam = cached_family(b - a);
    fam.origin = a;
    fam.destination = b;
    for (LatticePath& p : fam.paths) {
        std::vector<Site> shifted = p.sites();
        for (Site& s : shifted) s = s + a;
        p = LatticePath(std::move(shifted), Adjacency::NN);
    }
    return fam;
}

void write_path_family_csv(const DisjointPathFamily& family, std::ostream& os) {
    const int d = family.origin.dim();
    os << "path,step";
    for (int k = 0; k < d; ++k) os << ",x" << k;
    os << "\n";
    for (std::size_t p = 0; p < family.paths.size(); ++p) {
        const auto& sites = family.paths[p].sites();
        for (std::size_t s = 0; s < sites.size(); ++s) {
            os << p << "," << s;
            for (int k = 0; k < d; ++k) os << "," << sites[s][k];
            os << "\n";
        }
    }
}

double u_m_value(const PotentialField& field, const Site& y) {
    const Window& w = field.window();
    const double log2d = std::log(2.0 * w.dim());
    double total = 0;
    for (const Site& y1 : neighbors(y)) {
        for (const Site& y2 : neighbors(y)) {
            if (y1 == y2) continue; // degenerate family, empty interior
            DisjointPathFamily fam = disjoint_paths_between(y1, y2);
            double best = kInf;
            for (const LatticePath& p : fam.paths) {
                double s = 0;
                for (const Site& z : p.interior()) {
                    if (!w.contains(z))
                        throw WindowTooSmall("path interior leaves the window near " + y.str());
                    s += field.at(z) + log2d;
                }
                best = std::min(best, s);
            }
            total += best;
        }
    }
    return total;
}

double a_m_cost(const PotentialField& field, const Site& x, const Site& y, const SolveParams& params) {
    return travel_cost(field, min_neighbor(field, x), min_neighbor(field, y), params);
}

double tilde_a(const PotentialField& field, const Site& start, const Site& y,
               const MacroMap& macro, const SolveParams& params) {
    DeltaSets ds = delta_sets_of_site(macro, y);
    if (ds.delta_good.contains(start)) return 0.0;
    CostField cf = solve_cost_field(field, ds.delta_good, params);
    if (!cf.converged) throw MaxIterExceeded("tilde-a solve stopped at residual " + std::to_string(cf.residual));
    return cf.a_at(start);
}

double hat_a(const PotentialField& field, const Site& x, const Site& y,
             const MacroMap& macro, const SolveParams& params) {
    DeltaSets from = delta_sets_of_site(macro, x);
    DeltaSets to = delta_sets_of_site(macro, y);
    CostField cf = solve_cost_field(field, to.delta_good, params);
    if (!cf.converged) throw MaxIterExceeded("hat-a solve stopped at residual " + std::to_string(cf.residual));
    double best = kInf;
    from.delta_good.for_each_index([&](Index i) {
        best = std::min(best, cf.a_at_index(i));
    });
    return best;
}

double u_value(const PotentialField& field, const Site& x, const MacroMap& macro) {
    const Window& w = field.window();
    if (!w.contains(x)) throw WindowTooSmall("u requested outside the window");
    DeltaSets ds = delta_sets_of_site(macro, x);
    const double log2d = std::log(2.0 * w.dim());

    if (field.at(x) == kInf) return kInf;

    // shortest livable connection, lexicographic tie-breaks throughout
    std::vector<Index> dist(static_cast<std::size_t>(w.cell_count()), -1);
    Index xi = w.index_of(x);
    dist[static_cast<std::size_t>(xi)] = 0;
    std::vector<Index> frontier{xi};
    Index found = -1;
    if (ds.delta_good.contains_index(xi)) found = xi;
    Index level = 0;
    while (found < 0 && !frontier.empty()) {
        std::vector<Index> next;
        for (Index i : frontier) {
            Site s = w.site_at(i);
            for (const Site& o : adjacency_offsets(w.dim(), Adjacency::NN)) {
                Site ngb = s + o;
                if (!w.contains(ngb)) continue;
                Index j = w.index_of(ngb);
                if (dist[static_cast<std::size_t>(j)] >= 0 || field.at_index(j) == kInf) continue;
                dist[static_cast<std::size_t>(j)] = level + 1;
                next.push_back(j);
            }
        }
        ++level;
        std::sort(next.begin(), next.end());
        for (Index j : next)
            if (found < 0 && ds.delta_good.contains_index(j)) found = j;
        frontier = std::move(next);
    }
    if (found < 0) return kInf;

    // walk back along decreasing distance, preferring the smallest neighbor
    SiteSet charged(w);
    Index cur = found;
    charged.insert_index(cur);
    while (cur != xi) {
        Site s = w.site_at(cur);
        Index pick = -1;
        for (const Site& o : adjacency_offsets(w.dim(), Adjacency::NN)) {
            Site ngb = s + o;
            if (!w.contains(ngb)) continue;
            Index j = w.index_of(ngb);
            if (dist[static_cast<std::size_t>(j)] == dist[static_cast<std::size_t>(cur)] - 1) {
                pick = j;
                break; // offsets are lexicographic
            }
        }
        cur = pick;
        charged.insert_index(cur);
    }
    ds.delta_good.for_each_index([&](Index i) { charged.insert_index(i); });

    double total = 0;
    charged.for_each_index([&](Index i) { total += field.at_index(i) + log2d; });
    return total;
}

double v_value(const PotentialField& field, const Site& x, const MacroMap& macro) {
    DeltaSets ds = delta_sets_of_site(macro, x);
    const double log2d = std::log(2.0 * field.dim());
    double total = 0;
    ds.delta_good.for_each_index([&](Index i) { total += field.at_index(i) + log2d; });
    return total;
}

double ApproximantBundle::hat_a(const Site& x, const Site& y) const {
    auto key = std::make_pair(x, y);
    auto it = hat_cache_.find(key);
    if (it != hat_cache_.end()) return it->second;
    double v = potwalk::hat_a(field_, x, y, macro_, params_);
    hat_cache_.emplace(key, v);
    return v;
}

double ApproximantBundle::u(const Site& x) const {
    auto it = u_cache_.find(x);
    if (it != u_cache_.end()) return it->second;
    double v = u_value(field_, x, macro_);
    u_cache_.emplace(x, v);
    return v;
}

double ApproximantBundle::v(const Site& x) const {
    auto it = v_cache_.find(x);
    if (it != v_cache_.end()) return it->second;
    double val = v_value(field_, x, macro_);
    v_cache_.emplace(x, val);
    return val;
}

} // namespace potwalk
