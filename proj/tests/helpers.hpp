#pragma once

// Test-side oracles and instance generators. Deliberately implemented
// independently of the library's algorithms: union-find instead of BFS,
// forward path-sum enumeration instead of the fixed-point solver, DFS
// enumeration instead of Dijkstra.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "potwalk/costsolve.hpp"
#include "potwalk/disorder.hpp"
#include "potwalk/lattice.hpp"

namespace testutil {

using namespace potwalk;

// --- union-find component count -------------------------------------------

inline int uf_find(std::vector<int>& parent, int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
        parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
        a = parent[static_cast<std::size_t>(a)];
    }
    return a;
}

inline std::size_t component_count_oracle(const SiteSet& a, Adjacency adj) {
    const Window& w = a.window();
    std::vector<int> parent(static_cast<std::size_t>(w.cell_count()));
    std::iota(parent.begin(), parent.end(), 0);
    a.for_each_index([&](Index i) {
        Site x = w.site_at(i);
        for (const Site& o : adjacency_offsets(w.dim(), adj)) {
            Site y = x + o;
            if (!w.contains(y) || !a.contains(y)) continue;
            int ra = uf_find(parent, static_cast<int>(i));
            int rb = uf_find(parent, static_cast<int>(w.index_of(y)));
            if (ra != rb) parent[static_cast<std::size_t>(ra)] = rb;
        }
    });
    std::size_t count = 0;
    a.for_each_index([&](Index i) {
        if (uf_find(parent, static_cast<int>(i)) == static_cast<int>(i)) ++count;
    });
    return count;
}

// --- flood-fill hole oracle -------------------------------------------------

inline bool has_hole_oracle(const SiteSet& a, const Window& w) {
    std::vector<std::int8_t> reached(static_cast<std::size_t>(w.cell_count()), 0);
    std::vector<Index> stack;
    for (Index i = 0; i < w.cell_count(); ++i) {
        Site x = w.site_at(i);
        if (w.on_edge(x) && !a.contains(x)) {
            reached[static_cast<std::size_t>(i)] = 1;
            stack.push_back(i);
        }
    }
    while (!stack.empty()) {
        Index i = stack.back();
        stack.pop_back();
        Site x = w.site_at(i);
        for (const Site& o : adjacency_offsets(w.dim(), Adjacency::NN)) {
            Site y = x + o;
            if (!w.contains(y) || a.contains(y)) continue;
            Index j = w.index_of(y);
            if (!reached[static_cast<std::size_t>(j)]) {
                reached[static_cast<std::size_t>(j)] = 1;
                stack.push_back(j);
            }
        }
    }
    for (Index i = 0; i < w.cell_count(); ++i)
        if (!a.contains_index(i) && !reached[static_cast<std::size_t>(i)]) return true;
    return false;
}

// --- random set generators ---------------------------------------------------

// Grow a random *-connected set of `size` sites from the origin.
inline SiteSet grow_star_connected(const Window& w, int size, std::mt19937_64& rng) {
    SiteSet s(w);
    Site cur = Site::zero(w.dim());
    s.insert(cur);
    std::vector<Site> pool{cur};
    while (static_cast<int>(s.size()) < size) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        Site base = pool[pick(rng)];
        const auto& offs = adjacency_offsets(w.dim(), Adjacency::Star);
        std::uniform_int_distribution<std::size_t> po(0, offs.size() - 1);
        Site cand = base + offs[po(rng)];
        if (!w.contains(cand) || w.on_edge(cand) || s.contains(cand)) continue;
        s.insert(cand);
        pool.push_back(cand);
    }
    return s;
}

// Add every complement component that does not reach the window edge.
inline SiteSet fill_holes(const SiteSet& a, const Window& w) {
    HoleResult hr = find_holes(a, w);
    SiteSet out = a;
    for (const SiteSet& h : hr.holes) h.for_each_index([&](Index i) { out.insert(w.site_at(i)); });
    return out;
}

// Random nn-connected set of exactly `size` sites.
inline SiteSet grow_nn_connected(const Window& w, int size, std::mt19937_64& rng) {
    SiteSet s(w);
    Site cur = Site::zero(w.dim());
    s.insert(cur);
    std::vector<Site> pool{cur};
    while (static_cast<int>(s.size()) < size) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        Site base = pool[pick(rng)];
        const auto& offs = adjacency_offsets(w.dim(), Adjacency::NN);
        std::uniform_int_distribution<std::size_t> po(0, offs.size() - 1);
        Site cand = base + offs[po(rng)];
        if (!w.contains(cand) || w.on_edge(cand) || s.contains(cand)) continue;
        s.insert(cand);
        pool.push_back(cand);
    }
    return s;
}

// --- truncated path-sum oracle ----------------------------------------------

// Total weight of walks from `start` absorbed at the target within `max_len`
// steps, never leaving the window: forward stepping over the path measure.
inline double path_sum_oracle(const PotentialField& f, const Site& start, const Site& target,
                              int max_len) {
    const Window& w = f.window();
    const int d = w.dim();
    const double inv2d = 1.0 / (2.0 * d);
    std::vector<double> mass(static_cast<std::size_t>(w.cell_count()), 0.0);
    mass[static_cast<std::size_t>(w.index_of(start))] = 1.0;
    Index ti = w.index_of(target);
    double absorbed = 0;
    for (int step = 0; step <= max_len; ++step) {
        absorbed += mass[static_cast<std::size_t>(ti)];
        mass[static_cast<std::size_t>(ti)] = 0.0;
        if (step == max_len) break;
        std::vector<double> next(mass.size(), 0.0);
        for (Index i = 0; i < w.cell_count(); ++i) {
            double m = mass[static_cast<std::size_t>(i)];
            if (m == 0.0) continue;
            double send = m * std::exp(-f.at_index(i)) * inv2d;
            Site x = w.site_at(i);
            for (const Site& o : adjacency_offsets(d, Adjacency::NN)) {
                Site y = x + o;
                if (w.contains(y)) next[static_cast<std::size_t>(w.index_of(y))] += send;
            }
        }
        mass.swap(next);
    }
    return absorbed;
}

// --- exhaustive FPP oracle ----------------------------------------------------

inline void fpp_dfs(const PotentialField& f, const Site& cur, const Site& target, double acc,
                    std::vector<std::int8_t>& visited, double& best) {
    const Window& w = f.window();
    if (cur == target) {
        best = std::min(best, acc);
        return;
    }
    double v = f.at(cur);
    if (v == kInf || acc + v >= best) return;
    Index i = w.index_of(cur);
    visited[static_cast<std::size_t>(i)] = 1;
    for (const Site& o : adjacency_offsets(w.dim(), Adjacency::NN)) {
        Site y = cur + o;
        if (!w.contains(y) || visited[static_cast<std::size_t>(w.index_of(y))]) continue;
        fpp_dfs(f, y, target, acc + v, visited, best);
    }
    visited[static_cast<std::size_t>(i)] = 0;
}

// Minimum over all simple nn paths of the site sums (endpoint excluded).
inline double fpp_oracle(const PotentialField& f, const Site& source, const Site& target) {
    std::vector<std::int8_t> visited(static_cast<std::size_t>(f.window().cell_count()), 0);
    double best = kInf;
    fpp_dfs(f, source, target, 0.0, visited, best);
    return best;
}

// --- misc ----------------------------------------------------------------------

inline PotentialField constant_field(const Window& w, double v) {
    return PotentialField(w, std::vector<double>(static_cast<std::size_t>(w.cell_count()), v), 0, 0);
}

inline DistributionSpec uniform_spec(double a, double b, double weight = 1.0, double p_inf = 0.0) {
    DistributionSpec s;
    s.parts.push_back({DistributionSpec::PartKind::Uniform, a, b, 0, 0, weight});
    s.p_inf = p_inf;
    return s;
}

inline DistributionSpec exponential_spec(double rate) {
    DistributionSpec s;
    s.parts.push_back({DistributionSpec::PartKind::Exponential, 0, 0, rate, 0, 1.0});
    return s;
}

} // namespace testutil
