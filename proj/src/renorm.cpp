#include "potwalk/renorm.hpp"

#include <algorithm>
#include <cmath>

namespace potwalk {

namespace {

Coord floor_div(Coord a, Coord b) {
    Coord q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

} // namespace

Site MacroMap::box_center(const Site& i) const { return (2 * N + 1) * i; }

Window MacroMap::box(const Site& i) const { return Window::box(box_center(i), N); }

Window MacroMap::enlarged_box(const Site& i) const { return Window::box(box_center(i), 3 * N / 2); }

Site MacroMap::macro_index_of(const Site& x) const {
    Site i = Site::zero(x.dim());
    for (int k = 0; k < x.dim(); ++k) i[k] = floor_div(x[k] + N, 2 * N + 1);
    return i;
}

bool MacroMap::is_good(const Site& i) const {
    return macro_window.contains(i) && good[static_cast<std::size_t>(macro_window.index_of(i))];
}

bool MacroMap::in_spanning_proxy(const Site& i) const {
    return macro_window.contains(i) && in_proxy[static_cast<std::size_t>(macro_window.index_of(i))];
}

const SiteSet& MacroMap::crossing_cluster(const Site& i) const {
    if (!is_good(i)) throw PreconditionViolated("crossing cluster requested for bad macro site " + i.str());
    return crossing[static_cast<std::size_t>(macro_window.index_of(i))];
}

double MacroMap::good_fraction() const {
    if (good.empty()) return 0;
    double g = 0;
    for (auto b : good) g += b;
    return g / static_cast<double>(good.size());
}

std::map<Index, Index> MacroMap::cbar_size_histogram() const {
    std::map<Index, Index> h;
    for (Index i = 0; i < macro_window.cell_count(); ++i) {
        Site site = macro_window.site_at(i);
        if (in_proxy[static_cast<std::size_t>(i)]) {
            ++h[1];
            continue;
        }
        std::int32_t c = comp_id[static_cast<std::size_t>(i)];
        if (c < 0 || comp_touches_edge[static_cast<std::size_t>(c)]) continue; // unusable, skipped
        ComponentSets cs = component_sets(*this, site);
        ++h[static_cast<Index>(cs.c_bar.size())];
    }
    return h;
}

MacroMap classify_boxes(const PotentialField& field, double M, int N) {
    if (N < 2 || N % 2 != 0) throw ValidationError("N must be an even integer >= 2");
    if (M < 0) throw ValidationError("healthy threshold must be >= 0");
    const Window& w = field.window();
    const int d = w.dim();
    const int side = 2 * N + 1;
    const int half = 3 * N / 2;

    Site ilo = Site::zero(d), ihi = Site::zero(d);
    for (int k = 0; k < d; ++k) {
        // B'_i inside the micro window on every axis
        ilo[k] = static_cast<Coord>(std::ceil(static_cast<double>(w.lo()[k] + half) / side));
        ihi[k] = static_cast<Coord>(std::floor(static_cast<double>(w.hi()[k] - half) / side));
        if (ilo[k] > ihi[k])
            throw WindowTooSmall("micro window holds no complete enlarged box for N = " + std::to_string(N));
    }

    MacroMap macro;
    macro.N = N;
    macro.M = M;
    macro.micro_window = w;
    macro.macro_window = Window(ilo, ihi);
    macro.good.assign(static_cast<std::size_t>(macro.macro_window.cell_count()), 0);
    macro.crossing.assign(static_cast<std::size_t>(macro.macro_window.cell_count()), SiteSet{});

    for (Index mi = 0; mi < macro.macro_window.cell_count(); ++mi) {
        Site i = macro.macro_window.site_at(mi);
        Window bp = macro.enlarged_box(i);

        SiteSet healthy(bp), livable(bp);
        for (Index j = 0; j < bp.cell_count(); ++j) {
            double v = field.at(bp.site_at(j));
            if (v < kInf) livable.insert_index(j);
            if (v <= M) healthy.insert_index(j);
        }

        // crossing cluster: one healthy component touching all 2d faces
        std::vector<SiteSet> comps = components(healthy, Adjacency::NN);
        const SiteSet* cc = nullptr;
        for (const SiteSet& comp : comps) {
            std::vector<std::uint8_t> lo_face(static_cast<std::size_t>(d), 0), hi_face(static_cast<std::size_t>(d), 0);
            comp.for_each_index([&](Index j) {
                Site s = bp.site_at(j);
                for (int k = 0; k < d; ++k) {
                    if (s[k] == bp.lo()[k]) lo_face[static_cast<std::size_t>(k)] = 1;
                    if (s[k] == bp.hi()[k]) hi_face[static_cast<std::size_t>(k)] = 1;
                }
            });
            bool crosses = true;
            for (int k = 0; k < d; ++k)
                crosses = crosses && lo_face[static_cast<std::size_t>(k)] && hi_face[static_cast<std::size_t>(k)];
            if (crosses) {
                cc = &comp;
                break; // components come ordered by smallest member
            }
        }
        if (!cc) continue; // bad: no crossing cluster

        // no stranded livable cluster of diameter exceeding N/4 (sup-norm
        // diameter, matching the box geometry)
        SiteSet rest(bp);
        livable.for_each_index([&](Index j) {
            if (!cc->contains_index(j)) rest.insert_index(j);
        });
        bool ok = true;
        for (const SiteSet& comp : components(rest, Adjacency::NN)) {
            if (4 * static_cast<long>(linf_diameter(comp)) > N) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;

        macro.good[static_cast<std::size_t>(mi)] = 1;
        macro.crossing[static_cast<std::size_t>(mi)] = *cc;
    }
    return macro;
}

std::vector<Site> macro_infinite_cluster(MacroMap& macro) {
    const Window& mw = macro.macro_window;
    SiteSet good_set(mw);
    for (Index i = 0; i < mw.cell_count(); ++i)
        if (macro.good[static_cast<std::size_t>(i)]) good_set.insert_index(i);

    std::vector<SiteSet> comps = components(good_set, Adjacency::NN);
    const SiteSet* best = nullptr;
    int touching = 0;
    for (const SiteSet& comp : comps) {
        bool touches = false;
        comp.for_each_index([&](Index i) { touches = touches || mw.on_edge(mw.site_at(i)); });
        if (!touches) continue;
        ++touching;
        if (!best || comp.size() > best->size()) best = &comp;
    }
    if (!best) throw NoSpanningCluster("no good component reaches the macro window boundary");

    macro.spanning_multiplicity = touching;
    macro.in_proxy.assign(static_cast<std::size_t>(mw.cell_count()), 0);
    best->for_each_index([&](Index i) { macro.in_proxy[static_cast<std::size_t>(i)] = 1; });

    // *-components of the complement
    SiteSet rest(mw);
    for (Index i = 0; i < mw.cell_count(); ++i)
        if (!macro.in_proxy[static_cast<std::size_t>(i)]) rest.insert_index(i);
    macro.comp_id.assign(static_cast<std::size_t>(mw.cell_count()), -1);
    macro.comp_members.clear();
    macro.comp_touches_edge.clear();
    for (const SiteSet& comp : components(rest, Adjacency::Star)) {
        auto id = static_cast<std::int32_t>(macro.comp_members.size());
        bool touches = false;
        std::vector<Site> members;
        comp.for_each_index([&](Index i) {
            macro.comp_id[static_cast<std::size_t>(i)] = id;
            Site s = mw.site_at(i);
            touches = touches || mw.on_edge(s);
            members.push_back(s);
        });
        macro.comp_members.push_back(std::move(members));
        macro.comp_touches_edge.push_back(touches ? 1 : 0);
    }
    macro.proxy_ready = true;
    return best->members();
}

MacroMap build_macro_map(const PotentialField& field, double M, int N) {
    MacroMap macro = classify_boxes(field, M, N);
    macro_infinite_cluster(macro);
    return macro;
}

ComponentSets component_sets(const MacroMap& macro, const Site& i) {
    if (!macro.proxy_ready) throw PreconditionViolated("spanning proxy not computed");
    const Window& mw = macro.macro_window;
    if (!mw.contains(i)) throw WindowTooSmall("macro index " + i.str() + " outside classified window");

    ComponentSets cs;
    if (macro.in_spanning_proxy(i)) {
        cs.c_bar.push_back(i);
        return cs;
    }
    std::int32_t id = macro.comp_id[static_cast<std::size_t>(mw.index_of(i))];
    if (macro.comp_touches_edge[static_cast<std::size_t>(id)])
        throw UnboundedComponent("component of " + i.str() + " reaches the macro window edge");

    cs.c = macro.comp_members[static_cast<std::size_t>(id)];
    SiteSet cbar(mw);
    for (const Site& j : cs.c) {
        cbar.insert(j);
        for (const Site& o : adjacency_offsets(mw.dim(), Adjacency::Star)) {
            Site y = j + o;
            if (mw.contains(y)) cbar.insert(y);
        }
    }
    cs.c_bar = cbar.members();
    return cs;
}

DeltaSets delta_sets(const MacroMap& macro, const Site& i) {
    ComponentSets cs = component_sets(macro, i);
    DeltaSets ds{SiteSet(macro.micro_window), SiteSet(macro.micro_window)};

    auto add_box = [&](const Site& j) {
        Window bp = macro.enlarged_box(j);
        for (Index k = 0; k < bp.cell_count(); ++k) ds.delta_prime.insert(bp.site_at(k));
    };
    auto add_crossing = [&](const Site& j) {
        if (!macro.is_good(j))
            throw PreconditionViolated("outer boundary site " + j.str() + " of " + i.str() + " is not good");
        const SiteSet& cc = macro.crossing_cluster(j);
        cc.for_each_index([&](Index k) { ds.delta_good.insert(cc.window().site_at(k)); });
    };

    std::vector<Site> in_c(cs.c);
    std::sort(in_c.begin(), in_c.end());
    for (const Site& j : cs.c_bar) {
        add_box(j);
        if (!std::binary_search(in_c.begin(), in_c.end(), j)) add_crossing(j); // j in the *-outer boundary
    }
    if (ds.delta_good.empty()) throw EmptyTargetSet("empty good target set at macro index " + i.str());
    return ds;
}

DeltaSets delta_sets_of_site(const MacroMap& macro, const Site& x) {
    return delta_sets(macro, macro.macro_index_of(x));
}

bool escape_check(const PotentialField& field, const MacroMap& macro,
                  const LatticePath& livable_path, const Site& x) {
    if (livable_path.sites().empty() || livable_path.front() != x)
        throw PreconditionViolated("escape path must start at x");
    if (!livable_path.valid() || livable_path.adjacency() != Adjacency::NN)
        throw PreconditionViolated("escape path must be a nearest-neighbor path");
    for (const Site& s : livable_path.sites()) {
        if (!field.window().contains(s)) throw PreconditionViolated("escape path leaves the micro window");
        if (field.at(s) == kInf) throw PreconditionViolated("escape path visits a non-livable site");
    }
    DeltaSets ds = delta_sets_of_site(macro, x);
    if (ds.delta_prime.contains(livable_path.back()))
        throw PreconditionViolated("escape path must end outside Delta'(x)");
    for (const Site& s : livable_path.sites())
        if (ds.delta_good.contains(s)) return true;
    return false;
}

} // namespace potwalk
