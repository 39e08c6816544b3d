#pragma once

#include <map>
#include <vector>

#include "potwalk/disorder.hpp"
#include "potwalk/lattice.hpp"

namespace potwalk {

// Macroscopic box lattice over a sampled field: boxes B_i = B((2N+1)i, N)
// partition the microscopic lattice; enlarged boxes B'_i = B((2N+1)i, 3N/2)
// overlap and carry the good/bad classification.
class MacroMap {
public:
    int N = 0;
    double M = 0;
    Window micro_window;
    Window macro_window; // indices i whose B'_i fits in the micro window

    std::vector<std::uint8_t> good;  // per macro cell
    std::vector<SiteSet> crossing;   // CC_i on B'_i, empty set for bad i

    // spanning-cluster proxy for the infinite good component
    std::vector<std::uint8_t> in_proxy; // per macro cell
    int spanning_multiplicity = 0;      // number of boundary-touching good components
    bool proxy_ready = false;

    // *-components of the non-proxy macro sites
    std::vector<std::int32_t> comp_id;        // -1 for proxy members
    std::vector<std::vector<Site>> comp_members;
    std::vector<std::uint8_t> comp_touches_edge;

    Site box_center(const Site& i) const;
    Window box(const Site& i) const;          // B_i
    Window enlarged_box(const Site& i) const; // B'_i
    Site macro_index_of(const Site& x) const; // i(x)

    bool is_good(const Site& i) const;
    bool in_spanning_proxy(const Site& i) const;
    const SiteSet& crossing_cluster(const Site& i) const;

    double good_fraction() const;
    std::map<Index, Index> cbar_size_histogram() const; // |C-bar| -> count over macro cells
};

// Classification only: crossing clusters plus the no-large-stranded-cluster
// condition. Proxy and components are filled by macro_infinite_cluster.
MacroMap classify_boxes(const PotentialField& field, double M, int N);

// Boundary-touching good components as the stand-in for the infinite good
// component. Several touching components raise the multiplicity counter and
// the largest one is kept. Throws NoSpanningCluster when none touches.
std::vector<Site> macro_infinite_cluster(MacroMap& macro);

MacroMap build_macro_map(const PotentialField& field, double M, int N);

struct ComponentSets {
    std::vector<Site> c;     // C_i, empty when i is in the proxy
    std::vector<Site> c_bar; // C_i plus its *-outer boundary, or {i} in the proxy
};

// Throws UnboundedComponent when C_i touches the macro window edge.
ComponentSets component_sets(const MacroMap& macro, const Site& i);

struct DeltaSets {
    SiteSet delta_prime; // union of B'_j over j in C-bar
    SiteSet delta_good;  // union of CC_j over j in the *-outer boundary
};

DeltaSets delta_sets(const MacroMap& macro, const Site& i);
DeltaSets delta_sets_of_site(const MacroMap& macro, const Site& x); // via i(x)

// A livable path from x that ends outside Delta'(x) must meet Delta^g(x).
// Verifies the preconditions and reports whether the path does.
bool escape_check(const PotentialField& field, const MacroMap& macro,
                  const LatticePath& livable_path, const Site& x);

} // namespace potwalk
