#pragma once

#include "potwalk/costsolve.hpp"
#include "potwalk/renorm.hpp"

namespace potwalk {

// 2d nearest-neighbor paths from origin to destination whose interiors are
// pairwise disjoint, each of length at most ||dest - origin||_1 + 8.
struct DisjointPathFamily {
    Site origin;
    Site destination;
    std::vector<LatticePath> paths;
};

DisjointPathFamily disjoint_paths(const Site& x); // from the origin; empty family for x = 0
DisjointPathFamily disjoint_paths_between(const Site& a, const Site& b);

// CSV rows: path, step, coordinates
void write_path_family_csv(const DisjointPathFamily& family, std::ostream& os);

// Double sum over ordered neighbor pairs (y', y'') of the cheapest family
// path interior, each site charged V + log(2d).
double u_m_value(const PotentialField& field, const Site& y);

// Travel cost between the relocated endpoints m(x), m(y).
double a_m_cost(const PotentialField& field, const Site& x, const Site& y,
                const SolveParams& params = {});

// Cost from `start` to the good target set of y.
double tilde_a(const PotentialField& field, const Site& start, const Site& y,
               const MacroMap& macro, const SolveParams& params = {});

// min over x' in Delta^g(x) of tilde_a(x', y); one solve serves all x'.
double hat_a(const PotentialField& field, const Site& x, const Site& y,
             const MacroMap& macro, const SolveParams& params = {});

// Cheapest livable connection from x to Delta^g(x): the sum of V + log(2d)
// over the path united with Delta^g(x); +inf when unreachable.
double u_value(const PotentialField& field, const Site& x, const MacroMap& macro);

// Sum of V + log(2d) over Delta^g(x).
double v_value(const PotentialField& field, const Site& x, const MacroMap& macro);

// Memoizing wrapper for estimator loops over one (field, macro) pair.
class ApproximantBundle {
public:
    ApproximantBundle(const PotentialField& field, const MacroMap& macro, SolveParams params = {})
        : field_(field), macro_(macro), params_(params) {}

    double hat_a(const Site& x, const Site& y) const;
    double u(const Site& x) const;
    double v(const Site& x) const;

private:
    const PotentialField& field_;
    const MacroMap& macro_;
    SolveParams params_;
    mutable std::map<std::pair<Site, Site>, double> hat_cache_;
    mutable std::map<Site, double> u_cache_, v_cache_;
};

} // namespace potwalk
