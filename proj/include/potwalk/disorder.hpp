#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "potwalk/lattice.hpp"
#include "potwalk/rng.hpp"

namespace potwalk {

// Mixture law on [0, +inf]: point atoms, weighted continuous parts, and an
// explicit probability mass at +inf.
class DistributionSpec {
public:
    struct Atom {
        double value = 0;
        double prob = 0;
    };
    enum class PartKind { Uniform, Exponential, Constant };
    struct Part {
        PartKind kind = PartKind::Constant;
        double a = 0, b = 0;  // uniform bounds
        double rate = 1;      // exponential
        double value = 0;     // constant
        double weight = 0;
    };

    std::vector<Atom> atoms;
    std::vector<Part> parts;
    double p_inf = 0;

    void validate() const; // throws InvalidSpec

    static DistributionSpec constant(double c);
    static DistributionSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    // E[V ; V finite] (unconditional mass-weighted mean of the finite part)
    double finite_part_mean() const;
    double finite_mass() const { return 1.0 - p_inf; }
    // E[exp(-V)], the +inf mass contributing 0
    double mean_exp_neg() const;
    // P[V <= m]
    double prob_le(double m) const;

    double sample(CounterRng& rng) const;
};

// Immutable sampled potential over a window, with a lambda-shift view.
// +inf is a genuine IEEE infinity, never a large finite stand-in.
class PotentialField {
public:
    PotentialField() = default;
    PotentialField(Window w, std::vector<double> values, std::uint64_t seed, std::uint32_t replica);

    const Window& window() const { return win_; }
    int dim() const { return win_.dim(); }
    std::uint64_t seed() const { return seed_; }
    std::uint32_t replica() const { return replica_; }
    double lambda() const { return lambda_; }

    double base_at_index(Index i) const { return (*vals_)[static_cast<std::size_t>(i)]; }
    // shifted view; the shift applies to finite values only
    double at_index(Index i) const {
        double v = (*vals_)[static_cast<std::size_t>(i)];
        return v == kInf ? kInf : v + lambda_;
    }
    double at(const Site& x) const { return at_index(win_.index_of(x)); }

    PotentialField with_lambda(double lambda) const; // cheap view, shares storage

private:
    Window win_;
    std::shared_ptr<const std::vector<double>> vals_;
    std::uint64_t seed_ = 0;
    std::uint32_t replica_ = 0;
    double lambda_ = 0;
};

PotentialField sample_field(const DistributionSpec& spec, const Window& window,
                            std::uint64_t seed, std::uint32_t replica);

// Z(x) = min over nearest neighbors of the potential; NaN on the window edge.
std::vector<double> z_field(const PotentialField& field);
double z_at(const PotentialField& field, const Site& x);

// The neighbor attaining Z(x); ties broken by the fixed lexicographic
// neighbor order.
Site min_neighbor(const PotentialField& field, const Site& x);

struct SiteMask {
    SiteSet sites;
    double threshold = 0;
};

struct Masks {
    SiteMask livable; // V < +inf
    SiteMask healthy; // V <= M
};

Masks masks(const PotentialField& field, double M);

struct Clearing {
    Site site;
    LatticePath path; // BFS path from the start to the clearing
};

// BFS over livable (or healthy) sites for the first site whose radius-R box
// lies in-window with potential <= eps everywhere. Deterministic: frontier
// scanned in lexicographic order.
std::optional<Clearing> find_clearing(const PotentialField& field, const Site& start,
                                      double eps, int radius, bool healthy_only, double M);

// binary dump: magic, dim, bounds, row-major doubles (+inf preserved)
void dump_field(const PotentialField& field, std::ostream& os);
PotentialField load_field(std::istream& is);
void write_field_csv(const PotentialField& field, std::ostream& os);

} // namespace potwalk
