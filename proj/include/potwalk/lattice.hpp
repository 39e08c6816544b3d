#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "potwalk/errors.hpp"

namespace potwalk {

using Coord = std::int32_t;
using Index = std::int64_t;

inline constexpr int kMaxDim = 8;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// A lattice point of Z^d for a fixed d in [2, kMaxDim]. Coordinates past
// dim() are kept at zero so whole-array comparisons are lexicographic.
class Site {
public:
    Site() = default;
    Site(std::initializer_list<Coord> coords);
    static Site zero(int dim);

    int dim() const { return dim_; }
    Coord operator[](int axis) const { return c_[static_cast<unsigned>(axis)]; }
    Coord& operator[](int axis) { return c_[static_cast<unsigned>(axis)]; }

    long l1_norm() const;
    Coord linf_norm() const;

    friend bool operator==(const Site& a, const Site& b) { return a.dim_ == b.dim_ && a.c_ == b.c_; }
    friend bool operator!=(const Site& a, const Site& b) { return !(a == b); }
    // dimension first, then lexicographic on coordinates
    friend bool operator<(const Site& a, const Site& b) {
        return a.dim_ != b.dim_ ? a.dim_ < b.dim_ : a.c_ < b.c_;
    }

    friend Site operator+(Site a, const Site& b);
    friend Site operator-(Site a, const Site& b);
    friend Site operator*(Coord k, Site a);
    Site negated() const;

    std::string str() const;

private:
    std::array<Coord, kMaxDim> c_{};
    int dim_ = 0;
};

enum class Adjacency { NN, Star };

// The 2d unit offsets (NN) or the 3^d - 1 sup-norm offsets (Star),
// in lexicographic order. Cached per dimension.
const std::vector<Site>& adjacency_offsets(int dim, Adjacency adj);

std::vector<Site> neighbors(const Site& x);
std::vector<Site> star_neighbors(const Site& x);
bool adjacent(const Site& a, const Site& b, Adjacency adj);

// Axis-aligned box [lo, hi], inclusive. Linear indices are row-major with
// the first axis slowest, so index order equals lexicographic site order.
class Window {
public:
    Window() = default;
    Window(const Site& lo, const Site& hi);
    static Window box(const Site& center, int radius);
    static Window hull(std::span<const Site> pts);

    int dim() const { return lo_.dim(); }
    const Site& lo() const { return lo_; }
    const Site& hi() const { return hi_; }
    int extent(int axis) const { return hi_[axis] - lo_[axis] + 1; }
    Index cell_count() const { return cells_; }

    bool contains(const Site& x) const;
    bool contains(const Window& other) const;
    bool on_edge(const Site& x) const;

    Index index_of(const Site& x) const;
    Site site_at(Index i) const;

    Window expanded(int margin) const;
    Window shrunk(int margin) const; // throws WindowTooSmall if it would invert

    friend bool operator==(const Window& a, const Window& b) { return a.lo_ == b.lo_ && a.hi_ == b.hi_; }

    std::string str() const;

private:
    Site lo_, hi_;
    std::array<Index, kMaxDim> stride_{};
    Index cells_ = 0;
};

// Membership bitmap over a window.
class SiteSet {
public:
    SiteSet() = default;
    explicit SiteSet(const Window& w) : win_(w), bits_(static_cast<std::size_t>(w.cell_count()), 0) {}

    const Window& window() const { return win_; }
    Index size() const { return count_; }
    bool empty() const { return count_ == 0; }

    bool contains(const Site& x) const { return win_.contains(x) && bits_[static_cast<std::size_t>(win_.index_of(x))]; }
    bool contains_index(Index i) const { return bits_[static_cast<std::size_t>(i)] != 0; }

    void insert(const Site& x);
    void insert_index(Index i);
    void erase_index(Index i);

    // smallest linear index (= lexicographically smallest member), -1 if empty
    Index first_index() const;
    std::vector<Site> members() const;

    template <class F>
    void for_each_index(F&& f) const {
        for (Index i = 0; i < static_cast<Index>(bits_.size()); ++i)
            if (bits_[static_cast<std::size_t>(i)]) f(i);
    }

private:
    Window win_;
    std::vector<std::uint8_t> bits_;
    Index count_ = 0;
};

// Ordered site sequence with a declared adjacency relation.
class LatticePath {
public:
    LatticePath() = default;
    LatticePath(std::vector<Site> sites, Adjacency adj) : sites_(std::move(sites)), adj_(adj) {}

    const std::vector<Site>& sites() const { return sites_; }
    Adjacency adjacency() const { return adj_; }
    // |gamma| = number of sites - 1
    long length() const { return static_cast<long>(sites_.size()) - 1; }
    const Site& front() const { return sites_.front(); }
    const Site& back() const { return sites_.back(); }

    bool valid() const;   // consecutive sites adjacent under the declared relation
    bool simple() const;  // no repeated site
    std::vector<Site> interior() const; // sites minus the two endpoints

private:
    std::vector<Site> sites_;
    Adjacency adj_ = Adjacency::NN;
};

enum class BoundaryKind { Outer, Inner, StarOuter, StarInner };

struct BoundaryResult {
    SiteSet set;
    bool clipped = false; // an outer boundary ran into the window edge
};

BoundaryResult boundary(const SiteSet& a, BoundaryKind kind);

// Maximal connected pieces of `a`, ordered by smallest lexicographic member.
std::vector<SiteSet> components(const SiteSet& a, Adjacency adj);

struct HoleResult {
    bool has_hole = false;
    std::vector<SiteSet> holes;
};

// Complement components inside `window` that do not touch the window edge.
// `a` must keep a one-cell margin from the edge.
HoleResult find_holes(const SiteSet& a, const Window& window);

// |inner_boundary(A)|^(d/(d-1)) / |A|
double isoperimetric_ratio(const SiteSet& a);

// max pairwise distances over members; -1 for the empty set
Coord linf_diameter(const SiteSet& a);
long l1_diameter(const SiteSet& a);

// CSV of member coordinates (one site per row).
void write_siteset_csv(const SiteSet& a, std::ostream& os);

// Run-length encoding of the membership bitmap in index order:
// [window lo, window hi, runs...] with alternating absent/present run
// lengths, starting with an absent run.
std::vector<Index> siteset_rle(const SiteSet& a);
SiteSet siteset_from_rle(const Window& w, std::span<const Index> runs);

} // namespace potwalk
