#include "potwalk/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>

namespace potwalk {

// ---------------------------------------------------------------- Site

Site::Site(std::initializer_list<Coord> coords) {
    if (coords.size() > static_cast<std::size_t>(kMaxDim))
        throw ValidationError("site dimension exceeds kMaxDim");
    dim_ = static_cast<int>(coords.size());
    int k = 0;
    for (Coord c : coords) c_[static_cast<unsigned>(k++)] = c;
}

Site Site::zero(int dim) {
    if (dim < 1 || dim > kMaxDim) throw ValidationError("dimension out of range");
    Site s;
    s.dim_ = dim;
    return s;
}

long Site::l1_norm() const {
    long s = 0;
    for (int k = 0; k < dim_; ++k) s += std::labs(static_cast<long>(c_[static_cast<unsigned>(k)]));
    return s;
}

Coord Site::linf_norm() const {
    Coord m = 0;
    for (int k = 0; k < dim_; ++k) m = std::max(m, std::abs(c_[static_cast<unsigned>(k)]));
    return m;
}

Site operator+(Site a, const Site& b) {
    for (int k = 0; k < a.dim_; ++k) a.c_[static_cast<unsigned>(k)] += b.c_[static_cast<unsigned>(k)];
    return a;
}

Site operator-(Site a, const Site& b) {
    for (int k = 0; k < a.dim_; ++k) a.c_[static_cast<unsigned>(k)] -= b.c_[static_cast<unsigned>(k)];
    return a;
}

Site operator*(Coord k, Site a) {
    for (int i = 0; i < a.dim_; ++i) a.c_[static_cast<unsigned>(i)] *= k;
    return a;
}

Site Site::negated() const {
    Site s = *this;
    for (int k = 0; k < dim_; ++k) s.c_[static_cast<unsigned>(k)] = -s.c_[static_cast<unsigned>(k)];
    return s;
}

std::string Site::str() const {
    std::ostringstream os;
    os << '(';
    for (int k = 0; k < dim_; ++k) os << (k ? "," : "") << c_[static_cast<unsigned>(k)];
    os << ')';
    return os.str();
}

// ---------------------------------------------------------------- adjacency

namespace {

std::vector<Site> make_offsets(int dim, Adjacency adj) {
    std::vector<Site> out;
    if (adj == Adjacency::NN) {
        for (int k = 0; k < dim; ++k)
            for (Coord s : {-1, +1}) {
                Site o = Site::zero(dim);
                o[k] = s;
                out.push_back(o);
            }
    } else {
        Site o = Site::zero(dim);
        for (int k = 0; k < dim; ++k) o[k] = -1;
        while (true) {
            if (o.linf_norm() != 0) out.push_back(o);
            int k = dim - 1;
            while (k >= 0 && o[k] == 1) o[k--] = -1;
            if (k < 0) break;
            ++o[k];
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

const std::vector<Site>& adjacency_offsets(int dim, Adjacency adj) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::vector<Site>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(dim, adj == Adjacency::NN ? 0 : 1);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, make_offsets(dim, adj)).first;
    return it->second;
}

std::vector<Site> neighbors(const Site& x) {
    std::vector<Site> out;
    for (const Site& o : adjacency_offsets(x.dim(), Adjacency::NN)) out.push_back(x + o);
    return out;
}

std::vector<Site> star_neighbors(const Site& x) {
    std::vector<Site> out;
    for (const Site& o : adjacency_offsets(x.dim(), Adjacency::Star)) out.push_back(x + o);
    return out;
}

bool adjacent(const Site& a, const Site& b, Adjacency adj) {
    Site d = b - a;
    if (adj == Adjacency::NN) return d.l1_norm() == 1;
    return d.linf_norm() == 1;
}

// ---------------------------------------------------------------- Window

Window::Window(const Site& lo, const Site& hi) : lo_(lo), hi_(hi) {
    if (lo.dim() != hi.dim() || lo.dim() < 1) throw ValidationError("window bounds dimension mismatch");
    for (int k = 0; k < dim(); ++k)
        if (lo[k] > hi[k]) throw ValidationError("window has lo > hi on axis " + std::to_string(k));
    cells_ = 1;
    for (int k = dim() - 1; k >= 0; --k) {
        stride_[static_cast<unsigned>(k)] = cells_;
        Index e = extent(k);
        if (cells_ > (std::numeric_limits<Index>::max() / 4) / e)
            throw ValidationError("window cell count overflows addressable range");
        cells_ *= e;
    }
}

Window Window::box(const Site& center, int radius) {
    if (radius < 0) throw ValidationError("negative box radius");
    Site lo = center, hi = center;
    for (int k = 0; k < center.dim(); ++k) {
        lo[k] -= radius;
        hi[k] += radius;
    }
    return Window(lo, hi);
}

Window Window::hull(std::span<const Site> pts) {
    if (pts.empty()) throw ValidationError("hull of empty point list");
    Site lo = pts[0], hi = pts[0];
    for (const Site& p : pts)
        for (int k = 0; k < p.dim(); ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    return Window(lo, hi);
}

bool Window::contains(const Site& x) const {
    if (x.dim() != dim()) return false;
    for (int k = 0; k < dim(); ++k)
        if (x[k] < lo_[k] || x[k] > hi_[k]) return false;
    return true;
}

bool Window::contains(const Window& other) const {
    return contains(other.lo()) && contains(other.hi());
}

bool Window::on_edge(const Site& x) const {
    for (int k = 0; k < dim(); ++k)
        if (x[k] == lo_[k] || x[k] == hi_[k]) return true;
    return false;
}

Index Window::index_of(const Site& x) const {
    Index i = 0;
    for (int k = 0; k < dim(); ++k) i += stride_[static_cast<unsigned>(k)] * (x[k] - lo_[k]);
    return i;
}

Site Window::site_at(Index i) const {
    Site s = lo_;
    for (int k = 0; k < dim(); ++k) {
        Index q = i / stride_[static_cast<unsigned>(k)];
        s[k] = lo_[k] + static_cast<Coord>(q);
        i -= q * stride_[static_cast<unsigned>(k)];
    }
    return s;
}

Window Window::expanded(int margin) const {
    Site lo = lo_, hi = hi_;
    for (int k = 0; k < dim(); ++k) {
        lo[k] -= margin;
        hi[k] += margin;
    }
    return Window(lo, hi);
}

Window Window::shrunk(int margin) const {
    Site lo = lo_, hi = hi_;
    for (int k = 0; k < dim(); ++k) {
        lo[k] += margin;
        hi[k] -= margin;
        if (lo[k] > hi[k]) throw WindowTooSmall("window too small to shrink by " + std::to_string(margin));
    }
    return Window(lo, hi);
}

std::string Window::str() const {
    return lo_.str() + ".." + hi_.str();
}

// ---------------------------------------------------------------- SiteSet

void SiteSet::insert(const Site& x) {
    if (!win_.contains(x)) throw ValidationError("site " + x.str() + " outside window " + win_.str());
    insert_index(win_.index_of(x));
}

void SiteSet::insert_index(Index i) {
    auto& b = bits_[static_cast<std::size_t>(i)];
    if (!b) {
        b = 1;
        ++count_;
    }
}

void SiteSet::erase_index(Index i) {
    auto& b = bits_[static_cast<std::size_t>(i)];
    if (b) {
        b = 0;
        --count_;
    }
}

Index SiteSet::first_index() const {
    for (Index i = 0; i < static_cast<Index>(bits_.size()); ++i)
        if (bits_[static_cast<std::size_t>(i)]) return i;
    return -1;
}

std::vector<Site> SiteSet::members() const {
    std::vector<Site> out;
    out.reserve(static_cast<std::size_t>(count_));
    for_each_index([&](Index i) { out.push_back(win_.site_at(i)); });
    return out;
}

// ---------------------------------------------------------------- LatticePath

bool LatticePath::valid() const {
    for (std::size_t k = 1; k < sites_.size(); ++k)
        if (!adjacent(sites_[k - 1], sites_[k], adj_)) return false;
    return true;
}

bool LatticePath::simple() const {
    std::vector<Site> s = sites_;
    std::sort(s.begin(), s.end());
    return std::adjacent_find(s.begin(), s.end()) == s.end();
}

std::vector<Site> LatticePath::interior() const {
    if (sites_.size() <= 2) return {};
    return std::vector<Site>(sites_.begin() + 1, sites_.end() - 1);
}

// ---------------------------------------------------------------- boundaries

BoundaryResult boundary(const SiteSet& a, BoundaryKind kind) {
    const Window& w = a.window();
    const bool star = (kind == BoundaryKind::StarOuter || kind == BoundaryKind::StarInner);
    const bool outer = (kind == BoundaryKind::Outer || kind == BoundaryKind::StarOuter);
    const auto& offs = adjacency_offsets(w.dim(), star ? Adjacency::Star : Adjacency::NN);

    BoundaryResult res;
    res.set = SiteSet(w);
    a.for_each_index([&](Index i) {
        Site x = w.site_at(i);
        for (const Site& o : offs) {
            Site y = x + o;
            if (!w.contains(y)) {
                // y is outside the window hence outside A
                if (!outer) res.set.insert_index(i);
                else res.clipped = true; // true outer boundary extends past the window
                continue;
            }
            if (a.contains(y)) continue;
            if (outer) res.set.insert(y);
            else res.set.insert_index(i);
        }
    });
    return res;
}

std::vector<SiteSet> components(const SiteSet& a, Adjacency adj) {
    const Window& w = a.window();
    const auto& offs = adjacency_offsets(w.dim(), adj);
    std::vector<Index> stack;
    std::vector<std::int8_t> seen(static_cast<std::size_t>(w.cell_count()), 0);
    std::vector<SiteSet> out;

    a.for_each_index([&](Index i) {
        if (seen[static_cast<std::size_t>(i)]) return;
        SiteSet comp(w);
        stack.push_back(i);
        seen[static_cast<std::size_t>(i)] = 1;
        while (!stack.empty()) {
            Index j = stack.back();
            stack.pop_back();
            comp.insert_index(j);
            Site x = w.site_at(j);
            for (const Site& o : offs) {
                Site y = x + o;
                if (!w.contains(y)) continue;
                Index iy = w.index_of(y);
                if (!seen[static_cast<std::size_t>(iy)] && a.contains_index(iy)) {
                    seen[static_cast<std::size_t>(iy)] = 1;
                    stack.push_back(iy);
                }
            }
        }
        out.push_back(std::move(comp));
    });
    // first_index of each component is its discovery index, already ascending
    return out;
}

HoleResult find_holes(const SiteSet& a, const Window& window) {
    const auto& offs = adjacency_offsets(window.dim(), Adjacency::NN);
    SiteSet in_window(window);
    a.for_each_index([&](Index i) {
        Site x = a.window().site_at(i);
        if (!window.contains(x)) throw MarginViolation("set member " + x.str() + " outside probe window");
        if (window.on_edge(x)) throw MarginViolation("set touches the window edge at " + x.str());
        in_window.insert(x);
    });

    // flood the complement; components not reaching the edge are holes
    std::vector<std::int8_t> seen(static_cast<std::size_t>(window.cell_count()), 0);
    HoleResult res;
    for (Index start = 0; start < window.cell_count(); ++start) {
        if (seen[static_cast<std::size_t>(start)] || in_window.contains_index(start)) continue;
        SiteSet comp(window);
        bool touches_edge = false;
        std::vector<Index> stack{start};
        seen[static_cast<std::size_t>(start)] = 1;
        while (!stack.empty()) {
            Index j = stack.back();
            stack.pop_back();
            comp.insert_index(j);
            Site x = window.site_at(j);
            if (window.on_edge(x)) touches_edge = true;
            for (const Site& o : offs) {
                Site y = x + o;
                if (!window.contains(y)) continue;
                Index iy = window.index_of(y);
                if (!seen[static_cast<std::size_t>(iy)] && !in_window.contains_index(iy)) {
                    seen[static_cast<std::size_t>(iy)] = 1;
                    stack.push_back(iy);
                }
            }
        }
        if (!touches_edge) {
            res.has_hole = true;
            res.holes.push_back(std::move(comp));
        }
    }
    return res;
}

double isoperimetric_ratio(const SiteSet& a) {
    if (a.empty()) throw EmptySet("isoperimetric ratio of empty set");
    const double d = a.window().dim();
    const double b = static_cast<double>(boundary(a, BoundaryKind::Inner).set.size());
    return std::pow(b, d / (d - 1.0)) / static_cast<double>(a.size());
}

Coord linf_diameter(const SiteSet& a) {
    if (a.empty()) return -1;
    Window h = Window::hull(a.members());
    Coord m = 0;
    for (int k = 0; k < h.dim(); ++k) m = std::max(m, static_cast<Coord>(h.extent(k) - 1));
    return m;
}

long l1_diameter(const SiteSet& a) {
    if (a.empty()) return -1;
    const int d = a.window().dim();
    // max over sign patterns of the spread of the signed coordinate sum
    long best = 0;
    for (int mask = 0; mask < (1 << (d - 1)); ++mask) {
        long lo = std::numeric_limits<long>::max(), hi = std::numeric_limits<long>::min();
        a.for_each_index([&](Index i) {
            Site s = a.window().site_at(i);
            long v = s[d - 1];
            for (int k = 0; k < d - 1; ++k) v += ((mask >> k) & 1) ? -s[k] : s[k];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        });
        best = std::max(best, hi - lo);
    }
    return best;
}

void write_siteset_csv(const SiteSet& a, std::ostream& os) {
    const Window& w = a.window();
    for (int k = 0; k < w.dim(); ++k) os << (k ? "," : "") << "x" << k;
    os << "\n";
    a.for_each_index([&](Index i) {
        Site s = w.site_at(i);
        for (int k = 0; k < w.dim(); ++k) os << (k ? "," : "") << s[k];
        os << "\n";
    });
}

std::vector<Index> siteset_rle(const SiteSet& a) {
    std::vector<Index> runs;
    Index pos = 0;
    bool present = false;
    for (Index i = 0; i < a.window().cell_count(); ++i) {
        if (a.contains_index(i) != present) {
            runs.push_back(i - pos);
            pos = i;
            present = !present;
        }
    }
    runs.push_back(a.window().cell_count() - pos);
    return runs;
}

SiteSet siteset_from_rle(const Window& w, std::span<const Index> runs) {
    SiteSet out(w);
    Index pos = 0;
    bool present = false;
    for (Index run : runs) {
        if (run < 0 || pos + run > w.cell_count()) throw ValidationError("run-length data overflows the window");
        if (present)
            for (Index i = pos; i < pos + run; ++i) out.insert_index(i);
        pos += run;
        present = !present;
    }
    if (pos != w.cell_count()) throw ValidationError("run-length data does not cover the window");
    return out;
}

} // namespace potwalk
