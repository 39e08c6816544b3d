#include "potwalk/disorder.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>

namespace potwalk {

// ------------------------------------------------------- DistributionSpec

void DistributionSpec::validate() const {
    double total = p_inf;
    if (p_inf < 0 || p_inf >= 1) throw InvalidSpec("p_inf must lie in [0,1)");
    for (const Atom& a : atoms) {
        if (a.prob < 0) throw InvalidSpec("negative atom probability");
        if (!(a.value >= 0)) throw InvalidSpec("atom value must be >= 0");
        total += a.prob;
    }
    for (const Part& p : parts) {
        if (p.weight < 0) throw InvalidSpec("negative part weight");
        switch (p.kind) {
        case PartKind::Uniform:
            if (!(0 <= p.a && p.a <= p.b)) throw InvalidSpec("uniform part needs 0 <= a <= b");
            break;
        case PartKind::Exponential:
            if (!(p.rate > 0)) throw InvalidSpec("exponential part needs rate > 0");
            break;
        case PartKind::Constant:
            if (!(p.value >= 0)) throw InvalidSpec("constant part value must be >= 0");
            break;
        }
        total += p.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidSpec("probabilities sum to " + std::to_string(total) + ", expected 1");
}

DistributionSpec DistributionSpec::constant(double c) {
    DistributionSpec s;
    s.atoms.push_back({c, 1.0});
    return s;
}

DistributionSpec DistributionSpec::from_json(const nlohmann::json& j) {
    DistributionSpec s;
    if (j.contains("atoms"))
        for (const auto& a : j.at("atoms"))
            s.atoms.push_back({a.at("value").get<double>(), a.at("prob").get<double>()});
    if (j.contains("parts"))
        for (const auto& p : j.at("parts")) {
            Part part;
            const std::string kind = p.at("type").get<std::string>();
            part.weight = p.at("weight").get<double>();
            if (kind == "uniform") {
                part.kind = PartKind::Uniform;
                part.a = p.at("a").get<double>();
                part.b = p.at("b").get<double>();
            } else if (kind == "exponential") {
                part.kind = PartKind::Exponential;
                part.rate = p.at("rate").get<double>();
            } else if (kind == "constant") {
                part.kind = PartKind::Constant;
                part.value = p.at("value").get<double>();
            } else {
                throw InvalidSpec("unknown distribution part type '" + kind + "'");
            }
            s.parts.push_back(part);
        }
    s.p_inf = j.value("p_inf", 0.0);
    s.validate();
    return s;
}

nlohmann::json DistributionSpec::to_json() const {
    nlohmann::json j;
    j["atoms"] = nlohmann::json::array();
    for (const Atom& a : atoms) j["atoms"].push_back({{"value", a.value}, {"prob", a.prob}});
    j["parts"] = nlohmann::json::array();
    for (const Part& p : parts) {
        nlohmann::json pj;
        pj["weight"] = p.weight;
        switch (p.kind) {
        case PartKind::Uniform:
            pj["type"] = "uniform";
            pj["a"] = p.a;
            pj["b"] = p.b;
            break;
        case PartKind::Exponential:
            pj["type"] = "exponential";
            pj["rate"] = p.rate;
            break;
        case PartKind::Constant:
            pj["type"] = "constant";
            pj["value"] = p.value;
            break;
        }
        j["parts"].push_back(pj);
    }
    j["p_inf"] = p_inf;
    return j;
}

double DistributionSpec::finite_part_mean() const {
    double m = 0;
    for (const Atom& a : atoms) m += a.prob * a.value;
    for (const Part& p : parts) {
        switch (p.kind) {
        case PartKind::Uniform: m += p.weight * 0.5 * (p.a + p.b); break;
        case PartKind::Exponential: m += p.weight / p.rate; break;
        case PartKind::Constant: m += p.weight * p.value; break;
        }
    }
    return m;
}

double DistributionSpec::mean_exp_neg() const {
    double m = 0;
    for (const Atom& a : atoms) m += a.prob * std::exp(-a.value);
    for (const Part& p : parts) {
        switch (p.kind) {
        case PartKind::Uniform:
            m += p.weight * (p.b > p.a ? (std::exp(-p.a) - std::exp(-p.b)) / (p.b - p.a) : std::exp(-p.a));
            break;
        case PartKind::Exponential:
            m += p.weight * p.rate / (p.rate + 1.0);
            break;
        case PartKind::Constant:
            m += p.weight * std::exp(-p.value);
            break;
        }
    }
    return m;
}

double DistributionSpec::prob_le(double m) const {
    double pr = 0;
    for (const Atom& a : atoms)
        if (a.value <= m) pr += a.prob;
    for (const Part& p : parts) {
        switch (p.kind) {
        case PartKind::Uniform:
            if (m >= p.b) pr += p.weight;
            else if (m > p.a) pr += p.weight * (m - p.a) / (p.b - p.a);
            break;
        case PartKind::Exponential:
            if (m >= 0) pr += p.weight * (1.0 - std::exp(-p.rate * m));
            break;
        case PartKind::Constant:
            if (p.value <= m) pr += p.weight;
            break;
        }
    }
    return pr;
}

double DistributionSpec::sample(CounterRng& rng) const {
    double u = rng.next_u01();
    for (const Atom& a : atoms) {
        if (u < a.prob) return a.value;
        u -= a.prob;
    }
    for (const Part& p : parts) {
        if (u < p.weight) {
            double v = rng.next_u01();
            switch (p.kind) {
            case PartKind::Uniform: return p.a + (p.b - p.a) * v;
            case PartKind::Exponential: return -std::log(v) / p.rate;
            case PartKind::Constant: return p.value;
            }
        }
        u -= p.weight;
    }
    return kInf;
}

// ---------------------------------------------------------- PotentialField

PotentialField::PotentialField(Window w, std::vector<double> values, std::uint64_t seed, std::uint32_t replica)
    : win_(w),
      vals_(std::make_shared<const std::vector<double>>(std::move(values))),
      seed_(seed),
      replica_(replica) {
    if (static_cast<Index>(vals_->size()) != win_.cell_count())
        throw ValidationError("value count does not match window");
}

PotentialField PotentialField::with_lambda(double lambda) const {
    if (lambda < 0) throw ValidationError("lambda shift must be >= 0");
    PotentialField f = *this;
    f.lambda_ = lambda;
    return f;
}

namespace {

std::uint64_t site_key(std::uint64_t seed, std::uint32_t replica, const Site& s) {
    std::uint64_t h = splitmix64(seed ^ 0x5bf03635d3ba5a6fULL);
    h = splitmix64(h ^ (static_cast<std::uint64_t>(replica) + 0x9e3779b97f4a7c15ULL));
    for (int k = 0; k < s.dim(); ++k) {
        auto c = static_cast<std::uint64_t>(static_cast<std::int64_t>(s[k]));
        h = splitmix64(h ^ c ^ (0xa0761d6478bd642fULL + static_cast<std::uint64_t>(k) * 0xe7037ed1a0b428dbULL));
    }
    return h;
}

} // namespace

PotentialField sample_field(const DistributionSpec& spec, const Window& window,
                            std::uint64_t seed, std::uint32_t replica) {
    spec.validate();
    std::vector<double> vals(static_cast<std::size_t>(window.cell_count()));
    for (Index i = 0; i < window.cell_count(); ++i) {
        CounterRng rng(site_key(seed, replica, window.site_at(i)));
        vals[static_cast<std::size_t>(i)] = spec.sample(rng);
    }
    return PotentialField(window, std::move(vals), seed, replica);
}

// ------------------------------------------------------------------ fields

double z_at(const PotentialField& field, const Site& x) {
    const Window& w = field.window();
    double z = kInf;
    for (const Site& y : neighbors(x)) {
        if (!w.contains(y)) throw MarginViolation("Z undefined at edge site " + x.str());
        z = std::min(z, field.at(y));
    }
    return z;
}

std::vector<double> z_field(const PotentialField& field) {
    const Window& w = field.window();
    std::vector<double> out(static_cast<std::size_t>(w.cell_count()), std::numeric_limits<double>::quiet_NaN());
    for (Index i = 0; i < w.cell_count(); ++i) {
        Site x = w.site_at(i);
        if (w.on_edge(x)) continue;
        out[static_cast<std::size_t>(i)] = z_at(field, x);
    }
    return out;
}

Site min_neighbor(const PotentialField& field, const Site& x) {
    const Window& w = field.window();
    Site best;
    double bv = kInf;
    bool found = false;
    for (const Site& y : neighbors(x)) {
        if (!w.contains(y)) throw MarginViolation("min neighbor undefined at edge site " + x.str());
        double v = field.at(y);
        if (!found || v < bv) {
            best = y;
            bv = v;
            found = true;
        }
    }
    return best;
}

Masks masks(const PotentialField& field, double M) {
    if (M < 0) throw ValidationError("healthy threshold must be >= 0");
    const Window& w = field.window();
    Masks m{{SiteSet(w), kInf}, {SiteSet(w), M}};
    for (Index i = 0; i < w.cell_count(); ++i) {
        double v = field.at_index(i);
        if (v < kInf) m.livable.sites.insert_index(i);
        if (v <= M) m.healthy.sites.insert_index(i);
    }
    return m;
}

std::optional<Clearing> find_clearing(const PotentialField& field, const Site& start,
                                      double eps, int radius, bool healthy_only, double M) {
    if (eps < 0 || radius < 0) throw ValidationError("clearing search needs eps >= 0 and radius >= 0");
    const Window& w = field.window();
    if (!w.contains(start)) throw ValidationError("clearing search start outside window");

    auto traversable = [&](Index i) {
        double v = field.at_index(i);
        return healthy_only ? v <= M : v < kInf;
    };
    auto is_clearing = [&](const Site& x) {
        Window box = Window::box(x, radius);
        if (!w.contains(box)) return false;
        for (Index i = 0; i < box.cell_count(); ++i)
            if (field.at(box.site_at(i)) > eps) return false;
        return true;
    };

    Index start_idx = w.index_of(start);
    if (!traversable(start_idx)) return std::nullopt;

    std::vector<Index> frontier{start_idx};
    std::vector<Index> parent(static_cast<std::size_t>(w.cell_count()), -1);
    std::vector<std::int8_t> seen(static_cast<std::size_t>(w.cell_count()), 0);
    seen[static_cast<std::size_t>(start_idx)] = 1;

    auto backtrack = [&](Index i) {
        std::vector<Site> sites;
        for (Index j = i; j != -1; j = parent[static_cast<std::size_t>(j)]) sites.push_back(w.site_at(j));
        std::reverse(sites.begin(), sites.end());
        return LatticePath(std::move(sites), Adjacency::NN);
    };

    while (!frontier.empty()) {
        std::sort(frontier.begin(), frontier.end()); // lexicographic scan within a level
        for (Index i : frontier) {
            Site x = w.site_at(i);
            if (is_clearing(x)) return Clearing{x, backtrack(i)};
        }
        std::vector<Index> next;
        for (Index i : frontier) {
            Site x = w.site_at(i);
            for (const Site& y : neighbors(x)) {
                if (!w.contains(y)) continue;
                Index iy = w.index_of(y);
                if (seen[static_cast<std::size_t>(iy)] || !traversable(iy)) continue;
                seen[static_cast<std::size_t>(iy)] = 1;
                parent[static_cast<std::size_t>(iy)] = i;
                next.push_back(iy);
            }
        }
        frontier = std::move(next);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------- io

namespace {
constexpr std::uint64_t kFieldMagic = 0x504f54574b464c44ULL; // "POTWKFLD"
}

void dump_field(const PotentialField& field, std::ostream& os) {
    auto put_u64 = [&](std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
    put_u64(kFieldMagic);
    put_u64(static_cast<std::uint64_t>(field.dim()));
    for (int k = 0; k < field.dim(); ++k) {
        put_u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(field.window().lo()[k])));
        put_u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(field.window().hi()[k])));
    }
    put_u64(field.seed());
    put_u64(field.replica());
    for (Index i = 0; i < field.window().cell_count(); ++i) {
        double v = field.base_at_index(i);
        os.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

PotentialField load_field(std::istream& is) {
    auto get_u64 = [&]() {
        std::uint64_t v = 0;
        is.read(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    };
    if (get_u64() != kFieldMagic) throw ValidationError("bad field file magic");
    int dim = static_cast<int>(get_u64());
    if (dim < 2 || dim > kMaxDim) throw ValidationError("bad field file dimension");
    Site lo = Site::zero(dim), hi = Site::zero(dim);
    for (int k = 0; k < dim; ++k) {
        lo[k] = static_cast<Coord>(static_cast<std::int64_t>(get_u64()));
        hi[k] = static_cast<Coord>(static_cast<std::int64_t>(get_u64()));
    }
    std::uint64_t seed = get_u64();
    auto replica = static_cast<std::uint32_t>(get_u64());
    Window w(lo, hi);
    std::vector<double> vals(static_cast<std::size_t>(w.cell_count()));
    is.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!is) throw ValidationError("truncated field file");
    return PotentialField(w, std::move(vals), seed, replica);
}

void write_field_csv(const PotentialField& field, std::ostream& os) {
    const Window& w = field.window();
    for (int k = 0; k < w.dim(); ++k) os << "x" << k << ",";
    os << "V\n";
    for (Index i = 0; i < w.cell_count(); ++i) {
        Site s = w.site_at(i);
        for (int k = 0; k < w.dim(); ++k) os << s[k] << ",";
        double v = field.base_at_index(i);
        if (v == kInf) os << "inf\n";
        else os << v << "\n";
    }
}

} // namespace potwalk
