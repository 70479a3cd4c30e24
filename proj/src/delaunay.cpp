#include "airfuse/delaunay.hpp"

#include "airfuse/predicates.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_map>

namespace airfuse::delaunay {

namespace pr = predicates;

std::array<Point3, 3> Tetrahedralization::face(std::uint32_t t, int i) const {
    const auto& v = tets[t];
    const auto& f = kFaceVertices[i];
    return {vertices[v[f[0]]], vertices[v[f[1]]], vertices[v[f[2]]]};
}

double Tetrahedralization::face_area(std::uint32_t t, int i) const {
    const auto f = face(t, i);
    return 0.5 * (f[1] - f[0]).cross(f[2] - f[0]).norm();
}

Point3 Tetrahedralization::centroid(std::uint32_t t) const {
    const auto& v = tets[t];
    return 0.25 * (vertices[v[0]] + vertices[v[1]] + vertices[v[2]] + vertices[v[3]]);
}

void Tetrahedralization::build_incidence() {
    incident_offset_.assign(vertices.size() + 1, 0);
    for (const auto& t : tets)
        for (std::uint32_t v : t)
            ++incident_offset_[v + 1];
    std::partial_sum(incident_offset_.begin(), incident_offset_.end(), incident_offset_.begin());
    incident_.resize(incident_offset_.back());
    std::vector<std::uint32_t> fill(incident_offset_.begin(), incident_offset_.end() - 1);
    for (std::uint32_t t = 0; t < tets.size(); ++t)
        for (std::uint32_t v : tets[t])
            incident_[fill[v]++] = t;
}

namespace {

constexpr std::uint32_t kNoCell = INFINITE;
constexpr std::uint32_t kInfVertex = INFINITE;

struct PointKey {
    double x, y, z;
    bool operator==(const PointKey&) const = default;
};

struct PointKeyHash {
    std::size_t operator()(const PointKey& k) const {
        std::uint64_t h = 1469598103934665603ull;
        for (double d : {k.x, k.y, k.z}) {
            h ^= std::bit_cast<std::uint64_t>(d);
            h *= 1099511628211ull;
            h ^= h >> 29;
        }
        return static_cast<std::size_t>(h);
    }
};

std::uint64_t spread_bits(std::uint64_t x) {
    x &= 0x1fffff;
    x = (x | x << 32) & 0x1f00000000ffffull;
    x = (x | x << 16) & 0x1f0000ff0000ffull;
    x = (x | x << 8) & 0x100f00f00f00f00full;
    x = (x | x << 4) & 0x10c30c30c30c30c3ull;
    x = (x | x << 2) & 0x1249249249249249ull;
    return x;
}

std::vector<std::uint32_t> morton_order(const std::vector<Point3>& pts) {
    Vec3 lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double extent = std::max((hi - lo).maxCoeff(), 1e-300);
    const double scale = static_cast<double>((1u << 21) - 1) / extent;
    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(pts.size());
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
        const Vec3 q = (pts[i] - lo) * scale;
        keyed[i] = {spread_bits(static_cast<std::uint64_t>(q.x())) |
                        spread_bits(static_cast<std::uint64_t>(q.y())) << 1 |
                        spread_bits(static_cast<std::uint64_t>(q.z())) << 2,
                    i};
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::uint32_t> order(pts.size());
    for (std::size_t i = 0; i < keyed.size(); ++i)
        order[i] = keyed[i].second;
    return order;
}

struct Cell {
    std::array<std::uint32_t, 4> v;
    std::array<std::uint32_t, 4> n;
};

/// Bowyer-Watson insertion with an explicit infinite vertex.
class Builder {
public:
    Builder(const std::vector<Point3>& pts, std::uint64_t seed)
        : pts_(pts), rng_(static_cast<std::uint_fast32_t>(seed % 2147483646u + 1)) {}

    void init(std::array<std::uint32_t, 4> tet) {
        cells_.push_back({tet, {kNoCell, kNoCell, kNoCell, kNoCell}});
        std::vector<Link> links;
        for (int k = 0; k < 4; ++k) {
            const auto& f = kFaceVertices[k];
            const auto id = static_cast<std::uint32_t>(cells_.size());
            cells_.push_back({{tet[f[0]], tet[f[1]], tet[f[2]], kInfVertex}, {kNoCell, kNoCell, kNoCell, 0}});
            cells_[0].n[k] = id;
            for (int j = 0; j < 3; ++j)
                links.push_back(make_link(id, 3, j));
        }
        connect(links);
        alive_.assign(cells_.size(), 1);
        mark_.assign(cells_.size(), 0);
        hint_ = 0;
    }

    void insert(std::uint32_t vid) {
        const Point3& p = pts_[vid];
        const std::uint32_t start = locate(p);

        ++stamp_;
        const std::uint32_t in_conflict = 2 * stamp_, not_in_conflict = 2 * stamp_ + 1;
        conflict_.clear();
        boundary_.clear();
        conflict_.push_back(start);
        mark_[start] = in_conflict;
        for (std::size_t q = 0; q < conflict_.size(); ++q) {
            const std::uint32_t c = conflict_[q];
            for (int i = 0; i < 4; ++i) {
                const std::uint32_t nb = cells_[c].n[i];
                if (mark_[nb] == in_conflict)
                    continue;
                if (mark_[nb] != not_in_conflict) {
                    if (conflicts(nb, p)) {
                        mark_[nb] = in_conflict;
                        conflict_.push_back(nb);
                        continue;
                    }
                    mark_[nb] = not_in_conflict;
                }
                boundary_.push_back({c, i});
            }
        }

        links_.clear();
        for (const auto& [c, i] : boundary_) {
            Cell cell = cells_[c];
            const std::uint32_t nb = cell.n[i];
            cell.v[i] = vid;
            const std::uint32_t id = allocate(cell);
            auto& back = cells_[nb].n;
            *std::find(back.begin(), back.end(), c) = id;
            for (int j = 0; j < 4; ++j)
                if (j != i)
                    links_.push_back(make_link(id, i, j));
        }
        connect(links_);
        for (std::uint32_t c : conflict_) {
            alive_[c] = 0;
            free_.push_back(c);
        }
        hint_ = links_.front().cell;
    }

    /// Finite cells, renumbered, with neighbors across hull faces set to INFINITE.
    void extract(Tetrahedralization& dt) const {
        std::vector<std::uint32_t> index(cells_.size(), kNoCell);
        std::uint32_t count = 0;
        for (std::uint32_t c = 0; c < cells_.size(); ++c)
            if (alive_[c] && infinite_slot(c) < 0)
                index[c] = count++;
        dt.tets.resize(count);
        dt.neighbors.resize(count);
        for (std::uint32_t c = 0; c < cells_.size(); ++c) {
            if (index[c] == kNoCell)
                continue;
            dt.tets[index[c]] = cells_[c].v;
            for (int i = 0; i < 4; ++i)
                dt.neighbors[index[c]][i] = index[cells_[c].n[i]];
        }
    }

private:
    struct Facet {
        std::uint32_t cell;
        int slot;
    };

    struct Link {
        std::uint64_t key;
        std::uint32_t cell;
        int slot;
    };

    // Face `slot` of `cell` contains the apex vertex at `apex`; the two other
    // vertices identify the face among cells sharing that apex.
    Link make_link(std::uint32_t cell, int apex, int slot) const {
        std::uint32_t ab[2];
        int m = 0;
        for (int k = 0; k < 4; ++k)
            if (k != apex && k != slot)
                ab[m++] = cells_[cell].v[k];
        std::uint32_t a = ab[0], b = ab[1];
        if (a > b)
            std::swap(a, b);
        return {(static_cast<std::uint64_t>(a) << 32) | b, cell, slot};
    }

    void connect(std::vector<Link>& links) {
        std::sort(links.begin(), links.end(), [](const Link& x, const Link& y) {
            return x.key != y.key ? x.key < y.key : x.cell < y.cell;
        });
        for (std::size_t i = 0; i + 1 < links.size(); i += 2) {
            if (links[i].key != links[i + 1].key)
                throw Error("delaunay: inconsistent cavity boundary");
            cells_[links[i].cell].n[links[i].slot] = links[i + 1].cell;
            cells_[links[i + 1].cell].n[links[i + 1].slot] = links[i].cell;
        }
    }

    std::uint32_t allocate(const Cell& cell) {
        if (!free_.empty()) {
            const std::uint32_t id = free_.back();
            free_.pop_back();
            cells_[id] = cell;
            alive_[id] = 1;
            return id;
        }
        cells_.push_back(cell);
        alive_.push_back(1);
        mark_.push_back(0);
        return static_cast<std::uint32_t>(cells_.size() - 1);
    }

    int infinite_slot(std::uint32_t c) const {
        for (int k = 0; k < 4; ++k)
            if (cells_[c].v[k] == kInfVertex)
                return k;
        return -1;
    }

    const Point3& at(std::uint32_t v, const Point3& p) const { return v == kInfVertex ? p : pts_[v]; }

    // orient() of cell c with vertex slot k replaced by p (the infinite
    // vertex is also replaced by p, which is only used when k is its slot).
    int orient_replaced(std::uint32_t c, int k, const Point3& p) const {
        const auto& v = cells_[c].v;
        const Point3* q[4];
        for (int i = 0; i < 4; ++i)
            q[i] = i == k ? &p : &at(v[i], p);
        return pr::orient(*q[0], *q[1], *q[2], *q[3]);
    }

    bool conflicts(std::uint32_t c, const Point3& p) const {
        const auto& v = cells_[c].v;
        const int k = infinite_slot(c);
        if (k < 0)
            return pr::insphere_perturbed(pts_[v[0]], pts_[v[1]], pts_[v[2]], pts_[v[3]], p) > 0;
        const int o = orient_replaced(c, k, p);
        if (o != 0)
            return o > 0;
        const Point3* f[3];
        int m = 0;
        for (int i = 0; i < 4; ++i)
            if (i != k)
                f[m++] = &pts_[v[i]];
        return pr::incircle_coplanar_perturbed(*f[0], *f[1], *f[2], p) > 0;
    }

    // Remembering stochastic walk; returns a finite cell containing p or an
    // infinite cell whose hull facet p sees strictly.
    std::uint32_t locate(const Point3& p) {
        std::uint32_t c = hint_;
        if (!alive_[c])
            c = first_alive();
        if (const int k = infinite_slot(c); k >= 0)
            c = cells_[c].n[k];
        std::uint32_t prev = kNoCell;
        while (true) {
            const int r = static_cast<int>(rng_() & 3u);
            bool moved = false;
            for (int s = 0; s < 4; ++s) {
                const int i = (r + s) & 3;
                const std::uint32_t nb = cells_[c].n[i];
                if (nb == prev)
                    continue;
                if (orient_replaced(c, i, p) < 0) {
                    prev = c;
                    c = nb;
                    moved = true;
                    break;
                }
            }
            if (!moved || infinite_slot(c) >= 0)
                return c;
        }
    }

    std::uint32_t first_alive() const {
        for (std::uint32_t c = 0; c < cells_.size(); ++c)
            if (alive_[c])
                return c;
        throw Error("delaunay: no live cells");
    }

    const std::vector<Point3>& pts_;
    std::vector<Cell> cells_;
    std::vector<std::uint8_t> alive_;
    std::vector<std::uint32_t> mark_;
    std::vector<std::uint32_t> free_;
    std::vector<std::uint32_t> conflict_;
    std::vector<Facet> boundary_;
    std::vector<Link> links_;
    std::uint32_t stamp_ = 0;
    std::uint32_t hint_ = 0;
    std::minstd_rand rng_;
};

}  // namespace

namespace {

// Puts every tet in a canonical form (smallest vertex first, then the
// smallest of the rest, using only even permutations) and sorts the tets, so
// numbering does not depend on insertion history.
void canonicalize(Tetrahedralization& dt) {
    auto permute = [](auto& a, int i, int j, int k, int l) { a = {a[i], a[j], a[k], a[l]}; };
    for (std::size_t t = 0; t < dt.tets.size(); ++t) {
        auto& v = dt.tets[t];
        auto& nb = dt.neighbors[t];
        const int lo = static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
        static constexpr int kToFront[4][4] = {{0, 1, 2, 3}, {1, 0, 3, 2}, {2, 3, 0, 1}, {3, 2, 1, 0}};
        const auto& p = kToFront[lo];
        permute(v, p[0], p[1], p[2], p[3]);
        permute(nb, p[0], p[1], p[2], p[3]);
        const int next = static_cast<int>(std::min_element(v.begin() + 1, v.end()) - v.begin());
        static constexpr int kRotate[4][4] = {{0, 1, 2, 3}, {0, 1, 2, 3}, {0, 2, 3, 1}, {0, 3, 1, 2}};
        const auto& r = kRotate[next];
        permute(v, r[0], r[1], r[2], r[3]);
        permute(nb, r[0], r[1], r[2], r[3]);
    }
    std::vector<std::uint32_t> order(dt.tets.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return dt.tets[a] < dt.tets[b]; });
    std::vector<std::uint32_t> rank(order.size());
    for (std::uint32_t i = 0; i < order.size(); ++i)
        rank[order[i]] = i;
    std::vector<std::array<std::uint32_t, 4>> tets(order.size()), neighbors(order.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) {
        tets[i] = dt.tets[order[i]];
        for (int k = 0; k < 4; ++k) {
            const std::uint32_t nb = dt.neighbors[order[i]][k];
            neighbors[i][k] = nb == INFINITE ? INFINITE : rank[nb];
        }
    }
    dt.tets = std::move(tets);
    dt.neighbors = std::move(neighbors);
}

}  // namespace

Tetrahedralization tetrahedralize(const PointCloud& cloud, std::uint64_t seed) {
    Tetrahedralization dt;
    dt.point_to_vertex.resize(cloud.size());
    std::unordered_map<PointKey, std::uint32_t, PointKeyHash> seen;
    seen.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point3& p = cloud.points[i];
        if (!p.allFinite())
            throw InvalidInput("tetrahedralize: non-finite point coordinate");
        // +0.0 folds -0.0 into 0.0 so equal coordinates hash equally.
        const PointKey key{p.x() + 0.0, p.y() + 0.0, p.z() + 0.0};
        const auto [it, inserted] = seen.try_emplace(key, static_cast<std::uint32_t>(dt.vertices.size()));
        const std::uint32_t v = it->second;
        if (inserted) {
            dt.vertices.emplace_back(key.x, key.y, key.z);
            dt.source.push_back(cloud.source[i]);
            dt.visibility.push_back(cloud.visibility[i]);
        } else {
            if (cloud.source[i] == Source::street)
                dt.source[v] = Source::street;
            auto& vis = dt.visibility[v];
            vis.insert(vis.end(), cloud.visibility[i].begin(), cloud.visibility[i].end());
        }
        dt.point_to_vertex[i] = v;
    }
    for (auto& vis : dt.visibility) {
        std::sort(vis.begin(), vis.end());
        vis.erase(std::unique(vis.begin(), vis.end()), vis.end());
    }

    const auto& P = dt.vertices;
    const std::size_t n = P.size();
    if (n < 4)
        throw InvalidInput("degenerate input: no 3D hull");
    const std::vector<std::uint32_t> order = morton_order(P);

    // First affinely independent quadruple in insertion order.
    std::array<std::size_t, 4> pick{0, 1, 0, 0};
    std::size_t k = 2;
    while (k < n && pr::collinear(P[order[0]], P[order[1]], P[order[k]]))
        ++k;
    if (k == n)
        throw InvalidInput("degenerate input: no 3D hull");
    pick[2] = k;
    std::size_t m = k + 1;
    while (m < n && pr::orient(P[order[0]], P[order[1]], P[order[k]], P[order[m]]) == 0)
        ++m;
    if (m == n)
        throw InvalidInput("degenerate input: no 3D hull");
    pick[3] = m;
    std::array<std::uint32_t, 4> first{order[pick[0]], order[pick[1]], order[pick[2]], order[pick[3]]};
    if (pr::orient(P[first[0]], P[first[1]], P[first[2]], P[first[3]]) < 0)
        std::swap(first[0], first[1]);

    Builder builder(P, seed);
    builder.init(first);
    for (std::size_t i = 2; i < n; ++i)
        if (i != pick[2] && i != pick[3])
            builder.insert(order[i]);
    builder.extract(dt);
    canonicalize(dt);
    dt.build_incidence();
    return dt;
}

std::vector<Ray> remap_rays(const Tetrahedralization& dt, const std::vector<Ray>& rays) {
    std::vector<Ray> out;
    out.reserve(rays.size());
    std::unordered_map<std::uint64_t, char> seen;
    seen.reserve(rays.size());
    for (const Ray& r : rays) {
        if (r.origin >= dt.point_to_vertex.size())
            throw InvalidInput("remap_rays: ray origin is not a point of the triangulated cloud");
        const std::uint32_t v = dt.point_to_vertex[r.origin];
        if (seen.emplace((static_cast<std::uint64_t>(v) << 32) | r.sensor_index, 0).second)
            out.push_back({v, r.sensor_index, r.sensor});
    }
    return out;
}

void write_ascii(const Tetrahedralization& dt, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os)
        throw Error("cannot write " + path.string());
    os.precision(17);
    for (const auto& v : dt.vertices)
        os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : dt.tets)
        os << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    if (!os)
        throw Error("write failed: " + path.string());
}

namespace {

// Orientation of tet t with its slot k replaced by x.
int orient_replaced(const Tetrahedralization& dt, std::uint32_t t, int k, const Point3& x) {
    const auto& v = dt.tets[t];
    const Point3* q[4];
    for (int i = 0; i < 4; ++i)
        q[i] = i == k ? &x : &dt.vertices[v[i]];
    return pr::orient(*q[0], *q[1], *q[2], *q[3]);
}

double orient_replaced_value(const Tetrahedralization& dt, std::uint32_t t, int k, const Point3& x) {
    const auto& v = dt.tets[t];
    const Point3* q[4];
    for (int i = 0; i < 4; ++i)
        q[i] = i == k ? &x : &dt.vertices[v[i]];
    return pr::orient_value(*q[0], *q[1], *q[2], *q[3]);
}

struct VisitStamps {
    std::vector<std::uint32_t> stamp;
    std::uint32_t current = 0;

    void begin(std::size_t n) {
        if (stamp.size() < n)
            stamp.resize(n, 0);
        if (++current == 0) {
            std::fill(stamp.begin(), stamp.end(), 0);
            current = 1;
        }
    }
};

}  // namespace

void walk(const Tetrahedralization& dt, const Ray& ray, Direction direction, double max_distance,
          std::vector<TraversalStep>& out) {
    out.clear();
    if (ray.origin >= dt.num_vertices())
        throw InvalidInput("walk: ray origin is not a vertex of the triangulation");
    if (!(max_distance > 0.0))
        throw InvalidInput("walk: max_distance must be > 0");
    const Point3& v = dt.vertices[ray.origin];
    const Vec3 to_sensor = ray.sensor - v;
    const double length = to_sensor.norm();
    if (!(length > 0.0) || !std::isfinite(length))
        throw InvalidInput("walk: zero-length or non-finite ray");

    // The walk follows the line from v through a far point f and stops at
    // parameter u_end (u = 1 at f).
    Point3 far;
    double seg_len;
    if (direction == Direction::toward_sensor) {
        far = ray.sensor;
        seg_len = std::min(max_distance, length);
    } else {
        if (!std::isfinite(max_distance))
            throw InvalidInput("walk: inverted walks need a finite max_distance");
        far = v - to_sensor * std::max(1.0, std::ceil(max_distance / length));
        seg_len = max_distance;
    }
    const double far_len = (far - v).norm();
    const double u_end = direction == Direction::toward_sensor && max_distance >= length ? 1.0 : seg_len / far_len;

    // Start tet: the incident tet whose cone at v contains the direction.
    std::uint32_t tet = INFINITE;
    int best_positive = -1;
    for (std::uint32_t t : dt.incident_tets(ray.origin)) {
        const auto& tv = dt.tets[t];
        const int j = static_cast<int>(std::find(tv.begin(), tv.end(), ray.origin) - tv.begin());
        int positive = 0;
        bool inside = true;
        for (int k = 0; k < 4 && inside; ++k) {
            if (k == j)
                continue;
            const int o = orient_replaced(dt, t, k, far);
            inside = o >= 0;
            positive += o > 0;
        }
        if (inside && positive > best_positive) {
            best_positive = positive;
            tet = t;
        }
    }
    if (tet == INFINITE) {
        out.push_back({INFINITE, 0.0});
        return;
    }

    thread_local VisitStamps visited;
    visited.begin(dt.num_tets());
    double u_prev = 0.0;
    bool first = true;
    const std::size_t guard = dt.num_tets() + 1;
    while (out.size() < guard) {
        visited.stamp[tet] = visited.current;
        // Candidate exits: faces whose plane separates the far point from the tet.
        struct Exit {
            double u;
            int face;
        };
        std::array<Exit, 4> exits;
        int n_exits = 0;
        for (int j = 0; j < 4; ++j) {
            if (orient_replaced(dt, tet, j, far) >= 0)
                continue;
            const bool through_v = first && dt.tets[tet][j] != ray.origin;
            const double a = through_v ? 0.0 : orient_replaced_value(dt, tet, j, v);
            const double b = orient_replaced_value(dt, tet, j, far);
            double u = a - b > 0.0 ? a / (a - b) : u_prev;
            if (!(u >= u_prev))
                u = u_prev;
            exits[n_exits++] = {u, j};
        }
        std::sort(exits.begin(), exits.begin() + n_exits,
                  [](const Exit& x, const Exit& y) { return x.u != y.u ? x.u < y.u : x.face < y.face; });
        const Exit* chosen = nullptr;
        for (int e = 0; e < n_exits; ++e) {
            const std::uint32_t nb = dt.neighbors[tet][exits[e].face];
            if (nb == INFINITE || visited.stamp[nb] != visited.current) {
                chosen = &exits[e];
                break;
            }
        }
        if (chosen == nullptr || chosen->u >= u_end) {
            out.push_back({tet, seg_len});
            return;
        }
        const double d = chosen->u * far_len;
        out.push_back({tet, d});
        const std::uint32_t nb = dt.neighbors[tet][chosen->face];
        if (nb == INFINITE) {
            out.push_back({INFINITE, d});
            return;
        }
        u_prev = chosen->u;
        tet = nb;
        first = false;
    }
}

std::vector<TraversalStep> walk(const Tetrahedralization& dt, const Ray& ray, Direction direction,
                                double max_distance) {
    std::vector<TraversalStep> out;
    walk(dt, ray, direction, max_distance, out);
    return out;
}

}  // namespace airfuse::delaunay
