#include "airfuse/fusion.hpp"

#include "airfuse/mincut.hpp"
#include "airfuse/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace airfuse::fusion {

using delaunay::INFINITE;
using delaunay::Tetrahedralization;

void FusionParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw InvalidInput(std::string("fusion: ") + name + " must be > 0");
    };
    positive(sigma_in, "sigma_in");
    positive(sigma_out, "sigma_out");
    positive(gamma_in, "gamma_in");
    positive(gamma_out, "gamma_out");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw InvalidInput("fusion: lambda must be >= 0");
}

double ray_score(double exit_distance, double sigma) {
    return 1.0 - std::exp(-exit_distance * exit_distance / (2.0 * sigma * sigma));
}

namespace {

constexpr double kFixedScale = 0x1p40;

void add_fixed(std::int64_t& slot, double score) {
    std::atomic_ref<std::int64_t>(slot).fetch_add(std::llround(score * kFixedScale), std::memory_order_relaxed);
}

}  // namespace

VoteTable accumulate_votes(const Tetrahedralization& dt, const std::vector<Ray>& rays, const FusionParams& params) {
    params.validate();
    const std::size_t n = dt.num_tets();
    std::vector<std::int64_t> fixed_in(n, 0), fixed_out(n, 0);
    VoteTable votes;
    votes.hits.assign(n, 0);
    std::atomic<std::size_t> infinite_exits{0};
    const double forward_limit =
        params.truncate_out ? params.delta_out() : std::numeric_limits<double>::infinity();

    parallel_for(rays.size(), [&](std::size_t r) {
        thread_local std::vector<delaunay::TraversalStep> steps;
        const Ray& ray = rays[r];
        delaunay::walk(dt, ray, delaunay::Direction::toward_sensor, forward_limit, steps);
        for (const auto& s : steps) {
            if (s.tet == INFINITE) {
                infinite_exits.fetch_add(1, std::memory_order_relaxed);
                continue;
            }
            add_fixed(fixed_out[s.tet], ray_score(s.exit_distance, params.sigma_out));
            std::atomic_ref<std::uint32_t>(votes.hits[s.tet]).fetch_add(1, std::memory_order_relaxed);
        }

        delaunay::walk(dt, ray, delaunay::Direction::inverted, params.delta_in(), steps);
        const bool stayed_inside = !steps.empty() && steps.back().tet != INFINITE;
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const auto& s = steps[i];
            if (s.tet == INFINITE)
                continue;
            const bool last = stayed_inside && i + 1 == steps.size();
            add_fixed(fixed_in[s.tet], last ? 1.0 : ray_score(s.exit_distance, params.sigma_in));
            std::atomic_ref<std::uint32_t>(votes.hits[s.tet]).fetch_add(1, std::memory_order_relaxed);
        }
    });

    votes.u_in.resize(n);
    votes.u_out.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        votes.u_in[t] = static_cast<double>(fixed_in[t]) / kFixedScale;
        votes.u_out[t] = static_cast<double>(fixed_out[t]) / kFixedScale;
    }
    votes.infinite_exits = infinite_exits.load();
    return votes;
}

std::vector<std::array<double, 2>> unary_energy(const VoteTable& votes, const FusionParams& params) {
    params.validate();
    std::vector<std::array<double, 2>> e(votes.size());
    for (std::size_t t = 0; t < votes.size(); ++t) {
        e[t][0] = 1.0 - std::exp(-votes.u_out[t] / params.gamma_out);
        e[t][1] = 1.0 - std::exp(-votes.u_in[t] / params.gamma_in);
    }
    return e;
}

std::vector<FaceWeight> pairwise_energy(const Tetrahedralization& dt, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw InvalidInput("fusion: lambda must be >= 0");
    std::vector<FaceWeight> faces;
    faces.reserve(2 * dt.num_tets() + 16);
    for (std::uint32_t t = 0; t < dt.num_tets(); ++t)
        for (int i = 0; i < 4; ++i) {
            const std::uint32_t nb = dt.neighbors[t][i];
            if (nb == INFINITE || t < nb)
                faces.push_back({t, i, nb, lambda * dt.face_area(t, i)});
        }
    return faces;
}

double labeling_energy(const Tetrahedralization& dt, const std::vector<std::array<double, 2>>& unaries,
                       double lambda, const std::vector<Label>& labels) {
    if (unaries.size() != dt.num_tets() || labels.size() != dt.num_tets())
        throw InvalidInput("fusion: unaries and labels must have one entry per tet");
    double e = 0.0;
    for (std::size_t t = 0; t < labels.size(); ++t)
        e += unaries[t][static_cast<int>(labels[t])];
    for (const auto& f : pairwise_energy(dt, lambda)) {
        const Label other = f.neighbor == INFINITE ? Label::out : labels[f.neighbor];
        if (labels[f.tet] != other)
            e += f.weight;
    }
    return e;
}

Labeling solve_labeling(const Tetrahedralization& dt, const std::vector<std::array<double, 2>>& unaries,
                        double lambda) {
    const std::size_t n = dt.num_tets();
    if (unaries.size() != n)
        throw InvalidInput("fusion: one unary pair per tet required");
    mincut::BinaryEnergy energy(n);
    for (std::uint32_t t = 0; t < n; ++t)
        energy.set_unary(t, unaries[t][0], unaries[t][1]);
    for (const auto& f : pairwise_energy(dt, lambda)) {
        if (f.neighbor == INFINITE)
            energy.add_unary(f.tet, f.weight, 0.0);
        else if (f.weight > 0.0)
            energy.add_pairwise(f.tet, f.neighbor, f.weight);
    }
    const mincut::Solution sol = mincut::solve(energy);
    Labeling out;
    out.labels.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        out.labels[t] = sol.labels[t] == 0 ? Label::in : Label::out;
        out.inside += sol.labels[t] == 0;
    }
    out.energy = sol.energy;
    return out;
}

Labeling fuse(const Tetrahedralization& dt, const std::vector<Ray>& rays, const FusionParams& params) {
    params.validate();
    const VoteTable votes = accumulate_votes(dt, rays, params);
    return solve_labeling(dt, unary_energy(votes, params), params.lambda);
}

namespace {

struct DisjointSets {
    std::vector<std::uint32_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
    std::uint32_t find(std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a != b)
            parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

TriangleMesh extract_surface(const Tetrahedralization& dt, const std::vector<Label>& labels) {
    if (labels.size() != dt.num_tets())
        throw InvalidInput("extract_surface: one label per tet required");
    auto is_in = [&](std::uint32_t t) { return t != INFINITE && labels[t] == Label::in; };

    // Interface faces in (tet, face) order.
    std::vector<std::array<std::int32_t, 4>> tri_of(dt.num_tets(), {-1, -1, -1, -1});
    std::vector<std::pair<std::uint32_t, int>> faces;
    for (std::uint32_t t = 0; t < dt.num_tets(); ++t) {
        if (!is_in(t))
            continue;
        for (int i = 0; i < 4; ++i)
            if (!is_in(dt.neighbors[t][i])) {
                tri_of[t][i] = static_cast<std::int32_t>(faces.size());
                faces.emplace_back(t, i);
            }
    }

    auto corner_vertex = [&](std::size_t tri, int c) {
        const auto [t, i] = faces[tri];
        return dt.tets[t][delaunay::kFaceVertices[i][c]];
    };

    // Glue every triangle edge to the interface face met by rotating around
    // the edge through in tets. Half-edge 3*tri + e runs from corner e to
    // corner e + 1 of triangle tri.
    const std::size_t n_half = 3 * faces.size();
    std::vector<std::uint32_t> glue(n_half, INFINITE);
    for (std::size_t tri = 0; tri < faces.size(); ++tri) {
        const auto [t0, f0] = faces[tri];
        for (int e = 0; e < 3; ++e) {
            const std::uint32_t a = corner_vertex(tri, e), b = corner_vertex(tri, (e + 1) % 3);
            std::uint32_t cur = t0;
            std::uint32_t behind = dt.tets[t0][f0];  // vertex opposite the face we stand on
            std::int32_t partner = -1;
            for (std::size_t guard = 0; guard <= dt.num_tets(); ++guard) {
                const auto& tv = dt.tets[cur];
                // The other face of `cur` containing ab is opposite the vertex that is
                // neither a, b nor `behind`.
                int exit_slot = -1;
                for (int k = 0; k < 4; ++k)
                    if (tv[k] != a && tv[k] != b && tv[k] != behind)
                        exit_slot = k;
                const std::uint32_t nb = dt.neighbors[cur][exit_slot];
                if (!is_in(nb)) {
                    partner = tri_of[cur][exit_slot];
                    break;
                }
                const auto& back = dt.neighbors[nb];
                behind = dt.tets[nb][std::find(back.begin(), back.end(), cur) - back.begin()];
                cur = nb;
            }
            if (partner < 0)
                throw Error("extract_surface: inconsistent adjacency around an edge");
            int pe = -1;
            for (int c = 0; c < 3; ++c)
                if (corner_vertex(partner, c) == b && corner_vertex(partner, (c + 1) % 3) == a)
                    pe = c;
            if (pe < 0)
                throw Error("extract_surface: inconsistent orientation around an edge");
            glue[3 * tri + e] = static_cast<std::uint32_t>(3 * partner + pe);
        }
    }

    auto tail = [](std::uint32_t h) { return h; };
    auto head = [](std::uint32_t h) { return h - h % 3 + (h % 3 + 1) % 3; };

    // Corners joined through glued edges form one vertex per umbrella. Two
    // umbrellas can still be joined by two distinct glued edges (a sheet of
    // in tets pinched along an edge); swapping the gluing of the two edge
    // pairs splits both umbrellas and leaves the geometry untouched.
    std::vector<std::uint32_t> root(n_half);
    for (std::size_t round = 0;; ++round) {
        if (round > n_half)
            throw Error("extract_surface: pinched edges did not resolve");
        DisjointSets corners(n_half);
        for (std::uint32_t h = 0; h < n_half; ++h) {
            corners.unite(tail(h), head(glue[h]));
            corners.unite(head(h), tail(glue[h]));
        }
        for (std::uint32_t c = 0; c < n_half; ++c)
            root[c] = corners.find(c);

        std::unordered_map<std::uint64_t, std::uint32_t> edge_of;
        std::vector<std::uint8_t> touched(n_half, 0);
        bool changed = false;
        for (std::uint32_t h = 0; h < n_half; ++h) {
            if (h > glue[h])
                continue;
            const std::uint32_t ra = root[tail(h)], rb = root[head(h)];
            const std::uint64_t key = (std::uint64_t{std::min(ra, rb)} << 32) | std::max(ra, rb);
            const auto [it, inserted] = edge_of.try_emplace(key, h);
            if (inserted || touched[ra] || touched[rb])
                continue;
            const std::uint32_t u1 = h, w1 = glue[h];
            const std::uint32_t u2 = root[tail(it->second)] == ra ? it->second : glue[it->second];
            const std::uint32_t w2 = glue[u2];
            glue[u1] = w2;
            glue[w2] = u1;
            glue[u2] = w1;
            glue[w1] = u2;
            touched[ra] = touched[rb] = 1;
            changed = true;
        }
        if (!changed)
            break;
    }

    TriangleMesh mesh;
    std::vector<std::uint32_t> vertex_of(3 * faces.size(), INFINITE);
    mesh.triangles.resize(faces.size());
    for (std::size_t tri = 0; tri < faces.size(); ++tri)
        for (int c = 0; c < 3; ++c) {
            const std::uint32_t r = root[3 * tri + c];
            if (vertex_of[r] == INFINITE) {
                const std::uint32_t v = corner_vertex(tri, c);
                vertex_of[r] = static_cast<std::uint32_t>(mesh.vertices.size());
                mesh.vertices.push_back(dt.vertices[v]);
                mesh.source.push_back(dt.source[v]);
            }
            mesh.triangles[tri][c] = vertex_of[r];
        }
    return mesh;
}

}  // namespace airfuse::fusion
