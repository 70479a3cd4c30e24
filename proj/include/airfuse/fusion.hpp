#pragma once

#include "airfuse/delaunay.hpp"
#include "airfuse/mesh.hpp"
#include "airfuse/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace airfuse::fusion {

struct FusionParams {
    double sigma_in = 0.1;   // meters
    double sigma_out = 0.5;  // meters
    double gamma_in = 2.0;
    double gamma_out = 2.0;
    double lambda = 1.0;
    bool truncate_out = false;

    double delta_in() const { return 3.0 * sigma_in; }
    double delta_out() const { return 3.0 * sigma_out; }

    /// Throws InvalidInput unless all sigmas and gammas are > 0 and lambda >= 0.
    void validate() const;
};

/// 1 - exp(-d^2 / (2 sigma^2)).
double ray_score(double exit_distance, double sigma);

/// Per-tet soft votes. Sums are accumulated in fixed point so the result
/// does not depend on ray order or thread scheduling.
struct VoteTable {
    std::vector<double> u_in;   // sum of in-scores (inverted walks)
    std::vector<double> u_out;  // sum of out-scores (forward walks)
    std::vector<std::uint32_t> hits;  // rays that traversed the tet
    std::size_t infinite_exits = 0;   // forward walks that reached the outer region

    std::size_t size() const { return u_in.size(); }
    bool has_any_vote(std::uint32_t t) const { return hits[t] > 0; }
};

/// Walks every ray forward (bounded by delta_out when truncate_out is set)
/// adding ray_score(d, sigma_out) to u_out, and backward for delta_in adding
/// ray_score(d, sigma_in) to u_in. The last tet of a backward walk that stays
/// inside the hull for the full delta_in gets 1 instead. Ray origins must
/// be vertex indices of dt.
VoteTable accumulate_votes(const delaunay::Tetrahedralization& dt, const std::vector<Ray>& rays,
                           const FusionParams& params);

/// Per-tet {E(in), E(out)}: E(in) = 1 - exp(-u_out / gamma_out),
/// E(out) = 1 - exp(-u_in / gamma_in).
std::vector<std::array<double, 2>> unary_energy(const VoteTable& votes, const FusionParams& params);

struct FaceWeight {
    std::uint32_t tet;
    int face;
    std::uint32_t neighbor;  // delaunay::INFINITE for hull faces
    double weight;           // lambda * area
};

/// lambda * area for every face, once per face: internal faces (tet < neighbor)
/// and hull faces. Labeling a tet in next to the outer region pays its hull
/// face weight, since the outer region is fixed to out.
std::vector<FaceWeight> pairwise_energy(const delaunay::Tetrahedralization& dt, double lambda);

enum class Label : std::uint8_t { in = 0, out = 1 };

struct Labeling {
    std::vector<Label> labels;  // per finite tet
    double energy = 0.0;
    std::size_t inside = 0;
};

/// Energy of a labeling: unaries, lambda * area of faces between different
/// labels, and lambda * area of hull faces of in tets.
double labeling_energy(const delaunay::Tetrahedralization& dt, const std::vector<std::array<double, 2>>& unaries,
                       double lambda, const std::vector<Label>& labels);

/// Exact minimizer of labeling_energy via min-cut. Ties resolve to out.
Labeling solve_labeling(const delaunay::Tetrahedralization& dt, const std::vector<std::array<double, 2>>& unaries,
                        double lambda);

/// accumulate_votes + unary_energy + solve_labeling.
Labeling fuse(const delaunay::Tetrahedralization& dt, const std::vector<Ray>& rays, const FusionParams& params);

/// Faces between in and out tets (including hull faces of in tets), oriented
/// from in toward out. Vertices where the in region touches itself are
/// duplicated once per umbrella of triangles, so every edge has exactly two
/// triangles. Vertex source tags come from the triangulation.
TriangleMesh extract_surface(const delaunay::Tetrahedralization& dt, const std::vector<Label>& labels);

}  // namespace airfuse::fusion
