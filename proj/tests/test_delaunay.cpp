#include "airfuse/delaunay.hpp"
#include "airfuse/predicates.hpp"

#include "test_util.hpp"
#include "walk_oracle.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

using namespace airfuse;
using namespace airfuse::delaunay;
namespace pr = airfuse::predicates;

namespace {

PointCloud cloud_of(const std::vector<Point3>& pts) {
    PointCloud c;
    for (std::size_t i = 0; i < pts.size(); ++i)
        c.push_back(pts[i], Source::aerial, {0});
    return c;
}

std::string face_sharing_violation(const Tetrahedralization& dt) {
    std::map<std::array<std::uint32_t, 3>, int> count;
    std::size_t hull = 0;
    for (std::uint32_t t = 0; t < dt.num_tets(); ++t)
        for (int i = 0; i < 4; ++i) {
            std::array<std::uint32_t, 3> f{};
            int m = 0;
            for (int k = 0; k < 4; ++k)
                if (k != i)
                    f[m++] = dt.tets[t][k];
            std::sort(f.begin(), f.end());
            ++count[f];
            hull += dt.neighbors[t][i] == INFINITE;
        }
    std::size_t once = 0;
    for (const auto& [f, c] : count) {
        if (c > 2)
            return "face shared by more than 2 tets";
        once += c == 1;
    }
    if (once != hull)
        return "faces used once do not match hull faces";
    return {};
}

// Every vertex must lie on the inner side of every hull face.
std::string hull_violation(const Tetrahedralization& dt) {
    for (std::uint32_t t = 0; t < dt.num_tets(); ++t)
        for (int i = 0; i < 4; ++i) {
            if (dt.neighbors[t][i] != INFINITE)
                continue;
            const auto f = dt.face(t, i);
            for (const auto& q : dt.vertices)
                if (pr::orient(f[0], f[1], f[2], q) > 0)
                    return "hull is not convex";
        }
    return {};
}

void check_triangulation(const Tetrahedralization& dt) {
    REQUIRE(testutil::delaunay_violation(dt).empty());
    REQUIRE(testutil::adjacency_violation(dt).empty());
    REQUIRE(face_sharing_violation(dt).empty());
    REQUIRE(hull_violation(dt).empty());
}

std::vector<Point3> regular_tet() {
    return {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
}

}  // namespace

TEST_CASE("predicate sign conventions") {
    const Point3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0), d(0, 0, 1);
    CHECK(pr::orient(a, b, c, d) == 1);
    CHECK(pr::orient(b, a, c, d) == -1);
    CHECK(pr::orient(a, b, c, Point3(5, 5, 0)) == 0);
    CHECK(pr::orient_value(a, b, c, d) == doctest::Approx(1.0));
    CHECK(pr::insphere(a, b, c, d, Point3(0.25, 0.25, 0.25)) == 1);
    CHECK(pr::insphere(a, b, c, d, Point3(3, 3, 3)) == -1);
    CHECK(pr::insphere(a, b, c, d, Point3(1, 1, 0)) == 0);  // cospherical
    CHECK(pr::insphere_perturbed(a, b, c, d, Point3(1, 1, 0)) != 0);
    CHECK(pr::collinear(a, b, Point3(7, 0, 0)));
    CHECK_FALSE(pr::collinear(a, b, c));
    // In-plane circle test on the unit right triangle.
    CHECK(pr::incircle_coplanar_perturbed(a, b, c, Point3(0.5, 0.5, 0)) == 1);
    CHECK(pr::incircle_coplanar_perturbed(a, b, c, Point3(2, 2, 0)) == -1);
    CHECK(pr::incircle_coplanar_perturbed(a, c, b, Point3(2, 2, 0)) == -1);
    CHECK(pr::incircle_coplanar_perturbed(a, b, c, Point3(1, 1, 0)) != 0);
}

TEST_CASE("predicates are exact where floating point is not") {
    // Nearly coplanar points that naive evaluation gets wrong.
    const double eps = 0x1p-52;
    const Point3 a(0.5, 0.5, 0), b(12, 12, 0), c(24, 24, 0);
    const Point3 p(0.5 + eps, 0.5, 0);
    CHECK(pr::collinear(a, b, c));
    CHECK_FALSE(pr::collinear(a, b, p));
    const Point3 q(1, 7, 0);
    CHECK(pr::orient(a, b, q, Point3(3.0, 3.0, 0x1p-60)) == 1);
    CHECK(pr::orient(a, b, q, Point3(3.0, 3.0, -0x1p-60)) == -1);
}

TEST_CASE("perturbed insphere is antisymmetric under equal-orientation reorderings") {
    // Eight cube corners are cospherical; the decision may only depend on coordinates.
    std::vector<Point3> cube;
    for (int i = 0; i < 8; ++i)
        cube.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
    const Point3 a = cube[0], b = cube[1], c = cube[2], d = cube[4];
    REQUIRE(pr::orient(a, b, c, d) == 1);
    for (int q : {3, 5, 6, 7}) {
        const int s = pr::insphere_perturbed(a, b, c, d, cube[q]);
        CHECK(s != 0);
        // Even permutation of the tet keeps orientation and must keep the answer.
        CHECK(pr::insphere_perturbed(b, a, d, c, cube[q]) == s);
        CHECK(pr::insphere_perturbed(c, d, a, b, cube[q]) == s);
    }
}

TEST_CASE("tetrahedron plus centroid gives 4 tets around the centroid") {
    auto pts = regular_tet();
    pts.push_back({0, 0, 0});
    const auto dt = tetrahedralize(cloud_of(pts));
    CHECK(dt.num_tets() == 4);
    for (const auto& t : dt.tets)
        CHECK(std::count(t.begin(), t.end(), 4u) == 1);
    check_triangulation(dt);
    CHECK(dt.incident_tets(4).size() == 4);
}

TEST_CASE("cube corners") {
    std::vector<Point3> cube;
    for (int i = 0; i < 8; ++i)
        cube.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
    const auto dt = tetrahedralize(cloud_of(cube));
    check_triangulation(dt);
    double volume = 0;
    for (std::uint32_t t = 0; t < dt.num_tets(); ++t) {
        const auto& v = dt.tets[t];
        volume += pr::orient_value(dt.vertices[v[0]], dt.vertices[v[1]], dt.vertices[v[2]], dt.vertices[v[3]]) / 6;
    }
    CHECK(volume == doctest::Approx(1.0));
}

TEST_CASE("grid points (heavily cospherical)") {
    std::vector<Point3> pts;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k)
                pts.push_back({double(i), double(j), double(k)});
    const auto dt = tetrahedralize(cloud_of(pts));
    check_triangulation(dt);
    double volume = 0;
    for (std::uint32_t t = 0; t < dt.num_tets(); ++t) {
        const auto& v = dt.tets[t];
        volume += pr::orient_value(dt.vertices[v[0]], dt.vertices[v[1]], dt.vertices[v[2]], dt.vertices[v[3]]) / 6;
    }
    CHECK(volume == doctest::Approx(4 * 3 * 3));
}

TEST_CASE("500 random points in a ball") {
    std::mt19937_64 rng(77);
    std::vector<Point3> pts;
    for (int i = 0; i < 500; ++i)
        pts.push_back(testutil::ball_point(rng, 1.0));
    const auto dt = tetrahedralize(cloud_of(pts));
    check_triangulation(dt);
    // Euler characteristic of a triangulated ball: V - E + F - T = 1.
    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::set<std::array<std::uint32_t, 3>> faces;
    for (const auto& t : dt.tets) {
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                edges.insert({std::min(t[i], t[j]), std::max(t[i], t[j])});
        for (int i = 0; i < 4; ++i) {
            std::array<std::uint32_t, 3> f{};
            int m = 0;
            for (int k = 0; k < 4; ++k)
                if (k != i)
                    f[m++] = t[k];
            std::sort(f.begin(), f.end());
            faces.insert(f);
        }
    }
    const long chi = static_cast<long>(dt.num_vertices()) - static_cast<long>(edges.size()) +
                     static_cast<long>(faces.size()) - static_cast<long>(dt.num_tets());
    CHECK(chi == 1);
}

TEST_CASE("duplicates are merged with a visibility union") {
    PointCloud c = cloud_of(regular_tet());
    c.push_back({0, 0, 0}, Source::aerial, {1});
    c.push_back({0, 0, -0.0}, Source::street, {2, 1});
    const auto dt = tetrahedralize(c);
    CHECK(dt.num_vertices() == 5);
    CHECK(dt.point_to_vertex[5] == dt.point_to_vertex[4]);
    CHECK(dt.visibility[4] == std::vector<std::uint32_t>{1, 2});
    CHECK(dt.source[4] == Source::street);

    const std::vector<Ray> rays{{4, 1, {0, 0, 5}}, {5, 1, {0, 0, 5}}, {5, 2, {0, 5, 0}}};
    const auto remapped = remap_rays(dt, rays);
    REQUIRE(remapped.size() == 2);
    CHECK(remapped[0].origin == 4);
    CHECK(remapped[1].sensor_index == 2);
}

TEST_CASE("degenerate inputs") {
    std::vector<Point3> flat;
    for (int i = 0; i < 10; ++i)
        flat.push_back({double(i % 3), double(i / 3), 0.0});
    try {
        tetrahedralize(cloud_of(flat));
        FAIL("expected InvalidInput");
    } catch (const InvalidInput& e) {
        CHECK(std::string(e.what()) == "degenerate input: no 3D hull");
    }
    CHECK_THROWS_AS(tetrahedralize(cloud_of({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}})), InvalidInput);
    CHECK_THROWS_AS(tetrahedralize(cloud_of({{0, 0, 0}, {0, 0, 0}})), InvalidInput);
}

TEST_CASE("ascii dump") {
    testutil::TempDir dir("dt");
    auto pts = regular_tet();
    pts.push_back({0, 0, 0});
    const auto dt = tetrahedralize(cloud_of(pts));
    write_ascii(dt, dir.file("dt.txt"));
    std::ifstream in(dir.file("dt.txt"));
    int v = 0, t = 0;
    for (std::string line; std::getline(in, line);)
        (line[0] == 'v' ? v : t)++;
    CHECK(v == 5);
    CHECK(t == 4);
}

TEST_CASE("walk from the centroid through one face") {
    auto pts = regular_tet();
    pts.push_back({0, 0, 0});
    const auto dt = tetrahedralize(cloud_of(pts));
    // Center of the face opposite (1,1,1), pushed outward.
    const Point3 face_center = (pts[1] + pts[2] + pts[3]) / 3.0;
    const Ray ray{4, 0, face_center * 3.0};
    const auto steps = walk(dt, ray, Direction::toward_sensor, std::numeric_limits<double>::infinity());
    REQUIRE(steps.size() == 2);
    CHECK(steps[0].tet != INFINITE);
    CHECK(steps[0].exit_distance == doctest::Approx(face_center.norm()));
    CHECK(steps[1].tet == INFINITE);

    SUBCASE("immediate truncation keeps exactly the first tet") {
        const auto s = walk(dt, ray, Direction::toward_sensor, 1e-12);
        REQUIRE(s.size() == 1);
        CHECK(s[0].tet == steps[0].tet);
        CHECK(s[0].exit_distance == 1e-12);
    }
    SUBCASE("sensor inside the first tet") {
        const Ray inner{4, 0, face_center * 0.5};
        const auto s = walk(dt, inner, Direction::toward_sensor, std::numeric_limits<double>::infinity());
        REQUIRE(s.size() == 1);
        CHECK(s[0].exit_distance == doctest::Approx(face_center.norm() * 0.5));
    }
    SUBCASE("inverted walk leaves through the opposite corner region") {
        const auto s = walk(dt, ray, Direction::inverted, 0.3);
        REQUIRE(!s.empty());
        CHECK(s.front().tet != steps[0].tet);
        CHECK(s.back().exit_distance == doctest::Approx(0.3));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(walk(dt, Ray{9, 0, {0, 0, 1}}, Direction::toward_sensor, 1.0), InvalidInput);
        CHECK_THROWS_AS(walk(dt, Ray{4, 0, {0, 0, 0}}, Direction::toward_sensor, 1.0), InvalidInput);
        CHECK_THROWS_AS(walk(dt, ray, Direction::inverted, std::numeric_limits<double>::infinity()),
                        InvalidInput);
    }
}

TEST_CASE("walk from a hull vertex pointing outward is immediately infinite") {
    auto pts = regular_tet();
    pts.push_back({0, 0, 0});
    const auto dt = tetrahedralize(cloud_of(pts));
    const auto steps = walk(dt, Ray{0, 0, {3, 3, 3}}, Direction::toward_sensor, 10.0);
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].tet == INFINITE);
}

namespace {

// Compares a walk against brute-force clipping of the segment it covers.
void check_walk_against_oracle(const Tetrahedralization& dt, const Ray& ray, Direction dir, double max_d) {
    const auto steps = walk(dt, ray, dir, max_d);
    const Point3& v = dt.vertices[ray.origin];
    const Vec3 d = ray.sensor - v;
    const double len = d.norm();
    const Vec3 dhat = d / len;
    const double seg = dir == Direction::toward_sensor ? std::min(len, max_d) : max_d;
    const Point3 end = dir == Direction::toward_sensor ? (max_d >= len ? ray.sensor : Point3(v + dhat * max_d))
                                                         : Point3(v - dhat * max_d);
    const auto chords = testutil::clip_all(dt, v, end, 1e-9 * std::max(1.0, seg));

    std::vector<std::uint32_t> walked;
    for (const auto& s : steps)
        if (s.tet != INFINITE)
            walked.push_back(s.tet);
    std::vector<std::uint32_t> expected;
    for (const auto& c : chords)
        expected.push_back(c.tet);
    REQUIRE(walked == expected);

    // Exit distances match and are non-decreasing; chords telescope.
    double prev = 0.0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        CHECK(steps[i].exit_distance >= prev);
        prev = steps[i].exit_distance;
        if (steps[i].tet != INFINITE)
            CHECK(std::abs(steps[i].exit_distance - chords[i].exit) <= 1e-7 * std::max(1.0, seg));
    }
    const bool left_hull = !steps.empty() && steps.back().tet == INFINITE;
    const double covered = chords.empty() ? 0.0 : chords.back().exit;
    CHECK(left_hull == (covered < seg - 1e-7 * std::max(1.0, seg)));
    if (!left_hull)
        CHECK(steps.back().exit_distance == doctest::Approx(seg).epsilon(1e-12));
}

}  // namespace

TEST_CASE("walks match brute-force segment clipping on random scenes") {
    const double sigma_in = 0.1, sigma_out = 0.5;
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        std::vector<Point3> pts;
        const int n = 50 + seed * 20;
        for (int i = 0; i < n; ++i)
            pts.push_back(testutil::uniform_point(rng, 0, 3));
        const auto dt = tetrahedralize(cloud_of(pts));
        std::uniform_int_distribution<std::uint32_t> vid(0, static_cast<std::uint32_t>(dt.num_vertices() - 1));
        for (int r = 0; r < 20; ++r) {
            const Ray ray{vid(rng), 0, testutil::uniform_point(rng, -4, 7)};
            CAPTURE(seed);
            CAPTURE(r);
            check_walk_against_oracle(dt, ray, Direction::toward_sensor, std::numeric_limits<double>::infinity());
            check_walk_against_oracle(dt, ray, Direction::toward_sensor, 3 * sigma_out);
            check_walk_against_oracle(dt, ray, Direction::inverted, 3 * sigma_in);
        }
    }
}

TEST_CASE("walk up through stacked slabs") {
    std::vector<Point3> pts;
    const int levels = 6;
    for (int k = 0; k <= levels; ++k)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                pts.push_back({double(i), double(j), 0.5 * k});
    const auto dt = tetrahedralize(cloud_of(pts));
    check_triangulation(dt);
    // Origin at the center of the bottom layer, sensor high above at a generic offset.
    const std::uint32_t origin = 4;
    REQUIRE(dt.vertices[origin] == Point3(1, 1, 0));
    const Ray ray{origin, 0, {1.0137, 0.9771, 10.0}};
    check_walk_against_oracle(dt, ray, Direction::toward_sensor, std::numeric_limits<double>::infinity());
    const auto steps = walk(dt, ray, Direction::toward_sensor, std::numeric_limits<double>::infinity());
    CHECK(steps.back().tet == INFINITE);
    // The ray pierces every slab.
    std::set<int> slabs;
    for (const auto& s : steps)
        if (s.tet != INFINITE)
            slabs.insert(static_cast<int>(std::floor(dt.centroid(s.tet).z() / 0.5)));
    CHECK(slabs.size() == levels);
}

TEST_CASE("degenerate walk directions terminate deterministically") {
    std::vector<Point3> pts;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k)
                pts.push_back({double(i), double(j), double(k)});
    const auto dt = tetrahedralize(cloud_of(pts));
    // Rays exactly along grid lines and face diagonals.
    for (std::uint32_t v = 0; v < dt.num_vertices(); v += 5)
        for (const Vec3& dir : {Vec3(1, 0, 0), Vec3(0, 1, 1), Vec3(1, 1, 1), Vec3(-1, 0, 0), Vec3(0, 0, -1)}) {
            const Ray ray{v, 0, dt.vertices[v] + 10 * dir};
            const auto a = walk(dt, ray, Direction::toward_sensor, std::numeric_limits<double>::infinity());
            const auto b = walk(dt, ray, Direction::toward_sensor, std::numeric_limits<double>::infinity());
            CHECK(a.size() == b.size());
            CHECK(a.size() <= dt.num_tets() + 1);
            std::set<std::uint32_t> seen;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (a[i].tet != INFINITE)
                    CHECK(seen.insert(a[i].tet).second);
                if (i > 0)
                    CHECK(a[i].exit_distance >= a[i - 1].exit_distance);
            }
            const auto c = walk(dt, ray, Direction::inverted, 0.3);
            CHECK(!c.empty());
        }
}

TEST_CASE("triangulation does not depend on the walk seed") {
    std::mt19937_64 rng(99);
    PointCloud c;
    for (int i = 0; i < 400; ++i)
        c.push_back(testutil::uniform_point(rng, -1, 1), Source::aerial, {0});
    const auto a = delaunay::tetrahedralize(c, 1);
    const auto b = delaunay::tetrahedralize(c, 987654321);
    CHECK(a.tets == b.tets);
    CHECK(a.neighbors == b.neighbors);
    CHECK(std::is_sorted(a.tets.begin(), a.tets.end()));
}
