#include "airfuse/delaunay.hpp"
#include "airfuse/fusion.hpp"
#include "airfuse/postprocess.hpp"

#include "test_util.hpp"
#include "walk_oracle.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

using namespace airfuse;
using namespace airfuse::fusion;
using delaunay::INFINITE;
using delaunay::Tetrahedralization;

namespace {

Tetrahedralization random_dt(std::mt19937_64& rng, std::size_t n, double extent = 1.0) {
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i)
        c.push_back(testutil::uniform_point(rng, -extent, extent), Source::aerial, {0});
    return delaunay::tetrahedralize(c);
}

std::vector<Ray> random_rays(std::mt19937_64& rng, const Tetrahedralization& dt, std::size_t n) {
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(dt.num_vertices() - 1));
    std::vector<Ray> rays;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t v = pick(rng);
        rays.push_back({v, 0, dt.vertices[v] + testutil::ball_point(rng, 3.0)});
    }
    return rays;
}

// Independent energy: face areas from scratch, hull faces of in tets pay.
double oracle_energy(const Tetrahedralization& dt, const std::vector<std::array<double, 2>>& unary, double lambda,
                     const std::vector<Label>& labels) {
    double e = 0.0;
    for (std::uint32_t t = 0; t < dt.num_tets(); ++t) {
        e += unary[t][labels[t] == Label::in ? 0 : 1];
        for (int i = 0; i < 4; ++i) {
            std::array<Point3, 3> f;
            int k = 0;
            for (int j = 0; j < 4; ++j)
                if (j != i)
                    f[k++] = dt.vertices[dt.tets[t][j]];
            const double area = 0.5 * (f[1] - f[0]).cross(f[2] - f[0]).norm();
            const std::uint32_t nb = dt.neighbors[t][i];
            if (nb == INFINITE) {
                if (labels[t] == Label::in)
                    e += lambda * area;
            } else if (t < nb && labels[t] != labels[nb]) {
                e += lambda * area;
            }
        }
    }
    return e;
}

Point3 centroid(const Tetrahedralization& dt, std::uint32_t t) {
    Point3 c = Point3::Zero();
    for (auto v : dt.tets[t])
        c += dt.vertices[v];
    return c / 4.0;
}

}  // namespace

TEST_CASE("ray score and unary spot values") {
    const double s = 0.37;
    CHECK(ray_score(0.0, s) == 0.0);
    CHECK(ray_score(s, s) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-15));
    CHECK(ray_score(3 * s, s) == doctest::Approx(1.0 - std::exp(-4.5)).epsilon(1e-15));
    CHECK(ray_score(s, s) == doctest::Approx(0.3935).epsilon(1e-4));
    CHECK(ray_score(3 * s, s) == doctest::Approx(0.9889).epsilon(1e-4));

    FusionParams p;
    VoteTable v;
    v.u_in = {0.0, p.gamma_in, 0.0, 1e6};
    v.u_out = {0.0, p.gamma_out, 0.0, 1e6};
    v.hits = {0, 1, 0, 1};
    const auto e = unary_energy(v, p);
    CHECK(e[0][0] == 0.0);
    CHECK(e[0][1] == 0.0);
    CHECK(e[1][0] == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
    CHECK(e[1][1] == doctest::Approx(0.6321).epsilon(1e-4));
    CHECK(e[3][0] == doctest::Approx(1.0));
}

TEST_CASE("fusion parameter validation") {
    FusionParams p;
    CHECK(p.delta_in() == doctest::Approx(0.3));
    CHECK(p.delta_out() == doctest::Approx(1.5));
    for (double FusionParams::*field : {&FusionParams::sigma_in, &FusionParams::sigma_out, &FusionParams::gamma_in,
                                        &FusionParams::gamma_out}) {
        FusionParams q;
        q.*field = 0.0;
        CHECK_THROWS_AS(q.validate(), InvalidInput);
        q.*field = -1.0;
        CHECK_THROWS_AS(q.validate(), InvalidInput);
    }
    FusionParams q;
    q.lambda = -0.1;
    CHECK_THROWS_AS(q.validate(), InvalidInput);
    q.lambda = 0.0;
    CHECK_NOTHROW(q.validate());
}

TEST_CASE("pairwise weights") {
    SUBCASE("unit right triangle, lambda 3") {
        PointCloud c;
        for (Point3 p : {Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0), Point3(0, 0, 1)})
            c.push_back(p, Source::aerial, {0});
        const auto dt = delaunay::tetrahedralize(c);
        const auto w = pairwise_energy(dt, 3.0);
        REQUIRE(w.size() == 4);
        int right = 0;
        for (const auto& f : w) {
            CHECK(f.neighbor == INFINITE);
            if (std::abs(f.weight - 1.5) < 1e-12)
                ++right;
        }
        CHECK(right == 3);
    }
    SUBCASE("lambda 0") {
        std::mt19937_64 rng(1);
        for (const auto& f : pairwise_energy(random_dt(rng, 40), 0.0))
            CHECK(f.weight == 0.0);
    }
    SUBCASE("total internal area") {
        std::mt19937_64 rng(2);
        const auto dt = random_dt(rng, 200);
        const double lambda = 0.7;
        double expected = 0.0;
        for (std::uint32_t t = 0; t < dt.num_tets(); ++t)
            for (int i = 0; i < 4; ++i) {
                const std::uint32_t nb = dt.neighbors[t][i];
                if (nb == INFINITE)
                    continue;
                std::vector<Point3> f;
                for (int j = 0; j < 4; ++j)
                    if (j != i)
                        f.push_back(dt.vertices[dt.tets[t][j]]);
                expected += 0.5 * 0.5 * (f[1] - f[0]).cross(f[2] - f[0]).norm();  // seen from both sides
            }
        double internal = 0.0;
        std::size_t hull = 0;
        for (const auto& f : pairwise_energy(dt, lambda)) {
            if (f.neighbor == INFINITE)
                ++hull;
            else
                internal += f.weight;
        }
        CHECK(internal == doctest::Approx(lambda * expected).epsilon(1e-12));
        std::size_t hull_faces = 0;
        for (const auto& nb : dt.neighbors)
            hull_faces += std::count(nb.begin(), nb.end(), INFINITE);
        CHECK(hull == hull_faces);
    }
}

TEST_CASE("votes on untouched tets are zero") {
    std::mt19937_64 rng(3);
    const auto dt = random_dt(rng, 100);
    const auto votes = accumulate_votes(dt, {}, {});
    REQUIRE(votes.size() == dt.num_tets());
    for (std::uint32_t t = 0; t < dt.num_tets(); ++t) {
        CHECK(votes.u_in[t] == 0.0);
        CHECK(votes.u_out[t] == 0.0);
        CHECK_FALSE(votes.has_any_vote(t));
    }
}

TEST_CASE("one ray crossing one tet at 3 sigma_out") {
    std::mt19937_64 rng(4);
    const auto dt = random_dt(rng, 60);
    const Ray ray{0, 0, dt.vertices[0] + Vec3(0.31, 0.17, 4.0)};
    const auto steps = delaunay::walk(dt, ray, delaunay::Direction::toward_sensor, 1e9);
    REQUIRE(steps.size() >= 2);
    REQUIRE(steps.front().tet != INFINITE);
    FusionParams p;
    p.sigma_out = steps.front().exit_distance / 3.0;
    const auto votes = accumulate_votes(dt, {ray}, p);
    CHECK(votes.u_out[steps.front().tet] == doctest::Approx(1.0 - std::exp(-4.5)).epsilon(1e-9));
}

TEST_CASE("votes follow the walk oracle in a slab scene") {
    // Three stacked point layers; one vertical ray from the middle layer.
    PointCloud c;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (double z : {0.0, 0.5, 1.0, 1.5})
        for (int i = 0; i < 40; ++i)
            c.push_back({u(rng), u(rng), z + 0.01 * u(rng)}, Source::aerial, {0});
    c.push_back({0.013, -0.021, 0.5}, Source::aerial, {0});
    const auto dt = delaunay::tetrahedralize(c);
    const std::uint32_t v = dt.point_to_vertex.back();
    const Point3 origin = dt.vertices[v];
    const Point3 sensor = origin + Vec3(0, 0, 10);
    FusionParams p;
    const auto votes = accumulate_votes(dt, {{v, 0, sensor}}, p);

    std::set<std::uint32_t> expected_out;
    for (const auto& ch : testutil::clip_all(dt, origin, sensor, 1e-9))
        expected_out.insert(ch.tet);
    std::set<std::uint32_t> got_out, got_in;
    for (std::uint32_t t = 0; t < dt.num_tets(); ++t) {
        if (votes.u_out[t] > 0.0)
            got_out.insert(t);
        if (votes.u_in[t] > 0.0)
            got_in.insert(t);
    }
    CHECK(got_out == expected_out);
    REQUIRE_FALSE(got_in.empty());
    const Point3 behind = origin - Vec3(0, 0, p.delta_in());
    std::set<std::uint32_t> expected_in;
    for (const auto& ch : testutil::clip_all(dt, origin, behind, 1e-9))
        expected_in.insert(ch.tet);
    CHECK(got_in == expected_in);
    for (auto t : got_in)
        CHECK(centroid(dt, t).z() < origin.z() + 0.5);
}

TEST_CASE("terminal inverted tet gets full score only when the walk stays inside") {
    // Origin deep inside: the walk reaches delta_in inside the hull.
    PointCloud c;
    std::mt19937_64 rng(6);
    for (int i = 0; i < 300; ++i)
        c.push_back(testutil::uniform_point(rng, -1, 1), Source::aerial, {0});
    c.push_back({0.01, 0.02, 0.03}, Source::aerial, {0});
    auto dt = delaunay::tetrahedralize(c);
    const std::uint32_t v = dt.point_to_vertex.back();
    const Ray ray{v, 0, Point3(0.01, 0.02, 5.0)};
    FusionParams p;
    const auto inv = delaunay::walk(dt, ray, delaunay::Direction::inverted, p.delta_in());
    REQUIRE(inv.back().tet != INFINITE);
    auto votes = accumulate_votes(dt, {ray}, p);
    CHECK(votes.u_in[inv.back().tet] == doctest::Approx(1.0));

    // Origin on the bottom hull face: the walk leaves the hull at once.
    const std::uint32_t low = static_cast<std::uint32_t>(
        std::min_element(dt.vertices.begin(), dt.vertices.end(),
                         [](const Point3& a, const Point3& b) { return a.z() < b.z(); }) -
        dt.vertices.begin());
    const Ray up{low, 0, dt.vertices[low] + Vec3(0, 0, 5)};
    const auto out_walk = delaunay::walk(dt, up, delaunay::Direction::inverted, p.delta_in());
    REQUIRE(out_walk.back().tet == INFINITE);
    votes = accumulate_votes(dt, {up}, p);
    for (std::size_t i = 0; i + 1 < out_walk.size(); ++i)
        CHECK(votes.u_in[out_walk[i].tet] ==
              doctest::Approx(ray_score(out_walk[i].exit_distance, p.sigma_in)).epsilon(1e-9));
}

TEST_CASE("vote accumulation does not depend on ray order") {
    std::mt19937_64 rng(7);
    const auto dt = random_dt(rng, 300);
    auto rays = random_rays(rng, dt, 2000);
    const auto a = accumulate_votes(dt, rays, {});
    std::shuffle(rays.begin(), rays.end(), rng);
    const auto b = accumulate_votes(dt, rays, {});
    for (std::uint32_t t = 0; t < dt.num_tets(); ++t) {
        CHECK(a.u_in[t] == doctest::Approx(b.u_in[t]).epsilon(1e-9));
        CHECK(a.u_out[t] == doctest::Approx(b.u_out[t]).epsilon(1e-9));
        CHECK(a.hits[t] == b.hits[t]);
    }
}

TEST_CASE("truncated forward walks only vote near the origin") {
    std::mt19937_64 rng(8);
    const auto dt = random_dt(rng, 400, 3.0);
    FusionParams p;
    p.truncate_out = true;
    for (int trial = 0; trial < 20; ++trial) {
        const auto rays = random_rays(rng, dt, 1);
        const Ray& r = rays[0];
        const auto votes = accumulate_votes(dt, rays, p);
        const auto chords = testutil::clip_all(dt, dt.vertices[r.origin], r.sensor, 0.0);
        for (std::uint32_t t = 0; t < dt.num_tets(); ++t) {
            if (votes.u_out[t] == 0.0)
                continue;
            const auto it = std::find_if(chords.begin(), chords.end(), [&](const auto& ch) { return ch.tet == t; });
            REQUIRE(it != chords.end());
            CHECK(it->enter <= p.delta_out() + 1e-9);
        }
    }
}

TEST_CASE("no rays: everything out and an empty surface") {
    std::mt19937_64 rng(9);
    const auto dt = random_dt(rng, 100);
    const auto lab = fuse(dt, {}, {});
    CHECK(lab.inside == 0);
    for (auto l : lab.labels)
        CHECK(l == Label::out);
    CHECK(lab.energy == 0.0);
    CHECK(extract_surface(dt, lab.labels).empty());
}

TEST_CASE("labeling matches exhaustive enumeration on small triangulations") {
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; checked < 200; ++seed) {
        std::mt19937_64 rng(seed);
        const auto dt = random_dt(rng, 5 + seed % 4);
        if (dt.num_tets() > 15)
            continue;
        ++checked;
        std::uniform_real_distribution<double> u(0, 1);
        std::vector<std::array<double, 2>> unary(dt.num_tets());
        for (auto& e : unary)
            e = {u(rng), u(rng)};
        const double lambda = seed % 5 == 0 ? 0.0 : 2.0 * u(rng);
        const auto lab = solve_labeling(dt, unary, lambda);

        const std::size_t n = dt.num_tets();
        double best = std::numeric_limits<double>::infinity();
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            std::vector<Label> l(n);
            for (std::size_t i = 0; i < n; ++i)
                l[i] = (mask >> i) & 1u ? Label::out : Label::in;
            best = std::min(best, oracle_energy(dt, unary, lambda, l));
        }
        CAPTURE(seed);
        CHECK(lab.energy == doctest::Approx(best).epsilon(1e-9));
        CHECK(oracle_energy(dt, unary, lambda, lab.labels) == doctest::Approx(best).epsilon(1e-9));
        CHECK(labeling_energy(dt, unary, lambda, lab.labels) == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("scaling unaries and lambda together keeps the labeling") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(100 + seed);
        const auto dt = random_dt(rng, 300);
        const auto rays = random_rays(rng, dt, 1500);
        const FusionParams p;
        const auto unary = unary_energy(accumulate_votes(dt, rays, p), p);
        const auto base = solve_labeling(dt, unary, p.lambda);
        for (double k : {0.5, 2.0}) {
            auto scaled = unary;
            for (auto& e : scaled)
                e = {k * e[0], k * e[1]};
            const auto lab = solve_labeling(dt, scaled, k * p.lambda);
            CHECK(lab.labels == base.labels);
            CHECK(lab.energy == doctest::Approx(k * base.energy).epsilon(1e-9));
        }
    }
}

TEST_CASE("sphere with rays from outside") {
    // Unit sphere samples plus an enclosing cube of samples; sensors between them.
    PointCloud c;
    std::vector<Vec3> sensors;
    for (int x : {-1, 0, 1})
        for (int y : {-1, 0, 1})
            for (int z : {-1, 0, 1})
                if (x || y || z)
                    sensors.push_back(Vec3(x, y, z).normalized() * 2.0);
    auto sees = [&](const Point3& p, const Vec3& n, const Vec3& s) {
        if ((s - p).dot(n) <= 0.0)
            return false;
        // Segment must not pass through the open unit ball.
        const Vec3 d = s - p;
        const double t = std::clamp(-p.dot(d) / d.squaredNorm(), 0.0, 1.0);
        return (p + t * d).norm() >= 1.0 - 1e-9;
    };
    auto add = [&](const Point3& p, const Vec3& n) {
        std::vector<std::uint32_t> vis;
        for (std::uint32_t s = 0; s < sensors.size(); ++s)
            if (sees(p, n, sensors[s]))
                vis.push_back(s);
        if (!vis.empty())
            c.push_back(p, Source::aerial, vis);
    };
    const int n_sphere = 3000;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n_sphere; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / n_sphere;
        const double r = std::sqrt(1.0 - z * z);
        const Point3 p(r * std::cos(golden * i), r * std::sin(golden * i), z);
        add(p, p);
    }
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int axis = 0; axis < 3; ++axis)
        for (double side : {-3.0, 3.0})
            for (int i = 0; i < 400; ++i) {
                Point3 p(u(rng), u(rng), u(rng));
                p[axis] = side;
                Vec3 n = Vec3::Zero();
                n[axis] = -side / 3.0;
                add(p, n);
            }
    const auto dt = delaunay::tetrahedralize(c);
    std::vector<Ray> rays;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (auto s : c.visibility[i])
            rays.push_back({static_cast<std::uint32_t>(i), s, sensors[s]});
    const auto lab = fuse(dt, delaunay::remap_rays(dt, rays), {});

    std::size_t agree = 0;
    for (std::uint32_t t = 0; t < dt.num_tets(); ++t)
        agree += (centroid(dt, t).norm() < 1.0) == (lab.labels[t] == Label::in);
    const double rate = double(agree) / dt.num_tets();
    MESSAGE("sphere agreement " << rate);
    CHECK(rate >= 0.99);

    const auto mesh = extract_surface(dt, lab.labels);
    const auto topo = post::validate(mesh);
    CHECK(topo.watertight);
    CHECK(topo.manifold);
    CHECK(topo.oriented);
    CHECK(post::count_components(post::largest_component(mesh)) == 1);
}

TEST_CASE("single in tet") {
    std::mt19937_64 rng(11);
    const auto dt = random_dt(rng, 80);
    std::uint32_t t = 0;
    for (; t < dt.num_tets(); ++t)
        if (std::none_of(dt.neighbors[t].begin(), dt.neighbors[t].end(), [](auto n) { return n == INFINITE; }))
            break;
    REQUIRE(t < dt.num_tets());
    std::vector<Label> labels(dt.num_tets(), Label::out);
    labels[t] = Label::in;
    const auto mesh = extract_surface(dt, labels);
    REQUIRE(mesh.triangle_count() == 4);
    CHECK(mesh.vertex_count() == 4);
    const Point3 c = centroid(dt, t);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& tri = mesh.triangles[i];
        const Point3 fc = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
        CHECK(mesh.triangle_normal(i).dot(fc - c) > 0.0);
    }
    const auto topo = post::validate(mesh);
    CHECK(topo.watertight);
    CHECK(topo.manifold);
    CHECK(topo.components == 1);
}

TEST_CASE("extracted surfaces are closed 2-manifolds for arbitrary labelings") {
    for (std::uint64_t seed = 0; seed < 150; ++seed) {
        CAPTURE(seed);
        std::mt19937_64 rng(seed);
        const auto dt = random_dt(rng, 30 + seed % 200);
        std::bernoulli_distribution coin(0.2 + 0.6 * (seed % 7) / 6.0);
        std::vector<Label> labels(dt.num_tets());
        std::size_t interface = 0;
        for (auto& l : labels)
            l = coin(rng) ? Label::in : Label::out;
        for (std::uint32_t t = 0; t < dt.num_tets(); ++t)
            for (auto nb : dt.neighbors[t])
                if (labels[t] == Label::in && (nb == INFINITE || labels[nb] == Label::out))
                    ++interface;
        const auto mesh = extract_surface(dt, labels);
        CHECK(mesh.triangle_count() == interface);
        const auto topo = post::validate(mesh);
        CHECK(topo.watertight);
        CHECK(topo.manifold);
        CHECK(topo.oriented);
        CHECK(topo.degenerate_triangles == 0);
        // Vertex positions and tags come from the triangulation.
        for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
            CHECK(std::find(dt.vertices.begin(), dt.vertices.end(), mesh.vertices[v]) != dt.vertices.end());
    }
}

TEST_CASE("extract surface rejects a wrong label count") {
    std::mt19937_64 rng(12);
    const auto dt = random_dt(rng, 20);
    CHECK_THROWS_AS(extract_surface(dt, std::vector<Label>(dt.num_tets() + 1, Label::out)), InvalidInput);
}
