#include "airfuse/cloud_ops.hpp"

#include "airfuse/kdtree.hpp"
#include "airfuse/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace airfuse {

PointCloud estimate_normals(PointCloud cloud, const SensorSet& sensors, std::size_t k) {
    if (cloud.size() < k + 1)
        throw InvalidInput("estimate_normals: need at least k + 1 = " + std::to_string(k + 1) + " points, have " +
                           std::to_string(cloud.size()));
    const KdTree tree(cloud.points);
    cloud.normals.assign(cloud.size(), Vec3::Zero());
    parallel_for(cloud.size(), [&](std::size_t i) {
        thread_local std::vector<Neighbor> nbrs;
        tree.knn(cloud.points[i], k + 1, nbrs);
        Vec3 mean = Vec3::Zero();
        for (const auto& n : nbrs)
            mean += cloud.points[n.index];
        mean /= static_cast<double>(nbrs.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (const auto& n : nbrs) {
            const Vec3 d = cloud.points[n.index] - mean;
            cov += d * d.transpose();
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
        const Vec3 ev = eig.eigenvalues();
        if (!(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2])
            return;  // collinear or coincident neighborhood
        Vec3 normal = eig.eigenvectors().col(0).normalized();

        if (!cloud.visibility[i].empty()) {
            Vec3 view = Vec3::Zero();
            for (std::uint32_t s : cloud.visibility[i])
                view += sensors.positions.at(s);
            view = view / static_cast<double>(cloud.visibility[i].size()) - cloud.points[i];
            if (normal.dot(view) < 0.0)
                normal = -normal;
        }
        cloud.normals[i] = normal;
    });
    return cloud;
}

namespace {

constexpr std::int64_t kVoxelRange = 1 << 20;

std::uint64_t voxel_key(const Point3& p, double voxel_size) {
    std::uint64_t key = 0;
    for (int k = 0; k < 3; ++k) {
        const double idx = std::floor(p[k] / voxel_size);
        if (!(idx >= -kVoxelRange && idx < kVoxelRange))
            throw InvalidInput("decimate: voxel index out of the 21-bit range per axis");
        key = (key << 21) | static_cast<std::uint64_t>(static_cast<std::int64_t>(idx) + kVoxelRange);
    }
    return key;
}

struct VoxelAccumulator {
    Vec3 sum = Vec3::Zero();
    std::size_t count = 0;
    std::size_t street = 0;
    std::vector<std::uint32_t> visibility;
};

}  // namespace

PointCloud decimate(const PointCloud& cloud, double voxel_size) {
    if (!(voxel_size >= 0.0) || !std::isfinite(voxel_size))
        throw InvalidInput("decimate: voxel size must be finite and >= 0");
    if (voxel_size == 0.0)
        return cloud;

    std::unordered_map<std::uint64_t, std::uint32_t> slot_of;
    std::vector<VoxelAccumulator> voxels;
    slot_of.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto [it, inserted] =
            slot_of.try_emplace(voxel_key(cloud.points[i], voxel_size), static_cast<std::uint32_t>(voxels.size()));
        if (inserted)
            voxels.emplace_back();
        auto& v = voxels[it->second];
        v.sum += cloud.points[i];
        ++v.count;
        if (cloud.source[i] == Source::street)
            ++v.street;
        v.visibility.insert(v.visibility.end(), cloud.visibility[i].begin(), cloud.visibility[i].end());
    }

    PointCloud out;
    out.reserve(voxels.size());
    for (auto& v : voxels) {
        std::sort(v.visibility.begin(), v.visibility.end());
        v.visibility.erase(std::unique(v.visibility.begin(), v.visibility.end()), v.visibility.end());
        const Source tag = 2 * v.street >= v.count ? Source::street : Source::aerial;
        out.push_back(v.sum / static_cast<double>(v.count), tag, std::move(v.visibility));
    }
    return out;
}

RaySet build_rays(const PointCloud& cloud, const SensorSet& sensors, bool reduce_to_one) {
    if (reduce_to_one && !cloud.has_normals())
        throw InvalidInput("build_rays: one-ray-per-point selection needs normals");
    RaySet set;
    set.rays.reserve(reduce_to_one ? cloud.size() : cloud.size() * 4);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point3& p = cloud.points[i];
        const auto origin = static_cast<std::uint32_t>(i);
        bool any = false;
        if (!reduce_to_one) {
            for (std::uint32_t s : cloud.visibility[i]) {
                const Point3& sensor = sensors.positions.at(s);
                if (sensor == p)
                    continue;
                set.rays.push_back({origin, s, sensor});
                any = true;
            }
        } else {
            // Visibility lists are not required to be sorted; scan in ascending
            // sensor order so ties resolve to the lowest index.
            std::vector<std::uint32_t> vis = cloud.visibility[i];
            std::sort(vis.begin(), vis.end());
            double best = -std::numeric_limits<double>::infinity();
            std::uint32_t best_sensor = 0;
            for (std::uint32_t s : vis) {
                const Vec3 d = sensors.positions.at(s) - p;
                const double len = d.norm();
                if (len == 0.0)
                    continue;
                const double c = cloud.normals[i].dot(d) / len;
                if (c > best) {
                    best = c;
                    best_sensor = s;
                    any = true;
                }
            }
            if (any)
                set.rays.push_back({origin, best_sensor, sensors.positions[best_sensor]});
        }
        if (!any)
            ++set.skipped_points;
    }
    return set;
}

}  // namespace airfuse
