#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "proprio/grid_map.hpp"
#include "proprio/plane.hpp"

namespace proprio {

/// Axis-aligned body footprint used to gather map points for the support
/// plane fit.
struct FootprintRect {
    Vec2 center{0.0, 0.0};
    double length = 0.6;  // x extent, meters
    double width = 0.4;   // y extent, meters

    bool contains(const Vec2& p) const {
        return std::abs(p.x() - center.x()) <= 0.5 * length &&
               std::abs(p.y() - center.y()) <= 0.5 * width;
    }
};

/// Probabilistic fusion of this cycle's support triangles into the map.
///
/// Cells whose centers are covered by no triangle are untouched. A covered
/// cell fuses its prior height (weighted by stored confidence, 0 if invalid)
/// with each covering plane's height at the cell center (weighted by the
/// triangle's confidence):
///
///   h <- (c0*h0 + sum_t p_t*h_t) / (c0 + sum_t p_t)
///
/// Confidence fuses 1 - prod(1 - p_t) with the prior confidence through the
/// same weights, clamped to [0,1]. The cell becomes valid.
inline void update_terrain(GridMap2p5& map, std::span<const SupportTriangle> triangles) {
    if (triangles.empty()) return;

    // Bounding box of all triangles in cell indices.
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (const SupportTriangle& tri : triangles) {
        for (const Vec3& v : tri.vertices) {
            min_x = std::min(min_x, v.x());
            max_x = std::max(max_x, v.x());
            min_y = std::min(min_y, v.y());
            max_y = std::max(max_y, v.y());
        }
    }
    const double res = map.resolution();
    const int ix0 = std::max(0, static_cast<int>(std::floor((min_x - map.origin().x()) / res)));
    const int ix1 = std::min(map.width() - 1,
                             static_cast<int>(std::floor((max_x - map.origin().x()) / res)));
    const int iy0 = std::max(0, static_cast<int>(std::floor((min_y - map.origin().y()) / res)));
    const int iy1 = std::min(map.height() - 1,
                             static_cast<int>(std::floor((max_y - map.origin().y()) / res)));

    for (int iy = iy0; iy <= iy1; ++iy) {
        for (int ix = ix0; ix <= ix1; ++ix) {
            const Vec2 center = map.cell_center(ix, iy);
            double weight_sum = 0.0;
            double weighted_height = 0.0;
            double miss_prod = 1.0;
            bool covered = false;
            for (const SupportTriangle& tri : triangles) {
                if (!tri.plane.height_defined()) continue;  // near-vertical, cannot rasterize
                if (!point_under_triangle(center, tri)) continue;
                covered = true;
                weight_sum += tri.prob;
                weighted_height += tri.prob * tri.plane.height_at(center);
                miss_prod *= 1.0 - std::clamp(tri.prob, 0.0, 1.0);
            }
            if (!covered) continue;

            GridCell& c = map.cell(ix, iy);
            const double prior_conf = c.valid ? c.confidence : 0.0;
            const double denom = prior_conf + weight_sum;
            if (denom < 1e-12) continue;  // covered only by zero-confidence planes

            const double tri_conf = 1.0 - miss_prod;
            c.height = (prior_conf * c.height + weighted_height) / denom;
            c.confidence =
                std::clamp((prior_conf * prior_conf + weight_sum * tri_conf) / denom, 0.0, 1.0);
            c.valid = true;
        }
    }
}

/// PCA plane fit over an explicit point set (the core of fit_support_plane).
inline PlaneParams fit_plane_pca(const std::vector<Vec3>& points) {
    const int n = static_cast<int>(points.size());
    if (n < 3) throw InsufficientPoints("plane fit needs >= 3 points, got " + std::to_string(n));

    Vec3 mean = Vec3::Zero();
    for (const Vec3& p : points) mean += p;
    mean /= n;

    Mat3 cov = Mat3::Zero();
    for (const Vec3& p : points) {
        const Vec3 d = p - mean;
        cov += d * d.transpose();
    }
    cov /= (n - 1);

    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 evals = eig.eigenvalues();  // ascending
    if (evals(1) - evals(0) <= 1e-12)
        throw DegeneratePlane("rank-deficient point set in plane fit");

    const Vec3 normal = eig.eigenvectors().col(0);
    PlaneParams plane{normal.x(), normal.y(), normal.z(), -normal.dot(mean), false};
    plane.normalize();
    return plane;
}

/// PCA support plane over the valid cell centers beneath the footprint:
/// covariance of the decentralized points, smallest eigenvector as the
/// normal, d = -n.mean. Throws InsufficientPoints (< 3 valid cells) or
/// DegeneratePlane (two smallest eigenvalues equal within 1e-12).
inline PlaneParams fit_support_plane(const GridMap2p5& map, const FootprintRect& footprint) {
    const double res = map.resolution();
    const int ix0 = std::max(
        0, static_cast<int>(
               std::floor((footprint.center.x() - 0.5 * footprint.length - map.origin().x()) / res)));
    const int ix1 = std::min(
        map.width() - 1,
        static_cast<int>(
            std::floor((footprint.center.x() + 0.5 * footprint.length - map.origin().x()) / res)));
    const int iy0 = std::max(
        0, static_cast<int>(
               std::floor((footprint.center.y() - 0.5 * footprint.width - map.origin().y()) / res)));
    const int iy1 = std::min(
        map.height() - 1,
        static_cast<int>(
            std::floor((footprint.center.y() + 0.5 * footprint.width - map.origin().y()) / res)));

    std::vector<Vec3> points;
    for (int iy = iy0; iy <= iy1; ++iy) {
        for (int ix = ix0; ix <= ix1; ++ix) {
            const GridCell& c = map.cell(ix, iy);
            if (!c.valid) continue;
            const Vec2 center = map.cell_center(ix, iy);
            if (!footprint.contains(center)) continue;
            points.emplace_back(center.x(), center.y(), c.height);
        }
    }
    return fit_plane_pca(points);
}

struct TerrainEstimatorConfig {
    double footprint_length = 0.6;
    double footprint_width = 0.4;
};

/// Runs the per-cycle terrain pipeline: per-leg support triangles from the
/// latest contact positions, probabilistic map fusion, and the PCA support
/// plane beneath the body.
class TerrainEstimator {
  public:
    TerrainEstimator(GridMap2p5 map, TerrainEstimatorConfig cfg = {})
        : map_(std::move(map)), cfg_(cfg) {}

    void record_contact(int leg, const Vec3& position) {
        last_contact_[leg] = position;
        has_contact_[leg] = true;
    }

    bool all_legs_seen() const {
        return has_contact_[0] && has_contact_[1] && has_contact_[2] && has_contact_[3];
    }

    /// One cycle of the triangle/update phases. contact_prob are the
    /// current-instant per-leg contact probabilities; each triangle's
    /// confidence is the mean over its three legs. Degenerate triangles are
    /// skipped for the cycle.
    void update(const std::array<double, 4>& contact_prob) {
        if (!all_legs_seen()) return;
        std::vector<SupportTriangle> triangles;
        triangles.reserve(4);
        static constexpr int kNeighbors[4][2] = {{kFR, kRL}, {kFL, kRR}, {kFL, kRR}, {kFR, kRL}};
        for (int leg = 0; leg < kNumLegs; ++leg) {
            const auto pts = neighbor_points(leg, last_contact_);
            const auto plane = try_compute_plane(pts[0], pts[1], pts[2]);
            if (!plane) continue;
            const double prob = (contact_prob[leg] + contact_prob[kNeighbors[leg][0]] +
                                 contact_prob[kNeighbors[leg][1]]) /
                                3.0;
            triangles.push_back(SupportTriangle{{pts[0], pts[1], pts[2]}, *plane, prob});
        }
        update_terrain(map_, triangles);
    }

    /// Support plane under the body, or nullopt while the map is too sparse.
    std::optional<PlaneParams> support_plane(const Vec2& com_xy) const {
        try {
            return fit_support_plane(
                map_, FootprintRect{com_xy, cfg_.footprint_length, cfg_.footprint_width});
        } catch (const InsufficientPoints&) {
            return std::nullopt;
        } catch (const DegeneratePlane&) {
            return std::nullopt;
        }
    }

    const GridMap2p5& map() const { return map_; }
    GridMap2p5& map() { return map_; }
    GridMap2p5 snapshot() const { return map_; }

  private:
    GridMap2p5 map_;
    TerrainEstimatorConfig cfg_;
    std::array<Vec3, 4> last_contact_{};
    std::array<bool, 4> has_contact_{};
};

}  // namespace proprio
