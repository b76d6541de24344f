#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "proprio/common.hpp"

namespace proprio {

/// Plane k1*x + k2*y + k3*z + d = 0. When `normalized` is set the normal
/// (k1,k2,k3) has unit length and k3 > 0 (upward) unless the plane is
/// near-vertical.
struct PlaneParams {
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 1.0;
    double d = 0.0;
    bool normalized = true;

    Vec3 normal() const { return {k1, k2, k3}; }

    /// Scales to unit normal and flips so k3 > 0 where meaningful.
    void normalize() {
        const double n = normal().norm();
        if (n < 1e-15) throw DegeneratePlane("plane normal has zero length");
        double s = 1.0 / n;
        if (k3 * s < 0.0 && std::abs(k3 * s) > 1e-12) s = -s;
        k1 *= s;
        k2 *= s;
        k3 *= s;
        d *= s;
        normalized = true;
    }

    /// Signed point-plane distance (true distance only when normalized).
    double signed_distance(const Vec3& p) const { return k1 * p.x() + k2 * p.y() + k3 * p.z() + d; }

    bool height_defined(double tol = 1e-6) const { return std::abs(k3) > tol; }

    /// z solving the plane equation at (x, y); requires height_defined().
    double height_at(double x, double y) const { return (-k1 * x - k2 * y - d) / k3; }
    double height_at(const Vec2& xy) const { return height_at(xy.x(), xy.y()); }
};

/// Angle between two plane normals in radians (orientation-insensitive).
inline double plane_angle(const PlaneParams& a, const PlaneParams& b) {
    const double c = std::abs(a.normal().normalized().dot(b.normal().normalized()));
    return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Cross-product plane through three points: K = (p2-p1) x (p3-p1),
/// D = -K.p1, then normalized. Throws DegeneratePlane for collinear points
/// (cross-product norm < 1e-9); callers building support triangles skip the
/// triangle for the current update.
inline PlaneParams compute_plane(const Vec3& p1, const Vec3& p2, const Vec3& p3) {
    const Vec3 k = (p2 - p1).cross(p3 - p1);
    if (k.norm() < 1e-9) throw DegeneratePlane("collinear support points");
    PlaneParams plane{k.x(), k.y(), k.z(), -k.dot(p1), false};
    plane.normalize();
    return plane;
}

inline std::optional<PlaneParams> try_compute_plane(const Vec3& p1, const Vec3& p2, const Vec3& p3) {
    const Vec3 k = (p2 - p1).cross(p3 - p1);
    if (k.norm() < 1e-9) return std::nullopt;
    PlaneParams plane{k.x(), k.y(), k.z(), -k.dot(p1), false};
    plane.normalize();
    return plane;
}

/// One leg's contact support triangle with its local plane and confidence.
struct SupportTriangle {
    std::array<Vec3, 3> vertices;
    PlaneParams plane;
    double prob = 0.0;
};

inline SupportTriangle make_support_triangle(const Vec3& p1, const Vec3& p2, const Vec3& p3,
                                             double prob) {
    return SupportTriangle{{p1, p2, p3}, compute_plane(p1, p2, p3), prob};
}

/// The leg itself plus its two lateral/longitudinal neighbors:
/// FL<->{FR,RL}, FR<->{FL,RR}, RL<->{FL,RR}, RR<->{FR,RL}.
inline std::array<Vec3, 3> neighbor_points(int leg_idx, const std::array<Vec3, 4>& foot_positions) {
    if (leg_idx < 0 || leg_idx >= kNumLegs) throw std::invalid_argument("leg index out of range");
    static constexpr int kNeighbors[4][2] = {{kFR, kRL}, {kFL, kRR}, {kFL, kRR}, {kFR, kRL}};
    return {foot_positions[leg_idx], foot_positions[kNeighbors[leg_idx][0]],
            foot_positions[kNeighbors[leg_idx][1]]};
}

/// Closed point-in-triangle test on the xy projections; boundary counts as
/// inside (signed-area tests with tolerance 1e-12).
inline bool point_under_triangle(const Vec2& pos_xy, const SupportTriangle& tri) {
    constexpr double kTol = 1e-12;
    const auto cross2 = [](const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); };
    const Vec2 a = tri.vertices[0].head<2>();
    const Vec2 b = tri.vertices[1].head<2>();
    const Vec2 c = tri.vertices[2].head<2>();
    const double s1 = cross2(b - a, pos_xy - a);
    const double s2 = cross2(c - b, pos_xy - b);
    const double s3 = cross2(a - c, pos_xy - c);
    const bool all_nonneg = s1 >= -kTol && s2 >= -kTol && s3 >= -kTol;
    const bool all_nonpos = s1 <= kTol && s2 <= kTol && s3 <= kTol;
    return all_nonneg || all_nonpos;
}

}  // namespace proprio
