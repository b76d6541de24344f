#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace proprio {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using VecX = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;

inline constexpr double kGravity = 9.81;
inline constexpr int kNumLegs = 4;

/// Leg indices follow body topology: front-left, front-right, rear-left, rear-right.
enum Leg : int { kFL = 0, kFR = 1, kRL = 2, kRR = 3 };

struct DegeneratePlane : std::runtime_error {
    explicit DegeneratePlane(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientPoints : std::runtime_error {
    explicit InsufficientPoints(const std::string& what) : std::runtime_error(what) {}
};

struct PlaneTooSteep : std::runtime_error {
    explicit PlaneTooSteep(const std::string& what) : std::runtime_error(what) {}
};

struct NonFiniteInput : std::runtime_error {
    explicit NonFiniteInput(const std::string& what) : std::runtime_error(what) {}
};

struct SingularInnovation : std::runtime_error {
    explicit SingularInnovation(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : std::runtime_error {
    explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct ScenarioInvalid : std::runtime_error {
    explicit ScenarioInvalid(const std::string& what) : std::runtime_error(what) {}
};

inline double deg2rad(double deg) { return deg * M_PI / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / M_PI; }

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

inline Mat3 skew(const Vec3& v) {
    Mat3 s;
    s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return s;
}

inline Mat3 rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r << 1, 0, 0, 0, c, -s, 0, s, c;
    return r;
}

inline Mat3 rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r << c, 0, s, 0, 1, 0, -s, 0, c;
    return r;
}

inline Mat3 rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

/// Body-to-world rotation from (roll, pitch, yaw). Pitch is positive nose-up,
/// so the rotation is Rz(yaw) * Ry(-pitch) * Rx(roll). Slope-angle extraction
/// in safety_cbf.hpp uses the same convention.
inline Mat3 euler_to_rot(double roll, double pitch, double yaw) {
    return rot_z(yaw) * rot_y(-pitch) * rot_x(roll);
}

inline Mat3 euler_to_rot(const Vec3& rpy) { return euler_to_rot(rpy.x(), rpy.y(), rpy.z()); }

/// Rotation-matrix logarithm as axis*angle; small-angle safe.
inline Vec3 rot_log(const Mat3& r) {
    const double cos_angle = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double angle = std::acos(cos_angle);
    const Vec3 skew_part{r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)};
    if (angle < 1e-9) return 0.5 * skew_part;
    return skew_part * (angle / (2.0 * std::sin(angle)));
}

/// Inverse of euler_to_rot for |pitch| < pi/2.
inline Vec3 rot_to_euler(const Mat3& r) {
    const double pitch = std::asin(std::clamp(r(2, 0), -1.0, 1.0));
    const double roll = std::atan2(r(2, 1), r(2, 2));
    const double yaw = std::atan2(r(1, 0), r(0, 0));
    return {roll, pitch, yaw};
}

}  // namespace proprio
