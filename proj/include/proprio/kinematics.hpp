#pragma once

#include <array>
#include <cmath>

#include "proprio/common.hpp"

namespace proprio {

/// 3-DOF point-foot leg: abduction about x at the hip, then hip and knee
/// pitch about y. `side` is +1 for left legs, -1 for right legs.
struct LegGeometry {
    Vec3 hip_offset{0.0, 0.0, 0.0};  // body frame
    double side = 1.0;
    double l_abd = 0.08;    // lateral offset after the abduction joint
    double l_thigh = 0.21;
    double l_calf = 0.21;
};

/// Forward kinematics and Jacobians for all four legs in the body frame.
/// Joint vectors are (abduction, hip pitch, knee pitch).
class KinematicsModel {
  public:
    KinematicsModel() {
        const double hx = 0.19, hy = 0.049;
        legs_[kFL] = LegGeometry{{+hx, +hy, 0.0}, +1.0};
        legs_[kFR] = LegGeometry{{+hx, -hy, 0.0}, -1.0};
        legs_[kRL] = LegGeometry{{-hx, +hy, 0.0}, +1.0};
        legs_[kRR] = LegGeometry{{-hx, -hy, 0.0}, -1.0};
    }

    const LegGeometry& leg(int i) const { return legs_[i]; }

    /// Foot position in the body frame.
    Vec3 foot_position(int leg_idx, const Vec3& q) const {
        const LegGeometry& leg = legs_[leg_idx];
        const Vec3 abd{0.0, leg.side * leg.l_abd, 0.0};
        const Vec3 thigh = rot_y(q(1)) * Vec3{0.0, 0.0, -leg.l_thigh};
        const Vec3 calf = rot_y(q(1) + q(2)) * Vec3{0.0, 0.0, -leg.l_calf};
        return leg.hip_offset + rot_x(q(0)) * (abd + thigh + calf);
    }

    /// d(foot_position)/dq, body frame.
    Mat3 jacobian(int leg_idx, const Vec3& q) const {
        const LegGeometry& leg = legs_[leg_idx];
        const Vec3 abd{0.0, leg.side * leg.l_abd, 0.0};
        const Vec3 thigh = rot_y(q(1)) * Vec3{0.0, 0.0, -leg.l_thigh};
        const Vec3 calf = rot_y(q(1) + q(2)) * Vec3{0.0, 0.0, -leg.l_calf};
        const Mat3 rx = rot_x(q(0));

        Mat3 j;
        // d/dq0: derivative of Rx(q0) acting on the whole chain.
        j.col(0) = skew(Vec3::UnitX()) * rx * (abd + thigh + calf);
        // d/dq1: thigh and calf both rotate about the hip pitch axis.
        j.col(1) = rx * (skew(Vec3::UnitY()) * (thigh + calf));
        // d/dq2: only the calf rotates about the knee axis.
        j.col(2) = rx * (skew(Vec3::UnitY()) * calf);
        return j;
    }

    /// Damped Newton inverse kinematics in the body frame. Throws if the
    /// target is unreachable within tolerance.
    Vec3 inverse_kinematics(int leg_idx, const Vec3& target, const Vec3& q_init) const {
        Vec3 q = q_init;
        for (int iter = 0; iter < 100; ++iter) {
            const Vec3 err = foot_position(leg_idx, q) - target;
            if (err.norm() < 1e-12) return q;
            const Mat3 j = jacobian(leg_idx, q);
            const Mat3 jtj = j.transpose() * j + 1e-10 * Mat3::Identity();
            q -= jtj.ldlt().solve(j.transpose() * err);
        }
        if ((foot_position(leg_idx, q) - target).norm() < 1e-9) return q;
        throw std::runtime_error("inverse kinematics did not converge (target unreachable?)");
    }

    /// Joint configuration with the foot below the abduction link at the
    /// given hip-to-foot drop. Used to seed IK and place initial stances.
    Vec3 neutral_pose(int leg_idx, double drop = 0.32) const {
        const LegGeometry& leg = legs_[leg_idx];
        const double reach = std::min(drop, leg.l_thigh + leg.l_calf - 1e-3);
        // Law of cosines for the knee, symmetric bend for the hip seed.
        const double cos_knee = (leg.l_thigh * leg.l_thigh + leg.l_calf * leg.l_calf -
                                 reach * reach) /
                                (2.0 * leg.l_thigh * leg.l_calf);
        const double knee = -(M_PI - std::acos(std::clamp(cos_knee, -1.0, 1.0)));
        return {0.0, -0.5 * knee, knee};
    }

    /// Nominal foot position under the hip at the given drop.
    Vec3 nominal_foot(int leg_idx, double drop = 0.32) const {
        const LegGeometry& leg = legs_[leg_idx];
        return leg.hip_offset + Vec3{0.0, leg.side * leg.l_abd, -drop};
    }

  private:
    std::array<LegGeometry, 4> legs_;
};

}  // namespace proprio
