#pragma once

#include <array>
#include <cmath>

#include "proprio/kinematics.hpp"
#include "proprio/sim/scenario.hpp"
#include "proprio/srb_mpc.hpp"

namespace proprio {

inline double gait_phase(const GaitParams& gait, int leg, double t) {
    const double raw = t / gait.period + gait.offsets[leg] + gait.phase_origin;
    return raw - std::floor(raw);
}

inline bool gait_stance(const GaitParams& gait, int leg, double t) {
    return gait_phase(gait, leg, t) < gait.duty;
}

/// Stance flags over an MPC horizon starting at t0.
inline GaitSchedule horizon_schedule(const GaitParams& gait, double t0, double dt, int steps) {
    GaitSchedule schedule;
    schedule.period = gait.period;
    schedule.duty = gait.duty;
    schedule.stance.resize(steps);
    for (int k = 0; k < steps; ++k) {
        const double t = t0 + k * dt;
        for (int leg = 0; leg < 4; ++leg) schedule.stance[k][leg] = gait_stance(gait, leg, t);
    }
    // Duty/offset combinations that leave a step with no stance leg are a
    // scenario authoring error; surface it here.
    schedule.validate();
    return schedule;
}

/// Nominal stance force shape over the stance phase s in [0,1): sinusoidal
/// ramp-up and ramp-down over the first/last 15%.
inline double stance_force_shape(double s, double ramp_fraction = 0.15) {
    if (s < 0.0 || s >= 1.0) return 0.0;
    if (s < ramp_fraction) return std::sin(0.5 * M_PI * s / ramp_fraction);
    if (s > 1.0 - ramp_fraction) return std::sin(0.5 * M_PI * (1.0 - s) / ramp_fraction);
    return 1.0;
}

/// Kinematic swing/stance generator: stance feet pinned to the terrain,
/// swing feet on a smooth lift-and-place profile whose touchdown height is
/// the true terrain height at the foothold. Targets are fixed at liftoff,
/// so the trajectory is deterministic given the CoM history.
class GaitGenerator {
  public:
    GaitGenerator(const GaitParams& gait, const TerrainModel* terrain,
                  const KinematicsModel* kin, const Vec2& com_xy, double yaw)
        : gait_(gait), terrain_(terrain), kin_(kin) {
        for (int leg = 0; leg < 4; ++leg) {
            const Vec3 nominal = kin_->nominal_foot(leg);
            const Vec2 xy = com_xy + rot2(yaw) * Vec2{nominal.x(), nominal.y()};
            feet_[leg] = Vec3{xy.x(), xy.y(), terrain_->height(xy)};
            stance_target_[leg] = feet_[leg];
            liftoff_[leg] = feet_[leg];
            cycle_[leg] = -1;
        }
    }

    /// Advances the per-leg state machines to time t.
    void update(double t, const Vec2& com_xy, double yaw, const Vec2& v_cmd) {
        for (int leg = 0; leg < 4; ++leg) {
            const double phase = gait_phase(gait_, leg, t);
            const bool stance = phase < gait_.duty;
            if (stance) {
                feet_[leg] = stance_target_[leg];
                in_contact_[leg] = true;
                continue;
            }
            in_contact_[leg] = false;
            const long cycle = static_cast<long>(
                std::floor(t / gait_.period + gait_.offsets[leg] + gait_.phase_origin));
            if (cycle != cycle_[leg]) {
                // Liftoff: freeze the departure point and plan the touchdown.
                cycle_[leg] = cycle;
                liftoff_[leg] = stance_target_[leg];
                const double remaining = (1.0 - phase) * gait_.period;
                const Vec3 nominal = kin_->nominal_foot(leg);
                const Vec2 com_at_touchdown = com_xy + v_cmd * remaining;
                const Vec2 target_xy = com_at_touchdown +
                                       rot2(yaw) * Vec2{nominal.x(), nominal.y()} +
                                       v_cmd * (0.5 * gait_.duty * gait_.period);
                stance_target_[leg] =
                    Vec3{target_xy.x(), target_xy.y(), terrain_->height(target_xy)};
            }
            const double s = (phase - gait_.duty) / (1.0 - gait_.duty);
            const double s_xy = s * s * (3.0 - 2.0 * s);  // smoothstep
            const Vec3& a = liftoff_[leg];
            const Vec3& b = stance_target_[leg];
            feet_[leg].head<2>() = a.head<2>() + (b.head<2>() - a.head<2>()) * s_xy;
            feet_[leg].z() = a.z() + (b.z() - a.z()) * s_xy +
                             gait_.swing_height * std::sin(M_PI * s);
        }
    }

    const std::array<Vec3, 4>& feet() const { return feet_; }
    const std::array<bool, 4>& contacts() const { return in_contact_; }

    /// Clean per-leg force reading before noise/pseudo injection.
    double nominal_force(int leg, double t, double plateau) const {
        const double phase = gait_phase(gait_, leg, t);
        if (phase >= gait_.duty) return 0.0;
        return plateau * stance_force_shape(phase / gait_.duty);
    }

  private:
    static Eigen::Matrix2d rot2(double yaw) {
        Eigen::Matrix2d r;
        r << std::cos(yaw), -std::sin(yaw), std::sin(yaw), std::cos(yaw);
        return r;
    }

    GaitParams gait_;
    const TerrainModel* terrain_;
    const KinematicsModel* kin_;
    std::array<Vec3, 4> feet_{};
    std::array<Vec3, 4> stance_target_{};
    std::array<Vec3, 4> liftoff_{};
    std::array<bool, 4> in_contact_{true, true, true, true};
    std::array<long, 4> cycle_{};
};

}  // namespace proprio
