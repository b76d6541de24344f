#pragma once

#include <array>
#include <optional>

#include "proprio/contact_estimator.hpp"
#include "proprio/kinematics.hpp"
#include "proprio/plane.hpp"

namespace proprio {

/// One proprioceptive sample: IMU specific force and rates in the body
/// frame, body-to-world orientation, per-leg joints (leg-major, 3 per leg)
/// and raw foot force readings.
struct ProprioSample {
    Vec3 imu_accel = Vec3::Zero();
    Vec3 imu_omega = Vec3::Zero();
    Mat3 orientation = Mat3::Identity();
    Eigen::Matrix<double, 12, 1> joint_angles = Eigen::Matrix<double, 12, 1>::Zero();
    Eigen::Matrix<double, 12, 1> joint_velocities = Eigen::Matrix<double, 12, 1>::Zero();
    Vec4 foot_forces = Vec4::Zero();
    double timestamp = 0.0;

    bool finite() const {
        return all_finite(imu_accel) && all_finite(imu_omega) && all_finite(orientation) &&
               all_finite(joint_angles) && all_finite(joint_velocities) &&
               all_finite(foot_forces) && std::isfinite(timestamp);
    }
};

struct LegContact {
    double prob = 0.0;
    bool in_contact = false;
};

/// Per-step process/measurement noise magnitudes and the contact-adaptive
/// inflation factors.
struct KfConfig {
    double q_pos = 1e-4;
    double q_vel = 1e-3;
    double q_foot = 1e-6;
    double swing_q_factor = 1e3;
    double r_relpos = 1e-4;
    double r_footvel = 1e-3;
    // The foot-height channel is a slow absolute anchor. It must stay much
    // looser than the kinematic rows or it drags footholds toward the
    // support plane on slope transitions faster than leg kinematics can
    // correct them.
    double r_footz = 1e-2;
    // Swing rows must be effectively ignored: with the swing-leg foot model
    // the residuals are systematically biased, and a mild inflation lets
    // them ratchet the CoM estimate through the covariance coupling.
    double swing_r_factor = 1e8;
    double condition_bound = 1e12;
};

/// 18-dim filter state: CoM position, CoM velocity, four foot positions,
/// all world frame, with the joint covariance.
struct EstimatorState {
    Vec3 p_com = Vec3::Zero();
    Vec3 v_com = Vec3::Zero();
    std::array<Vec3, 4> p_feet{};
    Eigen::Matrix<double, 18, 18> cov = Eigen::Matrix<double, 18, 18>::Identity() * 1e-4;

    Eigen::Matrix<double, 18, 1> x() const {
        Eigen::Matrix<double, 18, 1> v;
        v.segment<3>(0) = p_com;
        v.segment<3>(3) = v_com;
        for (int i = 0; i < 4; ++i) v.segment<3>(6 + 3 * i) = p_feet[i];
        return v;
    }

    void set_x(const Eigen::Matrix<double, 18, 1>& v) {
        p_com = v.segment<3>(0);
        v_com = v.segment<3>(3);
        for (int i = 0; i < 4; ++i) p_feet[i] = v.segment<3>(6 + 3 * i);
    }
};

/// 28-dim observation: per-leg CoM-to-foot relative position (12), per-leg
/// relative foot velocity (12), per-leg foot height (4).
struct ObservationVector {
    std::array<Vec3, 4> rel_pos{};
    std::array<Vec3, 4> foot_vel{};
    Vec4 foot_z = Vec4::Zero();

    Eigen::Matrix<double, 28, 1> stacked() const {
        Eigen::Matrix<double, 28, 1> z;
        for (int i = 0; i < 4; ++i) z.segment<3>(3 * i) = rel_pos[i];
        for (int i = 0; i < 4; ++i) z.segment<3>(12 + 3 * i) = foot_vel[i];
        z.segment<4>(24) = foot_z;
        return z;
    }
};

/// Kalman filter over base and foot positions with terrain- and
/// contact-informed foot-height observations.
class StateEstimator {
  public:
    StateEstimator(KinematicsModel kin, KfConfig cfg, EstimatorState init)
        : kin_(std::move(kin)), cfg_(cfg), state_(std::move(init)) {}

    const EstimatorState& state() const { return state_; }
    void set_state(const EstimatorState& s) { state_ = s; }
    const KinematicsModel& kinematics() const { return kin_; }

    /// Propagates CoM by the IMU specific force plus gravity, holds contact
    /// feet, advances swing feet by v_com minus the world-frame joint
    /// velocity term, and grows the covariance with contact-adaptive Q.
    void predict(const ProprioSample& sample, const std::array<LegContact, 4>& contact,
                 double dt) {
        if (!sample.finite()) throw NonFiniteInput("non-finite proprioceptive sample");

        const Mat3& rot = sample.orientation;
        const Vec3 accel_w = rot * sample.imu_accel + Vec3{0.0, 0.0, -kGravity};

        Eigen::Matrix<double, 18, 18> a = Eigen::Matrix<double, 18, 18>::Identity();
        a.block<3, 3>(0, 3) = Mat3::Identity() * dt;
        Eigen::Matrix<double, 18, 1> input = Eigen::Matrix<double, 18, 1>::Zero();
        input.segment<3>(0) = 0.5 * dt * dt * accel_w;
        input.segment<3>(3) = dt * accel_w;
        for (int i = 0; i < 4; ++i) {
            if (contact[i].in_contact) continue;
            // Swing feet follow the base plus the world-frame leg motion, so
            // the state tracks the physical foot through the swing; the
            // contact position channel and the terrain update both read it.
            a.block<3, 3>(6 + 3 * i, 3) = Mat3::Identity() * dt;
            const Vec3 qd = sample.joint_velocities.segment<3>(3 * i);
            const Mat3 jac = kin_.jacobian(i, sample.joint_angles.segment<3>(3 * i));
            const Vec3 foot_body = rot.transpose() * (state_.p_feet[i] - state_.p_com);
            input.segment<3>(6 + 3 * i) =
                dt * (rot * (sample.imu_omega.cross(foot_body) + jac * qd));
        }
        const Eigen::Matrix<double, 18, 1> x_new = a * state_.x() + input;

        Eigen::Matrix<double, 18, 18> q = Eigen::Matrix<double, 18, 18>::Zero();
        q.block<3, 3>(0, 0) = Mat3::Identity() * cfg_.q_pos;
        q.block<3, 3>(3, 3) = Mat3::Identity() * cfg_.q_vel;
        for (int i = 0; i < 4; ++i) {
            const double scale = contact[i].in_contact ? 1.0 : cfg_.swing_q_factor;
            q.block<3, 3>(6 + 3 * i, 6 + 3 * i) = Mat3::Identity() * (cfg_.q_foot * scale);
        }

        state_.cov = a * state_.cov * a.transpose() + q;
        state_.set_x(x_new);
    }

    /// Measurement vector assembly. The foot-height entries blend the
    /// current foot estimate with the support-plane height at the foot's
    /// estimated xy, weighted by the contact probability. Throws
    /// PlaneTooSteep for |k3| <= 0.1; callers then retry without a plane,
    /// which zeroes the terrain term of the blend.
    ObservationVector build_observation(const ProprioSample& sample,
                                        const std::optional<PlaneParams>& plane,
                                        const std::array<LegContact, 4>& contact) const {
        if (plane && std::abs(plane->k3) <= 0.1)
            throw PlaneTooSteep("support plane too steep for height observation");

        const Mat3& rot = sample.orientation;
        ObservationVector obs;
        for (int i = 0; i < 4; ++i) {
            const Vec3 q = sample.joint_angles.segment<3>(3 * i);
            const Vec3 qd = sample.joint_velocities.segment<3>(3 * i);
            const Vec3 foot_b = kin_.foot_position(i, q);
            obs.rel_pos[i] = -(rot * foot_b);
            obs.foot_vel[i] = rot * (sample.imu_omega.cross(foot_b) + kin_.jacobian(i, q) * qd);

            // The terrain term only carries information while the leg is in
            // contact; swing legs fall back to the prior (zero innovation).
            const double foot_z_prior = state_.p_feet[i].z();
            if (plane && contact[i].in_contact) {
                const double z_est =
                    plane->height_at(state_.p_feet[i].x(), state_.p_feet[i].y());
                const double p = std::clamp(contact[i].prob, 0.0, 1.0);
                obs.foot_z(i) = (1.0 - p) * foot_z_prior + p * z_est;
            } else {
                obs.foot_z(i) = foot_z_prior;
            }
        }
        return obs;
    }

    /// Standard gain/update/covariance step with contact-adaptive R; the
    /// covariance is symmetrized afterwards.
    void update(const ObservationVector& obs, const std::array<LegContact, 4>& contact) {
        Eigen::Matrix<double, 28, 18> h = Eigen::Matrix<double, 28, 18>::Zero();
        Eigen::Matrix<double, 28, 1> r_diag;
        for (int i = 0; i < 4; ++i) {
            const double swing = contact[i].in_contact ? 1.0 : cfg_.swing_r_factor;
            h.block<3, 3>(3 * i, 0) = Mat3::Identity();
            h.block<3, 3>(3 * i, 6 + 3 * i) = -Mat3::Identity();
            r_diag.segment<3>(3 * i).setConstant(cfg_.r_relpos * swing);
            h.block<3, 3>(12 + 3 * i, 3) = -Mat3::Identity();
            r_diag.segment<3>(12 + 3 * i).setConstant(cfg_.r_footvel * swing);
            h(24 + i, 6 + 3 * i + 2) = 1.0;
            r_diag(24 + i) = cfg_.r_footz * swing;
        }

        const Eigen::Matrix<double, 18, 18>& p = state_.cov;
        Eigen::Matrix<double, 28, 28> s = h * p * h.transpose();
        s.diagonal() += r_diag;

        const auto ldlt = s.ldlt();
        const auto& d = ldlt.vectorD();
        const double d_max = d.maxCoeff();
        const double d_min = d.minCoeff();
        if (!(d_min > 0.0) || d_max / d_min > cfg_.condition_bound)
            throw SingularInnovation("innovation covariance not invertible within bound");

        const Eigen::Matrix<double, 28, 1> innovation = obs.stacked() - h * state_.x();
        // K = P H^T S^-1, via S K^T = H P^T.
        const Eigen::Matrix<double, 18, 28> gain =
            ldlt.solve(h * p.transpose()).transpose();

        Eigen::Matrix<double, 18, 1> x = state_.x() + gain * innovation;
        state_.set_x(x);
        Eigen::Matrix<double, 18, 18> p_new =
            (Eigen::Matrix<double, 18, 18>::Identity() - gain * h) * p;
        state_.cov = 0.5 * (p_new + p_new.transpose());
    }

  private:
    KinematicsModel kin_;
    KfConfig cfg_;
    EstimatorState state_;
};

}  // namespace proprio
