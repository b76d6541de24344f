#pragma once

#include <random>

#include "proprio/sim/scenario.hpp"
#include "proprio/state_estimator.hpp"

namespace proprio {

/// Deterministic noise source: mt19937_64 with an in-house Box-Muller so
/// the stream does not depend on standard-library distribution internals.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

    double gauss(double sigma) { return sigma * gauss(); }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Ground-truth quantities for one tick, before sensor synthesis.
struct TruthTick {
    double t = 0.0;
    Mat3 orientation = Mat3::Identity();
    Vec3 accel_body = Vec3::Zero();  // specific force
    Vec3 omega_body = Vec3::Zero();
    Eigen::Matrix<double, 12, 1> joint_angles = Eigen::Matrix<double, 12, 1>::Zero();
    Eigen::Matrix<double, 12, 1> joint_velocities = Eigen::Matrix<double, 12, 1>::Zero();
    Vec4 forces = Vec4::Zero();  // clean nominal readings
    std::array<bool, 4> true_contact{};
};

/// Adds seeded sensor noise and applies pseudo-contact force overrides:
/// inside a scheduled window on a leg in true stance, the measured force is
/// replaced by a sub-threshold value uniform in [0, 0.6 f_mid].
inline ProprioSample synthesize_sensors(const TruthTick& truth, const NoiseConfig& noise,
                                        const std::vector<PseudoContactWindow>& pseudo,
                                        double f_mid, Rng& rng) {
    ProprioSample sample;
    sample.timestamp = truth.t;
    sample.orientation = truth.orientation;
    for (int i = 0; i < 3; ++i) {
        sample.imu_accel(i) = truth.accel_body(i) + rng.gauss(noise.accel_sigma);
        sample.imu_omega(i) = truth.omega_body(i) + rng.gauss(noise.gyro_sigma);
    }
    for (int j = 0; j < 12; ++j) {
        sample.joint_angles(j) = truth.joint_angles(j) + rng.gauss(noise.encoder_sigma);
        sample.joint_velocities(j) = truth.joint_velocities(j) + rng.gauss(noise.encoder_sigma);
    }
    for (int leg = 0; leg < 4; ++leg) {
        bool overridden = false;
        if (truth.true_contact[leg]) {
            for (const PseudoContactWindow& w : pseudo) {
                if (w.active(leg, truth.t)) {
                    sample.foot_forces(leg) = rng.uniform(0.0, 0.6 * f_mid);
                    overridden = true;
                    break;
                }
            }
        }
        if (!overridden)
            sample.foot_forces(leg) =
                std::max(0.0, truth.forces(leg) + rng.gauss(noise.force_sigma));
    }
    return sample;
}

}  // namespace proprio
