#include <catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "proprio/state_estimator.hpp"

using namespace proprio;

namespace {

EstimatorState standing_state() {
    EstimatorState s;
    s.p_com = {0.0, 0.0, 0.32};
    s.v_com = Vec3::Zero();
    const KinematicsModel kin;
    for (int i = 0; i < 4; ++i) {
        s.p_feet[i] = kin.nominal_foot(i);
        s.p_feet[i].z() = 0.0;
    }
    s.cov = Eigen::Matrix<double, 18, 18>::Identity() * 1e-4;
    return s;
}

ProprioSample standing_sample(const KinematicsModel& kin, const EstimatorState& s) {
    ProprioSample sample;
    sample.orientation = Mat3::Identity();
    sample.imu_accel = Vec3{0.0, 0.0, kGravity};  // specific force when static
    for (int i = 0; i < 4; ++i) {
        const Vec3 target = s.p_feet[i] - s.p_com;  // body frame = world here
        sample.joint_angles.segment<3>(3 * i) =
            kin.inverse_kinematics(i, target, kin.neutral_pose(i));
    }
    return sample;
}

std::array<LegContact, 4> all_contact(double prob = 0.9) {
    std::array<LegContact, 4> c;
    for (auto& lc : c) lc = LegContact{prob, true};
    return c;
}

}  // namespace

TEST_CASE("predict is a fixed point for a stationary robot in full stance") {
    const KinematicsModel kin;
    const EstimatorState init = standing_state();
    StateEstimator est(kin, KfConfig{}, init);
    const ProprioSample sample = standing_sample(kin, init);
    est.predict(sample, all_contact(), 0.002);
    CHECK((est.state().p_com - init.p_com).norm() < 1e-15);
    CHECK((est.state().v_com - init.v_com).norm() < 1e-15);
    for (int i = 0; i < 4; ++i)
        CHECK((est.state().p_feet[i] - init.p_feet[i]).norm() < 1e-15);
    // Covariance grows by Q in the PSD order.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 18, 18>> eig(est.state().cov - init.cov);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("predict integrates velocity into position") {
    const KinematicsModel kin;
    EstimatorState init = standing_state();
    init.v_com = {1.0, 0.0, 0.0};
    StateEstimator est(kin, KfConfig{}, init);
    const ProprioSample sample = standing_sample(kin, init);
    est.predict(sample, all_contact(), 0.01);
    CHECK((est.state().p_com - (init.p_com + Vec3{0.01, 0.0, 0.0})).norm() < 1e-12);
}

TEST_CASE("predict rejects non-finite samples") {
    const KinematicsModel kin;
    StateEstimator est(kin, KfConfig{}, standing_state());
    ProprioSample bad = standing_sample(kin, standing_state());
    bad.imu_accel.x() = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(est.predict(bad, all_contact(), 0.002), NonFiniteInput);
}

TEST_CASE("observation blend follows the contact probability") {
    const KinematicsModel kin;
    EstimatorState init = standing_state();
    init.p_feet[0].z() = 0.02;
    StateEstimator est(kin, KfConfig{}, init);
    const ProprioSample sample = standing_sample(kin, init);
    const PlaneParams flat{0.0, 0.0, 1.0, 0.0, true};

    auto contacts = all_contact(1.0);
    CHECK(est.build_observation(sample, flat, contacts).foot_z(0) ==
          Catch::Approx(0.0).margin(1e-15));
    contacts[0].prob = 0.0;
    CHECK(est.build_observation(sample, flat, contacts).foot_z(0) ==
          Catch::Approx(0.02).margin(1e-15));
    contacts[0].prob = 0.5;
    CHECK(est.build_observation(sample, flat, contacts).foot_z(0) ==
          Catch::Approx(0.01).margin(1e-15));
    // Without a plane the blend collapses to the prior (zero innovation).
    CHECK(est.build_observation(sample, std::nullopt, contacts).foot_z(0) ==
          Catch::Approx(0.02).margin(1e-15));
}

TEST_CASE("near-vertical support plane is rejected") {
    const KinematicsModel kin;
    StateEstimator est(kin, KfConfig{}, standing_state());
    const ProprioSample sample = standing_sample(kin, standing_state());
    const PlaneParams wall{1.0, 0.0, 0.05, 0.0, true};
    CHECK_THROWS_AS(est.build_observation(sample, wall, all_contact()), PlaneTooSteep);
}

TEST_CASE("zero innovation leaves the state unchanged and shrinks covariance") {
    const KinematicsModel kin;
    const EstimatorState init = standing_state();
    StateEstimator est(kin, KfConfig{}, init);
    ObservationVector obs;
    for (int i = 0; i < 4; ++i) {
        obs.rel_pos[i] = init.p_com - init.p_feet[i];
        obs.foot_vel[i] = -init.v_com;
        obs.foot_z(i) = init.p_feet[i].z();
    }
    est.update(obs, all_contact());
    CHECK((est.state().x() - init.x()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 18, 18>> eig(init.cov - est.state().cov);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("textbook scalar gain of one half on a direct foot-height row") {
    // P = I, R = 1 on the foot-z row: an innovation moves the estimate by
    // half, the classic P/(P+R) gain.
    const KinematicsModel kin;
    EstimatorState init = standing_state();
    init.cov = Eigen::Matrix<double, 18, 18>::Identity();
    init.p_feet[0].z() = 0.1;
    KfConfig cfg;
    cfg.r_relpos = 1e10;  // mute every other row
    cfg.r_footvel = 1e10;
    cfg.r_footz = 1.0;
    cfg.swing_r_factor = 1.0;
    StateEstimator est(kin, cfg, init);
    ObservationVector obs;
    for (int i = 0; i < 4; ++i) {
        obs.rel_pos[i] = init.p_com - init.p_feet[i];
        obs.foot_vel[i] = -init.v_com;
        obs.foot_z(i) = init.p_feet[i].z();
    }
    obs.foot_z(0) = 0.0;
    est.update(obs, all_contact());
    CHECK(est.state().p_feet[0].z() == Catch::Approx(0.05).margin(1e-8));
}

TEST_CASE("singular innovation is detected") {
    const KinematicsModel kin;
    EstimatorState init = standing_state();
    init.cov.setZero();
    KfConfig cfg;
    cfg.r_relpos = 0.0;
    cfg.r_footvel = 0.0;
    cfg.r_footz = 0.0;
    cfg.swing_r_factor = 1.0;
    StateEstimator est(kin, cfg, init);
    ObservationVector obs;
    CHECK_THROWS_AS(est.update(obs, all_contact()), SingularInnovation);
}

namespace {

/// Same model matrices as the production filter, built from the dynamics
/// and observation definitions, for the dense reference KF.
struct ModelMirror {
    MatX a = MatX::Identity(18, 18);
    VecX u = VecX::Zero(18);
    MatX q = MatX::Zero(18, 18);
    MatX h = MatX::Zero(28, 18);
    MatX r = MatX::Zero(28, 28);

    ModelMirror(const KinematicsModel& kin, const ProprioSample& sample,
                const std::array<LegContact, 4>& contacts, const EstimatorState& prior,
                const KfConfig& cfg, double dt) {
        const Mat3 rot = sample.orientation;
        const Vec3 accel_w = rot * sample.imu_accel + Vec3{0, 0, -kGravity};
        a.block<3, 3>(0, 3) = Mat3::Identity() * dt;
        u.segment<3>(0) = 0.5 * dt * dt * accel_w;
        u.segment<3>(3) = dt * accel_w;
        q.block<3, 3>(0, 0) = Mat3::Identity() * cfg.q_pos;
        q.block<3, 3>(3, 3) = Mat3::Identity() * cfg.q_vel;
        for (int i = 0; i < 4; ++i) {
            const double qs = contacts[i].in_contact ? 1.0 : cfg.swing_q_factor;
            q.block<3, 3>(6 + 3 * i, 6 + 3 * i) = Mat3::Identity() * cfg.q_foot * qs;
            if (!contacts[i].in_contact) {
                a.block<3, 3>(6 + 3 * i, 3) = Mat3::Identity() * dt;
                const Mat3 jac = kin.jacobian(i, sample.joint_angles.segment<3>(3 * i));
                const Vec3 foot_body = rot.transpose() * (prior.p_feet[i] - prior.p_com);
                u.segment<3>(6 + 3 * i) =
                    dt * (rot * (sample.imu_omega.cross(foot_body) +
                                 jac * sample.joint_velocities.segment<3>(3 * i)));
            }
            const double rs = contacts[i].in_contact ? 1.0 : cfg.swing_r_factor;
            h.block<3, 3>(3 * i, 0) = Mat3::Identity();
            h.block<3, 3>(3 * i, 6 + 3 * i) = -Mat3::Identity();
            r.block<3, 3>(3 * i, 3 * i) = Mat3::Identity() * cfg.r_relpos * rs;
            h.block<3, 3>(12 + 3 * i, 3) = -Mat3::Identity();
            r.block<3, 3>(12 + 3 * i, 12 + 3 * i) = Mat3::Identity() * cfg.r_footvel * rs;
            h(24 + i, 8 + 3 * i) = 1.0;
            r(24 + i, 24 + i) = cfg.r_footz * rs;
        }
    }
};

}  // namespace

TEST_CASE("randomized steps match the dense matrix-inversion reference KF") {
    const KinematicsModel kin;
    const KfConfig cfg;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> angle(-0.4, 0.4);

    StateEstimator est(kin, cfg, standing_state());
    VecX x_ref = est.state().x();
    MatX p_ref = est.state().cov;

    double min_eig = 1.0;
    for (int step = 0; step < 1000; ++step) {
        ProprioSample sample;
        sample.orientation = euler_to_rot(0.2 * angle(rng), 0.2 * angle(rng), angle(rng));
        sample.imu_accel = Vec3{u(rng), u(rng), kGravity + u(rng)};
        sample.imu_omega = Vec3{u(rng), u(rng), u(rng)} * 0.3;
        for (int j = 0; j < 12; ++j) {
            sample.joint_angles(j) = 0.5 * u(rng) + (j % 3 == 2 ? -1.2 : 0.3);
            sample.joint_velocities(j) = u(rng);
        }
        sample.foot_forces = Vec4::Constant(10.0);
        std::array<LegContact, 4> contacts;
        for (auto& c : contacts) {
            const double p = 0.5 + 0.5 * u(rng);
            c = LegContact{p, p >= 0.5};
        }
        const double dt = 0.002;

        const EstimatorState prior = est.state();
        est.predict(sample, contacts, dt);
        const ModelMirror mm(kin, sample, contacts, prior, cfg, dt);
        oracles::DenseKf::predict(x_ref, p_ref, mm.a, mm.u, mm.q);
        REQUIRE((est.state().x() - x_ref).cwiseAbs().maxCoeff() < 1e-8);
        REQUIRE((est.state().cov - p_ref).cwiseAbs().maxCoeff() < 1e-8);

        std::optional<PlaneParams> plane;
        if (step % 3 == 0) {
            plane = PlaneParams{0.05, -0.02, 1.0, -0.1, false};
            plane->normalize();
        }
        const ObservationVector obs = est.build_observation(sample, plane, contacts);
        est.update(obs, contacts);
        oracles::DenseKf::update(x_ref, p_ref, mm.h, obs.stacked(), mm.r);
        REQUIRE((est.state().x() - x_ref).cwiseAbs().maxCoeff() < 1e-8);
        REQUIRE((est.state().cov - p_ref).cwiseAbs().maxCoeff() < 1e-8);

        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 18, 18>> eig(est.state().cov);
        min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());

        // Resync so float drift between the two routes cannot accumulate.
        x_ref = est.state().x();
        p_ref = est.state().cov;
    }
    CHECK(min_eig >= -1e-6);
}

TEST_CASE("covariance stays symmetric PSD over 10000 random cycles") {
    const KinematicsModel kin;
    const KfConfig cfg;
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    StateEstimator est(kin, cfg, standing_state());

    for (int step = 0; step < 10000; ++step) {
        ProprioSample sample;
        sample.orientation = euler_to_rot(0.05 * u(rng), 0.05 * u(rng), u(rng));
        sample.imu_accel = Vec3{u(rng), u(rng), kGravity + u(rng)};
        sample.imu_omega = Vec3{u(rng), u(rng), u(rng)} * 0.2;
        for (int j = 0; j < 12; ++j) {
            sample.joint_angles(j) = 0.4 * u(rng) + (j % 3 == 2 ? -1.2 : 0.3);
            sample.joint_velocities(j) = u(rng);
        }
        std::array<LegContact, 4> contacts;
        for (auto& c : contacts) {
            const double p = 0.5 + 0.5 * u(rng);
            c = LegContact{p, p >= 0.5};
        }
        est.predict(sample, contacts, 0.002);
        const ObservationVector obs = est.build_observation(sample, std::nullopt, contacts);
        est.update(obs, contacts);

        if (step % 500 == 0) {
            const auto& cov = est.state().cov;
            CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-10);
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 18, 18>> eig(cov);
            CHECK(eig.eigenvalues().minCoeff() >= -1e-6);
        }
    }
}
