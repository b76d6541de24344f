#include <catch_amalgamated.hpp>

#include <random>

#include "proprio/kinematics.hpp"

using namespace proprio;

TEST_CASE("jacobian matches finite differences of forward kinematics") {
    const KinematicsModel kin;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    const double eps = 1e-7;
    for (int trial = 0; trial < 50; ++trial) {
        const int leg = trial % 4;
        const Vec3 q{u(rng), u(rng), u(rng) - 1.0};
        const Mat3 jac = kin.jacobian(leg, q);
        for (int j = 0; j < 3; ++j) {
            Vec3 qp = q, qm = q;
            qp(j) += eps;
            qm(j) -= eps;
            const Vec3 fd = (kin.foot_position(leg, qp) - kin.foot_position(leg, qm)) / (2 * eps);
            const double rel = (jac.col(j) - fd).norm() / std::max(1.0, fd.norm());
            CHECK(rel < 1e-6);
        }
    }
}

TEST_CASE("inverse kinematics round-trips forward kinematics") {
    const KinematicsModel kin;
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int trial = 0; trial < 40; ++trial) {
        const int leg = trial % 4;
        const Vec3 q_true{0.3 * u(rng), 0.5 + u(rng), -1.2 + u(rng)};
        const Vec3 target = kin.foot_position(leg, q_true);
        const Vec3 q = kin.inverse_kinematics(leg, target, kin.neutral_pose(leg));
        CHECK((kin.foot_position(leg, q) - target).norm() < 1e-9);
    }
}

TEST_CASE("neutral pose puts the foot near the nominal drop") {
    const KinematicsModel kin;
    for (int leg = 0; leg < 4; ++leg) {
        const Vec3 q = kin.neutral_pose(leg, 0.32);
        const Vec3 foot = kin.foot_position(leg, q);
        const Vec3 nominal = kin.nominal_foot(leg, 0.32);
        CHECK(std::abs(foot.z() - nominal.z()) < 2e-2);
        CHECK(std::abs(foot.y() - nominal.y()) < 1e-9);
    }
}

TEST_CASE("left and right legs mirror in y") {
    const KinematicsModel kin;
    const Vec3 q{0.0, 0.6, -1.2};
    const Vec3 fl = kin.foot_position(kFL, q);
    const Vec3 fr = kin.foot_position(kFR, q);
    CHECK(fl.x() == Catch::Approx(fr.x()));
    CHECK(fl.y() == Catch::Approx(-fr.y()));
    CHECK(fl.z() == Catch::Approx(fr.z()));
}
