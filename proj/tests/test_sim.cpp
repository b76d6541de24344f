#include <catch_amalgamated.hpp>

#include <sstream>

#include "proprio/io.hpp"
#include "proprio/sim/simulation.hpp"

using namespace proprio;

namespace {

Scenario flat_standing(double duration = 6.0) {
    Scenario sc;
    sc.name = "flat_standing";
    sc.duration = duration;
    sc.map_origin = {-2.0, -2.0};
    sc.map_size = {4.0, 4.0};
    sc.terrain.add_flat(8.0, "ground");
    sc.commands.push_back({0.0, 0.0, 0.0});
    sc.mpc_enabled = false;
    return sc;
}

Scenario flat_walk(double duration = 8.0) {
    Scenario sc;
    sc.name = "flat_walk";
    sc.duration = duration;
    sc.start_xy = {0.5, 0.0};
    sc.map_origin = {-1.0, -1.5};
    sc.map_size = {8.0, 3.0};
    sc.terrain.add_flat(10.0, "ground");
    sc.commands.push_back({0.0, 0.0, 0.0});
    sc.commands.push_back({1.0, 0.3, 0.0});
    sc.mpc_enabled = false;
    return sc;
}

}  // namespace

TEST_CASE("gait schedule and phases") {
    GaitParams gait;
    gait.phase_origin = 0.0;
    // Trot datum: all four legs inside their stance window at phase zero.
    for (int leg = 0; leg < 4; ++leg) CHECK(gait_stance(gait, leg, 0.0));
    // Mid-swing for the FL/RR pair.
    const double t_swing = 0.8 * gait.period;
    CHECK_FALSE(gait_stance(gait, kFL, t_swing));
    CHECK_FALSE(gait_stance(gait, kRR, t_swing));
    CHECK(gait_stance(gait, kFR, t_swing));

    // The default phase origin starts the first stance pair mid-stance,
    // clear of the force ramp edge.
    GaitParams shifted;
    CHECK(gait_stance(shifted, kFL, 0.0));
    CHECK(gait_phase(shifted, kFL, 0.0) == Catch::Approx(0.25));
    CHECK_FALSE(gait_stance(shifted, kFR, 0.0));

    const GaitSchedule schedule = horizon_schedule(gait, 0.0, 0.025, 10);
    CHECK(schedule.stance.size() == 10);

    // Duty 1.0 keeps every leg in stance forever.
    GaitParams stand = gait;
    stand.duty = 1.0;
    for (double t = 0.0; t < 2.0; t += 0.1)
        for (int leg = 0; leg < 4; ++leg) CHECK(gait_stance(stand, leg, t));
}

TEST_CASE("swing feet touch down exactly on the terrain") {
    TerrainModel terrain;
    terrain.add_flat(1.0);
    terrain.add_ramp(6.0, 10.0);
    KinematicsModel kin;
    GaitParams params;
    GaitGenerator gait(params, &terrain, &kin, {1.0, 0.0}, 0.0);

    const Vec2 v_cmd{0.3, 0.0};
    Vec2 com{1.0, 0.0};
    const double dt = 0.002;
    std::array<bool, 4> prev = gait.contacts();
    for (double t = 0.0; t < 3.0; t += dt) {
        com += v_cmd * dt;
        gait.update(t + dt, com, 0.0, v_cmd);
        for (int leg = 0; leg < 4; ++leg) {
            const bool now = gait.contacts()[leg];
            if (now) {
                // Stance feet are pinned to the terrain surface.
                const Vec3 f = gait.feet()[leg];
                CHECK(std::abs(f.z() - terrain.height(f.x(), f.y())) < 1e-9);
                if (!prev[leg]) {  // touchdown instant
                    CHECK(std::abs(f.z() - terrain.height(f.x(), f.y())) < 1e-9);
                }
            }
            prev[leg] = now;
        }
    }
}

TEST_CASE("stance feet hold still through the stance window") {
    TerrainModel terrain;
    terrain.add_flat(10.0);
    KinematicsModel kin;
    GaitParams params;
    GaitGenerator gait(params, &terrain, &kin, {0.0, 0.0}, 0.0);
    Vec2 com{0.0, 0.0};
    const Vec2 v{0.25, 0.0};
    std::array<Vec3, 4> last = gait.feet();
    std::array<bool, 4> prev = gait.contacts();
    for (double t = 0.0; t < 2.0; t += 0.002) {
        com += v * 0.002;
        gait.update(t + 0.002, com, 0.0, v);
        for (int leg = 0; leg < 4; ++leg) {
            if (gait.contacts()[leg] && prev[leg])
                CHECK((gait.feet()[leg] - last[leg]).norm() == 0.0);
            last[leg] = gait.feet()[leg];
            prev[leg] = gait.contacts()[leg];
        }
    }
}

TEST_CASE("sensor synthesis is exact with zero noise and deterministic") {
    TruthTick truth;
    truth.t = 1.0;
    truth.accel_body = {0.1, -0.2, 9.9};
    truth.omega_body = {0.01, 0.02, -0.03};
    truth.joint_angles.setConstant(0.5);
    truth.forces = {20.0, 18.0, 0.0, 22.0};
    truth.true_contact = {true, true, false, true};

    NoiseConfig zero;
    zero.accel_sigma = zero.gyro_sigma = zero.encoder_sigma = zero.force_sigma = 0.0;
    Rng rng(7);
    const ProprioSample s = synthesize_sensors(truth, zero, {}, 5.0, rng);
    CHECK((s.imu_accel - truth.accel_body).norm() == 0.0);
    CHECK((s.foot_forces - truth.forces).norm() == 0.0);

    // Pseudo window forces a sub-threshold reading on a stance leg.
    std::vector<PseudoContactWindow> windows = {{0, 0.5, 1.5}};
    Rng rng2(7);
    const ProprioSample sp = synthesize_sensors(truth, zero, windows, 5.0, rng2);
    CHECK(sp.foot_forces(0) < 5.0);
    CHECK(sp.foot_forces(0) >= 0.0);
    // Swing legs are not overridden.
    std::vector<PseudoContactWindow> swing_window = {{2, 0.5, 1.5}};
    Rng rng3(7);
    const ProprioSample ss = synthesize_sensors(truth, zero, swing_window, 5.0, rng3);
    CHECK(ss.foot_forces(2) == 0.0);

    // Same seed, same stream.
    NoiseConfig noisy;
    Rng a(123), b(123);
    const ProprioSample sa = synthesize_sensors(truth, noisy, windows, 5.0, a);
    const ProprioSample sb = synthesize_sensors(truth, noisy, windows, 5.0, b);
    CHECK((sa.imu_accel - sb.imu_accel).norm() == 0.0);
    CHECK((sa.joint_angles - sb.joint_angles).norm() == 0.0);
    CHECK((sa.foot_forces - sb.foot_forces).norm() == 0.0);
}

TEST_CASE("ground truth integrates its own velocities exactly") {
    const Scenario sc = flat_walk(4.0);
    const RunOutput out = run_scenario(sc, RunMode::kCoupled);
    const double dt = 1.0 / sc.est_rate;
    for (size_t k = 1; k < out.trace.ticks.size(); ++k) {
        const Vec3 dp = out.trace.ticks[k].truth_p - out.trace.ticks[k - 1].truth_p;
        const Vec3 expected = out.trace.ticks[k].truth_v * dt;
        CHECK((dp - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("standing still on flat ground estimates the CoM within millimeters") {
    const Scenario sc = flat_standing(6.0);
    const RunOutput out = run_scenario(sc, RunMode::kCoupled);
    CHECK(out.metrics.com_mae < 0.005);
    // Consistency: the error stays within three steady-state sigmas.
    const TickRecord& last = out.trace.ticks.back();
    CHECK(std::abs(last.est_p.z() - last.truth_p.z()) < 0.02);
}

TEST_CASE("identical seeds reproduce identical runs") {
    const Scenario sc = flat_walk(3.0);
    const RunOutput a = run_scenario(sc, RunMode::kCoupled);
    const RunOutput b = run_scenario(sc, RunMode::kCoupled);
    REQUIRE(a.trace.ticks.size() == b.trace.ticks.size());
    for (size_t k = 0; k < a.trace.ticks.size(); ++k) {
        CHECK((a.trace.ticks[k].est_p - b.trace.ticks[k].est_p).norm() == 0.0);
        CHECK(a.trace.ticks[k].contact_prob == b.trace.ticks[k].contact_prob);
    }
    const std::string ja = metrics_to_json(a.metrics).dump(2);
    const std::string jb = metrics_to_json(b.metrics).dump(2);
    CHECK(ja == jb);

    // A different seed produces a different noise stream.
    Scenario sc2 = sc;
    sc2.seed = 2;
    const RunOutput c = run_scenario(sc2, RunMode::kCoupled);
    bool any_diff = false;
    for (size_t k = 0; k < a.trace.ticks.size() && !any_diff; ++k)
        if ((a.trace.ticks[k].est_p - c.trace.ticks[k].est_p).norm() > 0.0) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("walking builds a map that covers the corridor between the tracks") {
    const Scenario sc = flat_walk(8.0);
    const RunOutput out = run_scenario(sc, RunMode::kCoupled);
    CHECK(out.metrics.invalid_cells_in_hull == 0);
    CHECK(out.metrics.region_angle_err_deg.count("ground") == 1);
    CHECK(out.metrics.region_angle_err_deg.at("ground") < 1.0);
}

TEST_CASE("scenario parser round trip and errors") {
    const std::string text = R"(
# demo scenario
name demo
duration 5
seed 3
terrain_flat 4 ground
terrain_ramp 3 10 slope
command 0 0.2 0
pseudo 1 1.0 2.0
contact_k_pos 0.6
)";
    std::istringstream is(text);
    const Scenario sc = parse_scenario(is);
    CHECK(sc.name == "demo");
    CHECK(sc.duration == 5.0);
    CHECK(sc.seed == 3);
    CHECK(sc.contact.k_pos == 0.6);
    CHECK(sc.contact.k_force == Catch::Approx(0.4));
    sc.contact.validate();
    CHECK(sc.pseudo_windows.size() == 1);

    std::istringstream bad("nonsense_key 4\nterrain_flat 2\n");
    CHECK_THROWS_AS(parse_scenario(bad), ScenarioInvalid);
    std::istringstream missing("terrain_flat\n");
    CHECK_THROWS_AS(parse_scenario(missing), ScenarioInvalid);
    std::istringstream empty("duration 5\n");
    CHECK_THROWS_AS(parse_scenario(empty), ScenarioInvalid);
}
