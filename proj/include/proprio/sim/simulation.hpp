#pragma once

#include <string>

#include "proprio/sim/gait.hpp"
#include "proprio/sim/metrics.hpp"
#include "proprio/sim/sensors.hpp"
#include "proprio/srb_mpc.hpp"
#include "proprio/terrain_estimator.hpp"

namespace proprio {

/// Estimation experiments run with scripted truth motion (coupled /
/// decoupled); safety experiments drive the truth CoM velocity from the
/// MPC's optimized plan (cbf / no_cbf) so barrier rows actually shape the
/// trajectory.
enum class RunMode { kCoupled, kDecoupled, kNoCbf, kCbf };

inline RunMode parse_run_mode(const std::string& s) {
    if (s == "coupled") return RunMode::kCoupled;
    if (s == "decoupled") return RunMode::kDecoupled;
    if (s == "no_cbf") return RunMode::kNoCbf;
    if (s == "cbf") return RunMode::kCbf;
    throw std::invalid_argument("unknown mode '" + s + "' (coupled|decoupled|no_cbf|cbf)");
}

inline std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::kCoupled: return "coupled";
        case RunMode::kDecoupled: return "decoupled";
        case RunMode::kNoCbf: return "no_cbf";
        case RunMode::kCbf: return "cbf";
    }
    return "?";
}

struct RunOutput {
    RunMetrics metrics;
    RunTrace trace;
    GridMap2p5 map;
};

namespace detail {

inline double wrap_angle(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a < -M_PI) a += 2.0 * M_PI;
    return a;
}

}  // namespace detail

/// Closed-loop execution of one scenario: deterministic kinematic truth,
/// seeded sensor synthesis, the full estimation stack, and the CBF-MPC.
inline RunOutput run_scenario(const Scenario& sc, RunMode mode) {
    sc.validate();
    const double dt = 1.0 / sc.est_rate;
    const bool plan_drives_truth = mode == RunMode::kCbf || mode == RunMode::kNoCbf;
    if (plan_drives_truth && !sc.mpc_enabled)
        throw ScenarioInvalid("cbf/no_cbf modes need mpc_enabled");
    const bool use_terrain_coupling = mode != RunMode::kDecoupled;

    const KinematicsModel kin;
    const TerrainModel& terrain = sc.terrain;
    Rng rng(sc.seed);

    // Ground truth.
    Vec2 com_xy = sc.start_xy;
    double com_z = terrain.height(com_xy) + sc.body_height;
    double yaw = sc.start_heading;
    double pitch = 0.0, roll = 0.0;
    Vec3 v_world = Vec3::Zero();

    GaitGenerator gait(sc.gait, &terrain, &kin, com_xy, yaw);

    Mat3 rot_prev = euler_to_rot(roll, pitch, yaw);
    Vec3 v_prev = Vec3::Zero();
    std::array<Vec3, 4> q_prev;
    for (int leg = 0; leg < 4; ++leg) {
        const Vec3 p_body =
            rot_prev.transpose() * (gait.feet()[leg] - Vec3{com_xy.x(), com_xy.y(), com_z});
        q_prev[leg] = kin.inverse_kinematics(leg, p_body, kin.neutral_pose(leg));
    }

    // Estimator initialized at the exact truth.
    EstimatorState init_state;
    init_state.p_com = {com_xy.x(), com_xy.y(), com_z};
    init_state.v_com = Vec3::Zero();
    init_state.p_feet = gait.feet();
    init_state.cov = Eigen::Matrix<double, 18, 18>::Identity() * 1e-6;
    StateEstimator est(kin, sc.kf, init_state);

    TerrainEstimator terr(sc.make_map(), sc.footprint);
    if (sc.map_prior) {
        Rng prior_rng(sc.seed * 7919 + 13);
        GridMap2p5& map = terr.map();
        for (int iy = 0; iy < map.height(); ++iy)
            for (int ix = 0; ix < map.width(); ++ix) {
                const Vec2 c = map.cell_center(ix, iy);
                if (c.x() < sc.map_prior->x0 || c.x() > sc.map_prior->x1 ||
                    c.y() < sc.map_prior->y0 || c.y() > sc.map_prior->y1)
                    continue;
                map.set_cell(ix, iy,
                             terrain.height(c) + prior_rng.gauss(sc.map_prior->noise_sigma),
                             sc.map_prior->confidence);
            }
    }

    ContactHysteresis hysteresis;
    for (int leg = 0; leg < 4; ++leg) hysteresis.set_state(leg, true);
    const ContactConfig gate_contact_cfg{};  // reference weights for the latch

    MpcController mpc(sc.mpc);
    double next_mpc_time = 0.0;
    Vec2 planned_v_xy = Vec2::Zero();
    bool have_plan = false;

    RunTrace trace;
    const int n_ticks = static_cast<int>(std::lround(sc.duration * sc.est_rate));
    trace.ticks.reserve(n_ticks);
    std::array<bool, 4> was_in_contact{true, true, true, true};
    for (int leg = 0; leg < 4; ++leg) {
        terr.record_contact(leg, init_state.p_feet[leg]);
        trace.footholds.push_back(FootholdEvent{0.0, leg, init_state.p_feet[leg]});
    }

    for (int tick = 0; tick < n_ticks; ++tick) {
        const double t = tick * dt;
        const double t_next = (tick + 1) * dt;
        try {
            const CommandPoint cmd = sc.command_at(t);
            const Vec2 cmd_dir{std::cos(cmd.heading_rad), std::sin(cmd.heading_rad)};

            // --- Ground truth advance (exact velocity integration). ---
            const Vec2 v_xy =
                (plan_drives_truth && have_plan) ? planned_v_xy : Vec2(cmd.speed * cmd_dir);
            const double z_target = terrain.height(com_xy) + sc.body_height;
            const double v_z = std::clamp((z_target - com_z) / 0.3, -0.6, 0.6);
            v_world = {v_xy.x(), v_xy.y(), v_z};
            com_xy += v_xy * dt;
            com_z += v_z * dt;

            const double yaw_err = detail::wrap_angle(cmd.heading_rad - yaw);
            yaw += std::clamp(yaw_err / 0.25, -1.5, 1.5) * dt;

            // Slope-aligned orientation targets with a first-order lag.
            const Vec2 lateral{-std::sin(yaw), std::cos(yaw)};
            const Vec2 forward{std::cos(yaw), std::sin(yaw)};
            const double dzdx = (terrain.height(com_xy + 0.25 * forward) -
                                 terrain.height(com_xy - 0.25 * forward)) /
                                0.5;
            const double dzdy = (terrain.height(com_xy + 0.25 * lateral) -
                                 terrain.height(com_xy - 0.25 * lateral)) /
                                0.5;
            const double lag = std::min(1.0, dt / 0.3);
            pitch += (std::atan(dzdx) - pitch) * lag;
            roll += (std::atan(dzdy) - roll) * lag;

            gait.update(t_next, com_xy, yaw, v_xy);
            const Vec3 p_com{com_xy.x(), com_xy.y(), com_z};
            const Mat3 rot = euler_to_rot(roll, pitch, yaw);

            // --- Sensor synthesis from truth. ---
            TruthTick truth;
            truth.t = t_next;
            truth.orientation = rot;
            truth.accel_body = rot.transpose() * ((v_world - v_prev) / dt + Vec3{0, 0, kGravity});
            truth.omega_body = rot_log(rot_prev.transpose() * rot) / dt;
            truth.true_contact = gait.contacts();
            for (int leg = 0; leg < 4; ++leg) {
                const Vec3 p_body = rot.transpose() * (gait.feet()[leg] - p_com);
                const Vec3 q = kin.inverse_kinematics(leg, p_body, q_prev[leg]);
                truth.joint_angles.segment<3>(3 * leg) = q;
                truth.joint_velocities.segment<3>(3 * leg) = (q - q_prev[leg]) / dt;
                q_prev[leg] = q;
                truth.forces(leg) = gait.nominal_force(leg, t_next, sc.force_plateau);
            }
            rot_prev = rot;
            v_prev = v_world;

            const ProprioSample sample =
                synthesize_sensors(truth, sc.noise, sc.pseudo_windows, sc.contact.f_mid, rng);

            // --- Estimation pipeline. ---
            std::optional<PlaneParams> plane = terr.support_plane(est.state().p_com.head<2>());
            if (plane && std::abs(plane->k3) <= 0.1) plane.reset();

            std::array<LegContact, 4> contacts;
            std::array<double, 4> fusion_probs{};
            for (int leg = 0; leg < 4; ++leg) {
                if (use_terrain_coupling) {
                    // Contact geometry is evaluated at the instantaneous
                    // kinematic foot position (CoM estimate plus leg forward
                    // kinematics), which tracks the physical foot through
                    // lift-off and touchdown; the filter's held foot state
                    // would feed the detector back onto itself.
                    const Vec3 foot_kin =
                        est.state().p_com +
                        sample.orientation *
                            kin.foot_position(leg, sample.joint_angles.segment<3>(3 * leg));
                    const ContactBelief belief = estimate_contact(
                        foot_kin, sample.foot_forces(leg), plane, sc.contact, leg);
                    // The stance/swing latch runs on the force-led reference
                    // fusion: a position-dominant signal cannot re-latch on
                    // force evidence alone once the geometry channel has
                    // been dragged off, which dead-locks the filter gating.
                    const ContactBelief gate_belief = estimate_contact(
                        foot_kin, sample.foot_forces(leg), plane, gate_contact_cfg, leg);
                    const bool binary = hysteresis.update(leg, gate_belief.prob);
                    contacts[leg] = LegContact{belief.prob, binary};
                    fusion_probs[leg] = belief.prob;
                } else {
                    const bool binary = sample.foot_forces(leg) >= sc.contact.f_mid;
                    contacts[leg] = LegContact{binary ? 1.0 : 0.0, binary};
                    fusion_probs[leg] = binary ? 1.0 : 0.0;
                }
            }

            est.predict(sample, contacts, dt);
            const ObservationVector obs = est.build_observation(
                sample, use_terrain_coupling ? plane : std::nullopt, contacts);
            est.update(obs, contacts);

            for (int leg = 0; leg < 4; ++leg) {
                if (contacts[leg].in_contact) {
                    terr.record_contact(leg, est.state().p_feet[leg]);
                    if (!was_in_contact[leg])
                        trace.footholds.push_back(
                            FootholdEvent{t_next, leg, est.state().p_feet[leg]});
                }
                was_in_contact[leg] = contacts[leg].in_contact;
            }
            terr.update(fusion_probs);

            // --- MPC tick. ---
            if (sc.mpc_enabled && t_next >= next_mpc_time - 1e-9) {
                next_mpc_time += 1.0 / sc.mpc_rate;
                MpcRecord rec;
                rec.t = t_next;

                MpcState x0;
                x0.euler = rot_to_euler(sample.orientation);
                x0.p = est.state().p_com;
                x0.omega = sample.orientation * sample.imu_omega;
                x0.v = est.state().v_com;

                HazardInfo hazard;
                if (mode == RunMode::kCbf || mode == RunMode::kNoCbf) {
                    hazard = find_hazard_point(terr.map(), x0.p.head<2>(),
                                               x0.p.z() - sc.body_height, cmd_dir, sc.safety);
                    if (hazard.found && plane)
                        hazard.s_projected_xy =
                            project_hazard(hazard.s_point, *plane, sc.safety, hazard.direction_xy);
                    else if (hazard.found)
                        hazard.s_projected_xy = hazard.s_point.head<2>();
                }

                std::vector<CbfRow> rows;
                if (mode == RunMode::kCbf) {
                    rows = global_cbf_rows(hazard, sc.safety, sc.mpc.horizon, sc.mpc.dt);
                    if (plane) {
                        const auto local =
                            local_cbf_rows(*plane, yaw, sc.safety, sc.mpc.horizon, sc.mpc.dt);
                        rows.insert(rows.end(), local.begin(), local.end());
                    }
                }

                // Reference: track the commanded velocity along the heading,
                // body height above the support plane, slope-aligned pitch.
                std::vector<MpcState> ref(sc.mpc.horizon);
                const double ref_pitch = plane ? slope_pitch(*plane, cmd.heading_rad) : 0.0;
                const double ref_roll = plane ? slope_roll(*plane, cmd.heading_rad) : 0.0;
                for (int k = 0; k < sc.mpc.horizon; ++k) {
                    MpcState& r = ref[k];
                    const Vec2 p_ref =
                        Vec2(x0.p.head<2>()) + cmd.speed * cmd_dir * ((k + 1) * sc.mpc.dt);
                    const double ground =
                        plane ? plane->height_at(p_ref) : x0.p.z() - sc.body_height;
                    r.euler = {ref_roll, ref_pitch, cmd.heading_rad};
                    r.p = {p_ref.x(), p_ref.y(), ground + sc.body_height};
                    r.omega = Vec3::Zero();
                    r.v = {cmd.speed * cmd_dir.x(), cmd.speed * cmd_dir.y(), 0.0};
                }

                const GaitSchedule schedule =
                    horizon_schedule(sc.gait, t_next, sc.mpc.dt, sc.mpc.horizon);
                const PlaneParams mpc_plane = plane ? *plane : PlaneParams{0, 0, 1, 0, true};
                const MpcResult res =
                    mpc.solve(x0, ref, schedule, rows, mpc_plane, est.state().p_feet);

                if (plan_drives_truth) {
                    planned_v_xy = res.zero_velocity_fallback
                                       ? Vec2::Zero().eval()
                                       : Vec2(res.predicted.front().v.head<2>());
                    have_plan = true;
                }

                rec.status = static_cast<int>(res.status);
                rec.iterations = res.iterations;
                rec.objective = res.objective;
                rec.kkt_residual = res.kkt_residual;
                rec.active_cbf_rows = res.active_cbf_rows;
                rec.dropped_cbf_steps = res.dropped_cbf_steps;
                rec.zero_velocity_fallback = res.zero_velocity_fallback;
                rec.hazard_found = hazard.found;
                if (hazard.found)
                    rec.h_glob = global_barrier_value(hazard, com_xy, sc.safety.gamma);
                if (plane) {
                    const double pc = slope_pitch(*plane, yaw);
                    const double rc = slope_roll(*plane, yaw);
                    rec.h_local = {pitch - (pc - sc.safety.delta_pitch),
                                   (pc + sc.safety.delta_pitch) - pitch,
                                   roll - (rc - sc.safety.delta_roll),
                                   (rc + sc.safety.delta_roll) - roll};
                    rec.h_local_valid = true;
                }
                if (!res.predicted.empty()) rec.planned_v = res.predicted.front().v;
                trace.mpc.push_back(rec);
            }

            // --- Trace row. ---
            TickRecord row;
            row.t = t_next;
            row.truth_p = p_com;
            row.est_p = est.state().p_com;
            row.truth_v = v_world;
            row.est_v = est.state().v_com;
            for (int leg = 0; leg < 4; ++leg) {
                row.contact_prob[leg] = contacts[leg].prob;
                row.in_contact[leg] = contacts[leg].in_contact;
                row.true_contact[leg] = truth.true_contact[leg];
                row.force[leg] = sample.foot_forces(leg);
                for (const PseudoContactWindow& w : sc.pseudo_windows)
                    if (w.active(leg, t_next)) row.pseudo_active[leg] = true;
            }
            row.plane_valid = plane.has_value();
            if (plane) row.plane = *plane;
            trace.ticks.push_back(row);
        } catch (const std::exception& e) {
            throw std::runtime_error("tick " + std::to_string(tick) + " (t=" +
                                     std::to_string(t) + "s): " + e.what());
        }
    }

    RunOutput out{compute_metrics(trace, terr.map(), terrain, sc), std::move(trace),
                  terr.snapshot()};
    return out;
}

}  // namespace proprio
