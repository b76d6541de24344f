#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "proprio/contact_estimator.hpp"
#include "proprio/safety_cbf.hpp"
#include "proprio/sim/terrain_model.hpp"
#include "proprio/srb_mpc.hpp"
#include "proprio/state_estimator.hpp"
#include "proprio/terrain_estimator.hpp"

namespace proprio {

struct NoiseConfig {
    double accel_sigma = 0.02;    // m/s^2
    double gyro_sigma = 0.002;    // rad/s
    double encoder_sigma = 1e-3;  // rad (and rad/s for joint velocities)
    double force_sigma = 0.5;     // sensor units
};

struct PseudoContactWindow {
    int leg = 0;
    double t0 = 0.0;
    double t1 = 0.0;

    bool active(int leg_idx, double t) const { return leg_idx == leg && t >= t0 && t < t1; }
};

struct CommandPoint {
    double t = 0.0;
    double speed = 0.0;        // m/s along the heading
    double heading_rad = 0.0;  // world yaw of the commanded direction
};

struct GaitParams {
    double period = 0.6;
    double duty = 0.65;
    std::array<double, 4> offsets = {0.0, 0.5, 0.5, 0.0};  // trot
    double swing_height = 0.06;
    // Phase datum at t = 0. The default puts the first stance pair
    // mid-stance instead of at the force ramp-in edge.
    double phase_origin = 0.25;
};

struct MapPrior {
    double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    double noise_sigma = 0.003;
    double confidence = 0.8;
};

/// One fully-serializable experiment description. Identical scenarios and
/// seeds reproduce identical runs bit-for-bit.
struct Scenario {
    std::string name = "unnamed";
    double duration = 10.0;
    uint64_t seed = 1;
    int est_rate = 500;
    int mpc_rate = 40;
    bool mpc_enabled = true;
    double body_height = 0.30;
    Vec2 start_xy{0.0, 0.0};
    double start_heading = 0.0;

    Vec2 map_origin{-2.0, -2.0};
    Vec2 map_size{8.0, 4.0};
    double resolution = 0.05;

    TerrainModel terrain;
    std::vector<CommandPoint> commands;
    NoiseConfig noise;
    std::vector<PseudoContactWindow> pseudo_windows;
    double force_plateau = 22.0;

    GaitParams gait;
    ContactConfig contact;
    KfConfig kf;
    SafetyConfig safety;
    MpcConfig mpc;
    TerrainEstimatorConfig footprint;
    std::optional<MapPrior> map_prior;

    CommandPoint command_at(double t) const {
        CommandPoint current;
        current.heading_rad = start_heading;
        for (const CommandPoint& c : commands) {
            if (c.t > t) break;
            current = c;
        }
        return current;
    }

    GridMap2p5 make_map() const {
        const int w = std::max(1, static_cast<int>(std::lround(map_size.x() / resolution)));
        const int h = std::max(1, static_cast<int>(std::lround(map_size.y() / resolution)));
        return GridMap2p5(map_origin, resolution, w, h);
    }

    void validate() const {
        if (duration <= 0.0) throw ScenarioInvalid("duration must be > 0");
        if (est_rate < 1 || mpc_rate < 1) throw ScenarioInvalid("rates must be >= 1 Hz");
        if (resolution <= 0.0) throw ScenarioInvalid("resolution must be > 0");
        if (terrain.empty()) throw ScenarioInvalid("scenario has no terrain");
        contact.validate();
        safety.validate();
        mpc.validate();
    }
};

namespace detail {

inline std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) {
        if (tok.front() == '#') break;
        tokens.push_back(tok);
    }
    return tokens;
}

inline double to_num(const std::string& s, int line_no) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ScenarioInvalid("line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
}

}  // namespace detail

/// Parses the line-oriented scenario text format. Unknown keys are errors.
inline Scenario parse_scenario(std::istream& is) {
    Scenario sc;
    std::string line;
    int line_no = 0;
    bool k_force_explicit = false;

    while (std::getline(is, line)) {
        ++line_no;
        const auto tokens = detail::tokenize(line);
        if (tokens.empty()) continue;
        const std::string& key = tokens[0];
        const auto need = [&](size_t n) {
            if (tokens.size() < n + 1)
                throw ScenarioInvalid("line " + std::to_string(line_no) + ": key '" + key +
                                      "' needs " + std::to_string(n) + " values");
        };
        const auto num = [&](size_t i) { return detail::to_num(tokens[i], line_no); };

        if (key == "name") {
            need(1);
            sc.name = tokens[1];
        } else if (key == "duration") {
            need(1);
            sc.duration = num(1);
        } else if (key == "seed") {
            need(1);
            sc.seed = static_cast<uint64_t>(num(1));
        } else if (key == "est_rate") {
            need(1);
            sc.est_rate = static_cast<int>(num(1));
        } else if (key == "mpc_rate") {
            need(1);
            sc.mpc_rate = static_cast<int>(num(1));
        } else if (key == "mpc_enabled") {
            need(1);
            sc.mpc_enabled = num(1) != 0.0;
        } else if (key == "body_height") {
            need(1);
            sc.body_height = num(1);
        } else if (key == "start") {
            need(2);
            sc.start_xy = {num(1), num(2)};
        } else if (key == "heading") {
            need(1);
            sc.start_heading = deg2rad(num(1));
        } else if (key == "map_origin") {
            need(2);
            sc.map_origin = {num(1), num(2)};
        } else if (key == "map_size") {
            need(2);
            sc.map_size = {num(1), num(2)};
        } else if (key == "resolution") {
            need(1);
            sc.resolution = num(1);
        } else if (key == "terrain_flat") {
            need(1);
            sc.terrain.add_flat(num(1), tokens.size() > 2 ? tokens[2] : "");
        } else if (key == "terrain_ramp") {
            need(2);
            sc.terrain.add_ramp(num(1), num(2), tokens.size() > 3 ? tokens[3] : "");
        } else if (key == "terrain_platform") {
            need(5);
            sc.terrain.add_platform(num(1), num(2), num(3), num(4), num(5),
                                    tokens.size() > 6 ? tokens[6] : "platform");
        } else if (key == "terrain_cliff") {
            need(2);
            sc.terrain.add_cliff(num(1), num(2));
        } else if (key == "terrain_depressions") {
            need(8);
            sc.terrain.add_depressions(static_cast<uint64_t>(num(1)), static_cast<int>(num(2)),
                                       num(3), num(4), num(5), num(6), num(7), num(8));
        } else if (key == "command") {
            need(3);
            sc.commands.push_back(CommandPoint{num(1), num(2), deg2rad(num(3))});
        } else if (key == "noise_accel") {
            need(1);
            sc.noise.accel_sigma = num(1);
        } else if (key == "noise_gyro") {
            need(1);
            sc.noise.gyro_sigma = num(1);
        } else if (key == "noise_encoder") {
            need(1);
            sc.noise.encoder_sigma = num(1);
        } else if (key == "noise_force") {
            need(1);
            sc.noise.force_sigma = num(1);
        } else if (key == "pseudo") {
            need(3);
            sc.pseudo_windows.push_back(
                PseudoContactWindow{static_cast<int>(num(1)), num(2), num(3)});
        } else if (key == "force_plateau") {
            need(1);
            sc.force_plateau = num(1);
        } else if (key == "gait_period") {
            need(1);
            sc.gait.period = num(1);
        } else if (key == "gait_duty") {
            need(1);
            sc.gait.duty = num(1);
        } else if (key == "swing_height") {
            need(1);
            sc.gait.swing_height = num(1);
        } else if (key == "gait_phase") {
            need(1);
            sc.gait.phase_origin = num(1);
        } else if (key == "contact_k_pos") {
            need(1);
            sc.contact.k_pos = num(1);
            if (!k_force_explicit) sc.contact.k_force = 1.0 - sc.contact.k_pos;
        } else if (key == "contact_k_force") {
            need(1);
            sc.contact.k_force = num(1);
            k_force_explicit = true;
        } else if (key == "contact_sigma_pos") {
            need(1);
            sc.contact.sigma_pos = num(1);
        } else if (key == "contact_p_mid") {
            need(1);
            sc.contact.p_mid = num(1);
        } else if (key == "contact_sigma_force") {
            need(1);
            sc.contact.sigma_force = num(1);
        } else if (key == "contact_f_mid") {
            need(1);
            sc.contact.f_mid = num(1);
        } else if (key == "kf_q_pos") {
            need(1);
            sc.kf.q_pos = num(1);
        } else if (key == "kf_q_vel") {
            need(1);
            sc.kf.q_vel = num(1);
        } else if (key == "kf_q_foot") {
            need(1);
            sc.kf.q_foot = num(1);
        } else if (key == "kf_r_relpos") {
            need(1);
            sc.kf.r_relpos = num(1);
        } else if (key == "kf_r_footvel") {
            need(1);
            sc.kf.r_footvel = num(1);
        } else if (key == "kf_r_footz") {
            need(1);
            sc.kf.r_footz = num(1);
        } else if (key == "safety_h_thr") {
            need(1);
            sc.safety.h_thr = num(1);
        } else if (key == "safety_l_min") {
            need(1);
            sc.safety.l_min = num(1);
        } else if (key == "safety_l_max") {
            need(1);
            sc.safety.l_max = num(1);
        } else if (key == "safety_theta_thr_deg") {
            need(1);
            sc.safety.theta_thr = deg2rad(num(1));
        } else if (key == "safety_gamma") {
            need(1);
            sc.safety.gamma = num(1);
        } else if (key == "safety_alpha_glob") {
            need(1);
            sc.safety.alpha_glob = num(1);
        } else if (key == "safety_alpha_local") {
            need(1);
            sc.safety.alpha_local = num(1);
        } else if (key == "safety_delta_pitch_deg") {
            need(1);
            sc.safety.delta_pitch = deg2rad(num(1));
        } else if (key == "safety_delta_roll_deg") {
            need(1);
            sc.safety.delta_roll = deg2rad(num(1));
        } else if (key == "safety_strict_unknown") {
            need(1);
            sc.safety.treat_unknown_as_hazard = num(1) != 0.0;
        } else if (key == "mpc_horizon") {
            need(1);
            sc.mpc.horizon = static_cast<int>(num(1));
        } else if (key == "mpc_mass") {
            need(1);
            sc.mpc.mass = num(1);
        } else if (key == "footprint") {
            need(2);
            sc.footprint.footprint_length = num(1);
            sc.footprint.footprint_width = num(2);
        } else if (key == "map_prior") {
            need(4);
            MapPrior prior;
            prior.x0 = num(1);
            prior.x1 = num(2);
            prior.y0 = num(3);
            prior.y1 = num(4);
            if (sc.map_prior) {
                prior.noise_sigma = sc.map_prior->noise_sigma;
                prior.confidence = sc.map_prior->confidence;
            }
            sc.map_prior = prior;
        } else if (key == "map_prior_noise") {
            need(1);
            if (!sc.map_prior) sc.map_prior = MapPrior{};
            sc.map_prior->noise_sigma = num(1);
        } else {
            throw ScenarioInvalid("line " + std::to_string(line_no) + ": unknown key '" + key +
                                  "'");
        }
    }
    sc.validate();
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ScenarioInvalid("cannot open scenario file: " + path);
    try {
        return parse_scenario(is);
    } catch (const ScenarioInvalid& e) {
        throw ScenarioInvalid(path + ": " + e.what());
    }
}

}  // namespace proprio
