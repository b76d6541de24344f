#pragma once

#include <cmath>
#include <vector>

#include "proprio/grid_map.hpp"
#include "proprio/plane.hpp"

namespace proprio {

/// Hazard-search and barrier parameters. Defaults follow the reference
/// parameter set (distances in meters, angles in radians).
struct SafetyConfig {
    double h_thr = 0.5;
    double l_min = 0.5;
    double l_max = 1.2;
    double theta_thr = deg2rad(60.0);
    double gamma = 0.15;
    double delta_pitch = deg2rad(10.0);
    double delta_roll = deg2rad(10.0);
    double alpha_glob = 1.5;
    double alpha_local = 0.5;
    bool treat_unknown_as_hazard = false;  // strict mode

    void validate() const {
        if (!(l_min > 0.0 && l_min < l_max)) throw std::invalid_argument("need 0 < l_min < l_max");
        if (h_thr <= 0.0) throw std::invalid_argument("h_thr must be > 0");
        if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
        if (alpha_glob <= 0.0 || alpha_local <= 0.0)
            throw std::invalid_argument("barrier gains must be > 0");
        if (!(theta_thr > 0.0 && theta_thr < M_PI_2))
            throw std::invalid_argument("theta_thr must be in (0, pi/2)");
    }
};

struct HazardInfo {
    bool found = false;
    Vec3 s_point = Vec3::Zero();       // sampled hazard point (xy + map height)
    Vec2 s_projected_xy = Vec2::Zero();
    Vec2 direction_xy = Vec2::UnitX();
};

/// One linear inequality coeffs . z >= bound over the stacked MPC state
/// trajectory [X[0], X[1], ..., X[N]], each X 12-dim ordered
/// (roll, pitch, yaw, p, omega, v). Step 0 terms are folded into the bound
/// at assembly time since X[0] is data.
struct CbfRow {
    enum class Kind { kGlobal, kLocalPitchLo, kLocalPitchHi, kLocalRollLo, kLocalRollHi };
    std::vector<std::pair<int, double>> coeffs;  // (step*12 + dim, value)
    double bound = 0.0;
    Kind kind = Kind::kGlobal;
    int step = 0;  // horizon step k of the h(X[k]) term
};

/// Marches the map along the commanded direction at one-resolution steps
/// over [l_min, l_max] and returns the closest sample whose height differs
/// from robot_z by more than h_thr. Unknown cells are skipped unless strict
/// mode treats them as hazards.
inline HazardInfo find_hazard_point(const GridMap2p5& map, const Vec2& robot_xy, double robot_z,
                                    const Vec2& cmd_dir_xy, const SafetyConfig& cfg) {
    HazardInfo info;
    const double dir_norm = cmd_dir_xy.norm();
    if (dir_norm < 1e-12) throw std::invalid_argument("command direction must be nonzero");
    info.direction_xy = cmd_dir_xy / dir_norm;

    const double step = map.resolution();
    for (double l = cfg.l_min; l <= cfg.l_max + 1e-12; l += step) {
        const Vec2 sample_xy = robot_xy + l * info.direction_xy;
        const auto height = map.query_height(sample_xy);
        if (!height) {
            if (cfg.treat_unknown_as_hazard && map.cell_index_at(sample_xy)) {
                info.found = true;
                info.s_point = Vec3{sample_xy.x(), sample_xy.y(), robot_z - 2.0 * cfg.h_thr};
                return info;
            }
            continue;
        }
        if (std::abs(robot_z - *height) > cfg.h_thr) {
            info.found = true;
            info.s_point = Vec3{sample_xy.x(), sample_xy.y(), *height};
            return info;
        }
    }
    return info;
}

/// Pulls the hazard point back toward the robot along the command direction
/// by the horizontal run a theta_thr-grade ramp would need to absorb the
/// height difference between the point and the support plane.
inline Vec2 project_hazard(const Vec3& s, const PlaneParams& support_plane,
                           const SafetyConfig& cfg, const Vec2& direction_xy) {
    const double plane_z = support_plane.height_at(s.x(), s.y());
    const double dh = std::abs(plane_z - s.z());
    const double pullback = dh / std::tan(cfg.theta_thr);
    return s.head<2>() - direction_xy * pullback;
}

/// Barrier value d . (S' - p_xy) - gamma for diagnostics and tests.
inline double global_barrier_value(const HazardInfo& hazard, const Vec2& p_xy, double gamma) {
    return hazard.direction_xy.dot(hazard.s_projected_xy - p_xy) - gamma;
}

/// Discrete-time rows (h[k+1] - h[k])/dt >= -alpha h[k] for k = 0..N-1 with
/// h(X) = d.(S'_xy - p_xy) - gamma, emitted in the dt-scaled form
/// h[k+1] + (alpha dt - 1) h[k] >= 0.
inline std::vector<CbfRow> global_cbf_rows(const HazardInfo& hazard, const SafetyConfig& cfg,
                                           int horizon, double dt) {
    std::vector<CbfRow> rows;
    if (!hazard.found) return rows;
    const double dx = hazard.direction_xy.x();
    const double dy = hazard.direction_xy.y();
    const double s = hazard.direction_xy.dot(hazard.s_projected_xy) - cfg.gamma;
    const double decay = cfg.alpha_glob * dt - 1.0;
    for (int k = 0; k < horizon; ++k) {
        CbfRow row;
        row.kind = CbfRow::Kind::kGlobal;
        row.step = k;
        // h contribution of step k+1: -d.p_xy plus constant s.
        row.coeffs.push_back({(k + 1) * 12 + 3, -dx});
        row.coeffs.push_back({(k + 1) * 12 + 4, -dy});
        row.coeffs.push_back({k * 12 + 3, decay * -dx});
        row.coeffs.push_back({k * 12 + 4, decay * -dy});
        row.bound = -s * cfg.alpha_glob * dt;
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Slope pitch from the plane normal in the heading-aligned frame
/// (positive nose-up; a ramp ascending along the heading gives +angle).
inline double slope_pitch(const PlaneParams& plane, double yaw) {
    const Vec3 n = rot_z(yaw).transpose() * plane.normal();
    return std::atan2(-n.x(), n.z());
}

/// Slope roll, positive when the left side of the heading frame is uphill.
inline double slope_roll(const PlaneParams& plane, double yaw) {
    const Vec3 n = rot_z(yaw).transpose() * plane.normal();
    return std::atan2(-n.y(), n.z());
}

/// The four pitch/roll box rows per horizon step, bounding the predicted
/// orientation inside [theta - delta, theta + delta] around the support
/// plane inclination. Throws PlaneTooSteep for |k3| <= 0.1.
inline std::vector<CbfRow> local_cbf_rows(const PlaneParams& plane, double yaw,
                                          const SafetyConfig& cfg, int horizon, double dt) {
    if (std::abs(plane.k3) <= 0.1) throw PlaneTooSteep("support plane too steep for local CBF");
    const double pitch_c = slope_pitch(plane, yaw);
    const double roll_c = slope_roll(plane, yaw);
    const double pitch_lo = pitch_c - cfg.delta_pitch, pitch_hi = pitch_c + cfg.delta_pitch;
    const double roll_lo = roll_c - cfg.delta_roll, roll_hi = roll_c + cfg.delta_roll;
    const double a_dt = cfg.alpha_local * dt;

    std::vector<CbfRow> rows;
    rows.reserve(4 * horizon);
    const auto push = [&](CbfRow::Kind kind, int dim, int k, double lo, double hi) {
        // Lower bound: x[k+1] + (a_dt - 1) x[k] >= a_dt * lo.
        CbfRow lo_row;
        lo_row.kind = kind;
        lo_row.step = k;
        lo_row.coeffs.push_back({(k + 1) * 12 + dim, 1.0});
        lo_row.coeffs.push_back({k * 12 + dim, a_dt - 1.0});
        lo_row.bound = a_dt * lo;
        rows.push_back(std::move(lo_row));
        // Upper bound: -x[k+1] + (1 - a_dt) x[k] >= -a_dt * hi.
        CbfRow hi_row;
        hi_row.kind = kind == CbfRow::Kind::kLocalPitchLo ? CbfRow::Kind::kLocalPitchHi
                                                          : CbfRow::Kind::kLocalRollHi;
        hi_row.step = k;
        hi_row.coeffs.push_back({(k + 1) * 12 + dim, -1.0});
        hi_row.coeffs.push_back({k * 12 + dim, 1.0 - a_dt});
        hi_row.bound = -a_dt * hi;
        rows.push_back(std::move(hi_row));
    };
    for (int k = 0; k < horizon; ++k) {
        push(CbfRow::Kind::kLocalPitchLo, 1, k, pitch_lo, pitch_hi);
        push(CbfRow::Kind::kLocalRollLo, 0, k, roll_lo, roll_hi);
    }
    return rows;
}

}  // namespace proprio
