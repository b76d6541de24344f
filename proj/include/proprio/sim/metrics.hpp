#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

#include "proprio/grid_map.hpp"
#include "proprio/plane.hpp"
#include "proprio/sim/scenario.hpp"

namespace proprio {

/// One estimator-rate trace row.
struct TickRecord {
    double t = 0.0;
    Vec3 truth_p = Vec3::Zero();
    Vec3 est_p = Vec3::Zero();
    Vec3 truth_v = Vec3::Zero();
    Vec3 est_v = Vec3::Zero();
    std::array<double, 4> contact_prob{};
    std::array<bool, 4> in_contact{};
    std::array<bool, 4> true_contact{};
    std::array<bool, 4> pseudo_active{};
    std::array<double, 4> force{};
    bool plane_valid = false;
    PlaneParams plane;
};

/// One MPC-rate diagnostics row.
struct MpcRecord {
    double t = 0.0;
    int status = 0;  // QpStatus as int
    int iterations = 0;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int active_cbf_rows = 0;
    int dropped_cbf_steps = 0;
    bool zero_velocity_fallback = false;
    bool hazard_found = false;
    double h_glob = 0.0;                  // valid when hazard_found
    std::array<double, 4> h_local{};      // pitch lo/hi, roll lo/hi, radians
    bool h_local_valid = false;
    Vec3 planned_v = Vec3::Zero();
};

struct FootholdEvent {
    double t = 0.0;
    int leg = 0;
    Vec3 position = Vec3::Zero();  // estimated foot position at touchdown
};

struct RunTrace {
    std::vector<TickRecord> ticks;
    std::vector<MpcRecord> mpc;
    std::vector<FootholdEvent> footholds;
};

struct RunMetrics {
    std::map<std::string, double> region_angle_err_deg;
    std::optional<double> platform_height_err_cm;
    double com_mae = 0.0;  // vertical CoM MAE vs truth, meters
    double pseudo_coverage = 1.0;
    double force_only_coverage = 0.0;
    std::optional<double> min_h_glob;
    std::optional<double> min_h_local_deg;
    int invalid_cells_in_hull = 0;
};

namespace detail {

/// Andrew monotone-chain convex hull; returns CCW vertices.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    if (pts.size() < 3) return pts;
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    const auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
        return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
    };
    std::vector<Vec2> hull(2 * pts.size());
    size_t k = 0;
    for (const Vec2& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

inline bool inside_hull(const std::vector<Vec2>& hull, const Vec2& p, double tol = 1e-9) {
    if (hull.size() < 3) return false;
    for (size_t i = 0; i < hull.size(); ++i) {
        const Vec2& a = hull[i];
        const Vec2& b = hull[(i + 1) % hull.size()];
        const double cross =
            (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
        if (cross < tol) return false;  // strictly inside the CCW hull
    }
    return true;
}

}  // namespace detail

/// Post-run metric computation from the trace, the final map and the
/// analytic terrain. Region margins keep the body footprint clear of
/// region boundaries when averaging plane errors.
inline RunMetrics compute_metrics(const RunTrace& trace, const GridMap2p5& final_map,
                                  const TerrainModel& terrain, const Scenario& scenario,
                                  double region_margin = 0.5) {
    RunMetrics metrics;

    // Per-region support-plane angular error.
    for (const TerrainRegion& region : terrain.regions()) {
        if (region.is_platform) continue;
        double sum = 0.0;
        int count = 0;
        for (const TickRecord& tick : trace.ticks) {
            if (!tick.plane_valid) continue;
            const double x = tick.truth_p.x();
            if (x < region.x0 + region_margin || x > region.x1 - region_margin) continue;
            PlaneParams region_plane{region.normal.x(), region.normal.y(), region.normal.z(), 0.0,
                                     true};
            sum += rad2deg(plane_angle(tick.plane, region_plane));
            ++count;
        }
        if (count > 0) metrics.region_angle_err_deg[region.label] = sum / count;
    }

    // Platform height error from the final map, measured as the
    // reconstructed step height relative to the surrounding base so slow
    // odometric drift (scored separately through the CoM MAE) does not
    // contaminate the reconstruction metric. Support triangles spanning the
    // platform edge smear heights over roughly half a body length; both
    // bands stay clear of that smear.
    for (const TerrainRegion& region : terrain.regions()) {
        if (!region.is_platform) continue;
        double plat_sum = 0.0, base_sum = 0.0;
        int plat_count = 0, base_count = 0;
        const double margin = 0.3;
        for (int iy = 0; iy < final_map.height(); ++iy)
            for (int ix = 0; ix < final_map.width(); ++ix) {
                const GridCell& cell = final_map.cell(ix, iy);
                if (!cell.valid) continue;
                const Vec2 c = final_map.cell_center(ix, iy);
                const double err = cell.height - terrain.height(c);
                const bool in_platform_x =
                    c.x() > region.x0 + margin && c.x() < region.x1 - margin;
                const bool in_base_x =
                    (c.x() > region.x0 - 0.95 && c.x() < region.x0 - 0.45) ||
                    (c.x() > region.x1 + 0.45 && c.x() < region.x1 + 0.95);
                if (in_platform_x) {
                    plat_sum += err;
                    ++plat_count;
                } else if (in_base_x) {
                    base_sum += err;
                    ++base_count;
                }
            }
        if (plat_count > 0 && base_count > 0)
            metrics.platform_height_err_cm =
                100.0 * (plat_sum / plat_count - base_sum / base_count);
        else if (plat_count > 0)
            metrics.platform_height_err_cm = 100.0 * plat_sum / plat_count;
    }

    // Vertical CoM MAE.
    double mae = 0.0;
    for (const TickRecord& tick : trace.ticks)
        mae += std::abs(tick.est_p.z() - tick.truth_p.z());
    metrics.com_mae = trace.ticks.empty() ? 0.0 : mae / trace.ticks.size();

    // Pseudo-contact coverage: fused probability and force-only detection
    // inside injected windows on legs in true stance. Reported as 1.0 (fused)
    // and 0.0 (force-only) by convention when no window ticks exist.
    long window_ticks = 0, fused_hits = 0, force_hits = 0;
    for (const TickRecord& tick : trace.ticks)
        for (int leg = 0; leg < 4; ++leg) {
            if (!tick.pseudo_active[leg] || !tick.true_contact[leg]) continue;
            ++window_ticks;
            if (tick.contact_prob[leg] >= 0.5) ++fused_hits;
            if (tick.force[leg] >= scenario.contact.f_mid) ++force_hits;
        }
    if (window_ticks > 0) {
        metrics.pseudo_coverage = static_cast<double>(fused_hits) / window_ticks;
        metrics.force_only_coverage = static_cast<double>(force_hits) / window_ticks;
    }

    // Barrier minima over the run.
    for (const MpcRecord& rec : trace.mpc) {
        if (rec.hazard_found)
            metrics.min_h_glob = std::min(metrics.min_h_glob.value_or(1e300), rec.h_glob);
        if (rec.h_local_valid) {
            const double local_min =
                *std::min_element(rec.h_local.begin(), rec.h_local.end());
            metrics.min_h_local_deg =
                std::min(metrics.min_h_local_deg.value_or(1e300), rad2deg(local_min));
        }
    }

    // Trench check: invalid cells strictly inside the hull of the footholds
    // the map was built from.
    std::vector<Vec2> foothold_xy;
    foothold_xy.reserve(trace.footholds.size());
    for (const FootholdEvent& e : trace.footholds) foothold_xy.push_back(e.position.head<2>());
    const auto hull = detail::convex_hull(std::move(foothold_xy));
    if (hull.size() >= 3) {
        for (int iy = 0; iy < final_map.height(); ++iy)
            for (int ix = 0; ix < final_map.width(); ++ix) {
                if (final_map.cell(ix, iy).valid) continue;
                if (detail::inside_hull(hull, final_map.cell_center(ix, iy)))
                    ++metrics.invalid_cells_in_hull;
            }
    }
    return metrics;
}

}  // namespace proprio
