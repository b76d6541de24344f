#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "proprio/sim/metrics.hpp"
#include "proprio/sim/simulation.hpp"

namespace proprio {

/// Writes via a temp file plus rename so interrupted runs never leave
/// truncated outputs behind.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline nlohmann::ordered_json metrics_to_json(const RunMetrics& m) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json regions = nlohmann::ordered_json::object();
    for (const auto& [label, err] : m.region_angle_err_deg) regions[label] = err;
    j["region_angle_err_deg"] = regions;
    j["platform_height_err_cm"] =
        m.platform_height_err_cm ? nlohmann::ordered_json(*m.platform_height_err_cm)
                                 : nlohmann::ordered_json(nullptr);
    j["com_mae_m"] = m.com_mae;
    j["pseudo_coverage"] = m.pseudo_coverage;
    j["force_only_coverage"] = m.force_only_coverage;
    j["min_h_glob_m"] =
        m.min_h_glob ? nlohmann::ordered_json(*m.min_h_glob) : nlohmann::ordered_json(nullptr);
    j["min_h_local_deg"] = m.min_h_local_deg ? nlohmann::ordered_json(*m.min_h_local_deg)
                                             : nlohmann::ordered_json(nullptr);
    j["invalid_cells_in_hull"] = m.invalid_cells_in_hull;
    return j;
}

inline std::string trace_to_csv(const RunTrace& trace) {
    std::ostringstream os;
    os << "t,truth_x,truth_y,truth_z,est_x,est_y,est_z,truth_vx,truth_vy,truth_vz,"
          "est_vx,est_vy,est_vz,"
          "prob0,prob1,prob2,prob3,contact0,contact1,contact2,contact3,"
          "true_contact0,true_contact1,true_contact2,true_contact3,"
          "pseudo0,pseudo1,pseudo2,pseudo3,force0,force1,force2,force3,"
          "plane_valid,plane_k1,plane_k2,plane_k3,plane_d\n";
    char buf[640];
    for (const TickRecord& r : trace.ticks) {
        std::snprintf(
            buf, sizeof(buf),
            "%.6f,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,"
            "%.6g,%.6g,%.6g,%.6g,%d,%d,%d,%d,%d,%d,%d,%d,%d,%d,%d,%d,"
            "%.6g,%.6g,%.6g,%.6g,%d,%.9g,%.9g,%.9g,%.9g\n",
            r.t, r.truth_p.x(), r.truth_p.y(), r.truth_p.z(), r.est_p.x(), r.est_p.y(),
            r.est_p.z(), r.truth_v.x(), r.truth_v.y(), r.truth_v.z(), r.est_v.x(), r.est_v.y(),
            r.est_v.z(), r.contact_prob[0], r.contact_prob[1], r.contact_prob[2],
            r.contact_prob[3], r.in_contact[0] ? 1 : 0, r.in_contact[1] ? 1 : 0,
            r.in_contact[2] ? 1 : 0, r.in_contact[3] ? 1 : 0, r.true_contact[0] ? 1 : 0,
            r.true_contact[1] ? 1 : 0, r.true_contact[2] ? 1 : 0, r.true_contact[3] ? 1 : 0,
            r.pseudo_active[0] ? 1 : 0, r.pseudo_active[1] ? 1 : 0, r.pseudo_active[2] ? 1 : 0,
            r.pseudo_active[3] ? 1 : 0, r.force[0], r.force[1], r.force[2], r.force[3],
            r.plane_valid ? 1 : 0, r.plane.k1, r.plane.k2, r.plane.k3, r.plane.d);
        os << buf;
    }
    return os.str();
}

inline std::string mpc_trace_to_csv(const RunTrace& trace) {
    std::ostringstream os;
    os << "t,status,iterations,objective,kkt_residual,active_cbf_rows,dropped_cbf_steps,"
          "zero_velocity_fallback,hazard_found,h_glob,h_local_pitch_lo,h_local_pitch_hi,"
          "h_local_roll_lo,h_local_roll_hi,planned_vx,planned_vy,planned_vz\n";
    char buf[512];
    for (const MpcRecord& r : trace.mpc) {
        std::snprintf(buf, sizeof(buf),
                      "%.6f,%d,%d,%.9g,%.3g,%d,%d,%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      r.t, r.status, r.iterations, r.objective, r.kkt_residual,
                      r.active_cbf_rows, r.dropped_cbf_steps, r.zero_velocity_fallback ? 1 : 0,
                      r.hazard_found ? 1 : 0, r.hazard_found ? r.h_glob : std::nan(""),
                      r.h_local_valid ? r.h_local[0] : std::nan(""),
                      r.h_local_valid ? r.h_local[1] : std::nan(""),
                      r.h_local_valid ? r.h_local[2] : std::nan(""),
                      r.h_local_valid ? r.h_local[3] : std::nan(""), r.planned_v.x(),
                      r.planned_v.y(), r.planned_v.z());
        os << buf;
    }
    return os.str();
}

inline std::string map_to_csv(const GridMap2p5& map) {
    std::ostringstream os;
    map.write_csv(os);
    return os.str();
}

inline std::string map_to_binary(const GridMap2p5& map) {
    std::ostringstream os(std::ios::binary);
    map.write_binary(os);
    return os.str();
}

}  // namespace proprio
