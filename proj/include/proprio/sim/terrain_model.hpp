#pragma once

#include <random>
#include <string>
#include <vector>

#include "proprio/common.hpp"

namespace proprio {

/// Labeled analytic region for metric evaluation.
struct TerrainRegion {
    std::string label;
    double x0 = 0.0;
    double x1 = 0.0;
    Vec3 normal = Vec3::UnitZ();
    bool is_platform = false;
    double y0 = 0.0, y1 = 0.0;  // platform extent only
};

/// Analytic terrain: a piecewise-linear corridor profile along x (flat
/// segments and ramps), plus platform, cliff and smooth-depression
/// overlays. Deterministic given the construction sequence and seeds.
class TerrainModel {
  public:
    void add_flat(double length, std::string label = "") {
        add_segment(false, length, 0.0, std::move(label));
    }

    void add_ramp(double length, double angle_deg, std::string label = "") {
        add_segment(true, length, deg2rad(angle_deg), std::move(label));
    }

    void add_platform(double x0, double x1, double y0, double y1, double height,
                      std::string label = "platform") {
        platforms_.push_back(Platform{x0, x1, y0, y1, height, std::move(label)});
    }

    /// Vertical drop for x > edge.
    void add_cliff(double x_edge, double drop) { cliffs_.push_back({x_edge, drop}); }

    /// Seeded smooth dents/bumps inside a rectangle.
    void add_depressions(uint64_t seed, int count, double amplitude, double sigma, double x0,
                         double x1, double y0, double y1) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1), ua(-amplitude, amplitude);
        for (int i = 0; i < count; ++i) {
            const double cx = ux(rng), cy = uy(rng), amp = ua(rng);
            bumps_.push_back({cx, cy, amp, sigma});
        }
    }

    double height(double x, double y) const {
        double z = profile(x);
        for (const Platform& p : platforms_)
            if (x >= p.x0 && x <= p.x1 && y >= p.y0 && y <= p.y1) z += p.height;
        for (const Cliff& c : cliffs_)
            if (x > c.x_edge) z -= c.drop;
        for (const Bump& b : bumps_) {
            const double r2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
            z += b.amp * std::exp(-0.5 * r2 / (b.sigma * b.sigma));
        }
        return z;
    }

    double height(const Vec2& xy) const { return height(xy.x(), xy.y()); }

    std::vector<TerrainRegion> regions() const {
        std::vector<TerrainRegion> out;
        for (const Segment& s : segments_) {
            TerrainRegion r;
            r.label = s.label;
            r.x0 = s.x0;
            r.x1 = s.x1;
            r.normal = Vec3{-std::sin(s.angle), 0.0, std::cos(s.angle)};
            out.push_back(std::move(r));
        }
        for (const Platform& p : platforms_) {
            TerrainRegion r;
            r.label = p.label;
            r.x0 = p.x0;
            r.x1 = p.x1;
            r.y0 = p.y0;
            r.y1 = p.y1;
            r.is_platform = true;
            out.push_back(std::move(r));
        }
        return out;
    }

    bool empty() const { return segments_.empty() && platforms_.empty() && bumps_.empty(); }

  private:
    struct Segment {
        double x0, x1, z0, angle;
        std::string label;
    };
    struct Platform {
        double x0, x1, y0, y1, height;
        std::string label;
    };
    struct Cliff {
        double x_edge, drop;
    };
    struct Bump {
        double cx, cy, amp, sigma;
    };

    void add_segment(bool ramp, double length, double angle, std::string label) {
        if (length <= 0.0) throw std::invalid_argument("segment length must be > 0");
        double x0 = 0.0, z0 = 0.0;
        if (!segments_.empty()) {
            const Segment& last = segments_.back();
            x0 = last.x1;
            z0 = last.z0 + std::tan(last.angle) * (last.x1 - last.x0);
        }
        if (label.empty())
            label = (ramp ? "ramp" : "flat") + std::to_string(segments_.size());
        segments_.push_back(Segment{x0, x0 + length, z0, angle, std::move(label)});
    }

    double profile(double x) const {
        if (segments_.empty()) return 0.0;
        if (x <= segments_.front().x0) return segments_.front().z0;
        for (const Segment& s : segments_)
            if (x <= s.x1) return s.z0 + std::tan(s.angle) * (x - s.x0);
        const Segment& last = segments_.back();
        return last.z0 + std::tan(last.angle) * (last.x1 - last.x0);
    }

    std::vector<Segment> segments_;
    std::vector<Platform> platforms_;
    std::vector<Cliff> cliffs_;
    std::vector<Bump> bumps_;
};

}  // namespace proprio
