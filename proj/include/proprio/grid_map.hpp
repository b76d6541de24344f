#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "proprio/common.hpp"

namespace proprio {

struct GridCell {
    double height = 0.0;
    double confidence = 0.0;
    bool valid = false;
};

/// Fixed-resolution 2.5-D height grid in world frame. Cells start invalid
/// (no height); queries against invalid or out-of-bounds cells report
/// "unknown" as an empty optional. Copying the map is the snapshot mechanism
/// for cross-thread readers.
class GridMap2p5 {
  public:
    GridMap2p5(const Vec2& origin, double resolution, int width, int height)
        : origin_(origin), resolution_(resolution), width_(width), height_(height),
          cells_(static_cast<size_t>(width) * static_cast<size_t>(height)) {
        if (resolution <= 0.0) throw std::invalid_argument("resolution must be > 0");
        if (width < 1 || height < 1) throw std::invalid_argument("grid dims must be >= 1");
    }

    const Vec2& origin() const { return origin_; }
    double resolution() const { return resolution_; }
    int width() const { return width_; }
    int height() const { return height_; }

    GridCell& cell(int ix, int iy) { return cells_[index(ix, iy)]; }
    const GridCell& cell(int ix, int iy) const { return cells_[index(ix, iy)]; }

    bool in_bounds(int ix, int iy) const {
        return ix >= 0 && ix < width_ && iy >= 0 && iy < height_;
    }

    Vec2 cell_center(int ix, int iy) const {
        return origin_ + Vec2{(ix + 0.5) * resolution_, (iy + 0.5) * resolution_};
    }

    std::optional<std::pair<int, int>> cell_index_at(const Vec2& xy) const {
        const int ix = static_cast<int>(std::floor((xy.x() - origin_.x()) / resolution_));
        const int iy = static_cast<int>(std::floor((xy.y() - origin_.y()) / resolution_));
        if (!in_bounds(ix, iy)) return std::nullopt;
        return std::make_pair(ix, iy);
    }

    /// Height of the cell containing xy, or unknown (invalid / out of bounds).
    std::optional<double> query_height(const Vec2& xy) const {
        const auto idx = cell_index_at(xy);
        if (!idx) return std::nullopt;
        const GridCell& c = cell(idx->first, idx->second);
        if (!c.valid) return std::nullopt;
        return c.height;
    }

    void set_cell(int ix, int iy, double height, double confidence) {
        GridCell& c = cell(ix, iy);
        c.height = height;
        c.confidence = std::clamp(confidence, 0.0, 1.0);
        c.valid = true;
    }

    /// One line per cell: x, y, height, valid, confidence.
    void write_csv(std::ostream& os) const {
        os << "x,y,height,valid,confidence\n";
        char buf[128];
        for (int iy = 0; iy < height_; ++iy) {
            for (int ix = 0; ix < width_; ++ix) {
                const GridCell& c = cell(ix, iy);
                const Vec2 center = cell_center(ix, iy);
                std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%d,%.6f\n", center.x(), center.y(),
                              c.height, c.valid ? 1 : 0, c.confidence);
                os << buf;
            }
        }
    }

    /// Compact binary form: magic, origin, resolution, dims, then row-major
    /// (height, confidence, valid) records. Native endianness.
    void write_binary(std::ostream& os) const {
        const char magic[4] = {'P', '2', '5', 'M'};
        os.write(magic, 4);
        const uint32_t version = 1;
        write_raw(os, version);
        write_raw(os, origin_.x());
        write_raw(os, origin_.y());
        write_raw(os, resolution_);
        write_raw(os, static_cast<uint32_t>(width_));
        write_raw(os, static_cast<uint32_t>(height_));
        for (const GridCell& c : cells_) {
            write_raw(os, c.height);
            write_raw(os, c.confidence);
            const uint8_t v = c.valid ? 1 : 0;
            write_raw(os, v);
        }
    }

    static GridMap2p5 read_binary(std::istream& is) {
        char magic[4];
        is.read(magic, 4);
        if (!is || std::memcmp(magic, "P25M", 4) != 0)
            throw std::runtime_error("bad grid map magic");
        uint32_t version = 0;
        read_raw(is, version);
        if (version != 1) throw std::runtime_error("unsupported grid map version");
        double ox, oy, res;
        uint32_t w, h;
        read_raw(is, ox);
        read_raw(is, oy);
        read_raw(is, res);
        read_raw(is, w);
        read_raw(is, h);
        GridMap2p5 map({ox, oy}, res, static_cast<int>(w), static_cast<int>(h));
        for (GridCell& c : map.cells_) {
            read_raw(is, c.height);
            read_raw(is, c.confidence);
            uint8_t v = 0;
            read_raw(is, v);
            c.valid = v != 0;
        }
        if (!is) throw std::runtime_error("truncated grid map stream");
        return map;
    }

  private:
    size_t index(int ix, int iy) const {
        if (!in_bounds(ix, iy)) throw std::out_of_range("grid cell index out of bounds");
        return static_cast<size_t>(iy) * static_cast<size_t>(width_) + static_cast<size_t>(ix);
    }

    template <typename T>
    static void write_raw(std::ostream& os, const T& v) {
        os.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    template <typename T>
    static void read_raw(std::istream& is, T& v) {
        is.read(reinterpret_cast<char*>(&v), sizeof(T));
    }

    Vec2 origin_;
    double resolution_;
    int width_;
    int height_;
    std::vector<GridCell> cells_;
};

}  // namespace proprio
