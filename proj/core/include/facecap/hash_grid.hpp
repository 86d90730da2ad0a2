#pragma once

#include "facecap/fwb.hpp"
#include "facecap/mesh.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace facecap {

struct HashGridConfig {
    int levels = 16;
    int features = 2;
    double min_resolution = 16.0;
    double max_resolution = 4096.0;
    int log2_table_size = 19;
    std::uint64_t seed = 0;
    double init_scale = 1e-4;  // features ~ U(-init_scale, init_scale)
};

/// Multi-resolution hashed feature grid over [0,1]^3 with a progressive
/// level schedule. Inactive levels encode to zeros.
class HashGrid {
public:
    explicit HashGrid(HashGridConfig config = {});

    const HashGridConfig& config() const { return config_; }
    int level_count() const { return config_.levels; }
    int feature_count() const { return config_.features; }
    std::uint32_t resolution(int level) const { return resolutions_.at(static_cast<std::size_t>(level)); }
    std::size_t table_size() const { return std::size_t{1} << config_.log2_table_size; }
    std::size_t output_width() const { return static_cast<std::size_t>(config_.levels * config_.features); }

    int active_levels() const { return active_; }
    void set_active(int count);

    /// Applies the training schedule: one level at iteration 0, one more every
    /// 250 iterations up to 8, all levels from iteration 2000. Returns the count.
    int set_active_levels(std::uint64_t iteration);
    static int scheduled_levels(std::uint64_t iteration, int total_levels = 16);

    /// (i * 1 xor j * 2654435761 xor k * 805459861) mod T, in 32-bit arithmetic.
    std::size_t hash(std::uint32_t i, std::uint32_t j, std::uint32_t k) const;

    float feature(int level, std::size_t slot, int f) const { return tables_[index(level, slot, f)]; }
    float& feature(int level, std::size_t slot, int f) { return tables_[index(level, slot, f)]; }

    /// Throws ValidationError when x leaves [0,1]^3.
    Eigen::VectorXd encode(const Vec3& x) const;

    void save(fwb::Container& c) const;
    static HashGrid load(const fwb::Container& c);

private:
    std::size_t index(int level, std::size_t slot, int f) const {
        return (static_cast<std::size_t>(level) * table_size() + slot) * static_cast<std::size_t>(config_.features) +
               static_cast<std::size_t>(f);
    }

    HashGridConfig config_;
    std::vector<std::uint32_t> resolutions_;
    std::vector<float> tables_;
    int active_ = 0;
};

} // namespace facecap
