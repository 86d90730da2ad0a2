#include "facecap/hash_grid.hpp"

#include "facecap/errors.hpp"
#include "facecap/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace facecap {

HashGrid::HashGrid(HashGridConfig config) : config_(config) {
    if (config_.levels < 1 || config_.features < 1) throw ValidationError("hash grid needs levels and features >= 1");
    if (config_.log2_table_size < 1 || config_.log2_table_size > 30)
        throw ValidationError("hash table size must be 2^1 .. 2^30");
    if (!(config_.min_resolution >= 1.0) || !(config_.max_resolution > config_.min_resolution))
        throw ValidationError("hash grid resolutions must increase");
    const double growth =
        config_.levels > 1 ? std::pow(config_.max_resolution / config_.min_resolution, 1.0 / (config_.levels - 1)) : 1.0;
    for (int l = 0; l < config_.levels; ++l)
        resolutions_.push_back(static_cast<std::uint32_t>(std::lround(config_.min_resolution * std::pow(growth, l))));
    for (std::size_t l = 1; l < resolutions_.size(); ++l)
        if (resolutions_[l] <= resolutions_[l - 1]) throw ValidationError("hash grid resolutions are not strictly increasing");

    tables_.resize(static_cast<std::size_t>(config_.levels) * table_size() * static_cast<std::size_t>(config_.features));
    Rng rng(config_.seed);
    for (auto& f : tables_) f = static_cast<float>(rng.uniform(-config_.init_scale, config_.init_scale));
    active_ = config_.levels;
}

void HashGrid::set_active(int count) {
    if (count < 0 || count > config_.levels)
        throw ValidationError("active level count " + std::to_string(count) + " outside [0, " +
                              std::to_string(config_.levels) + "]");
    active_ = count;
}

int HashGrid::scheduled_levels(std::uint64_t iteration, int total_levels) {
    if (iteration >= 2000) return total_levels;
    return std::min<int>({8, total_levels, 1 + static_cast<int>(iteration / 250)});
}

int HashGrid::set_active_levels(std::uint64_t iteration) {
    active_ = scheduled_levels(iteration, config_.levels);
    return active_;
}

std::size_t HashGrid::hash(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    const std::uint32_t h = (i * 1u) ^ (j * 2654435761u) ^ (k * 805459861u);
    return static_cast<std::size_t>(h) % table_size();
}

Eigen::VectorXd HashGrid::encode(const Vec3& x) const {
    for (int d = 0; d < 3; ++d)
        if (!(x[d] >= 0.0 && x[d] <= 1.0))
            throw ValidationError("hash_encode: coordinate " + std::to_string(x[d]) + " outside [0,1]");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(output_width()));
    for (int l = 0; l < active_; ++l) {
        const std::uint32_t res = resolutions_[static_cast<std::size_t>(l)];
        std::uint32_t base[3];
        double frac[3];
        for (int d = 0; d < 3; ++d) {
            const double p = x[d] * res;
            const auto cell = std::min<std::uint32_t>(static_cast<std::uint32_t>(p), res - 1);
            base[d] = cell;
            frac[d] = p - cell;
        }
        for (int corner = 0; corner < 8; ++corner) {
            double w = 1.0;
            std::uint32_t c[3];
            for (int d = 0; d < 3; ++d) {
                const bool hi = (corner >> d) & 1;
                c[d] = base[d] + (hi ? 1u : 0u);
                w *= hi ? frac[d] : 1.0 - frac[d];
            }
            if (w == 0.0) continue;
            const std::size_t slot = hash(c[0], c[1], c[2]);
            for (int f = 0; f < config_.features; ++f)
                out[l * config_.features + f] += w * static_cast<double>(feature(l, slot, f));
        }
    }
    return out;
}

void HashGrid::save(fwb::Container& c) const {
    const std::uint64_t per_level = table_size() * static_cast<std::size_t>(config_.features);
    for (int l = 0; l < config_.levels; ++l)
        c.put_array<float>("hash_l" + std::to_string(l), {table_size(), static_cast<std::uint64_t>(config_.features)},
                           std::span<const float>(tables_.data() + l * per_level, per_level));
    nlohmann::json meta{{"levels", config_.levels},
                        {"features", config_.features},
                        {"min_resolution", config_.min_resolution},
                        {"max_resolution", config_.max_resolution},
                        {"log2_table_size", config_.log2_table_size},
                        {"seed", config_.seed},
                        {"active", active_},
                        {"schedule", "1 level at iteration 0, +1 every 250 up to 8, all from 2000"}};
    c.put_text("hash_meta", meta.dump());
}

HashGrid HashGrid::load(const fwb::Container& c) {
    HashGridConfig cfg;
    int active = 0;
    try {
        const auto meta = nlohmann::json::parse(c.get_text("hash_meta"));
        cfg.levels = meta.at("levels").get<int>();
        cfg.features = meta.at("features").get<int>();
        cfg.min_resolution = meta.at("min_resolution").get<double>();
        cfg.max_resolution = meta.at("max_resolution").get<double>();
        cfg.log2_table_size = meta.at("log2_table_size").get<int>();
        cfg.seed = meta.at("seed").get<std::uint64_t>();
        active = meta.at("active").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad hash grid meta chunk: " + std::string(e.what()));
    }
    HashGrid grid(cfg);
    const std::size_t per_level = grid.table_size() * static_cast<std::size_t>(cfg.features);
    for (int l = 0; l < cfg.levels; ++l) {
        const auto t = c.get_array<float>("hash_l" + std::to_string(l));
        if (t.size() != per_level) throw ParseError("hash table level " + std::to_string(l) + " has the wrong size");
        std::copy(t.begin(), t.end(), grid.tables_.begin() + static_cast<std::ptrdiff_t>(l * per_level));
    }
    grid.set_active(active);
    return grid;
}

} // namespace facecap
