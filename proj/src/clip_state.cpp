#include "daq8/clip_state.hpp"

#include <cmath>
#include <string>

#include "daq8/io.hpp"

namespace daq8 {

void MCSHyper::validate() const {
    if (!(k > 0.0f) || !std::isfinite(k))
        throw ContractViolation("hyper k must be positive, got " + std::to_string(k));
    if (!(A > 0.0f && A <= 1.0f))
        throw ContractViolation("hyper A must lie in (0,1], got " + std::to_string(A));
    if (!(lambda > 0.0f && lambda < 1.0f))
        throw ContractViolation("hyper lambda must lie in (0,1), got " + std::to_string(lambda));
    if (k * A > 1.0f && !allow_ka_above_one)
        throw ContractViolation("k*A = " + std::to_string(k * A) +
                                " > 1 gives a sign-oscillating recurrence; set "
                                "allow_ka_above_one to probe it anyway");
}

std::span<const float> ClipState::layer_scales(int layer_id) const {
    const auto it = scales_.find(layer_id);
    if (it == scales_.end())
        throw DimensionError("no clip scales stored for layer " + std::to_string(layer_id));
    return it->second;
}

std::vector<int> ClipState::layer_ids() const {
    std::vector<int> ids;
    ids.reserve(scales_.size());
    for (const auto& [id, _] : scales_) ids.push_back(id);
    return ids;
}

float update_channel_scale(std::optional<float> prev, const ChannelStats& stats,
                           DistributionClass cls, const MCSHyper& hyper) {
    hyper.validate();
    if (!(stats.g_max > 0.0f))
        throw ContractViolation("degenerate slice: g_max must be positive for a scale update");
    if (!prev.has_value()) return stats.g_max; // recurrence is self-starting
    if (cls == DistributionClass::Gaussian) return stats.g_max;
    return hyper.retention() * *prev + hyper.A * stats.g_max;
}

std::vector<float> update_layer(ClipState& state, int layer_id,
                                std::span<const ChannelStats> stats,
                                std::span<const DistributionClass> classes,
                                const MCSHyper& hyper) {
    hyper.validate();
    if (stats.size() != classes.size())
        throw DimensionError("stats/classes length mismatch: " + std::to_string(stats.size()) +
                             " vs " + std::to_string(classes.size()));
    auto [it, inserted] = state.scales_.try_emplace(layer_id, stats.size(), 0.0f);
    std::vector<float>& stored = it->second;
    if (!inserted && stored.size() != stats.size())
        throw DimensionError("layer " + std::to_string(layer_id) + " has " +
                             std::to_string(stored.size()) + " stored channels but " +
                             std::to_string(stats.size()) + " were supplied");
    for (size_t c = 0; c < stats.size(); ++c) {
        if (!(stats[c].g_max > 0.0f)) continue; // degenerate slice, keep stored value
        const std::optional<float> prev =
            stored[c] > 0.0f ? std::optional<float>(stored[c]) : std::nullopt;
        stored[c] = update_channel_scale(prev, stats[c], classes[c], hyper);
    }
    return stored;
}

namespace {
constexpr char kSectionTag[] = "clip_state/v1";
}

void save_state(const ClipState& state, std::ostream& out) {
    write_string(out, kSectionTag);
    write_u32(out, static_cast<uint32_t>(state.scales_.size()));
    for (const auto& [layer_id, scales] : state.scales_) {
        write_u32(out, static_cast<uint32_t>(layer_id));
        write_u32(out, static_cast<uint32_t>(scales.size()));
        write_bytes(out, scales.data(), scales.size() * sizeof(float));
    }
    write_i64(out, state.iteration_);
}

ClipState load_state(std::istream& in) {
    const std::string tag = read_string(in, "clip state tag");
    if (tag != kSectionTag)
        throw CheckpointError("expected " + std::string(kSectionTag) + ", found '" + tag + "'");
    ClipState state;
    const uint32_t layers = read_u32(in, "clip state layer count");
    for (uint32_t i = 0; i < layers; ++i) {
        const int layer_id = static_cast<int>(read_u32(in, "clip state layer id"));
        const uint32_t channels = read_u32(in, "clip state channel count");
        if (channels == 0 || channels > (1u << 20))
            throw CheckpointError("implausible channel count " + std::to_string(channels));
        std::vector<float> scales(channels);
        read_bytes(in, scales.data(), channels * sizeof(float), "clip state scales");
        for (float s : scales)
            if (!std::isfinite(s) || s < 0.0f)
                throw CheckpointError("corrupt clip scale " + std::to_string(s));
        state.scales_.emplace(layer_id, std::move(scales));
    }
    state.iteration_ = read_i64(in, "clip state iteration");
    return state;
}

} // namespace daq8
