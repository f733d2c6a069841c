#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "daq8/grad_stats.hpp"

namespace daq8 {

// Clipping-recurrence hyper-parameters. The Inverted-T update
// s_t = (1-kA) s_{t-1} + A g_max contracts only for k*A <= 1; larger
// products oscillate in sign and are rejected unless explicitly allowed.
struct MCSHyper {
    float k = 1.0f;
    float A = 0.8f;
    float lambda = 0.3f;
    bool allow_ka_above_one = false;

    void validate() const;
    float retention() const { return 1.0f - k * A; }
};

// Per-layer, per-channel clipping scales carried across training iterations.
// A stored scale of 0 marks a channel that has not yet seen a nonzero
// gradient; every initialized scale is positive.
class ClipState {
public:
    bool has_layer(int layer_id) const { return scales_.find(layer_id) != scales_.end(); }
    std::span<const float> layer_scales(int layer_id) const;
    std::vector<int> layer_ids() const;
    int64_t iteration() const { return iteration_; }

    // One advance per backward pass; called by the training loop, not by
    // per-layer updates.
    void advance_iteration() { ++iteration_; }

    friend std::vector<float> update_layer(ClipState& state, int layer_id,
                                           std::span<const ChannelStats> stats,
                                           std::span<const DistributionClass> classes,
                                           const MCSHyper& hyper);
    friend void save_state(const ClipState& state, std::ostream& out);
    friend ClipState load_state(std::istream& in);

private:
    std::map<int, std::vector<float>> scales_;
    int64_t iteration_ = 0;
};

// Single-channel rule: Gaussian -> g_max; Inverted-T -> (1-kA) prev + A g_max;
// no previous scale -> g_max regardless of class. Requires g_max > 0.
float update_channel_scale(std::optional<float> prev, const ChannelStats& stats,
                           DistributionClass cls, const MCSHyper& hyper);

// Element-wise update of one layer's scale vector; returns the updated
// scales. Channels with g_max <= 0 keep their stored value (possibly still
// unset). A stats vector whose length differs from the stored vector means
// the layer topology changed mid-run.
std::vector<float> update_layer(ClipState& state, int layer_id,
                                std::span<const ChannelStats> stats,
                                std::span<const DistributionClass> classes,
                                const MCSHyper& hyper);

// Versioned "clip_state/v1" binary section; load(save(x)) == x bit-for-bit.
void save_state(const ClipState& state, std::ostream& out);
ClipState load_state(std::istream& in);

} // namespace daq8
