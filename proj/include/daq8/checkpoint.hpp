#pragma once

#include <cstdint>
#include <filesystem>

#include "daq8/clip_state.hpp"
#include "daq8/model.hpp"

namespace daq8 {

// Integer cursors + accumulator state; together with the config seeds these
// make training resumable to bit-identical results (all randomness is
// counter-based, so no generator state needs saving).
struct TrainState {
    uint64_t seed_init = 0, seed_shuffle = 0, seed_round = 0;
    int epoch = 0;
    int64_t batch_index = 0; // within the current epoch
    int64_t iteration = 0;
    double accum_loss = 0.0;
    int64_t accum_correct = 0;
    int64_t accum_count = 0;
    int64_t accum_batches = 0;
    int64_t last_record_iteration = -1;
};

// Single-file container: magic "DAQ8CKPT", format version, then named
// sections (model/v1, optim/v1, clip_state/v1, rng/v1). Little-endian.
void save_checkpoint(const std::filesystem::path& path, const Model& model, const Momentum& mom,
                     const ClipState& clip, const TrainState& state);

// Restores into an already-initialized model/momentum of the expected
// topology; any shape mismatch is a checkpoint error.
void restore_checkpoint(const std::filesystem::path& path, Model& model, Momentum& mom,
                        ClipState& clip, TrainState& state);

} // namespace daq8
