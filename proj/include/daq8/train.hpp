#pragma once

#include <filesystem>
#include <vector>

#include "daq8/checkpoint.hpp"
#include "daq8/config.hpp"
#include "daq8/metrics.hpp"

namespace daq8 {

class TrainingDiverged : public Error {
public:
    explicit TrainingDiverged(const std::string& msg) : Error("training diverged: " + msg) {}
};

struct TrainResult {
    double final_val_acc = 0.0;
    double final_val_loss = 0.0;
    std::vector<MetricsRecord> records;
    std::filesystem::path checkpoint_path; // empty when no out_dir was given
};

// Per-epoch shuffle order; a pure function of (seed, epoch, n), so every
// precision mode consumes identical batch sequences under shared seeds.
std::vector<int64_t> epoch_permutation(uint64_t seed_shuffle, int epoch, int64_t n);

struct EvalResult {
    double acc = 0.0;
    double loss = 0.0;
};

// Validation always runs the full-precision forward on the master weights;
// quantization affects what the training loop computes, not how the trained
// model is scored.
EvalResult evaluate(const Model& model, const Dataset& ds, int batch_size);

// Runs the configured training. With an out_dir, writes metrics.csv,
// metrics.jsonl, config.json and checkpoint.bin there (plus gradient dumps
// when enabled). With resume_from, continues a checkpointed run and
// reproduces the straight-through run bit-for-bit.
TrainResult train(const TrainConfig& config, const std::filesystem::path& out_dir = {},
                  const std::filesystem::path& resume_from = {});

// Train/val splits for the configured source.
struct DataSplits {
    Dataset train;
    Dataset val;
};
DataSplits load_splits(const DatasetConfig& cfg);

ModelSpec model_spec_from_config(const TrainConfig& cfg, const Dataset& train);

} // namespace daq8
