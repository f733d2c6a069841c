#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "daq8/clip_state.hpp"
#include "daq8/dataset.hpp"
#include "daq8/model.hpp"

namespace daq8 {

struct LrSchedule {
    std::string kind = "constant"; // "constant" | "multistep"
    double base = 0.05;
    std::vector<int> milestones; // epochs at which lr multiplies by gamma
    double gamma = 0.1;

    double at(int epoch) const;
    void validate() const;
};

struct DatasetConfig {
    std::string source = "synthetic"; // "synthetic" | "idx"
    SyntheticSpec synthetic;          // split into train/val by sample count
    int val_samples = 500;
    std::string train_images, train_labels, val_images, val_labels; // idx paths
    int classes = 10;
};

struct TrainConfig {
    Precision mode = Precision::FP32;
    MCSHyper hyper;
    int epochs = 20;
    int batch_size = 32;
    LrSchedule lr;
    double momentum = 0.9;
    uint64_t seed_init = 1, seed_shuffle = 2, seed_round = 3;
    DatasetConfig dataset;
    std::vector<StageSpec> stages; // empty -> default desk model
    int metrics_every = 50;
    double alpha = 0.2; // magnitude exponent, diagnostics only
    bool exempt_first_last = false;
    bool strict_alg1_gx_scales = false;
    bool dump_gradients = false;

    void validate() const;
    // Applies one master seed: init/shuffle/rounding seeds derived from it.
    void reseed(uint64_t master);
};

TrainConfig default_train_config();
TrainConfig load_train_config(const std::filesystem::path& path);
TrainConfig parse_train_config(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& config);

} // namespace daq8
