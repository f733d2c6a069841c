#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "daq8/tensor.hpp"

namespace daq8 {

struct Dataset {
    Tensor images; // (S, C, H, W), values in [0, 1]
    std::vector<int> labels;
    int num_classes = 0;
};

struct SyntheticSpec {
    int samples = 2000;
    int channels = 1;
    int size = 16;
    int classes = 10;
    double noise = 0.12;
    uint64_t seed = 7;
};

// Seeded Gaussian-blob images: class k places a blob at the k-th position on
// a ring, with jittered center, amplitude variation and additive noise.
// Sample order is deterministic (labels cycle 0..classes-1) pre-shuffle.
Dataset synthetic_dataset(const SyntheticSpec& spec);

// IDX image/label pair (big-endian headers, magic 0x00000803 / 0x00000801).
// Pixels are normalized to [0,1]. Labels outside [0, num_classes) and
// truncated payloads are format errors.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 int num_classes);

} // namespace daq8
