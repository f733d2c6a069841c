#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "daq8/diagnostics.hpp"

namespace daq8 {

// One row of the training diagnostics stream. Layer columns repeat per conv
// layer in model order.
struct MetricsRecord {
    int64_t iteration = 0;
    int epoch = 0;
    double loss = 0.0;      // mean training loss since the previous record
    double train_acc = 0.0; // training accuracy since the previous record
    double val_acc = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    std::vector<LayerDiag> layers;
};

std::string metrics_csv_header(int conv_layers);
std::string metrics_csv_row(const MetricsRecord& rec);
std::string metrics_json_line(const MetricsRecord& rec);

// Append-only CSV + JSON-lines writer with deterministic formatting.
class MetricsWriter {
public:
    MetricsWriter() = default;
    MetricsWriter(const std::filesystem::path& dir, int conv_layers);
    void append(const MetricsRecord& rec);

private:
    std::filesystem::path csv_path_, jsonl_path_;
    bool enabled_ = false;
};

} // namespace daq8
