#include "daq8/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "daq8/errors.hpp"

namespace daq8 {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

std::string metrics_csv_header(int conv_layers) {
    std::string h = "iteration,epoch,loss,train_acc,val_acc,val_loss,lr";
    for (int l = 0; l < conv_layers; ++l) {
        const std::string s = std::to_string(l);
        h += ",e_da_l" + s + ",e_gvq_l" + s + ",e_gq_l" + s + ",ks_gauss_l" + s + ",ks_invt_l" + s +
             ",n_gauss_l" + s + ",n_invt_l" + s + ",n_degen_l" + s;
    }
    return h;
}

std::string metrics_csv_row(const MetricsRecord& rec) {
    std::string row = std::to_string(rec.iteration) + "," + std::to_string(rec.epoch) + "," +
                      fmt(rec.loss) + "," + fmt(rec.train_acc) + "," + fmt(rec.val_acc) + "," +
                      fmt(rec.val_loss) + "," + fmt(rec.lr);
    for (const LayerDiag& d : rec.layers) {
        row += "," + fmt(d.e_da) + "," + fmt(d.e_gvq) + "," + fmt(d.e_gq) + "," + fmt(d.ks_gauss) +
               "," + fmt(d.ks_invt) + "," + std::to_string(d.n_gauss) + "," +
               std::to_string(d.n_invt) + "," + std::to_string(d.n_degen);
    }
    return row;
}

std::string metrics_json_line(const MetricsRecord& rec) {
    std::string s = "{\"iteration\":" + std::to_string(rec.iteration) +
                    ",\"epoch\":" + std::to_string(rec.epoch) + ",\"loss\":" + fmt(rec.loss) +
                    ",\"train_acc\":" + fmt(rec.train_acc) + ",\"val_acc\":" + fmt(rec.val_acc) +
                    ",\"val_loss\":" + fmt(rec.val_loss) + ",\"lr\":" + fmt(rec.lr) +
                    ",\"layers\":[";
    for (size_t i = 0; i < rec.layers.size(); ++i) {
        const LayerDiag& d = rec.layers[i];
        if (i) s += ",";
        s += "{\"e_da\":" + fmt(d.e_da) + ",\"e_gvq\":" + fmt(d.e_gvq) + ",\"e_gq\":" + fmt(d.e_gq) +
             ",\"ks_gauss\":" + fmt(d.ks_gauss) + ",\"ks_invt\":" + fmt(d.ks_invt) +
             ",\"n_gauss\":" + std::to_string(d.n_gauss) + ",\"n_invt\":" + std::to_string(d.n_invt) +
             ",\"n_degen\":" + std::to_string(d.n_degen) + "}";
    }
    return s + "]}";
}

MetricsWriter::MetricsWriter(const std::filesystem::path& dir, int conv_layers) {
    std::filesystem::create_directories(dir);
    csv_path_ = dir / "metrics.csv";
    jsonl_path_ = dir / "metrics.jsonl";
    std::ofstream csv(csv_path_, std::ios::trunc);
    if (!csv) throw IoError("cannot open " + csv_path_.string() + " for writing");
    csv << metrics_csv_header(conv_layers) << "\n";
    std::ofstream jsonl(jsonl_path_, std::ios::trunc);
    if (!jsonl) throw IoError("cannot open " + jsonl_path_.string() + " for writing");
    enabled_ = true;
}

void MetricsWriter::append(const MetricsRecord& rec) {
    if (!enabled_) return;
    std::ofstream csv(csv_path_, std::ios::app);
    csv << metrics_csv_row(rec) << "\n";
    if (!csv) throw IoError("failed appending to " + csv_path_.string());
    std::ofstream jsonl(jsonl_path_, std::ios::app);
    jsonl << metrics_json_line(rec) << "\n";
    if (!jsonl) throw IoError("failed appending to " + jsonl_path_.string());
}

} // namespace daq8
