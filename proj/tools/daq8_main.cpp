// daq8: distribution-adaptive INT8 quantized-training simulator.
// Subcommands: train, compare, diagnose, bench, dump.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <unistd.h>

#include <CLI11.hpp>

#include "daq8/diagnostics.hpp"
#include "daq8/io.hpp"
#include "daq8/train.hpp"

using namespace daq8;

namespace {

TrainConfig config_from_flags(const std::string& config_path, const std::string& mode,
                              std::optional<uint64_t> seed) {
    TrainConfig cfg =
        config_path.empty() ? default_train_config() : load_train_config(config_path);
    if (!mode.empty()) cfg.mode = precision_from_name(mode);
    if (seed) cfg.reseed(*seed);
    cfg.validate();
    return cfg;
}

int cmd_train(const std::string& config_path, const std::string& mode, const std::string& out,
              std::optional<uint64_t> seed, const std::string& resume) {
    TrainConfig cfg = config_from_flags(config_path, mode, seed);
    const TrainResult res = train(cfg, out, resume);
    std::printf("mode=%s final_val_acc=%.4f final_val_loss=%.4f records=%zu\n",
                precision_name(cfg.mode).c_str(), res.final_val_acc, res.final_val_loss,
                res.records.size());
    if (!res.checkpoint_path.empty())
        std::printf("checkpoint: %s\n", res.checkpoint_path.c_str());
    return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out, bool ablate,
                std::optional<uint64_t> seed) {
    TrainConfig cfg = config_from_flags(config_path, "", seed);
    std::vector<Precision> modes = {Precision::FP32, Precision::INT8_DA};
    if (ablate) modes.push_back(Precision::INT8_GQ);

    std::vector<std::pair<std::string, double>> rows;
    for (Precision mode : modes) {
        TrainConfig run_cfg = cfg;
        run_cfg.mode = mode;
        const auto dir = out.empty() ? std::filesystem::path()
                                     : std::filesystem::path(out) / precision_name(mode);
        const TrainResult res = train(run_cfg, dir);
        rows.emplace_back(precision_name(mode), res.final_val_acc);
    }

    const double baseline = rows.front().second;
    std::string summary = "mode,final_val_acc,delta_vs_fp32\n";
    std::printf("%-10s %12s %12s\n", "mode", "val_acc", "delta");
    for (const auto& [name, acc] : rows) {
        std::printf("%-10s %12.4f %+12.4f\n", name.c_str(), acc, acc - baseline);
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s,%.6f,%+.6f\n", name.c_str(), acc, acc - baseline);
        summary += buf;
    }
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        std::ofstream f(std::filesystem::path(out) / "summary.csv");
        f << summary;
    }
    return 0;
}

void print_channel_table(std::ostream& os, const Tensor& g, float lambda, double alpha) {
    const auto reports = per_channel_report(g, lambda);
    os << "channel,g_max,sigma,mu,tail_fraction,class\n";
    char buf[160];
    for (size_t c = 0; c < reports.size(); ++c) {
        const auto& r = reports[c];
        const char* label = r.degenerate ? "degenerate"
                            : r.cls == DistributionClass::Gaussian ? "gaussian"
                                                                   : "inverted-t";
        std::snprintf(buf, sizeof buf, "%zu,%.6g,%.6g,%.6g,%.6g,%s\n", c, (double)r.stats.g_max,
                      (double)r.stats.sigma, (double)r.stats.mu, (double)r.stats.tail_fraction,
                      label);
        os << buf;
    }
    const LayerDiag diag = analyze_layer_gradient(g, alpha, lambda, {}, 0);
    std::snprintf(buf, sizeof buf,
                  "summary: e_gvq=%.6g e_gq=%.6g ks_gauss=%.4f ks_invt=%.4f gauss=%d invt=%d "
                  "degen=%d\n",
                  diag.e_gvq, diag.e_gq, diag.ks_gauss, diag.ks_invt, diag.n_gauss, diag.n_invt,
                  diag.n_degen);
    os << buf;
}

void print_histogram(std::ostream& os, const Tensor& g, int bins) {
    const float m = max_abs(g.span());
    if (m == 0.0f) {
        os << "all-zero tensor\n";
        return;
    }
    std::vector<int64_t> counts(static_cast<size_t>(bins), 0);
    for (float v : g.data) {
        int b = static_cast<int>((v + m) / (2 * m) * bins);
        b = std::clamp(b, 0, bins - 1);
        ++counts[static_cast<size_t>(b)];
    }
    const int64_t peak = *std::max_element(counts.begin(), counts.end());
    for (int b = 0; b < bins; ++b) {
        const double lo = -m + 2.0 * m * b / bins;
        const int width = static_cast<int>(60.0 * counts[static_cast<size_t>(b)] / peak);
        char buf[40];
        std::snprintf(buf, sizeof buf, "%+10.4g |", lo);
        os << buf << std::string(static_cast<size_t>(width), '#') << "\n";
    }
}

int cmd_diagnose(const std::string& dump_path, const std::string& config_path, double alpha,
                 int iters, const std::string& out) {
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        file.open(std::filesystem::path(out) / "diagnose.csv");
        os = &file;
    }
    const float lambda = 0.3f;
    if (!dump_path.empty()) {
        const Tensor g = load_tensor_file(dump_path);
        print_channel_table(*os, g, lambda, alpha);
        print_histogram(*os, g, 33);
        return 0;
    }
    // Run a short stretch of INT8-DA training and analyze the last gradients.
    TrainConfig cfg =
        config_path.empty() ? default_train_config() : load_train_config(config_path);
    cfg.mode = Precision::INT8_DA;
    cfg.epochs = std::max(1, (iters * cfg.batch_size + cfg.dataset.synthetic.samples - 1) /
                                 cfg.dataset.synthetic.samples);
    cfg.metrics_every = std::max(1, iters);
    cfg.dump_gradients = true;
    const auto tmp = std::filesystem::temp_directory_path() /
                     ("daq8_diag_" + std::to_string(::getpid()));
    train(cfg, tmp);
    int layer = 0;
    for (const auto& entry : std::filesystem::directory_iterator(tmp / "grads")) {
        const Tensor g = load_tensor_file(entry.path());
        *os << "== " << entry.path().filename().string() << "\n";
        print_channel_table(*os, g, cfg.hyper.lambda, alpha);
        ++layer;
    }
    std::filesystem::remove_all(tmp);
    return 0;
}

int cmd_bench(const std::string& sizes, int reps, const std::string& out) {
    // size spec: N,Cin,H,W,Cout,K,stride,pad per group, ';' separated
    std::string csv = "n,c_in,h,w,c_out,k,stride,pad,op,ms_per_rep\n";
    std::printf("%s", csv.c_str());
    size_t pos = 0;
    while (pos < sizes.size()) {
        const size_t end = sizes.find(';', pos);
        const std::string group = sizes.substr(pos, end == std::string::npos ? end : end - pos);
        pos = end == std::string::npos ? sizes.size() : end + 1;
        int n, ci, h, w, co, k, s, p;
        if (std::sscanf(group.c_str(), "%d,%d,%d,%d,%d,%d,%d,%d", &n, &ci, &h, &w, &co, &k, &s,
                        &p) != 8)
            throw FormatError("bad size spec '" + group + "' (want N,Cin,H,W,Cout,K,stride,pad)");
        const ConvSpec spec{s, s, p, p, k, k};
        const CounterRng rng{42};
        Tensor x(Shape4{n, ci, h, w}), wt(Shape4{co, ci, k, k});
        for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = rng.normal(i);
        for (size_t i = 0; i < wt.data.size(); ++i) wt.data[i] = rng.normal(i + (1ull << 40));
        const auto qx = quantize_global_maxabs(x, RoundingMode::nearest());
        const auto qw = quantize_global_maxabs(wt, RoundingMode::nearest());

        const auto time_op = [&](const char* name, auto&& fn) {
            fn(); // warm up
            const auto t0 = std::chrono::steady_clock::now();
            for (int r = 0; r < reps; ++r) fn();
            const auto t1 = std::chrono::steady_clock::now();
            const double ms =
                std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
            char buf[160];
            std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%d,%d,%d,%d,%s,%.4f\n", n, ci, h, w, co, k,
                          s, p, name, ms);
            std::printf("%s", buf);
            csv += buf;
        };
        time_op("float_forward", [&] { conv2d_forward(x, wt, spec); });
        time_op("int8_forward", [&] { int_conv_forward(qx.values, qw.values, spec); });
        const Tensor g = conv2d_forward(x, wt, spec);
        const auto qg = quantize_global_maxabs(g, RoundingMode::nearest());
        time_op("float_input_grad", [&] { conv2d_backward_input(g, wt, spec, h, w); });
        time_op("int8_input_grad",
                [&] { int_conv_input_grad(qg.values, qw.values, spec, h, w); });
        time_op("float_weight_grad", [&] { conv2d_backward_weight(x, g, spec); });
        const Int8Tensor x_cm = transpose_to_channel_major(qx.values);
        const Int8Tensor g_cm = transpose_to_channel_major(qg.values);
        time_op("int8_weight_grad", [&] { int_conv_weight_grad(x_cm, g_cm, spec); });
    }
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        std::ofstream f(std::filesystem::path(out) / "bench.csv");
        f << csv;
    }
    return 0;
}

int cmd_dump(const std::string& checkpoint, const std::string& what, const std::string& out,
             const std::string& config_path) {
    // only the topology matters for loading
    TrainConfig cfg = config_path.empty() ? default_train_config() : load_train_config(config_path);
    const DataSplits data = load_splits(cfg.dataset);
    Model model = init_model(model_spec_from_config(cfg, data.train));
    Momentum mom = zero_momentum(model);
    ClipState clip;
    TrainState state;
    restore_checkpoint(checkpoint, model, mom, clip, state);

    std::filesystem::create_directories(out);
    const std::filesystem::path dir(out);
    if (what == "weights") {
        for (size_t l = 0; l < model.convs.size(); ++l)
            save_tensor_file(dir / ("conv" + std::to_string(l) + "_w.tnsr"), model.convs[l].w);
        std::printf("wrote %zu conv weight tensors to %s\n", model.convs.size(), out.c_str());
    } else if (what == "clip_state") {
        std::ofstream f(dir / "clip_state.csv");
        f << "layer,channel,scale\n";
        for (int id : clip.layer_ids()) {
            const auto scales = clip.layer_scales(id);
            for (size_t c = 0; c < scales.size(); ++c)
                f << id << "," << c << "," << scales[c] << "\n";
        }
        std::printf("wrote clip scales (iteration %lld) to %s\n",
                    static_cast<long long>(clip.iteration()), out.c_str());
    } else if (what == "grads") {
        // momentum buffers: the optimizer's running gradient average
        for (size_t l = 0; l < mom.conv_w.size(); ++l)
            save_tensor_file(dir / ("conv" + std::to_string(l) + "_momentum.tnsr"), mom.conv_w[l]);
        std::printf("wrote %zu momentum (gradient moving-average) tensors to %s\n",
                    mom.conv_w.size(), out.c_str());
    } else {
        throw ContractViolation("unknown dump target '" + what + "'");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"distribution-adaptive INT8 quantized-training simulator"};
    app.require_subcommand(1);

    std::string config_path, mode, out, resume, dump_path, what = "weights";
    std::string sizes = "32,8,16,16,16,3,1,1";
    std::optional<uint64_t> seed;
    double alpha = 0.2;
    int reps = 5, iters = 50;

    auto* t = app.add_subcommand("train", "train one model in one precision mode");
    t->add_option("--config", config_path, "JSON config path (defaults to the desk config)");
    t->add_option("--mode", mode, "fp32 | int8-da | int8-gq")
        ->check(CLI::IsMember({"fp32", "int8-da", "int8-gq"}));
    t->add_option("--out", out, "output directory for metrics + checkpoint");
    t->add_option("--seed", seed, "master seed overriding init/shuffle/rounding seeds");
    t->add_option("--resume", resume, "checkpoint to resume from");

    auto* c = app.add_subcommand("compare", "train FP32 and INT8-DA twins with shared seeds");
    c->add_option("--config", config_path, "JSON config path");
    c->add_option("--out", out, "output directory");
    c->add_option("--seed", seed, "master seed");
    bool ablate = false;
    c->add_flag("--ablate", ablate, "also run the INT8-GQ ablation");

    auto* d = app.add_subcommand("diagnose", "per-channel gradient distribution report");
    d->add_option("--dump", dump_path, "analyze a dumped gradient tensor");
    d->add_option("--config", config_path, "or run a short INT8-DA stretch of this config");
    d->add_option("--alpha", alpha, "magnitude exponent for quantization error");
    d->add_option("--iters", iters, "iterations to run before analyzing");
    d->add_option("--out", out, "write CSV here instead of stdout");

    auto* b = app.add_subcommand("bench", "time float vs integer convolution paths");
    b->add_option("--sizes", sizes, "N,Cin,H,W,Cout,K,stride,pad groups separated by ';'");
    b->add_option("--reps", reps, "repetitions per timing");
    b->add_option("--out", out, "also write bench.csv here");

    auto* u = app.add_subcommand("dump", "extract tensors from a checkpoint");
    u->add_option("--checkpoint", dump_path, "checkpoint path")->required();
    u->add_option("--what", what, "weights | clip_state | grads")
        ->check(CLI::IsMember({"weights", "clip_state", "grads"}));
    u->add_option("--out", out, "output directory")->required();
    u->add_option("--config", config_path, "config that produced the checkpoint");

    try {
        app.parse(argc, argv);
        if (t->parsed()) return cmd_train(config_path, mode, out, seed, resume);
        if (c->parsed()) return cmd_compare(config_path, out, ablate, seed);
        if (d->parsed()) return cmd_diagnose(dump_path, config_path, alpha, iters, out);
        if (b->parsed()) return cmd_bench(sizes, reps, out);
        if (u->parsed()) return cmd_dump(dump_path, what, out, config_path);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // bad flags -> usage error
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
    return 2;
}
