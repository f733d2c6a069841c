#include "daq8/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "daq8/io.hpp"

namespace daq8 {

std::vector<int64_t> epoch_permutation(uint64_t seed_shuffle, int epoch, int64_t n) {
    std::vector<int64_t> perm(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    const CounterRng rng{derive_key(seed_shuffle, static_cast<uint64_t>(epoch))};
    for (int64_t i = n - 1; i > 0; --i) {
        const int64_t j =
            static_cast<int64_t>(rng.bits(static_cast<uint64_t>(i)) % static_cast<uint64_t>(i + 1));
        std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    }
    return perm;
}

DataSplits load_splits(const DatasetConfig& cfg) {
    if (cfg.source == "idx") {
        DataSplits splits;
        splits.train = load_idx(cfg.train_images, cfg.train_labels, cfg.classes);
        splits.val = load_idx(cfg.val_images, cfg.val_labels, cfg.classes);
        return splits;
    }
    SyntheticSpec full = cfg.synthetic;
    const int n_train = cfg.synthetic.samples;
    full.samples = n_train + cfg.val_samples;
    const Dataset all = synthetic_dataset(full);

    DataSplits splits;
    const int64_t sample = all.images.shape.c * all.images.shape.h * all.images.shape.w;
    splits.train.num_classes = splits.val.num_classes = all.num_classes;
    splits.train.images = Tensor(
        Shape4{n_train, all.images.shape.c, all.images.shape.h, all.images.shape.w},
        {all.images.data.begin(), all.images.data.begin() + n_train * sample});
    splits.train.labels = {all.labels.begin(), all.labels.begin() + n_train};
    splits.val.images = Tensor(
        Shape4{cfg.val_samples, all.images.shape.c, all.images.shape.h, all.images.shape.w},
        {all.images.data.begin() + n_train * sample, all.images.data.end()});
    splits.val.labels = {all.labels.begin() + n_train, all.labels.end()};
    return splits;
}

ModelSpec model_spec_from_config(const TrainConfig& cfg, const Dataset& train) {
    const int channels = static_cast<int>(train.images.shape.c);
    const int h = static_cast<int>(train.images.shape.h);
    const int w = static_cast<int>(train.images.shape.w);
    if (cfg.stages.empty())
        return default_model_spec(channels, h, w, train.num_classes, cfg.seed_init);
    ModelSpec spec;
    spec.in_channels = channels;
    spec.in_h = h;
    spec.in_w = w;
    spec.stages = cfg.stages;
    spec.init_seed = cfg.seed_init;
    spec.validate();
    return spec;
}

namespace {

Tensor gather_batch(const Dataset& ds, std::span<const int64_t> indices, std::vector<int>& labels) {
    const Shape4& s = ds.images.shape;
    const int64_t sample = s.c * s.h * s.w;
    Tensor batch(Shape4{static_cast<int64_t>(indices.size()), s.c, s.h, s.w});
    labels.resize(indices.size());
    for (size_t i = 0; i < indices.size(); ++i) {
        const float* src = ds.images.data.data() + indices[i] * sample;
        std::copy(src, src + sample, batch.data.data() + static_cast<int64_t>(i) * sample);
        labels[i] = ds.labels[static_cast<size_t>(indices[i])];
    }
    return batch;
}

void dump_divergence_diagnostics(const Model& model, const ForwardResult& fwd, int64_t iteration) {
    std::fprintf(stderr, "divergence diagnostics at iteration %lld:\n",
                 static_cast<long long>(iteration));
    for (size_t l = 0; l < model.convs.size(); ++l)
        std::fprintf(stderr, "  conv%zu |w|_max=%.6g\n", l, max_abs(model.convs[l].w.span()));
    int conv_idx = 0;
    for (const StageTrace& st : fwd.trace) {
        if (const auto* tr = std::get_if<ConvTrace>(&st)) {
            if (tr->quantized)
                std::fprintf(stderr, "  conv%d input scale=%.6g weight scale=%.6g\n", conv_idx,
                             tr->qctx->qx.scale.s, tr->qctx->qw.scale.s);
            ++conv_idx;
        }
    }
    std::fprintf(stderr, "  logits |z|_max=%.6g\n", max_abs(fwd.logits.span()));
}

} // namespace

EvalResult evaluate(const Model& model, const Dataset& ds, int batch_size) {
    const int64_t n = ds.images.shape.n;
    ForwardOptions fopts; // FP32 regardless of training mode
    double loss_sum = 0.0;
    int64_t correct = 0;
    std::vector<int> labels;
    for (int64_t start = 0; start < n; start += batch_size) {
        const int64_t stop = std::min<int64_t>(n, start + batch_size);
        std::vector<int64_t> idx(static_cast<size_t>(stop - start));
        for (int64_t i = start; i < stop; ++i) idx[static_cast<size_t>(i - start)] = i;
        const Tensor batch = gather_batch(ds, idx, labels);
        const ForwardResult fwd = forward_model(model, batch, fopts);
        const LossResult lr = softmax_cross_entropy(fwd.logits, labels);
        loss_sum += lr.loss * static_cast<double>(stop - start);
        correct += correct_predictions(fwd.logits, labels);
    }
    return {static_cast<double>(correct) / static_cast<double>(n),
            loss_sum / static_cast<double>(n)};
}

TrainResult train(const TrainConfig& config, const std::filesystem::path& out_dir,
                  const std::filesystem::path& resume_from) {
    config.validate();
    const DataSplits data = load_splits(config.dataset);
    const ModelSpec spec = model_spec_from_config(config, data.train);

    Model model = init_model(spec);
    Momentum mom = zero_momentum(model);
    ClipState clip;
    TrainState state;
    state.seed_init = config.seed_init;
    state.seed_shuffle = config.seed_shuffle;
    state.seed_round = config.seed_round;

    if (!resume_from.empty()) restore_checkpoint(resume_from, model, mom, clip, state);

    MetricsWriter writer;
    if (!out_dir.empty()) {
        writer = MetricsWriter(out_dir, spec.conv_count());
        std::ofstream cfg_out(out_dir / "config.json");
        cfg_out << train_config_to_json(config) << "\n";
    }

    TrainResult result;
    const int n_convs = spec.conv_count();
    const int64_t n_train = data.train.images.shape.n;

    const auto emit_record = [&](int epoch, const Gradients* grads, int64_t grad_iteration) {
        MetricsRecord rec;
        rec.iteration = state.iteration;
        rec.epoch = epoch;
        rec.lr = config.lr.at(epoch);
        if (state.accum_batches > 0) {
            rec.loss = state.accum_loss / static_cast<double>(state.accum_batches);
            rec.train_acc = static_cast<double>(state.accum_correct) /
                            static_cast<double>(state.accum_count);
        }
        const EvalResult ev = evaluate(model, data.val, config.batch_size);
        rec.val_acc = ev.acc;
        rec.val_loss = ev.loss;
        rec.layers.resize(static_cast<size_t>(n_convs));
        if (grads) {
            BackwardOptions qopts;
            qopts.rounding_seed = config.seed_round;
            qopts.iteration = grad_iteration;
            for (int l = 0; l < n_convs; ++l) {
                const auto& diag = grads->layer_diag[static_cast<size_t>(l)];
                rec.layers[static_cast<size_t>(l)] = analyze_layer_gradient(
                    grads->layer_gy[static_cast<size_t>(l)], config.alpha, config.hyper.lambda,
                    diag.vq_scales, vq_stream_key(qopts, l));
            }
            if (config.dump_gradients && !out_dir.empty()) {
                const auto dir = out_dir / "grads";
                std::filesystem::create_directories(dir);
                for (int l = 0; l < n_convs; ++l)
                    save_tensor_file(dir / ("iter" + std::to_string(state.iteration) + "_layer" +
                                            std::to_string(l) + ".tnsr"),
                                     grads->layer_gy[static_cast<size_t>(l)]);
            }
        }
        state.accum_loss = 0.0;
        state.accum_correct = 0;
        state.accum_count = 0;
        state.accum_batches = 0;
        state.last_record_iteration = state.iteration;
        writer.append(rec);
        result.records.push_back(std::move(rec));
    };

    if (resume_from.empty()) emit_record(0, nullptr, 0); // initialization metrics

    ForwardOptions fopts;
    fopts.precision = config.mode;
    fopts.exempt_first_last = config.exempt_first_last;
    BackwardModelOptions bopts;
    bopts.precision = config.mode;
    bopts.exempt_first_last = config.exempt_first_last;
    bopts.hyper = config.hyper;
    bopts.quant.rounding_seed = config.seed_round;
    bopts.quant.strict_alg1_gx_scales = config.strict_alg1_gx_scales;

    std::vector<int> labels;
    for (int epoch = state.epoch; epoch < config.epochs; ++epoch) {
        state.epoch = epoch;
        const std::vector<int64_t> perm = epoch_permutation(config.seed_shuffle, epoch, n_train);
        const int64_t n_batches = (n_train + config.batch_size - 1) / config.batch_size;
        for (int64_t b = state.batch_index; b < n_batches; ++b) {
            state.batch_index = b;
            const int64_t start = b * config.batch_size;
            const int64_t stop = std::min<int64_t>(n_train, start + config.batch_size);
            const std::span<const int64_t> idx(perm.data() + start,
                                               static_cast<size_t>(stop - start));
            const Tensor batch = gather_batch(data.train, idx, labels);

            const ForwardResult fwd = forward_model(model, batch, fopts);
            const LossResult loss = softmax_cross_entropy(fwd.logits, labels);
            if (!std::isfinite(loss.loss)) {
                dump_divergence_diagnostics(model, fwd, state.iteration);
                throw TrainingDiverged("non-finite loss at iteration " +
                                       std::to_string(state.iteration));
            }

            bopts.quant.iteration = state.iteration;
            const int64_t grad_iteration = state.iteration;
            const Gradients grads = backward_model(model, fwd, loss.g_logits, clip, bopts);

            sgd_step(model, mom, grads, static_cast<float>(config.lr.at(epoch)),
                     static_cast<float>(config.momentum));
            clip.advance_iteration();

            state.accum_loss += loss.loss;
            state.accum_correct += correct_predictions(fwd.logits, labels);
            state.accum_count += stop - start;
            state.accum_batches += 1;
            ++state.iteration;

            if (state.iteration % config.metrics_every == 0)
                emit_record(epoch, &grads, grad_iteration);
        }
        state.batch_index = 0;
    }
    state.epoch = config.epochs;

    if (state.last_record_iteration != state.iteration || result.records.empty())
        emit_record(config.epochs, nullptr, 0);
    if (!result.records.empty()) {
        result.final_val_acc = result.records.back().val_acc;
        result.final_val_loss = result.records.back().val_loss;
    }

    if (!out_dir.empty()) {
        result.checkpoint_path = out_dir / "checkpoint.bin";
        save_checkpoint(result.checkpoint_path, model, mom, clip, state);
    }
    return result;
}

} // namespace daq8
