#include "daq8/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "daq8/io.hpp"

namespace daq8 {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'Q', '8', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void write_float_vec(std::ostream& out, std::span<const float> v) {
    write_u32(out, static_cast<uint32_t>(v.size()));
    write_bytes(out, v.data(), v.size() * sizeof(float));
}

std::vector<float> read_float_vec(std::istream& in, const char* what) {
    const uint32_t n = read_u32(in, what);
    if (n > (1u << 28)) throw CheckpointError(std::string("implausible vector length in ") + what);
    std::vector<float> v(n);
    read_bytes(in, v.data(), n * sizeof(float), what);
    return v;
}

std::string params_section(const Model& model) {
    std::ostringstream out;
    write_u32(out, static_cast<uint32_t>(model.convs.size()));
    for (const ConvParams& c : model.convs) {
        save_tensor(out, c.w);
        write_float_vec(out, c.b);
    }
    write_u32(out, static_cast<uint32_t>(model.head.in_features));
    write_u32(out, static_cast<uint32_t>(model.head.out_features));
    write_float_vec(out, model.head.w);
    write_float_vec(out, model.head.b);
    return out.str();
}

std::string momentum_section(const Momentum& mom) {
    std::ostringstream out;
    write_u32(out, static_cast<uint32_t>(mom.conv_w.size()));
    for (size_t i = 0; i < mom.conv_w.size(); ++i) {
        save_tensor(out, mom.conv_w[i]);
        write_float_vec(out, mom.conv_b[i]);
    }
    write_float_vec(out, mom.lin_w);
    write_float_vec(out, mom.lin_b);
    return out.str();
}

std::string state_section(const TrainState& s) {
    std::ostringstream out;
    write_u64(out, s.seed_init);
    write_u64(out, s.seed_shuffle);
    write_u64(out, s.seed_round);
    write_i64(out, s.epoch);
    write_i64(out, s.batch_index);
    write_i64(out, s.iteration);
    write_f64(out, s.accum_loss);
    write_i64(out, s.accum_correct);
    write_i64(out, s.accum_count);
    write_i64(out, s.accum_batches);
    write_i64(out, s.last_record_iteration);
    return out.str();
}

void restore_params(std::istream& in, Model& model) {
    const uint32_t n_convs = read_u32(in, "conv count");
    if (n_convs != model.convs.size())
        throw CheckpointError("checkpoint has " + std::to_string(n_convs) +
                              " conv layers, model expects " + std::to_string(model.convs.size()));
    for (ConvParams& c : model.convs) {
        Tensor w = load_tensor(in);
        if (!(w.shape == c.w.shape))
            throw CheckpointError("conv weight shape " + w.shape.str() +
                                  " does not match model " + c.w.shape.str());
        c.w = std::move(w);
        std::vector<float> b = read_float_vec(in, "conv bias");
        if (b.size() != c.b.size()) throw CheckpointError("conv bias length mismatch");
        c.b = std::move(b);
    }
    const uint32_t in_f = read_u32(in, "linear in");
    const uint32_t out_f = read_u32(in, "linear out");
    if (static_cast<int>(in_f) != model.head.in_features ||
        static_cast<int>(out_f) != model.head.out_features)
        throw CheckpointError("linear extents (" + std::to_string(in_f) + "," +
                              std::to_string(out_f) + ") do not match model (" +
                              std::to_string(model.head.in_features) + "," +
                              std::to_string(model.head.out_features) + ")");
    std::vector<float> w = read_float_vec(in, "linear weights");
    if (w.size() != model.head.w.size()) throw CheckpointError("linear weight length mismatch");
    model.head.w = std::move(w);
    std::vector<float> b = read_float_vec(in, "linear bias");
    if (b.size() != model.head.b.size()) throw CheckpointError("linear bias length mismatch");
    model.head.b = std::move(b);
}

void restore_momentum(std::istream& in, Momentum& mom) {
    const uint32_t n_convs = read_u32(in, "momentum conv count");
    if (n_convs != mom.conv_w.size()) throw CheckpointError("momentum conv count mismatch");
    for (size_t i = 0; i < mom.conv_w.size(); ++i) {
        Tensor w = load_tensor(in);
        if (!(w.shape == mom.conv_w[i].shape))
            throw CheckpointError("momentum shape mismatch at conv " + std::to_string(i));
        mom.conv_w[i] = std::move(w);
        std::vector<float> b = read_float_vec(in, "momentum conv bias");
        if (b.size() != mom.conv_b[i].size()) throw CheckpointError("momentum bias length mismatch");
        mom.conv_b[i] = std::move(b);
    }
    std::vector<float> w = read_float_vec(in, "momentum linear weights");
    if (w.size() != mom.lin_w.size()) throw CheckpointError("momentum linear length mismatch");
    mom.lin_w = std::move(w);
    std::vector<float> b = read_float_vec(in, "momentum linear bias");
    if (b.size() != mom.lin_b.size()) throw CheckpointError("momentum linear bias mismatch");
    mom.lin_b = std::move(b);
}

TrainState restore_state(std::istream& in) {
    TrainState s;
    s.seed_init = read_u64(in, "seed_init");
    s.seed_shuffle = read_u64(in, "seed_shuffle");
    s.seed_round = read_u64(in, "seed_round");
    s.epoch = static_cast<int>(read_i64(in, "epoch"));
    s.batch_index = read_i64(in, "batch_index");
    s.iteration = read_i64(in, "iteration");
    s.accum_loss = read_f64(in, "accum_loss");
    s.accum_correct = read_i64(in, "accum_correct");
    s.accum_count = read_i64(in, "accum_count");
    s.accum_batches = read_i64(in, "accum_batches");
    s.last_record_iteration = read_i64(in, "last_record_iteration");
    return s;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Momentum& mom,
                     const ClipState& clip, const TrainState& state) {
    std::ostringstream clip_bytes;
    save_state(clip, clip_bytes);

    const std::pair<std::string, std::string> sections[] = {
        {"model/v1", params_section(model)},
        {"optim/v1", momentum_section(mom)},
        {"clip_state/v1", clip_bytes.str()},
        {"rng/v1", state_section(state)},
    };

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_bytes(out, kMagic, 8);
    write_u32(out, kVersion);
    write_u32(out, 4);
    for (const auto& [name, payload] : sections) {
        write_string(out, name);
        write_u64(out, payload.size());
        write_bytes(out, payload.data(), payload.size());
    }
}

void restore_checkpoint(const std::filesystem::path& path, Model& model, Momentum& mom,
                        ClipState& clip, TrainState& state) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    char magic[8];
    read_bytes(in, magic, 8, "checkpoint magic");
    if (std::string(magic, 8) != std::string(kMagic, 8))
        throw CheckpointError(path.string() + " is not a checkpoint file");
    const uint32_t version = read_u32(in, "checkpoint version");
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " (supported: " + std::to_string(kVersion) + ")");
    const uint32_t n_sections = read_u32(in, "section count");
    if (n_sections > 64) throw CheckpointError("implausible section count");

    std::map<std::string, std::string> sections;
    for (uint32_t i = 0; i < n_sections; ++i) {
        const std::string name = read_string(in, "section name");
        const uint64_t size = read_u64(in, "section size");
        if (size > (1ull << 32)) throw CheckpointError("implausible section size");
        std::string payload(static_cast<size_t>(size), '\0');
        read_bytes(in, payload.data(), payload.size(), "section payload");
        sections.emplace(name, std::move(payload));
    }
    for (const char* required : {"model/v1", "optim/v1", "clip_state/v1", "rng/v1"})
        if (sections.find(required) == sections.end())
            throw CheckpointError(std::string("missing section ") + required);

    {
        std::istringstream s(sections["model/v1"]);
        restore_params(s, model);
    }
    {
        std::istringstream s(sections["optim/v1"]);
        restore_momentum(s, mom);
    }
    {
        std::istringstream s(sections["clip_state/v1"]);
        clip = load_state(s);
    }
    {
        std::istringstream s(sections["rng/v1"]);
        state = restore_state(s);
    }
}

} // namespace daq8
