#include "daq8/dataset.hpp"

#include <cmath>
#include <fstream>

#include "daq8/rng.hpp"

namespace daq8 {

Dataset synthetic_dataset(const SyntheticSpec& spec) {
    if (spec.samples < 1 || spec.channels < 1 || spec.size < 4 || spec.classes < 2)
        throw ContractViolation("implausible synthetic dataset spec");
    Dataset ds;
    ds.num_classes = spec.classes;
    ds.images = Tensor(Shape4{spec.samples, spec.channels, spec.size, spec.size});
    ds.labels.resize(static_cast<size_t>(spec.samples));

    const double half = (spec.size - 1) / 2.0;
    const double ring = spec.size * 0.28;
    const double blob_sigma = spec.size * 0.11;

    for (int i = 0; i < spec.samples; ++i) {
        const int label = i % spec.classes;
        ds.labels[static_cast<size_t>(i)] = label;
        const CounterRng rng{derive_key(spec.seed, static_cast<uint64_t>(i))};

        const double angle = 6.283185307179586 * label / spec.classes;
        const double jx = (rng.uniform_double(0) - 0.5) * 1.6;
        const double jy = (rng.uniform_double(1) - 0.5) * 1.6;
        const double cx = half + ring * std::cos(angle) + jx;
        const double cy = half + ring * std::sin(angle) + jy;
        const double amp = 0.7 + 0.3 * rng.uniform_double(2);

        for (int c = 0; c < spec.channels; ++c) {
            // channels beyond the first carry a dimmer copy of the blob
            const double chan_amp = amp / (1.0 + 0.5 * c);
            for (int y = 0; y < spec.size; ++y)
                for (int x = 0; x < spec.size; ++x) {
                    const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                    double v = chan_amp * std::exp(-d2 / (2.0 * blob_sigma * blob_sigma));
                    const uint64_t counter =
                        16 + static_cast<uint64_t>((c * spec.size + y) * spec.size + x);
                    v += spec.noise * (rng.uniform_double(counter) - 0.5);
                    ds.images.at(i, c, y, x) =
                        static_cast<float>(std::min(1.0, std::max(0.0, v)));
                }
        }
    }
    return ds;
}

namespace {

uint32_t read_be_u32(std::istream& in, const std::string& path, const char* what) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (in.gcount() != 4)
        throw FormatError(path + ": truncated while reading " + what + " at byte offset " +
                          std::to_string(static_cast<int64_t>(in.tellg())));
    return (uint32_t(buf[0]) << 24) | (uint32_t(buf[1]) << 16) | (uint32_t(buf[2]) << 8) |
           uint32_t(buf[3]);
}

} // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 int num_classes) {
    std::ifstream img(images, std::ios::binary);
    if (!img) throw IoError("cannot open " + images.string());
    const uint32_t img_magic = read_be_u32(img, images.string(), "image magic");
    if (img_magic != 0x00000803u)
        throw FormatError(images.string() + ": bad image magic 0x" +
                          [&] { char b[16]; snprintf(b, sizeof b, "%08x", img_magic); return std::string(b); }() +
                          " at byte offset 0 (want 0x00000803)");
    const uint32_t count = read_be_u32(img, images.string(), "image count");
    const uint32_t rows = read_be_u32(img, images.string(), "image rows");
    const uint32_t cols = read_be_u32(img, images.string(), "image cols");
    if (count == 0 || rows == 0 || cols == 0 || count > (1u << 24) || rows > 4096 || cols > 4096)
        throw FormatError(images.string() + ": implausible extents");

    Dataset ds;
    ds.num_classes = num_classes;
    ds.images = Tensor(Shape4{static_cast<int64_t>(count), 1, static_cast<int64_t>(rows),
                              static_cast<int64_t>(cols)});
    std::vector<unsigned char> raw(static_cast<size_t>(count) * rows * cols);
    img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(img.gcount()) != raw.size())
        throw FormatError(images.string() + ": truncated image payload at byte offset " +
                          std::to_string(16 + img.gcount()));
    for (size_t i = 0; i < raw.size(); ++i)
        ds.images.data[i] = static_cast<float>(raw[i]) / 255.0f;

    std::ifstream lab(labels, std::ios::binary);
    if (!lab) throw IoError("cannot open " + labels.string());
    const uint32_t lab_magic = read_be_u32(lab, labels.string(), "label magic");
    if (lab_magic != 0x00000801u)
        throw FormatError(labels.string() + ": bad label magic at byte offset 0 (want 0x00000801)");
    const uint32_t lab_count = read_be_u32(lab, labels.string(), "label count");
    if (lab_count != count)
        throw FormatError(labels.string() + ": label count " + std::to_string(lab_count) +
                          " != image count " + std::to_string(count));
    std::vector<unsigned char> raw_labels(count);
    lab.read(reinterpret_cast<char*>(raw_labels.data()), count);
    if (static_cast<size_t>(lab.gcount()) != raw_labels.size())
        throw FormatError(labels.string() + ": truncated label payload at byte offset " +
                          std::to_string(8 + lab.gcount()));
    ds.labels.resize(count);
    for (uint32_t i = 0; i < count; ++i) {
        const int y = raw_labels[i];
        if (y >= num_classes)
            throw FormatError(labels.string() + ": label " + std::to_string(y) +
                              " out of range [0," + std::to_string(num_classes) + ") at index " +
                              std::to_string(i));
        ds.labels[i] = y;
    }
    return ds;
}

} // namespace daq8
