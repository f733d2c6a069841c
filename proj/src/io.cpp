#include "daq8/io.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace daq8 {

void write_bytes(std::ostream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out) throw IoError("write failed");
}

void read_bytes(std::istream& in, void* p, size_t n, const char* what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
        throw FormatError(std::string("truncated while reading ") + what + " at byte offset " +
                          std::to_string(static_cast<int64_t>(in.tellg())));
}

void write_u32(std::ostream& out, uint32_t v) { write_bytes(out, &v, sizeof v); }
void write_u64(std::ostream& out, uint64_t v) { write_bytes(out, &v, sizeof v); }
void write_i64(std::ostream& out, int64_t v) { write_bytes(out, &v, sizeof v); }
void write_f32(std::ostream& out, float v) { write_bytes(out, &v, sizeof v); }
void write_f64(std::ostream& out, double v) { write_bytes(out, &v, sizeof v); }

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    write_bytes(out, s.data(), s.size());
}

uint32_t read_u32(std::istream& in, const char* what) {
    uint32_t v;
    read_bytes(in, &v, sizeof v, what);
    return v;
}
uint64_t read_u64(std::istream& in, const char* what) {
    uint64_t v;
    read_bytes(in, &v, sizeof v, what);
    return v;
}
int64_t read_i64(std::istream& in, const char* what) {
    int64_t v;
    read_bytes(in, &v, sizeof v, what);
    return v;
}
float read_f32(std::istream& in, const char* what) {
    float v;
    read_bytes(in, &v, sizeof v, what);
    return v;
}
double read_f64(std::istream& in, const char* what) {
    double v;
    read_bytes(in, &v, sizeof v, what);
    return v;
}

std::string read_string(std::istream& in, const char* what) {
    const uint32_t n = read_u32(in, what);
    if (n > (1u << 20)) throw FormatError(std::string("implausible string length in ") + what);
    std::string s(n, '\0');
    read_bytes(in, s.data(), n, what);
    return s;
}

namespace {

constexpr char kTensorMagic[8] = {'D', 'A', 'Q', '8', 'T', 'N', 'S', 'R'};
constexpr char kQuantMagic[8] = {'D', 'A', 'Q', '8', 'Q', 'N', 'T', '1'};

void check_magic(std::istream& in, const char (&magic)[8], const char* what) {
    char buf[8];
    read_bytes(in, buf, 8, what);
    if (std::memcmp(buf, magic, 8) != 0)
        throw FormatError(std::string("bad magic for ") + what + " at byte offset 0");
}

Shape4 read_extents(std::istream& in, const char* what) {
    Shape4 s;
    s.n = read_u32(in, what);
    s.c = read_u32(in, what);
    s.h = read_u32(in, what);
    s.w = read_u32(in, what);
    s.validate();
    return s;
}

void write_extents(std::ostream& out, const Shape4& s) {
    write_u32(out, static_cast<uint32_t>(s.n));
    write_u32(out, static_cast<uint32_t>(s.c));
    write_u32(out, static_cast<uint32_t>(s.h));
    write_u32(out, static_cast<uint32_t>(s.w));
}

} // namespace

void save_tensor(std::ostream& out, const Tensor& t) {
    write_bytes(out, kTensorMagic, 8);
    write_extents(out, t.shape);
    write_bytes(out, t.data.data(), t.data.size() * sizeof(float));
}

Tensor load_tensor(std::istream& in) {
    check_magic(in, kTensorMagic, "tensor dump");
    const Shape4 shape = read_extents(in, "tensor extents");
    Tensor t(shape);
    read_bytes(in, t.data.data(), t.data.size() * sizeof(float), "tensor payload");
    validate_finite(t, "tensor dump");
    return t;
}

void save_tensor_file(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    save_tensor(out, t);
}

Tensor load_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return load_tensor(in);
}

void save_quantized(std::ostream& out, const Int8Tensor& values, std::span<const float> scales) {
    write_bytes(out, kQuantMagic, 8);
    write_extents(out, values.shape);
    write_u32(out, static_cast<uint32_t>(scales.size()));
    write_bytes(out, scales.data(), scales.size() * sizeof(float));
    write_bytes(out, values.data.data(), values.data.size());
}

void save_quantized(std::ostream& out, const QuantizedTensor& q) {
    const float scale[1] = {q.scale.s};
    save_quantized(out, q.values, scale);
}

void save_quantized(std::ostream& out, const ChannelQuantizedTensor& q) {
    save_quantized(out, q.values, q.scales);
}

QuantizedDump load_quantized(std::istream& in) {
    check_magic(in, kQuantMagic, "quantized dump");
    const Shape4 shape = read_extents(in, "quantized extents");
    const uint32_t n_scales = read_u32(in, "scale count");
    if (n_scales != 1 && static_cast<int64_t>(n_scales) != shape.n)
        throw FormatError("scale count " + std::to_string(n_scales) +
                          " matches neither 1 nor the leading extent of " + shape.str());
    QuantizedDump dump{Int8Tensor(shape), std::vector<float>(n_scales)};
    read_bytes(in, dump.scales.data(), n_scales * sizeof(float), "scales");
    read_bytes(in, dump.values.data.data(), dump.values.data.size(), "quantized payload");
    for (int8_t v : dump.values.data)
        if (v == -128) throw FormatError("quantized payload contains -128");
    return dump;
}

} // namespace daq8
