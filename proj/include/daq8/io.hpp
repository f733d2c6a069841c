#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "daq8/quantizer.hpp"
#include "daq8/tensor.hpp"

namespace daq8 {

// All on-disk formats are little-endian. Scalars and bulk arrays are written
// with the host representation, which this build pins to little-endian.
static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

void write_bytes(std::ostream& out, const void* p, size_t n);
void read_bytes(std::istream& in, void* p, size_t n, const char* what);

void write_u32(std::ostream& out, uint32_t v);
void write_u64(std::ostream& out, uint64_t v);
void write_i64(std::ostream& out, int64_t v);
void write_f32(std::ostream& out, float v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, const std::string& s);

uint32_t read_u32(std::istream& in, const char* what);
uint64_t read_u64(std::istream& in, const char* what);
int64_t read_i64(std::istream& in, const char* what);
float read_f32(std::istream& in, const char* what);
double read_f64(std::istream& in, const char* what);
std::string read_string(std::istream& in, const char* what);

// Tensor dump: magic "DAQ8TNSR", 4 x u32 extents, raw 32-bit floats.
void save_tensor(std::ostream& out, const Tensor& t);
Tensor load_tensor(std::istream& in);
void save_tensor_file(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor_file(const std::filesystem::path& path);

// Quantized dump: magic "DAQ8QNT1", 4 x u32 extents, u32 scale count,
// scales as 32-bit floats, raw 8-bit payload.
struct QuantizedDump {
    Int8Tensor values;
    std::vector<float> scales;
};
void save_quantized(std::ostream& out, const Int8Tensor& values, std::span<const float> scales);
void save_quantized(std::ostream& out, const QuantizedTensor& q);
void save_quantized(std::ostream& out, const ChannelQuantizedTensor& q);
QuantizedDump load_quantized(std::istream& in);

} // namespace daq8
