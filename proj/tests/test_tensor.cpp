#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "daq8/io.hpp"
#include "daq8/tensor.hpp"
#include "support/oracles.hpp"

using namespace daq8;

TEST_CASE("shape invariants") {
    CHECK_THROWS_AS(Tensor(Shape4{0, 1, 1, 1}), DimensionError);
    CHECK_THROWS_AS(Tensor(Shape4{1, 1, -2, 1}), DimensionError);
    CHECK_THROWS_AS(Tensor(Shape4{2, 2, 1, 1}, std::vector<float>(3)), DimensionError);
    const Tensor t(Shape4{2, 3, 4, 5});
    CHECK(t.numel() == 120);
    CHECK(t.shape.index(1, 2, 3, 4) == 119);
}

TEST_CASE("validate_finite rejects NaN and Inf") {
    Tensor t(Shape4{1, 1, 1, 3});
    t.data = {1.0f, 2.0f, 3.0f};
    CHECK_NOTHROW(validate_finite(t, "t"));
    t.data[1] = std::nanf("");
    CHECK_THROWS_AS(validate_finite(t, "t"), ContractViolation);
    t.data[1] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(validate_finite(t, "t"), ContractViolation);
}

TEST_CASE("transpose_to_channel_major") {
    SUBCASE("N==C==1 leaves data unchanged") {
        std::mt19937 gen(1);
        const Tensor t = oracle::random_tensor(gen, Shape4{1, 1, 3, 4});
        const Tensor tt = transpose_to_channel_major(t);
        CHECK(tt.data == t.data);
    }
    SUBCASE("2x3x1x1 permutes elementwise") {
        Tensor t(Shape4{2, 3, 1, 1}, {0, 1, 2, 3, 4, 5});
        const Tensor tt = transpose_to_channel_major(t);
        CHECK(tt.shape == Shape4{3, 2, 1, 1});
        CHECK(tt.data == std::vector<float>{0, 3, 1, 4, 2, 5});
    }
    SUBCASE("involution restores input bit-exactly") {
        std::mt19937 gen(2);
        const Tensor t = oracle::random_tensor(gen, Shape4{3, 5, 4, 2});
        const Tensor round = transpose_to_channel_major(transpose_to_channel_major(t));
        CHECK(round.shape == t.shape);
        CHECK(round.data == t.data);
    }
}

TEST_CASE("tensor dump roundtrip") {
    std::mt19937 gen(3);
    const Tensor t = oracle::random_tensor(gen, Shape4{2, 3, 4, 5});
    std::stringstream ss;
    save_tensor(ss, t);
    const Tensor back = load_tensor(ss);
    CHECK(back.shape == t.shape);
    CHECK(back.data == t.data);
}

TEST_CASE("tensor dump format errors") {
    SUBCASE("bad magic") {
        std::stringstream ss;
        ss << "NOTATNSRxxxxxxxxxxxxxxxx";
        CHECK_THROWS_AS(load_tensor(ss), FormatError);
    }
    SUBCASE("truncated payload") {
        std::mt19937 gen(4);
        const Tensor t = oracle::random_tensor(gen, Shape4{1, 1, 2, 2});
        std::stringstream ss;
        save_tensor(ss, t);
        std::string bytes = ss.str();
        bytes.resize(bytes.size() - 5);
        std::stringstream cut(bytes);
        CHECK_THROWS_AS(load_tensor(cut), FormatError);
    }
}

TEST_CASE("quantized dump roundtrip with one and many scales") {
    std::mt19937 gen(5);
    const Int8Tensor payload = oracle::random_int8(gen, Shape4{3, 2, 2, 2});
    const std::vector<float> scales = {0.5f, 1.25f, 2.0f};
    std::stringstream ss;
    save_quantized(ss, payload, scales);
    const QuantizedDump dump = load_quantized(ss);
    CHECK(dump.values.data == payload.data);
    CHECK(dump.scales == scales);

    std::stringstream ss2;
    save_quantized(ss2, payload, std::vector<float>{1.0f});
    CHECK(load_quantized(ss2).scales.size() == 1);

    std::stringstream ss3;
    save_quantized(ss3, payload, std::vector<float>{1.0f, 2.0f}); // neither 1 nor leading extent
    CHECK_THROWS_AS(load_quantized(ss3), FormatError);
}
