#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "daq8/conv.hpp"
#include "daq8/quantizer.hpp"
#include "support/oracles.hpp"

using namespace daq8;

TEST_CASE("clamp_to_scale") {
    const QuantScale s(1.0f);
    CHECK(clamp_to_scale(0.3f, s) == 0.3f);
    CHECK(clamp_to_scale(-5.0f, s) == -1.0f);
    CHECK(clamp_to_scale(1.0f, s) == 1.0f);
    CHECK(clamp_to_scale(-0.0f, s) == 0.0f);
    CHECK_THROWS_AS(clamp_to_scale(std::nanf(""), s), ContractViolation);
    CHECK_THROWS_AS(QuantScale(0.0f), ContractViolation);
    CHECK_THROWS_AS(QuantScale(-1.0f), ContractViolation);
}

TEST_CASE("quantize nearest") {
    const auto mode = RoundingMode::nearest();
    SUBCASE("boundary maps to 127, zero to 0, half-step ties go away from zero") {
        Tensor x(Shape4{1, 1, 1, 4}, {1.0f, 0.0f, 0.5f, -0.5f});
        const QuantizedTensor q = quantize(x, QuantScale(1.0f), mode);
        CHECK(q.values.data[0] == 127);
        CHECK(q.values.data[1] == 0);
        CHECK(q.values.data[2] == 64); // round(63.5) away from zero
        CHECK(q.values.data[3] == -64);
    }
    SUBCASE("saturates outside [-s, s]") {
        Tensor x(Shape4{1, 1, 1, 2}, {9.0f, -9.0f});
        const QuantizedTensor q = quantize(x, QuantScale(2.0f), mode);
        CHECK(q.values.data[0] == 127);
        CHECK(q.values.data[1] == -127);
    }
    SUBCASE("non-finite input is a contract violation") {
        Tensor x(Shape4{1, 1, 1, 1}, {std::numeric_limits<float>::infinity()});
        CHECK_THROWS_AS(quantize(x, QuantScale(1.0f), mode), ContractViolation);
    }
    SUBCASE("monotone: x1 <= x2 implies q(x1) <= q(x2)") {
        std::mt19937 gen(31);
        std::uniform_real_distribution<float> dist(-1.5f, 1.5f);
        Tensor x(Shape4{1, 1, 1, 2});
        for (int trial = 0; trial < 2000; ++trial) {
            float a = dist(gen), b = dist(gen);
            if (a > b) std::swap(a, b);
            x.data = {a, b};
            const QuantizedTensor q = quantize(x, QuantScale(1.0f), mode);
            REQUIRE(q.values.data[0] <= q.values.data[1]);
        }
    }
    SUBCASE("symmetry: q(-x) == -q(x)") {
        std::mt19937 gen(32);
        std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
        for (int trial = 0; trial < 2000; ++trial) {
            const float v = dist(gen);
            Tensor x(Shape4{1, 1, 1, 2}, {v, -v});
            const QuantizedTensor q = quantize(x, QuantScale(1.3f), mode);
            REQUIRE(q.values.data[0] == -q.values.data[1]);
        }
    }
}

TEST_CASE("stochastic_round") {
    const CounterRng rng{99};
    SUBCASE("integers round to themselves") {
        for (int i = 0; i < 50; ++i) CHECK(stochastic_round(2.0f, rng, i) == 2);
        for (int i = 0; i < 50; ++i) CHECK(stochastic_round(-127.0f, rng, i) == -127);
    }
    SUBCASE("mean over 1e5 draws matches the value") {
        const int n = 100000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += stochastic_round(2.25f, rng, i);
        CHECK(sum / n == doctest::Approx(2.25).epsilon(0.01 / 2.25));
    }
    SUBCASE("-0.5 splits between -1 and 0") {
        int minus = 0, zero = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const int r = stochastic_round(-0.5f, rng, i);
            REQUIRE((r == -1 || r == 0));
            (r == -1 ? minus : zero)++;
        }
        // 4*sqrt(0.25/n) tolerance on the frequency
        CHECK(std::fabs(minus / double(n) - 0.5) < 4.0 * std::sqrt(0.25 / n));
        CHECK(std::fabs(zero / double(n) - 0.5) < 4.0 * std::sqrt(0.25 / n));
    }
    SUBCASE("unbiased at many fractional values") {
        const int n = 100000;
        const double tol = 4.0 * std::sqrt(0.25 / n);
        for (int j = 0; j < 20; ++j) {
            const float v = -3.0f + 0.315f * j;
            const CounterRng stream{derive_key(5, j)};
            double sum = 0.0;
            for (int i = 0; i < n; ++i) sum += stochastic_round(v, stream, i);
            REQUIRE(std::fabs(sum / n - v) < tol);
        }
    }
    SUBCASE("deterministic given the same key") {
        const CounterRng a{1234}, b{1234};
        for (int i = 0; i < 100; ++i)
            CHECK(stochastic_round(1.7f, a, i) == stochastic_round(1.7f, b, i));
    }
}

TEST_CASE("dequantize") {
    SUBCASE("exact boundary values") {
        QuantizedTensor q{Int8Tensor(Shape4{1, 1, 1, 2}), QuantScale(2.0f)};
        q.values.data = {127, 0};
        const Tensor x = dequantize(q);
        CHECK(x.data[0] == 2.0f);
        CHECK(x.data[1] == 0.0f);
    }
    SUBCASE("roundtrip error bound s/254 in nearest mode, exhaustive sweep") {
        const float scales[] = {1.0f, 2.7f};
        for (const float s : scales) {
            Tensor x(Shape4{1, 1, 1, 1});
            float worst = 0.0f;
            for (int i = 0; i <= 100000; ++i) {
                x.data[0] = -s + 2.0f * s * i / 100000.0f;
                const Tensor back = dequantize(quantize(x, QuantScale(s), RoundingMode::nearest()));
                worst = std::max(worst, std::fabs(back.data[0] - x.data[0]));
            }
            CHECK(worst <= s / 254.0f + 4.0f * s * std::numeric_limits<float>::epsilon());
        }
    }
}

TEST_CASE("range invariant under fuzzing, both modes") {
    std::mt19937 gen(33);
    std::uniform_real_distribution<float> dist(-1e6f, 1e6f);
    Tensor x(Shape4{1, 1, 100, 100});
    const float s = 3.7f;
    for (int trial = 0; trial < 20; ++trial) {
        for (float& v : x.data) v = dist(gen);
        x.data[0] = s;
        x.data[1] = -s; // exercise the exact boundary
        for (const auto& mode :
             {RoundingMode::nearest(), RoundingMode::stochastic(derive_key(7, trial))}) {
            const QuantizedTensor q = quantize(x, QuantScale(s), mode);
            for (int8_t v : q.values.data) {
                REQUIRE(v >= -127);
                REQUIRE(v <= 127);
            }
        }
    }
}

TEST_CASE("quantize_per_channel") {
    std::mt19937 gen(34);
    SUBCASE("equal scales reduce to the global quantizer, both modes") {
        const Tensor g = oracle::random_tensor(gen, Shape4{4, 2, 3, 3});
        const std::vector<float> scales(4, 0.9f);
        for (const auto& mode : {RoundingMode::nearest(), RoundingMode::stochastic(77)}) {
            const ChannelQuantizedTensor per = quantize_per_channel(g, scales, mode);
            const QuantizedTensor global = quantize(g, QuantScale(0.9f), mode);
            CHECK(per.values.data == global.values.data);
        }
    }
    SUBCASE("outlier channel saturates, clean channel does not") {
        Tensor g(Shape4{2, 1, 1, 4}, {0.1f, -0.2f, 0.3f, 0.05f, 5.0f, -7.0f, 0.2f, 6.0f});
        const std::vector<float> scales = {1.0f, 1.0f};
        const ChannelQuantizedTensor q =
            quantize_per_channel(g, scales, RoundingMode::nearest());
        for (int i = 0; i < 4; ++i) CHECK(std::abs(q.values.data[i]) < 127);
        CHECK(q.values.data[4] == 127);
        CHECK(q.values.data[5] == -127);
        CHECK(q.values.data[7] == 127);
    }
    SUBCASE("slice-wise equality with independent global quantize calls") {
        const Tensor g = oracle::random_tensor(gen, Shape4{4, 2, 3, 3});
        const std::vector<float> scales = {0.5f, 1.0f, 0.25f, 2.0f};
        const ChannelQuantizedTensor per =
            quantize_per_channel(g, scales, RoundingMode::nearest());
        const int64_t slice = g.shape.c * g.shape.h * g.shape.w;
        for (int64_t c = 0; c < 4; ++c) {
            Tensor sl(Shape4{1, g.shape.c, g.shape.h, g.shape.w});
            std::copy_n(g.data.begin() + c * slice, slice, sl.data.begin());
            const QuantizedTensor qs =
                quantize(sl, QuantScale(scales[static_cast<size_t>(c)]), RoundingMode::nearest());
            for (int64_t i = 0; i < slice; ++i)
                REQUIRE(per.values.data[static_cast<size_t>(c * slice + i)] ==
                        qs.values.data[static_cast<size_t>(i)]);
        }
    }
    SUBCASE("scale count must match the leading extent") {
        const Tensor g = oracle::random_tensor(gen, Shape4{4, 2, 3, 3});
        const std::vector<float> scales = {1.0f, 1.0f};
        CHECK_THROWS_AS(quantize_per_channel(g, scales, RoundingMode::nearest()), DimensionError);
    }
}

TEST_CASE("dequantize_weight_grad") {
    SUBCASE("zero integers give zero floats") {
        const Int32Tensor q(Shape4{2, 3, 3, 3});
        const Tensor out = dequantize_weight_grad(q, QuantScale(1.5f), std::vector<float>{1.f, 2.f});
        for (float v : out.data) CHECK(v == 0.0f);
    }
    SUBCASE("127^2 with unit scales dequantizes to exactly 1") {
        Int32Tensor q(Shape4{1, 1, 1, 1});
        q.data[0] = 16129;
        const Tensor out = dequantize_weight_grad(q, QuantScale(1.0f), std::vector<float>{1.0f});
        CHECK(out.data[0] == 1.0f);
    }
    SUBCASE("scale count mismatch raises") {
        const Int32Tensor q(Shape4{2, 1, 1, 1});
        CHECK_THROWS_AS(dequantize_weight_grad(q, QuantScale(1.0f), std::vector<float>{1.0f}),
                        DimensionError);
    }
}

// Scale factorization: dequantizing the integer conv of quantized operands
// equals the float conv of the dequantized operands, up to float rounding in
// the latter's accumulation.
TEST_CASE("integer/float path equivalence") {
    std::mt19937 gen(35);
    for (int trial = 0; trial < 25; ++trial) {
        std::uniform_int_distribution<int> d_c(1, 3), d_hw(3, 6), d_k(1, 3);
        const int ci = d_c(gen), co = d_c(gen), k = d_k(gen);
        const int n = 2, h = std::max(d_hw(gen), k), w = std::max(d_hw(gen), k);
        const ConvSpec spec{1, 1, 0, 0, k, k};
        const auto [oh, ow] = spec.output_hw(h, w);

        const Tensor x = oracle::random_tensor(gen, Shape4{n, ci, h, w});
        const Tensor g = oracle::random_tensor(gen, Shape4{n, co, oh, ow});
        const QuantizedTensor qx = quantize_global_maxabs(x, RoundingMode::nearest());
        const Tensor g_cm = transpose_to_channel_major(g);
        std::vector<float> scales(static_cast<size_t>(co));
        for (int c = 0; c < co; ++c) scales[static_cast<size_t>(c)] = max_abs(g_cm.leading_slice(c));
        const ChannelQuantizedTensor qg =
            quantize_per_channel(g_cm, scales, RoundingMode::nearest());

        const Int32Tensor q_gw =
            int_conv_weight_grad(transpose_to_channel_major(qx.values), qg.values, spec);
        const Tensor int_path = dequantize_weight_grad(q_gw, qx.scale, scales);

        const Tensor x_hat = dequantize(qx);
        const Tensor g_hat = transpose_to_channel_major(dequantize_per_channel(qg));
        const Tensor float_path = conv2d_backward_weight(x_hat, g_hat, spec);

        // |a - b| <= 1e-5 * (conv of |operands|), the magnitude of the sums
        Tensor x_abs = x_hat, g_abs = g_hat;
        for (float& v : x_abs.data) v = std::fabs(v);
        for (float& v : g_abs.data) v = std::fabs(v);
        const Tensor magnitude = conv2d_backward_weight(x_abs, g_abs, spec);
        for (size_t i = 0; i < int_path.data.size(); ++i)
            REQUIRE(std::fabs(int_path.data[i] - float_path.data[i]) <=
                    1e-5f * std::max(magnitude.data[i], 1e-3f));
    }
}

TEST_CASE("quantize_global_maxabs handles the all-zero tensor") {
    const Tensor x(Shape4{1, 1, 2, 2});
    const QuantizedTensor q = quantize_global_maxabs(x, RoundingMode::nearest());
    CHECK(q.scale.s == 1.0f);
    for (int8_t v : q.values.data) CHECK(v == 0);
}
