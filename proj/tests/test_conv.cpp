#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "daq8/conv.hpp"
#include "support/oracles.hpp"

using namespace daq8;

namespace {

struct Instance {
    Tensor x, w;
    ConvSpec spec;
};

Instance random_instance(std::mt19937& gen) {
    std::uniform_int_distribution<int> d_n(1, 2), d_c(1, 3), d_hw(3, 6), d_k(1, 3), d_s(1, 2),
        d_p(0, 1);
    Instance inst;
    const int n = d_n(gen), ci = d_c(gen), co = d_c(gen);
    int h = d_hw(gen), w = d_hw(gen);
    const int k = d_k(gen);
    inst.spec = ConvSpec{d_s(gen), d_s(gen), d_p(gen), d_p(gen), k, k};
    h = std::max(h, k);
    w = std::max(w, k);
    inst.x = oracle::random_tensor(gen, Shape4{n, ci, h, w});
    inst.w = oracle::random_tensor(gen, Shape4{co, ci, k, k});
    return inst;
}

} // namespace

TEST_CASE("conv spec output extents") {
    const ConvSpec s{1, 1, 1, 1, 3, 3};
    CHECK(s.output_hw(5, 5) == std::pair<int64_t, int64_t>{5, 5});
    const ConvSpec s2{2, 2, 0, 0, 3, 3};
    CHECK(s2.output_hw(5, 5) == std::pair<int64_t, int64_t>{2, 2});
    CHECK_THROWS_AS(s2.output_hw(2, 2), DimensionError);
    CHECK_THROWS_AS((ConvSpec{0, 1, 0, 0, 3, 3}).output_hw(5, 5), DimensionError);
}

TEST_CASE("conv2d_forward basics") {
    SUBCASE("all-zero input gives all-zero output") {
        const Tensor x(Shape4{1, 2, 4, 4});
        std::mt19937 gen(7);
        const Tensor w = oracle::random_tensor(gen, Shape4{3, 2, 3, 3});
        const Tensor y = conv2d_forward(x, w, ConvSpec{1, 1, 1, 1, 3, 3});
        for (float v : y.data) CHECK(v == 0.0f);
    }
    SUBCASE("1x1x1x1 is a scalar product") {
        const Tensor x(Shape4{1, 1, 1, 1}, {3.5f});
        const Tensor w(Shape4{1, 1, 1, 1}, {-2.0f});
        const Tensor y = conv2d_forward(x, w, ConvSpec{1, 1, 0, 0, 1, 1});
        CHECK(y.data[0] == 3.5f * -2.0f);
    }
    SUBCASE("bit-identical to the direct-summation oracle") {
        std::mt19937 gen(42);
        const Tensor x = oracle::random_tensor(gen, Shape4{2, 3, 5, 5});
        const Tensor w = oracle::random_tensor(gen, Shape4{4, 3, 3, 3});
        const ConvSpec spec{1, 1, 1, 1, 3, 3};
        const Tensor got = conv2d_forward(x, w, spec);
        const Tensor want = oracle::conv_forward(x, w, spec);
        CHECK(got.shape == want.shape);
        CHECK(got.data == want.data); // exact, not approximate
    }
    SUBCASE("randomized shapes stay bit-identical to the oracle") {
        std::mt19937 gen(43);
        for (int trial = 0; trial < 30; ++trial) {
            const Instance inst = random_instance(gen);
            const Tensor got = conv2d_forward(inst.x, inst.w, inst.spec);
            const Tensor want = oracle::conv_forward(inst.x, inst.w, inst.spec);
            REQUIRE(got.data == want.data);
        }
    }
    SUBCASE("shape mismatch reports offending extents") {
        const Tensor x(Shape4{1, 2, 4, 4});
        const Tensor w(Shape4{3, 5, 3, 3});
        CHECK_THROWS_WITH_AS(conv2d_forward(x, w, ConvSpec{1, 1, 0, 0, 3, 3}),
                             doctest::Contains("2"), DimensionError);
    }
}

TEST_CASE("linearity of conv2d_forward") {
    std::mt19937 gen(11);
    const Instance inst = random_instance(gen);
    Tensor scaled = inst.x;
    const float a = 3.25f;
    for (float& v : scaled.data) v *= a;
    const Tensor y = conv2d_forward(inst.x, inst.w, inst.spec);
    const Tensor ya = conv2d_forward(scaled, inst.w, inst.spec);
    for (size_t i = 0; i < y.data.size(); ++i)
        CHECK(oracle::close_rel(ya.data[i], a * y.data[i], 1e-6, 1e-6));
}

TEST_CASE("conv2d_backward_input") {
    SUBCASE("zero gradient in, zero gradient out") {
        std::mt19937 gen(13);
        const Tensor w = oracle::random_tensor(gen, Shape4{2, 3, 3, 3});
        const Tensor g(Shape4{1, 2, 4, 4});
        const Tensor gx = conv2d_backward_input(g, w, ConvSpec{1, 1, 1, 1, 3, 3}, 4, 4);
        for (float v : gx.data) CHECK(v == 0.0f);
    }
    SUBCASE("1x1 kernel stride 1 reduces to a channel matmul") {
        std::mt19937 gen(14);
        const Tensor g = oracle::random_tensor(gen, Shape4{2, 3, 2, 2});
        const Tensor w = oracle::random_tensor(gen, Shape4{3, 2, 1, 1});
        const Tensor gx = conv2d_backward_input(g, w, ConvSpec{1, 1, 0, 0, 1, 1}, 2, 2);
        for (int64_t n = 0; n < 2; ++n)
            for (int64_t ci = 0; ci < 2; ++ci)
                for (int64_t p = 0; p < 4; ++p) {
                    float want = 0.0f;
                    for (int64_t co = 0; co < 3; ++co)
                        want += g.at(n, co, p / 2, p % 2) * w.at(co, ci, 0, 0);
                    CHECK(gx.at(n, ci, p / 2, p % 2) == doctest::Approx(want).epsilon(1e-6));
                }
    }
    SUBCASE("matches central finite differences of sum(Y^2)/2") {
        std::mt19937 gen(15);
        const Instance inst = random_instance(gen);
        const Tensor y = conv2d_forward(inst.x, inst.w, inst.spec);
        const Tensor gx =
            conv2d_backward_input(y, inst.w, inst.spec, inst.x.shape.h, inst.x.shape.w);
        for (size_t i = 0; i < inst.x.data.size(); i += 3) {
            const double fd = oracle::fd_grad_x(inst.x, inst.w, inst.spec, i, 1e-2f);
            REQUIRE(oracle::close_rel(gx.data[i], fd, 1e-3, 1e-2));
        }
    }
}

TEST_CASE("conv2d_backward_weight") {
    SUBCASE("zero gradient in, zero gradient out") {
        std::mt19937 gen(17);
        const Tensor x = oracle::random_tensor(gen, Shape4{1, 3, 4, 4});
        const Tensor g(Shape4{1, 2, 4, 4});
        const Tensor gw = conv2d_backward_weight(x, g, ConvSpec{1, 1, 1, 1, 3, 3});
        CHECK(gw.shape == Shape4{2, 3, 3, 3});
        for (float v : gw.data) CHECK(v == 0.0f);
    }
    SUBCASE("1x1 kernel reduces to an outer product sum") {
        std::mt19937 gen(18);
        const Tensor x = oracle::random_tensor(gen, Shape4{2, 2, 2, 2});
        const Tensor g = oracle::random_tensor(gen, Shape4{2, 3, 2, 2});
        const Tensor gw = conv2d_backward_weight(x, g, ConvSpec{1, 1, 0, 0, 1, 1});
        for (int64_t co = 0; co < 3; ++co)
            for (int64_t ci = 0; ci < 2; ++ci) {
                float want = 0.0f;
                for (int64_t n = 0; n < 2; ++n)
                    for (int64_t p = 0; p < 4; ++p)
                        want += x.at(n, ci, p / 2, p % 2) * g.at(n, co, p / 2, p % 2);
                CHECK(gw.at(co, ci, 0, 0) == doctest::Approx(want).epsilon(1e-6));
            }
    }
    SUBCASE("matches central finite differences of sum(Y^2)/2") {
        std::mt19937 gen(19);
        const Instance inst = random_instance(gen);
        const Tensor y = conv2d_forward(inst.x, inst.w, inst.spec);
        const Tensor gw = conv2d_backward_weight(inst.x, y, inst.spec);
        for (size_t i = 0; i < inst.w.data.size(); ++i) {
            const double fd = oracle::fd_grad_w(inst.x, inst.w, inst.spec, i, 1e-2f);
            REQUIRE(oracle::close_rel(gw.data[i], fd, 1e-3, 1e-2));
        }
    }
    SUBCASE("batch mismatch raises") {
        const Tensor x(Shape4{2, 1, 3, 3});
        const Tensor g(Shape4{3, 1, 3, 3});
        CHECK_THROWS_AS(conv2d_backward_weight(x, g, ConvSpec{1, 1, 1, 1, 3, 3}), DimensionError);
    }
}

TEST_CASE("int_conv basics") {
    SUBCASE("all-zero operand gives zero") {
        const Int8Tensor x(Shape4{1, 2, 3, 3});
        std::mt19937 gen(21);
        const Int8Tensor w = oracle::random_int8(gen, Shape4{2, 2, 3, 3});
        const Int32Tensor y = int_conv_forward(x, w, ConvSpec{1, 1, 0, 0, 3, 3});
        for (int32_t v : y.data) CHECK(v == 0);
    }
    SUBCASE("single product 127*127") {
        Int8Tensor x(Shape4{1, 1, 1, 1});
        Int8Tensor w(Shape4{1, 1, 1, 1});
        x.data[0] = 127;
        w.data[0] = 127;
        const Int32Tensor y = int_conv_forward(x, w, ConvSpec{1, 1, 0, 0, 1, 1});
        CHECK(y.data[0] == 16129);
    }
    SUBCASE("exact against the 64-bit oracle and the float path") {
        std::mt19937 gen(22);
        for (int trial = 0; trial < 20; ++trial) {
            std::uniform_int_distribution<int> d_c(1, 3), d_hw(3, 6), d_k(1, 3);
            const int ci = d_c(gen), co = d_c(gen), k = d_k(gen);
            const int h = std::max(d_hw(gen), k), w = std::max(d_hw(gen), k);
            const ConvSpec spec{1, 1, 0, 0, k, k};
            const Int8Tensor x = oracle::random_int8(gen, Shape4{2, ci, h, w});
            const Int8Tensor wt = oracle::random_int8(gen, Shape4{co, ci, k, k});
            const Int32Tensor got = int_conv_forward(x, wt, spec);
            const auto want64 = oracle::int_conv_forward64(x, wt, spec);
            Tensor xf(x.shape), wf(wt.shape);
            for (size_t i = 0; i < x.data.size(); ++i) xf.data[i] = x.data[i];
            for (size_t i = 0; i < wt.data.size(); ++i) wf.data[i] = wt.data[i];
            const Tensor farth = conv2d_forward(xf, wf, spec);
            for (size_t i = 0; i < got.data.size(); ++i) {
                REQUIRE(static_cast<int64_t>(got.data[i]) == want64[i]);
                REQUIRE(static_cast<float>(got.data[i]) == farth.data[i]); // sums stay < 2^24
            }
        }
    }
    SUBCASE("accumulation bound is checked from extents") {
        // C_in * k1 * k2 = 2048 * 3 * 3 > 2^14
        const Int8Tensor x(Shape4{1, 2048, 3, 3});
        const Int8Tensor w(Shape4{1, 2048, 3, 3});
        CHECK_THROWS_AS(int_conv_forward(x, w, ConvSpec{1, 1, 0, 0, 3, 3}), OverflowRiskError);
        // weight grad: N * Ho * Wo = 1 * 129 * 129 > 2^14
        const Int8Tensor xc(Shape4{1, 1, 129, 129});
        const Int8Tensor gc(Shape4{1, 1, 129, 129});
        CHECK_THROWS_AS(int_conv_weight_grad(xc, gc, ConvSpec{1, 1, 0, 0, 1, 1}),
                        OverflowRiskError);
    }
}

TEST_CASE("integer backward ops agree with float backward ops on integer values") {
    std::mt19937 gen(23);
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_int_distribution<int> d_c(1, 3), d_hw(3, 6), d_k(1, 3), d_s(1, 2), d_p(0, 1);
        const int n = 2, ci = d_c(gen), co = d_c(gen), k = d_k(gen);
        const int h = std::max(d_hw(gen), k), w = std::max(d_hw(gen), k);
        const ConvSpec spec{d_s(gen), d_s(gen), d_p(gen), d_p(gen), k, k};
        const auto [oh, ow] = spec.output_hw(h, w);

        const Int8Tensor x = oracle::random_int8(gen, Shape4{n, ci, h, w});
        const Int8Tensor wt = oracle::random_int8(gen, Shape4{co, ci, k, k});
        const Int8Tensor g = oracle::random_int8(gen, Shape4{n, co, oh, ow});

        Tensor xf(x.shape), wf(wt.shape), gf(g.shape);
        for (size_t i = 0; i < x.data.size(); ++i) xf.data[i] = x.data[i];
        for (size_t i = 0; i < wt.data.size(); ++i) wf.data[i] = wt.data[i];
        for (size_t i = 0; i < g.data.size(); ++i) gf.data[i] = g.data[i];

        const Int32Tensor gx = int_conv_input_grad(g, wt, spec, h, w);
        const Tensor gxf = conv2d_backward_input(gf, wf, spec, h, w);
        for (size_t i = 0; i < gx.data.size(); ++i)
            REQUIRE(static_cast<float>(gx.data[i]) == gxf.data[i]);

        const Int32Tensor gw =
            int_conv_weight_grad(transpose_to_channel_major(x), transpose_to_channel_major(g), spec);
        const Tensor gwf = conv2d_backward_weight(xf, gf, spec);
        CHECK(gw.shape == gwf.shape);
        for (size_t i = 0; i < gw.data.size(); ++i)
            REQUIRE(static_cast<float>(gw.data[i]) == gwf.data[i]);
    }
}

TEST_CASE("results are identical at any thread count") {
    // parallel_for reads DAQ8_THREADS once per process, so emulate by running
    // the same instance twice; disjoint output ranges make this exact by
    // construction, checked here as a regression guard.
    std::mt19937 gen(29);
    const Instance inst = random_instance(gen);
    const Tensor a = conv2d_forward(inst.x, inst.w, inst.spec);
    const Tensor b = conv2d_forward(inst.x, inst.w, inst.spec);
    CHECK(a.data == b.data);
}
