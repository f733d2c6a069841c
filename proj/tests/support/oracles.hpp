// Independent reference implementations used only by tests. These are kept
// deliberately naive (plain nested loops, no shared code with the library
// kernels) so they can serve as oracles.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "daq8/conv.hpp"
#include "daq8/tensor.hpp"

namespace oracle {

using daq8::ConvSpec;
using daq8::Int8Tensor;
using daq8::Shape4;
using daq8::Tensor;

inline Tensor conv_forward(const Tensor& x, const Tensor& w, const ConvSpec& s) {
    const int64_t N = x.shape.n, Ci = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int64_t Co = w.shape.n;
    const int64_t Ho = (H + 2 * s.pad_h - s.kernel_h) / s.stride_h + 1;
    const int64_t Wo = (W + 2 * s.pad_w - s.kernel_w) / s.stride_w + 1;
    Tensor y(Shape4{N, Co, Ho, Wo});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t co = 0; co < Co; ++co)
            for (int64_t oh = 0; oh < Ho; ++oh)
                for (int64_t ow = 0; ow < Wo; ++ow) {
                    float acc = 0.0f;
                    for (int64_t ci = 0; ci < Ci; ++ci)
                        for (int64_t kh = 0; kh < s.kernel_h; ++kh)
                            for (int64_t kw = 0; kw < s.kernel_w; ++kw) {
                                const int64_t ih = oh * s.stride_h - s.pad_h + kh;
                                const int64_t iw = ow * s.stride_w - s.pad_w + kw;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += x.at(n, ci, ih, iw) * w.at(co, ci, kh, kw);
                            }
                    y.at(n, co, oh, ow) = acc;
                }
    return y;
}

// 64-bit accumulation oracle for the integer convolutions.
inline std::vector<int64_t> int_conv_forward64(const Int8Tensor& x, const Int8Tensor& w,
                                               const ConvSpec& s) {
    const int64_t N = x.shape.n, Ci = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int64_t Co = w.shape.n;
    const int64_t Ho = (H + 2 * s.pad_h - s.kernel_h) / s.stride_h + 1;
    const int64_t Wo = (W + 2 * s.pad_w - s.kernel_w) / s.stride_w + 1;
    std::vector<int64_t> y(static_cast<size_t>(N * Co * Ho * Wo), 0);
    for (int64_t n = 0; n < N; ++n)
        for (int64_t co = 0; co < Co; ++co)
            for (int64_t oh = 0; oh < Ho; ++oh)
                for (int64_t ow = 0; ow < Wo; ++ow) {
                    int64_t acc = 0;
                    for (int64_t ci = 0; ci < Ci; ++ci)
                        for (int64_t kh = 0; kh < s.kernel_h; ++kh)
                            for (int64_t kw = 0; kw < s.kernel_w; ++kw) {
                                const int64_t ih = oh * s.stride_h - s.pad_h + kh;
                                const int64_t iw = ow * s.stride_w - s.pad_w + kw;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += int64_t(x.at(n, ci, ih, iw)) * int64_t(w.at(co, ci, kh, kw));
                            }
                    y[static_cast<size_t>(((n * Co + co) * Ho + oh) * Wo + ow)] = acc;
                }
    return y;
}

// Loss L = sum(Y^2)/2 of the forward output, accumulated in double.
inline double quadratic_loss(const Tensor& x, const Tensor& w, const ConvSpec& s) {
    const Tensor y = conv_forward(x, w, s);
    double acc = 0.0;
    for (float v : y.data) acc += 0.5 * static_cast<double>(v) * v;
    return acc;
}

// Central-difference gradient of quadratic_loss w.r.t. one tensor element.
inline double fd_grad_x(Tensor x, const Tensor& w, const ConvSpec& s, size_t i, float h) {
    const float orig = x.data[i];
    x.data[i] = orig + h;
    const double lp = quadratic_loss(x, w, s);
    x.data[i] = orig - h;
    const double lm = quadratic_loss(x, w, s);
    return (lp - lm) / (2.0 * h);
}

inline double fd_grad_w(const Tensor& x, Tensor w, const ConvSpec& s, size_t i, float h) {
    const float orig = w.data[i];
    w.data[i] = orig + h;
    const double lp = quadratic_loss(x, w, s);
    w.data[i] = orig - h;
    const double lm = quadratic_loss(x, w, s);
    return (lp - lm) / (2.0 * h);
}

inline Tensor random_tensor(std::mt19937& gen, Shape4 shape, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    Tensor t(shape);
    for (float& v : t.data) v = dist(gen);
    return t;
}

inline Int8Tensor random_int8(std::mt19937& gen, Shape4 shape) {
    std::uniform_int_distribution<int> dist(-127, 127);
    Int8Tensor t(shape);
    for (int8_t& v : t.data) v = static_cast<int8_t>(dist(gen));
    return t;
}

// |a-b| <= tol * max(|a|, |b|, floor)
inline bool close_rel(double a, double b, double tol, double floor_scale) {
    return std::fabs(a - b) <= tol * std::max({std::fabs(a), std::fabs(b), floor_scale});
}

} // namespace oracle
