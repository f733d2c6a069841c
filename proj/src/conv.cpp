#include "daq8/conv.hpp"

#include <algorithm>
#include <string>

#include "daq8/parallel.hpp"

namespace daq8 {

void ConvSpec::validate() const {
    if (stride_h < 1 || stride_w < 1)
        throw DimensionError("stride must be positive, got (" + std::to_string(stride_h) + "," +
                             std::to_string(stride_w) + ")");
    if (pad_h < 0 || pad_w < 0)
        throw DimensionError("padding must be non-negative, got (" + std::to_string(pad_h) + "," +
                             std::to_string(pad_w) + ")");
    if (kernel_h < 1 || kernel_w < 1)
        throw DimensionError("kernel extents must be positive, got (" + std::to_string(kernel_h) +
                             "," + std::to_string(kernel_w) + ")");
}

std::pair<int64_t, int64_t> ConvSpec::output_hw(int64_t in_h, int64_t in_w) const {
    validate();
    const int64_t oh = (in_h + 2 * pad_h - kernel_h) / stride_h + 1;
    const int64_t ow = (in_w + 2 * pad_w - kernel_w) / stride_w + 1;
    if (in_h + 2 * pad_h < kernel_h || in_w + 2 * pad_w < kernel_w || oh < 1 || ow < 1)
        throw DimensionError("output extents (" + std::to_string(oh) + "," + std::to_string(ow) +
                             ") not >= 1 for input (" + std::to_string(in_h) + "," +
                             std::to_string(in_w) + ")");
    return {oh, ow};
}

namespace {

void check_forward_shapes(const Shape4& x, const Shape4& w, const ConvSpec& spec) {
    if (x.c != w.c)
        throw DimensionError("input channels " + std::to_string(x.c) +
                             " != weight input channels " + std::to_string(w.c));
    if (w.h != spec.kernel_h || w.w != spec.kernel_w)
        throw DimensionError("weight kernel (" + std::to_string(w.h) + "," + std::to_string(w.w) +
                             ") != spec kernel (" + std::to_string(spec.kernel_h) + "," +
                             std::to_string(spec.kernel_w) + ")");
}

// Forward: out[n,co,oh,ow] = sum over (ci,kh,kw) of x[n,ci,ih,iw]*w[co,ci,kh,kw].
// The accumulation order per output element is exactly (ci,kh,kw).
template <typename T, typename Acc>
void conv_forward_kernel(const BasicTensor<T>& x, const BasicTensor<T>& w, const ConvSpec& spec,
                         BasicTensor<Acc>& out) {
    const int64_t N = x.shape.n, Ci = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int64_t Co = w.shape.n, Ho = out.shape.h, Wo = out.shape.w;
    const int sh = spec.stride_h, sw = spec.stride_w, ph = spec.pad_h, pw = spec.pad_w;

    parallel_for(N * Co, [&](int64_t job) {
        const int64_t n = job / Co, co = job % Co;
        for (int64_t oh = 0; oh < Ho; ++oh) {
            Acc* orow = out.data.data() + out.shape.index(n, co, oh, 0);
            std::fill(orow, orow + Wo, Acc(0));
            for (int64_t ci = 0; ci < Ci; ++ci) {
                for (int64_t kh = 0; kh < spec.kernel_h; ++kh) {
                    const int64_t ih = oh * sh - ph + kh;
                    if (ih < 0 || ih >= H) continue;
                    const T* xrow = x.data.data() + x.shape.index(n, ci, ih, 0);
                    const T* wrow = w.data.data() + w.shape.index(co, ci, kh, 0);
                    for (int64_t kw = 0; kw < spec.kernel_w; ++kw) {
                        const Acc wv = static_cast<Acc>(wrow[kw]);
                        // valid ow range so that iw = ow*sw - pw + kw lies in [0, W)
                        const int64_t lo = std::max<int64_t>(0, (pw - kw + sw - 1) / sw);
                        const int64_t hi = std::min(Wo, (W - 1 + pw - kw) / sw + 1);
                        const T* xbase = xrow - pw + kw;
                        for (int64_t ow = lo; ow < hi; ++ow)
                            orow[ow] += static_cast<Acc>(xbase[ow * sw]) * wv;
                    }
                }
            }
        }
    });
}

// Input gradient: gx[n,ci,ih,iw] accumulates g[n,co,oh,ow]*w[co,ci,kh,kw]
// over all (co,kh,kw) whose forward window covered (ih,iw).
template <typename T, typename Acc>
void conv_backward_input_kernel(const BasicTensor<T>& g, const BasicTensor<T>& w,
                                const ConvSpec& spec, BasicTensor<Acc>& gx) {
    const int64_t N = g.shape.n, Co = g.shape.c, Ho = g.shape.h, Wo = g.shape.w;
    const int64_t Ci = gx.shape.c, H = gx.shape.h, W = gx.shape.w;
    const int sh = spec.stride_h, sw = spec.stride_w, ph = spec.pad_h, pw = spec.pad_w;

    parallel_for(N * Ci, [&](int64_t job) {
        const int64_t n = job / Ci, ci = job % Ci;
        for (int64_t ih = 0; ih < H; ++ih) {
            Acc* xrow = gx.data.data() + gx.shape.index(n, ci, ih, 0);
            std::fill(xrow, xrow + W, Acc(0));
            for (int64_t co = 0; co < Co; ++co) {
                for (int64_t kh = 0; kh < spec.kernel_h; ++kh) {
                    const int64_t t = ih + ph - kh;
                    if (t < 0 || t % sh != 0) continue;
                    const int64_t oh = t / sh;
                    if (oh >= Ho) continue;
                    const T* grow = g.data.data() + g.shape.index(n, co, oh, 0);
                    const T* wrow = w.data.data() + w.shape.index(co, ci, kh, 0);
                    for (int64_t kw = 0; kw < spec.kernel_w; ++kw) {
                        const Acc wv = static_cast<Acc>(wrow[kw]);
                        const int64_t lo = std::max<int64_t>(0, (pw - kw + sw - 1) / sw);
                        const int64_t hi = std::min(Wo, (W - 1 + pw - kw) / sw + 1);
                        for (int64_t ow = lo; ow < hi; ++ow)
                            xrow[ow * sw - pw + kw] += static_cast<Acc>(grow[ow]) * wv;
                    }
                }
            }
        }
    });
}

// Weight gradient: gw[co,ci,kh,kw] = sum over (n,oh,ow) of x*g. The x operand
// may be sample-major (N,Ci,H,W) or channel-major (Ci,N,H,W); same for g.
template <typename T, typename Acc, bool kChannelMajor>
void conv_backward_weight_kernel(const BasicTensor<T>& x, const BasicTensor<T>& g,
                                 const ConvSpec& spec, int64_t N, int64_t Ci, int64_t Co,
                                 BasicTensor<Acc>& gw) {
    const int64_t H = x.shape.h, W = x.shape.w, Ho = g.shape.h, Wo = g.shape.w;
    const int sh = spec.stride_h, sw = spec.stride_w, ph = spec.pad_h, pw = spec.pad_w;

    const auto xoff = [&](int64_t n, int64_t ci, int64_t ih) {
        return kChannelMajor ? x.shape.index(ci, n, ih, 0) : x.shape.index(n, ci, ih, 0);
    };
    const auto goff = [&](int64_t n, int64_t co, int64_t oh) {
        return kChannelMajor ? g.shape.index(co, n, oh, 0) : g.shape.index(n, co, oh, 0);
    };

    parallel_for(Co * Ci, [&](int64_t job) {
        const int64_t co = job / Ci, ci = job % Ci;
        for (int64_t kh = 0; kh < spec.kernel_h; ++kh) {
            for (int64_t kw = 0; kw < spec.kernel_w; ++kw) {
                Acc acc = 0;
                for (int64_t n = 0; n < N; ++n) {
                    for (int64_t oh = 0; oh < Ho; ++oh) {
                        const int64_t ih = oh * sh - ph + kh;
                        if (ih < 0 || ih >= H) continue;
                        const T* xrow = x.data.data() + xoff(n, ci, ih) - pw + kw;
                        const T* grow = g.data.data() + goff(n, co, oh);
                        const int64_t lo = std::max<int64_t>(0, (pw - kw + sw - 1) / sw);
                        const int64_t hi = std::min(Wo, (W - 1 + pw - kw) / sw + 1);
                        for (int64_t ow = lo; ow < hi; ++ow)
                            acc += static_cast<Acc>(xrow[ow * sw]) * static_cast<Acc>(grow[ow]);
                    }
                }
                gw.at(co, ci, kh, kw) = acc;
            }
        }
    });
}

void check_int_bound(int64_t products, const char* op) {
    if (products > kIntConvMaxProducts)
        throw OverflowRiskError(std::string(op) + ": " + std::to_string(products) +
                                " products per output element exceeds bound " +
                                std::to_string(kIntConvMaxProducts));
}

} // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const ConvSpec& spec) {
    check_forward_shapes(x.shape, w.shape, spec);
    const auto [oh, ow] = spec.output_hw(x.shape.h, x.shape.w);
    Tensor out(Shape4{x.shape.n, w.shape.n, oh, ow});
    conv_forward_kernel(x, w, spec, out);
    return out;
}

Tensor conv2d_backward_input(const Tensor& g, const Tensor& w, const ConvSpec& spec, int64_t in_h,
                             int64_t in_w) {
    if (g.shape.c != w.shape.n)
        throw DimensionError("gradient channels " + std::to_string(g.shape.c) +
                             " != weight output channels " + std::to_string(w.shape.n));
    if (w.shape.h != spec.kernel_h || w.shape.w != spec.kernel_w)
        throw DimensionError("weight kernel does not match spec kernel");
    const auto [oh, ow] = spec.output_hw(in_h, in_w);
    if (oh != g.shape.h || ow != g.shape.w)
        throw DimensionError("gradient extents " + g.shape.str() + " inconsistent with input (" +
                             std::to_string(in_h) + "," + std::to_string(in_w) + ")");
    Tensor gx(Shape4{g.shape.n, w.shape.c, in_h, in_w});
    conv_backward_input_kernel(g, w, spec, gx);
    return gx;
}

Tensor conv2d_backward_weight(const Tensor& x, const Tensor& g, const ConvSpec& spec) {
    if (x.shape.n != g.shape.n)
        throw DimensionError("batch extents differ: " + x.shape.str() + " vs " + g.shape.str());
    const auto [oh, ow] = spec.output_hw(x.shape.h, x.shape.w);
    if (oh != g.shape.h || ow != g.shape.w)
        throw DimensionError("gradient extents " + g.shape.str() +
                             " inconsistent with input extents " + x.shape.str());
    Tensor gw(Shape4{g.shape.c, x.shape.c, spec.kernel_h, spec.kernel_w});
    conv_backward_weight_kernel<float, float, false>(x, g, spec, x.shape.n, x.shape.c, g.shape.c,
                                                     gw);
    return gw;
}

Int32Tensor int_conv_forward(const Int8Tensor& x, const Int8Tensor& w, const ConvSpec& spec) {
    check_forward_shapes(x.shape, w.shape, spec);
    check_int_bound(x.shape.c * spec.kernel_h * spec.kernel_w, "int_conv_forward");
    const auto [oh, ow] = spec.output_hw(x.shape.h, x.shape.w);
    Int32Tensor out(Shape4{x.shape.n, w.shape.n, oh, ow});
    conv_forward_kernel(x, w, spec, out);
    return out;
}

Int32Tensor int_conv_input_grad(const Int8Tensor& g, const Int8Tensor& w, const ConvSpec& spec,
                                int64_t in_h, int64_t in_w) {
    if (g.shape.c != w.shape.n)
        throw DimensionError("gradient channels " + std::to_string(g.shape.c) +
                             " != weight output channels " + std::to_string(w.shape.n));
    check_int_bound(g.shape.c * spec.kernel_h * spec.kernel_w, "int_conv_input_grad");
    const auto [oh, ow] = spec.output_hw(in_h, in_w);
    if (oh != g.shape.h || ow != g.shape.w)
        throw DimensionError("gradient extents " + g.shape.str() + " inconsistent with input (" +
                             std::to_string(in_h) + "," + std::to_string(in_w) + ")");
    Int32Tensor gx(Shape4{g.shape.n, w.shape.c, in_h, in_w});
    conv_backward_input_kernel(g, w, spec, gx);
    return gx;
}

Int32Tensor int_conv_weight_grad(const Int8Tensor& x_cm, const Int8Tensor& g_cm,
                                 const ConvSpec& spec) {
    if (x_cm.shape.c != g_cm.shape.c)
        throw DimensionError("channel-major batch extents differ: " + x_cm.shape.str() + " vs " +
                             g_cm.shape.str());
    const auto [oh, ow] = spec.output_hw(x_cm.shape.h, x_cm.shape.w);
    if (oh != g_cm.shape.h || ow != g_cm.shape.w)
        throw DimensionError("gradient extents " + g_cm.shape.str() +
                             " inconsistent with input extents " + x_cm.shape.str());
    check_int_bound(g_cm.shape.c * oh * ow, "int_conv_weight_grad");
    Int32Tensor gw(Shape4{g_cm.shape.n, x_cm.shape.n, spec.kernel_h, spec.kernel_w});
    conv_backward_weight_kernel<int8_t, int32_t, true>(x_cm, g_cm, spec, g_cm.shape.c,
                                                       x_cm.shape.n, g_cm.shape.n, gw);
    return gw;
}

} // namespace daq8
