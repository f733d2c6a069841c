#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "daq8/grad_stats.hpp"
#include "daq8/tensor.hpp"

namespace daq8 {

// Per-layer gradient diagnostics logged with each metrics record and emitted
// by the diagnose command. All quantities are functions of the float gradient
// only, so they are comparable across precision modes.
struct LayerDiag {
    double e_da = 0.0;   // realized error of the backward pass's own quantization
    double e_gvq = 0.0;  // nearest-rounded fake quantization, per-channel max scales
    double e_gq = 0.0;   // nearest-rounded fake quantization, one global max scale
    double ks_gauss = 0.0;
    double ks_invt = 0.0;
    int n_gauss = 0;
    int n_invt = 0;
    int n_degen = 0;
};

// `da_scales`/`vq_key` replay the stochastic quantization the backward pass
// actually performed; pass an empty span outside the quantized modes.
LayerDiag analyze_layer_gradient(const Tensor& g_y, double alpha, float lambda,
                                 std::span<const float> da_scales, uint64_t vq_key);

// Reference CDF for the piecewise-uniform gradient model with plug-in
// densities: breakpoint at sigma, inside/outside masses estimated from the
// sample itself (no parameter fitting).
double inverted_t_plugin_cdf(double x, double sigma, double g_max, double inside_mass);

struct ChannelReport {
    ChannelStats stats;
    DistributionClass cls = DistributionClass::InvertedT;
    bool degenerate = false;
};

std::vector<ChannelReport> per_channel_report(const Tensor& g_y, float lambda);

} // namespace daq8
