#include "daq8/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "daq8/quantizer.hpp"

namespace daq8 {

double inverted_t_plugin_cdf(double x, double sigma, double g_max, double inside_mass) {
    if (g_max <= 0.0) return x < 0.0 ? 0.0 : 1.0;
    const double eps = std::min(std::max(sigma, 1e-12 * g_max), 0.999 * g_max);
    const double a = inside_mass / (2.0 * eps);              // density on (0, eps)
    const double b = (1.0 - inside_mass) / (2.0 * (g_max - eps)); // density on (eps, g_max)
    const double t = std::min(std::fabs(x), g_max);
    const double half_mass = a * std::min(t, eps) + b * std::max(0.0, t - eps);
    return x < 0.0 ? 0.5 - half_mass : 0.5 + half_mass;
}

std::vector<ChannelReport> per_channel_report(const Tensor& g_y, float lambda) {
    const Tensor g_cm = transpose_to_channel_major(g_y);
    std::vector<ChannelReport> reports(static_cast<size_t>(g_cm.shape.n));
    for (int64_t c = 0; c < g_cm.shape.n; ++c) {
        ChannelReport& r = reports[static_cast<size_t>(c)];
        r.stats = compute_channel_stats(g_cm.leading_slice(c));
        if (r.stats.g_max > 0.0f)
            r.cls = classify(r.stats, lambda);
        else
            r.degenerate = true;
    }
    return reports;
}

LayerDiag analyze_layer_gradient(const Tensor& g_y, double alpha, float lambda,
                                 std::span<const float> da_scales, uint64_t vq_key) {
    LayerDiag diag;
    const Tensor g_cm = transpose_to_channel_major(g_y);
    const int64_t channels = g_cm.shape.n;

    std::vector<float> per_channel_max(static_cast<size_t>(channels), 1.0f);
    float global_max = 0.0f;
    for (int64_t c = 0; c < channels; ++c) {
        const ChannelStats stats = compute_channel_stats(g_cm.leading_slice(c));
        if (stats.g_max > 0.0f) {
            per_channel_max[static_cast<size_t>(c)] = stats.g_max;
            global_max = std::max(global_max, stats.g_max);
            if (classify(stats, lambda) == DistributionClass::Gaussian)
                ++diag.n_gauss;
            else
                ++diag.n_invt;
        } else {
            ++diag.n_degen;
        }
    }
    if (global_max == 0.0f) return diag; // all-zero gradient: everything stays 0

    const auto nearest = RoundingMode::nearest();
    const Tensor gvq_hat =
        dequantize_per_channel(quantize_per_channel(g_cm, per_channel_max, nearest));
    diag.e_gvq = quantization_error(g_cm, gvq_hat, alpha);

    std::vector<float> global_scales(static_cast<size_t>(channels), global_max);
    const Tensor gq_hat =
        dequantize_per_channel(quantize_per_channel(g_cm, global_scales, nearest));
    diag.e_gq = quantization_error(g_cm, gq_hat, alpha);

    if (!da_scales.empty()) {
        const Tensor da_hat = dequantize_per_channel(
            quantize_per_channel(g_cm, da_scales, RoundingMode::stochastic(vq_key)));
        diag.e_da = quantization_error(g_cm, da_hat, alpha);
    }

    std::vector<float> sorted(g_y.data);
    std::sort(sorted.begin(), sorted.end());
    const ChannelStats layer_stats = compute_channel_stats(g_y.span());
    diag.ks_gauss = ks_statistic(
        sorted, [&](double x) { return normal_cdf(x, layer_stats.mu, layer_stats.sigma); });

    const double sigma = layer_stats.sigma;
    int64_t inside = 0;
    for (float v : g_y.data)
        if (std::fabs(v) <= sigma) ++inside;
    const double inside_mass =
        std::clamp(static_cast<double>(inside) / static_cast<double>(g_y.numel()), 0.01, 0.99);
    const double g_max = layer_stats.g_max;
    diag.ks_invt = ks_statistic(
        sorted, [&](double x) { return inverted_t_plugin_cdf(x, sigma, g_max, inside_mass); });
    return diag;
}

} // namespace daq8
