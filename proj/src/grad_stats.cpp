#include "daq8/grad_stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace daq8 {

void InvertedTParams::validate() const {
    if (!(a > b && b > 0.0))
        throw ContractViolation("inverted-T densities require a > b > 0, got a=" +
                                std::to_string(a) + " b=" + std::to_string(b));
    if (!(eps > 0.0 && eps < g_max))
        throw ContractViolation("inverted-T breakpoint requires 0 < eps < g_max, got eps=" +
                                std::to_string(eps) + " g_max=" + std::to_string(g_max));
    if (alpha < 0.0) throw ContractViolation("alpha must be non-negative");
}

ChannelStats compute_channel_stats(std::span<const float> slice) {
    if (slice.empty()) throw DimensionError("channel stats of an empty slice");
    double sum = 0.0, sumsq = 0.0;
    float g_max = 0.0f;
    for (float v : slice) {
        if (!std::isfinite(v)) throw ContractViolation("channel slice contains non-finite value");
        sum += v;
        sumsq += static_cast<double>(v) * v;
        const float a = std::fabs(v);
        if (a > g_max) g_max = a;
    }
    const double n = static_cast<double>(slice.size());
    const double mu = sum / n;
    const double var = std::max(0.0, sumsq / n - mu * mu);
    const float sigma = static_cast<float>(std::sqrt(var));

    int64_t tail = 0;
    for (float v : slice)
        if (std::fabs(v) > sigma) ++tail;

    ChannelStats stats;
    stats.g_max = g_max;
    stats.sigma = sigma;
    stats.mu = static_cast<float>(mu);
    stats.tail_fraction = static_cast<float>(static_cast<double>(tail) / n);
    return stats;
}

DistributionClass classify(const ChannelStats& stats, float lambda) {
    if (!(lambda > 0.0f && lambda < 1.0f))
        throw ContractViolation("lambda must lie in (0,1), got " + std::to_string(lambda));
    return stats.tail_fraction > lambda ? DistributionClass::Gaussian
                                        : DistributionClass::InvertedT;
}

double quantization_error(std::span<const float> g, std::span<const float> g_hat, double alpha) {
    if (g.size() != g_hat.size())
        throw DimensionError("quantization_error size mismatch: " + std::to_string(g.size()) +
                             " vs " + std::to_string(g_hat.size()));
    if (g.empty()) throw DimensionError("quantization_error of empty tensors");
    if (alpha < 0.0) throw ContractViolation("alpha must be non-negative");
    double acc = 0.0;
    for (size_t i = 0; i < g.size(); ++i) {
        const double gv = g[i];
        acc += std::fabs(gv - static_cast<double>(g_hat[i])) * std::exp(alpha * std::fabs(gv));
    }
    return acc / static_cast<double>(g.size());
}

double quantization_error(const Tensor& g, const Tensor& g_hat, double alpha) {
    if (!(g.shape == g_hat.shape))
        throw DimensionError("quantization_error shape mismatch: " + g.shape.str() + " vs " +
                             g_hat.shape.str());
    return quantization_error(g.span(), g_hat.span(), alpha);
}

double inverted_t_error_derivative(const InvertedTParams& p, double s) {
    p.validate();
    if (!(p.alpha > 0.0)) throw DomainError("inverted_t_error_derivative requires alpha > 0");
    if (!(s > p.eps && s < p.g_max))
        throw DomainError("clipping scale s=" + std::to_string(s) + " outside (eps, g_max) = (" +
                          std::to_string(p.eps) + ", " + std::to_string(p.g_max) + ")");
    const double ea_eps = std::exp(p.alpha * p.eps);
    const double ea_s = std::exp(p.alpha * s);
    const double ea_gmax = std::exp(p.alpha * p.g_max);
    const double numerator =
        (p.a - p.b) * ea_eps + p.b * (255.0 + p.alpha * s) * ea_s - 254.0 * p.b * ea_gmax - p.a;
    return numerator / (127.0 * p.alpha);
}

double ks_statistic(std::span<const float> sorted_sample,
                    const std::function<double(double)>& cdf) {
    if (sorted_sample.empty()) throw DimensionError("ks_statistic of an empty sample");
    if (!std::is_sorted(sorted_sample.begin(), sorted_sample.end()))
        throw ContractViolation("ks_statistic sample must be sorted ascending");
    const double n = static_cast<double>(sorted_sample.size());
    double d = 0.0;
    for (size_t i = 0; i < sorted_sample.size(); ++i) {
        const double f = cdf(sorted_sample[i]);
        const double hi = std::fabs(static_cast<double>(i + 1) / n - f);
        const double lo = std::fabs(static_cast<double>(i) / n - f);
        d = std::max(d, std::max(hi, lo));
    }
    return d;
}

EmpiricalCdf::EmpiricalCdf(std::span<const float> sample)
    : sorted_(sample.begin(), sample.end()) {
    if (sorted_.empty()) throw DimensionError("empirical CDF of an empty sample");
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double normal_cdf(double x, double mu, double sigma) {
    if (sigma <= 0.0) return x < mu ? 0.0 : 1.0;
    return 0.5 * std::erfc(-(x - mu) / (sigma * 1.4142135623730951));
}

} // namespace daq8
