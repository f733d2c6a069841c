#pragma once

#include <functional>
#include <span>
#include <vector>

#include "daq8/tensor.hpp"

namespace daq8 {

// Per-channel moments of a gradient slice taken over (N,H,W).
struct ChannelStats {
    float g_max = 0.0f;        // max |g|
    float sigma = 0.0f;        // population standard deviation
    float mu = 0.0f;           // mean
    float tail_fraction = 0.0f; // fraction of |g| > sigma
};

enum class DistributionClass { Gaussian, InvertedT };

// Piecewise-uniform gradient model: density a on |g| in (0, eps), b on
// (eps, g_max), with magnitude weighting f(g) = exp(alpha*|g|).
struct InvertedTParams {
    double a = 0.0;
    double b = 0.0;
    double eps = 0.0;
    double g_max = 0.0;
    double alpha = 0.0;

    void validate() const; // a > b > 0, 0 < eps < g_max, alpha >= 0
};

ChannelStats compute_channel_stats(std::span<const float> slice);

// Gaussian iff tail_fraction > lambda; ties fall to Inverted-T.
DistributionClass classify(const ChannelStats& stats, float lambda);

// Mean over elements of |g - g_hat| * exp(alpha*|g|).
double quantization_error(std::span<const float> g, std::span<const float> g_hat, double alpha);
double quantization_error(const Tensor& g, const Tensor& g_hat, double alpha);

// Closed-form derivative of the magnitude-weighted clipping error for the
// piecewise-uniform model, valid for eps < s < g_max and alpha > 0:
//   [(a-b)e^{a*eps} + b(255+a*s)e^{a*s} - 254 b e^{a*g_max} - a] / (127 a)
double inverted_t_error_derivative(const InvertedTParams& params, double s);

// sup-distance between the empirical CDF of a sorted sample and a reference
// CDF, evaluated at the sample points.
double ks_statistic(std::span<const float> sorted_sample,
                    const std::function<double(double)>& cdf);

class EmpiricalCdf {
public:
    explicit EmpiricalCdf(std::span<const float> sample); // copies and sorts
    double operator()(double x) const;                    // fraction of sample <= x

private:
    std::vector<float> sorted_;
};

double normal_cdf(double x, double mu, double sigma);

} // namespace daq8
