#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace pld {

// Gaussian tail probability Q(x) = P(N(0,1) > x).
inline double q_function(double x) {
    return 0.5 * std::erfc(x / std::sqrt(2.0));
}

// Coherent BPSK bit error rate over AWGN at linear SNR gamma: Q(sqrt(2*gamma)).
inline double bpsk_ber_awgn(double snr_linear) {
    return q_function(std::sqrt(2.0 * snr_linear));
}

// Average BPSK bit error rate over Rayleigh fading with mean linear SNR.
inline double bpsk_ber_rayleigh(double mean_snr_linear) {
    const double g = mean_snr_linear;
    return 0.5 * (1.0 - std::sqrt(g / (1.0 + g)));
}

// 95% binomial confidence half-width for a proportion p over n trials.
inline double binomial_halfwidth(double p, std::size_t n) {
    if (n == 0) return 0.0;
    return 1.96 * std::sqrt(p * (1.0 - p) / double(n));
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

inline double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / double(v.size() - 1);
}

// Regularized incomplete beta I_x(a,b) via the Lentz continued fraction
// (the classic betacf construction). Needed for Student-t tail probabilities.
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    // use the symmetry relation to keep the continued fraction convergent
    const bool swap = x > (a + 1.0) / (a + b + 2.0);
    const double aa = swap ? b : a;
    const double bb = swap ? a : b;
    const double xx = swap ? 1.0 - x : x;

    const double tiny = 1e-300;
    double c = 1.0;
    double d = 1.0 - (aa + bb) * xx / (aa + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (bb - m) * xx / ((aa + m2 - 1.0) * (aa + m2));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(aa + m) * (aa + bb + m) * xx / ((aa + m2) * (aa + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-15) break;
    }
    const double result = front * h / aa;
    return swap ? 1.0 - result : result;
}

// Student-t CDF with `dof` degrees of freedom, P(T <= t).
inline double student_t_cdf(double t, double dof) {
    if (dof <= 0.0) throw std::invalid_argument("student_t_cdf: dof must be positive");
    const double x = dof / (dof + t * t);
    const double half_tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
    return t <= 0.0 ? half_tail : 1.0 - half_tail;
}

// Fractional ranks (1-based, ties averaged).
inline std::vector<double> rank_with_ties(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * double(i + j) + 1.0;  // mean of 1-based positions i..j
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

struct SpearmanResult {
    double rho;            // rank correlation coefficient
    double p_decreasing;   // one-sided p-value for the alternative rho < 0
};

// Spearman rank correlation with a one-sided p-value from the Student-t
// approximation t = rho*sqrt((n-2)/(1-rho^2)).
inline SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3)
        throw std::invalid_argument("spearman: need two equal-length series, n >= 3");
    const std::size_t n = x.size();
    const std::vector<double> rx = rank_with_ties(x);
    const std::vector<double> ry = rank_with_ties(y);
    const double mx = mean_of(rx), my = mean_of(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return {0.0, 0.5};  // a constant series carries no trend
    double rho = sxy / std::sqrt(sxx * syy);
    rho = std::clamp(rho, -1.0, 1.0);
    if (rho <= -1.0 + 1e-12) return {rho, 0.0};
    if (rho >= 1.0 - 1e-12) return {rho, 1.0};
    const double t = rho * std::sqrt(double(n - 2) / (1.0 - rho * rho));
    return {rho, student_t_cdf(t, double(n - 2))};
}

// Kolmogorov-Smirnov statistic of `samples` against Exponential(mean).
inline double ks_statistic_exponential(std::vector<double> samples, double mean) {
    if (samples.empty() || mean <= 0.0)
        throw std::invalid_argument("ks_statistic_exponential: need samples and mean > 0");
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = 1.0 - std::exp(-samples[i] / mean);
        d = std::max(d, std::fabs(double(i + 1) / n - f));
        d = std::max(d, std::fabs(f - double(i) / n));
    }
    return d;
}

// Asymptotic KS critical value at the 1% significance level.
inline double ks_critical_1pct(std::size_t n) {
    return 1.628 / std::sqrt(double(n));
}

}  // namespace pld
