#ifndef DIPDEF_METRICS_HPP
#define DIPDEF_METRICS_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "dipdef/errors.hpp"
#include "dipdef/tensor.hpp"

namespace dipdef {

struct SsimConfig {
    int window_size = 7;  // 7 suits 32x32 inputs; use 11 for 224x224
    float gaussian_sigma = 1.5f;
    float k1 = 0.01f;
    float k2 = 0.03f;
    float data_range = 1.0f;

    void validate() const {
        if (window_size < 3 || window_size % 2 == 0)
            throw ConfigError("SsimConfig: window_size must be odd and >= 3");
        if (gaussian_sigma <= 0.0f) throw ConfigError("SsimConfig: gaussian_sigma must be > 0");
        if (data_range <= 0.0f) throw ConfigError("SsimConfig: data_range must be > 0");
    }
};

namespace detail {

inline std::vector<float> gaussian_window(int n, float sigma) {
    std::vector<float> win(static_cast<std::size_t>(n) * n);
    const int r = n / 2;
    double sum = 0.0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double dy = y - r, dx = x - r;
            const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            win[static_cast<std::size_t>(y) * n + x] = static_cast<float>(g);
            sum += g;
        }
    for (float& x : win) x = static_cast<float>(x / sum);
    return win;
}

// Mean SSIM of one channel over all fully-valid window positions.
inline double ssim_channel(const Tensor& a, const Tensor& b, int ch, const std::vector<float>& win,
                           int n, float c1, float c2) {
    const int r = n / 2;
    double acc = 0.0;
    long count = 0;
    for (int y = r; y < a.h - r; ++y) {
        for (int x = r; x < a.w - r; ++x) {
            double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
            std::size_t wi = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx, ++wi) {
                    const double g = win[wi];
                    const double pa = a.at(ch, y + dy, x + dx);
                    const double pb = b.at(ch, y + dy, x + dx);
                    mu_a += g * pa;
                    mu_b += g * pb;
                    aa += g * pa * pa;
                    bb += g * pb * pb;
                    ab += g * pa * pb;
                }
            const double var_a = aa - mu_a * mu_a;
            const double var_b = bb - mu_b * mu_b;
            const double cov = ab - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            acc += num / den;
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

}  // namespace detail

// Mean local SSIM over sliding Gaussian windows, averaged across channels.
// Result lies in [-1, 1]; identical images score exactly 1.
inline float ssim(const Tensor& a, const Tensor& b, const SsimConfig& cfg = {}) {
    cfg.validate();
    require_same_shape(a, b, "ssim");
    if (a.h < cfg.window_size || a.w < cfg.window_size)
        throw InputError("ssim: image smaller than window");
    const float c1 = (cfg.k1 * cfg.data_range) * (cfg.k1 * cfg.data_range);
    const float c2 = (cfg.k2 * cfg.data_range) * (cfg.k2 * cfg.data_range);
    const auto win = detail::gaussian_window(cfg.window_size, cfg.gaussian_sigma);
    double acc = 0.0;
    for (int ch = 0; ch < a.c; ++ch)
        acc += detail::ssim_channel(a, b, ch, win, cfg.window_size, c1, c2);
    return static_cast<float>(acc / a.c);
}

// Peak signal-to-noise ratio in dB; +infinity for identical images.
inline float psnr(const Tensor& a, const Tensor& b, float data_range = 1.0f) {
    const float m = mse(a, b);
    if (m == 0.0f) return std::numeric_limits<float>::infinity();
    return 10.0f * std::log10(data_range * data_range / m);
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size()) throw InputError("accuracy: length mismatch");
    if (predicted.empty()) throw InputError("accuracy: empty label lists");
    long hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace dipdef

#endif
