#ifndef DIPDEF_DIP_HPP
#define DIPDEF_DIP_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dipdef/config_file.hpp"
#include "dipdef/errors.hpp"
#include "dipdef/nn/adam.hpp"
#include "dipdef/nn/unet.hpp"
#include "dipdef/rng.hpp"
#include "dipdef/tensor.hpp"

namespace dipdef {

// Hyper-parameters of the untrained encoder-decoder generator and its
// optimization loop.
struct GeneratorConfig {
    int num_scales = 3;
    std::vector<int> filters_down{32, 32, 32};
    std::vector<int> filters_up{32, 32, 32};
    std::vector<int> kernel_down{3, 3, 3};
    std::vector<int> kernel_up{3, 3, 3};
    std::vector<int> skip_filters{3, 3, 3};
    std::vector<int> skip_kernels{1, 1, 1};
    std::string upsample_mode = "bilinear";
    int noise_channels = 4;
    float noise_scale = 1.0f / 30.0f;
    float learning_rate = 0.01f;
    int max_iterations = 1000;  // T
    int trace_samples = 200;
    std::uint64_t rng_seed = 0;

    void validate() const {
        const std::size_t s = static_cast<std::size_t>(num_scales);
        if (num_scales < 1) throw ConfigError("GeneratorConfig: num_scales must be >= 1");
        if (filters_down.size() != s || filters_up.size() != s || kernel_down.size() != s ||
            kernel_up.size() != s || skip_filters.size() != s || skip_kernels.size() != s)
            throw ConfigError("GeneratorConfig: all per-scale lists must have length num_scales");
        if (upsample_mode != "bilinear") throw ConfigError("GeneratorConfig: unsupported upsample_mode");
        if (noise_channels < 1) throw ConfigError("GeneratorConfig: noise_channels must be >= 1");
        if (noise_scale <= 0.0f) throw ConfigError("GeneratorConfig: noise_scale must be > 0");
        if (learning_rate <= 0.0f) throw ConfigError("GeneratorConfig: learning_rate must be > 0");
        if (max_iterations < 1) throw ConfigError("GeneratorConfig: max_iterations must be >= 1");
        if (trace_samples < 1 || trace_samples > max_iterations)
            throw ConfigError("GeneratorConfig: need 1 <= trace_samples <= max_iterations");
    }

    // Presets with the published hyper-parameter boxes.
    static GeneratorConfig medium() { return GeneratorConfig{}; }

    static GeneratorConfig small() {
        GeneratorConfig c;
        c.num_scales = 2;
        c.filters_down = c.filters_up = {16, 16};
        c.kernel_down = c.kernel_up = {2, 2};
        c.skip_filters = {4, 4};
        c.skip_kernels = {1, 1};
        return c;
    }

    static GeneratorConfig large() {
        GeneratorConfig c;
        c.num_scales = 4;
        c.filters_down = c.filters_up = {48, 48, 48, 48};
        c.kernel_down = c.kernel_up = {4, 4, 4, 4};
        c.skip_filters = {4, 4, 4, 4};
        c.skip_kernels = {1, 1, 1, 1};
        return c;
    }

    static GeneratorConfig imagenet() {
        GeneratorConfig c;
        c.num_scales = 5;
        c.filters_down = c.filters_up = {64, 64, 64, 64, 64};
        c.kernel_down = c.kernel_up = {3, 3, 3, 3, 3};
        c.skip_filters = {4, 4, 4, 4, 4};
        c.skip_kernels = {1, 1, 1, 1, 1};
        c.noise_scale = 1.0f / 100.0f;
        c.max_iterations = 3000;
        return c;
    }

    static GeneratorConfig preset(const std::string& name) {
        if (name == "small") return small();
        if (name == "medium" || name == "cifar") return medium();
        if (name == "large") return large();
        if (name == "imagenet") return imagenet();
        throw ConfigError("unknown generator preset: " + name);
    }

    static GeneratorConfig from_config(const KeyValueConfig& kv, const std::string& prefix = "generator.") {
        GeneratorConfig c = preset(kv.get(prefix + "preset", "medium"));
        if (kv.has(prefix + "filters_down")) c.filters_down = kv.get_int_list(prefix + "filters_down");
        if (kv.has(prefix + "filters_up")) c.filters_up = kv.get_int_list(prefix + "filters_up");
        if (kv.has(prefix + "kernel_down")) c.kernel_down = kv.get_int_list(prefix + "kernel_down");
        if (kv.has(prefix + "kernel_up")) c.kernel_up = kv.get_int_list(prefix + "kernel_up");
        if (kv.has(prefix + "skip_filters")) c.skip_filters = kv.get_int_list(prefix + "skip_filters");
        if (kv.has(prefix + "skip_kernels")) c.skip_kernels = kv.get_int_list(prefix + "skip_kernels");
        c.num_scales = static_cast<int>(c.filters_down.size());
        c.noise_channels = static_cast<int>(kv.get_int(prefix + "noise_channels", c.noise_channels));
        c.noise_scale = static_cast<float>(kv.get_real(prefix + "noise_scale", c.noise_scale));
        c.learning_rate = static_cast<float>(kv.get_real(prefix + "learning_rate", c.learning_rate));
        c.max_iterations = static_cast<int>(kv.get_int(prefix + "max_iterations", c.max_iterations));
        c.trace_samples = static_cast<int>(kv.get_int(prefix + "trace_samples", c.trace_samples));
        c.rng_seed = static_cast<std::uint64_t>(kv.get_int(prefix + "rng_seed", static_cast<long>(c.rng_seed)));
        c.validate();
        return c;
    }
};

// Fixed generator input: noise_channels x H x W, entries ~ U(0, noise_scale),
// sampled once and held constant over the whole optimization.
struct NoiseTensor {
    Tensor data;
};

struct DipSample {
    int iteration = 0;       // iteration index t at which the image was taken
    Tensor image;            // generator output, clipped to [0,1]
    float mse = 0.0f;        // reconstruction error against the target
};

// The sampled reconstruction sequence of one DIP optimization run.
struct DipTrace {
    std::vector<DipSample> samples;
    Tensor target;  // the input x0 the generator was fitted to
};

// Raised when the reconstruction loss stops being finite; carries whatever
// part of the trace was recorded before the failure.
struct OptimizationDivergedError : Error {
    DipTrace partial;
    explicit OptimizationDivergedError(DipTrace t)
        : Error("DIP optimization diverged (non-finite loss)"), partial(std::move(t)) {}
};

// The generator plus everything needed to continue optimizing it.
struct GeneratorState {
    std::unique_ptr<nn::UNet> net;
    GeneratorConfig config;
};

inline GeneratorState build_generator(const GeneratorConfig& config, int out_channels = 3) {
    config.validate();
    nn::UNet::Spec spec;
    spec.in_channels = config.noise_channels;
    spec.out_channels = out_channels;
    spec.filters_down = config.filters_down;
    spec.kernels_down = config.kernel_down;
    spec.filters_up = config.filters_up;
    spec.kernels_up = config.kernel_up;
    spec.filters_skip = config.skip_filters;
    spec.kernels_skip = config.skip_kernels;
    Rng rng(derive_seed(config.rng_seed, 0x1171));
    return GeneratorState{std::make_unique<nn::UNet>(spec, rng), config};
}

inline NoiseTensor sample_noise(int height, int width, const GeneratorConfig& config) {
    if (height < 1 || width < 1) throw InputError("sample_noise: dimensions must be positive");
    Rng rng(derive_seed(config.rng_seed, 0x2071));
    NoiseTensor z{Tensor(config.noise_channels, height, width)};
    for (float& v : z.data.v) v = config.noise_scale * rng.uniform();
    return z;
}

namespace detail {

inline int round_up(int v, int multiple) { return (v + multiple - 1) / multiple * multiple; }

// Reflection padding on the bottom/right edges only; the top-left corner of
// the padded image is the original, so cropping is a plain sub-view.
inline Tensor reflect_pad(const Tensor& x, int new_h, int new_w) {
    Tensor y(x.c, new_h, new_w);
    auto mirror = [](int i, int n) {
        if (i < n) return i;
        const int over = i - (n - 1);
        return std::max(n - 1 - over, 0);
    };
    for (int c = 0; c < x.c; ++c)
        for (int yy = 0; yy < new_h; ++yy)
            for (int xx = 0; xx < new_w; ++xx)
                y.at(c, yy, xx) = x.at(c, mirror(yy, x.h), mirror(xx, x.w));
    return y;
}

inline Tensor crop(const Tensor& x, int h, int w) {
    Tensor y(x.c, h, w);
    for (int c = 0; c < x.c; ++c)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) y.at(c, yy, xx) = x.at(c, yy, xx);
    return y;
}

}  // namespace detail

// Runs T adaptive-moment gradient steps minimizing MSE(generator(z), target)
// and records the generator output at trace_samples equally spaced
// iterations: stride = floor(T / trace_samples), recorded at t = k*stride - 1
// for k = 1..trace_samples. Images whose side is not divisible by
// 2^num_scales are reflection-padded for the net and cropped before storage.
inline DipTrace run_dip_trace(const Tensor& target, const GeneratorConfig& config) {
    config.validate();
    const int mult = 1 << config.num_scales;
    const int ph = detail::round_up(target.h, mult);
    const int pw = detail::round_up(target.w, mult);
    const bool padded = ph != target.h || pw != target.w;
    const Tensor fit_target = padded ? detail::reflect_pad(target, ph, pw) : target;

    GeneratorState gen = build_generator(config, target.c);
    const NoiseTensor z = sample_noise(ph, pw, config);
    nn::Adam opt(gen.net->params(), config.learning_rate);

    const int stride = config.max_iterations / config.trace_samples;
    DipTrace trace;
    trace.target = target;
    trace.samples.reserve(static_cast<std::size_t>(config.trace_samples));

    for (int t = 0; t < config.max_iterations; ++t) {
        Tensor out = gen.net->forward(z.data);

        const bool record = stride > 0 && (t + 1) % stride == 0 &&
                            static_cast<int>(trace.samples.size()) < config.trace_samples;
        if (record) {
            Tensor img = padded ? detail::crop(out, target.h, target.w) : out;
            img.clip(0.0f, 1.0f);
            trace.samples.push_back({t, std::move(img), 0.0f});
            trace.samples.back().mse = mse(trace.samples.back().image, target);
        }

        // d/dout of mean squared error
        Tensor grad(out.c, out.h, out.w);
        double loss = 0.0;
        const float inv_n = 2.0f / static_cast<float>(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const float d = out.v[i] - fit_target.v[i];
            loss += static_cast<double>(d) * d;
            grad.v[i] = inv_n * d;
        }
        if (!std::isfinite(loss)) throw OptimizationDivergedError(std::move(trace));

        opt.zero_grad();
        gen.net->backward(grad);
        opt.step();
    }
    return trace;
}

}  // namespace dipdef

#endif
