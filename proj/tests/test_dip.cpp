#include <doctest.h>

#include <sstream>

#include "dipdef/dip.hpp"

using namespace dipdef;

namespace {

GeneratorConfig tiny_config() {
    GeneratorConfig cfg = GeneratorConfig::small();
    cfg.max_iterations = 20;
    cfg.trace_samples = 5;
    return cfg;
}

Tensor gradient_image(int side) {
    Tensor t(3, side, side);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                t.at(c, y, x) = (0.2f + 0.6f * (x + y) / (2.0f * (side - 1))) * (1.0f + 0.1f * c) / 1.2f;
    return t;
}

}  // namespace

TEST_CASE("generator config presets and validation") {
    for (const char* name : {"small", "medium", "cifar", "large", "imagenet"})
        CHECK_NOTHROW(GeneratorConfig::preset(name).validate());
    CHECK_THROWS_AS(GeneratorConfig::preset("huge"), ConfigError);

    GeneratorConfig bad = GeneratorConfig::medium();
    bad.filters_down = {32, 32};  // wrong list length
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = GeneratorConfig::medium();
    bad.trace_samples = bad.max_iterations + 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = GeneratorConfig::medium();
    bad.noise_scale = 0.0f;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    const GeneratorConfig img = GeneratorConfig::imagenet();
    CHECK(img.num_scales == 5);
    CHECK(img.max_iterations == 3000);
    CHECK(img.noise_scale == doctest::Approx(0.01f));
}

TEST_CASE("generator config from key=value file") {
    std::istringstream in(
        "[generator]\n"
        "preset = small\n"
        "max_iterations = 40\n"
        "trace_samples = 10\n"
        "rng_seed = 5\n");
    const GeneratorConfig cfg = GeneratorConfig::from_config(KeyValueConfig::parse(in));
    CHECK(cfg.num_scales == 2);
    CHECK(cfg.max_iterations == 40);
    CHECK(cfg.trace_samples == 10);
    CHECK(cfg.rng_seed == 5);
}

TEST_CASE("noise tensor is uniform in [0, noise_scale] and seed-stable") {
    GeneratorConfig cfg = tiny_config();
    cfg.rng_seed = 3;
    const NoiseTensor z1 = sample_noise(8, 8, cfg);
    const NoiseTensor z2 = sample_noise(8, 8, cfg);
    CHECK(z1.data.v == z2.data.v);
    CHECK(z1.data.c == cfg.noise_channels);
    for (float v : z1.data.v) {
        CHECK(v >= 0.0f);
        CHECK(v <= cfg.noise_scale);
    }
    cfg.rng_seed = 4;
    CHECK(sample_noise(8, 8, cfg).data.v != z1.data.v);
}

TEST_CASE("trace records at t = k*stride - 1") {
    GeneratorConfig cfg = tiny_config();  // T=20, samples=5 -> stride 4
    const DipTrace trace = run_dip_trace(gradient_image(8), cfg);
    REQUIRE(trace.samples.size() == 5);
    const std::vector<int> expected = {3, 7, 11, 15, 19};
    for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(trace.samples[i].iteration == expected[i]);
    for (const DipSample& s : trace.samples) {
        CHECK(all_finite(s.image));
        for (float v : s.image.v) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
        CHECK(s.mse == doctest::Approx(mse(s.image, trace.target)));
    }
}

TEST_CASE("trace is bit-reproducible from the seed") {
    GeneratorConfig cfg = tiny_config();
    cfg.rng_seed = 99;
    const Tensor target = gradient_image(8);
    const DipTrace a = run_dip_trace(target, cfg);
    const DipTrace b = run_dip_trace(target, cfg);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i)
        CHECK(a.samples[i].image.v == b.samples[i].image.v);

    cfg.rng_seed = 100;
    const DipTrace c = run_dip_trace(target, cfg);
    CHECK(a.samples.back().image.v != c.samples.back().image.v);
}

TEST_CASE("non-multiple image sides are padded then cropped back") {
    GeneratorConfig cfg = tiny_config();  // 2 scales -> needs multiples of 4
    const Tensor target = gradient_image(10);
    const DipTrace trace = run_dip_trace(target, cfg);
    for (const DipSample& s : trace.samples) {
        CHECK(s.image.h == 10);
        CHECK(s.image.w == 10);
    }
}

TEST_CASE("optimization drives the reconstruction error down") {
    GeneratorConfig cfg = GeneratorConfig::small();
    cfg.max_iterations = 150;
    cfg.trace_samples = 15;
    cfg.rng_seed = 1;
    const DipTrace trace = run_dip_trace(gradient_image(8), cfg);
    CHECK(trace.samples.back().mse < trace.samples.front().mse);
}
