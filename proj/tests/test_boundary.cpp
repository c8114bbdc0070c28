#include <doctest.h>

#include <cmath>

#include "dipdef/boundary.hpp"
#include "dipdef/synthetic.hpp"

using namespace dipdef;

namespace {

// Builds an aligned (trace, decisions) pair from parallel label/quality/
// iteration lists; images are 1x1x1 tensors carrying the index.
std::pair<DipTrace, DecisionTrace> fake_trace(const std::vector<int>& labels,
                                              const std::vector<float>& qualities,
                                              const std::vector<int>& iterations) {
    DipTrace trace;
    DecisionTrace decisions;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        Tensor img(1, 1, 1, static_cast<float>(i));
        trace.samples.push_back({iterations[i], img, 0.0f});
        DecisionEntry e;
        e.iteration = iterations[i];
        e.label = labels[i];
        e.quality = qualities[i];
        decisions.entries.push_back(std::move(e));
    }
    return {std::move(trace), std::move(decisions)};
}

// The reference predicate, evaluated the obvious way.
std::vector<std::size_t> brute_force_pairs(const DecisionTrace& d, const DetectionConfig& cfg) {
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i + 1 < d.entries.size(); ++i)
        if (d.entries[i].label != d.entries[i + 1].label && d.entries[i].quality >= cfg.tau &&
            d.entries[i].iteration > cfg.warmup_t0)
            hits.push_back(i);
    return hits;
}

// 2-class linear classifier over a single pixel: logit gap = 2*s*v, so the
// decision boundary sits exactly at v = 0 and the gap is linear in alpha.
LinearClassifier one_pixel_classifier(float s = 1.0f) {
    return LinearClassifier({{s}, {-s}}, {0.0f, 0.0f});
}

Tensor pixel(float v) { return Tensor(1, 1, 1, v); }

}  // namespace

TEST_CASE("detection equals the brute-force predicate on randomized traces") {
    Rng rng(31);
    DetectionConfig cfg;
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + static_cast<int>(rng.index(40));
        std::vector<int> labels, iterations;
        std::vector<float> qualities;
        int t = static_cast<int>(rng.index(30));
        for (int i = 0; i < n; ++i) {
            labels.push_back(static_cast<int>(rng.index(3)));
            qualities.push_back(rng.uniform());
            iterations.push_back(t);
            t += 1 + static_cast<int>(rng.index(10));
        }
        cfg.tau = rng.uniform(0.2f, 0.9f);
        cfg.warmup_t0 = static_cast<int>(rng.index(60));

        auto [trace, decisions] = fake_trace(labels, qualities, iterations);
        const auto pairs = detect_cross_boundary(trace, decisions, cfg);
        const auto expected = brute_force_pairs(decisions, cfg);
        REQUIRE(pairs.size() == expected.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const std::size_t e = expected[i];
            CHECK(pairs[i].index == iterations[e]);
            CHECK(pairs[i].left_label == labels[e]);
            CHECK(pairs[i].right_label == labels[e + 1]);
            CHECK(pairs[i].left.v[0] == static_cast<float>(e));
            CHECK(pairs[i].right.v[0] == static_cast<float>(e + 1));
        }
    }
}

TEST_CASE("quality gate is inclusive and warmup gate is exclusive") {
    DetectionConfig cfg;
    cfg.tau = 0.7f;
    cfg.warmup_t0 = 50;
    // left quality exactly tau -> kept
    {
        auto [trace, d] = fake_trace({0, 1}, {0.7f, 0.1f}, {51, 52});
        CHECK(detect_cross_boundary(trace, d, cfg).size() == 1);
    }
    // left quality just below tau -> dropped
    {
        auto [trace, d] = fake_trace({0, 1}, {0.699f, 0.9f}, {51, 52});
        CHECK(detect_cross_boundary(trace, d, cfg).empty());
    }
    // left iteration exactly t0 -> dropped, t0+1 -> kept
    {
        auto [trace, d] = fake_trace({0, 1}, {0.9f, 0.9f}, {50, 51});
        CHECK(detect_cross_boundary(trace, d, cfg).empty());
    }
    {
        auto [trace, d] = fake_trace({0, 1}, {0.9f, 0.9f}, {51, 52});
        CHECK(detect_cross_boundary(trace, d, cfg).size() == 1);
    }
}

TEST_CASE("select_last_k keeps the trailing pairs in order") {
    std::vector<CrossBoundaryPair> pairs(7);
    for (int i = 0; i < 7; ++i) pairs[static_cast<std::size_t>(i)].index = i;
    const auto kept = select_last_k(pairs, 3);
    REQUIRE(kept.size() == 3);
    CHECK(kept[0].index == 4);
    CHECK(kept[2].index == 6);
    CHECK(select_last_k(pairs, 10).size() == 7);
}

TEST_CASE("interpolate endpoints and midpoint") {
    const Tensor l = pixel(0.8f), r = pixel(0.2f);
    CHECK(interpolate(l, r, 1.0f).v[0] == doctest::Approx(0.8f));
    CHECK(interpolate(l, r, 0.0f).v[0] == doctest::Approx(0.2f));
    CHECK(interpolate(l, r, 0.5f).v[0] == doctest::Approx(0.5f));
    CHECK_THROWS_AS((void)interpolate(l, r, 1.5f), InputError);
}

TEST_CASE("localization hits the analytic boundary within 1/(2N)") {
    // logit gaps +0.4 (left) and -0.6 (right): the zero crossing of the gap,
    // linear in alpha, sits at alpha* = 0.6
    LinearClassifier clf = one_pixel_classifier();
    CrossBoundaryPair pair;
    pair.left = pixel(0.2f);    // gap = 2*0.2 = +0.4
    pair.right = pixel(-0.3f);  // gap = -0.6
    pair.left_label = 0;
    pair.right_label = 1;
    const float alpha_true = analytic_boundary_alpha(0.4f, -0.6f);
    CHECK(alpha_true == doctest::Approx(0.6f));

    for (int n : {10, 20, 100, 1000}) {
        const OnBoundaryImage bd = localize_on_boundary(pair, clf, n);
        CHECK(std::abs(bd.alpha - alpha_true) <= 0.5f / n + 1e-6f);
        CHECK(!bd.argmax_off_pair);
    }
    CHECK(localize_on_boundary(pair, clf, 20).alpha == doctest::Approx(0.6f));
}

TEST_CASE("localization error shrinks with grid refinement off the grid points") {
    LinearClassifier clf = one_pixel_classifier();
    CrossBoundaryPair pair;
    pair.left = pixel(0.315f);
    pair.right = pixel(-0.185f);
    pair.left_label = 0;
    pair.right_label = 1;
    const float alpha_true = analytic_boundary_alpha(2 * 0.315f, 2 * -0.185f);
    float prev_err = 1.0f;
    for (int n : {10, 100, 1000}) {
        const OnBoundaryImage bd = localize_on_boundary(pair, clf, n);
        const float err = std::abs(bd.alpha - alpha_true);
        CHECK(err <= 0.5f / n + 1e-5f);
        CHECK(err <= prev_err + 1e-6f);
        prev_err = err;
    }
}

TEST_CASE("gap ties resolve to the smallest alpha") {
    // zero weights: every alpha has an identical (zero) gap
    LinearClassifier clf({{0.0f}, {0.0f}}, {0.3f, 0.1f});
    CrossBoundaryPair pair;
    pair.left = pixel(1.0f);
    pair.right = pixel(0.0f);
    pair.left_label = 0;
    pair.right_label = 1;
    CHECK(localize_on_boundary(pair, clf, 20).alpha == doctest::Approx(0.0f));
}

TEST_CASE("analytic alpha rejects same-sign gaps") {
    CHECK_THROWS_AS((void)analytic_boundary_alpha(0.5f, 0.2f), InputError);
    CHECK_THROWS_AS((void)analytic_boundary_alpha(-0.5f, -0.2f), InputError);
}

TEST_CASE("detection config validation") {
    DetectionConfig cfg;
    cfg.tau = 1.5f;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.grid_sections_n = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
