#ifndef DIPDEF_BOUNDARY_HPP
#define DIPDEF_BOUNDARY_HPP

#include <cmath>
#include <vector>

#include "dipdef/classifier.hpp"
#include "dipdef/config_file.hpp"
#include "dipdef/dip.hpp"
#include "dipdef/errors.hpp"
#include "dipdef/tensor.hpp"

namespace dipdef {

struct DetectionConfig {
    float tau = 0.7f;       // perceptual quality gate on the left image
    int warmup_t0 = 50;     // iterations to skip at the start of the trace
    int max_pairs_k = 15;   // keep the last K cross-boundary pairs
    int grid_sections_n = 20;

    void validate() const {
        if (tau < 0.0f || tau > 1.0f) throw ConfigError("DetectionConfig: tau must be in [0,1]");
        if (warmup_t0 < 0) throw ConfigError("DetectionConfig: warmup_t0 must be >= 0");
        if (max_pairs_k < 1) throw ConfigError("DetectionConfig: max_pairs_k must be >= 1");
        if (grid_sections_n < 2) throw ConfigError("DetectionConfig: grid_sections_n must be >= 2");
    }

    static DetectionConfig from_config(const KeyValueConfig& kv, const std::string& prefix = "detection.") {
        DetectionConfig c;
        c.tau = static_cast<float>(kv.get_real(prefix + "tau", c.tau));
        c.warmup_t0 = static_cast<int>(kv.get_int(prefix + "warmup_t0", c.warmup_t0));
        c.max_pairs_k = static_cast<int>(kv.get_int(prefix + "max_pairs_k", c.max_pairs_k));
        c.grid_sections_n = static_cast<int>(kv.get_int(prefix + "grid_sections_n", c.grid_sections_n));
        c.validate();
        return c;
    }
};

// Two consecutive sampled trace images whose predicted labels differ, with
// the earlier one passing the quality gate.
struct CrossBoundaryPair {
    int index = 0;  // iteration index t of the left sample
    Tensor left, right;
    int left_label = 0, right_label = 0;
    float left_quality = 0.0f;
};

// An interpolated image on the decision boundary.
struct OnBoundaryImage {
    Tensor image;
    float alpha = 0.0f;          // weight of the left image
    float gap = 0.0f;            // residual |f_yl - f_yr| at alpha
    int source_index = 0;        // iteration index of the originating pair
    bool argmax_off_pair = false;  // argmax at alpha was neither pair class
};

// Returns exactly the adjacent sampled pairs (t, t+1) with differing labels,
// left quality >= tau and t > t0, in trace order. "Adjacent" means
// consecutive in the sampled trace, not in raw iterations.
inline std::vector<CrossBoundaryPair> detect_cross_boundary(const DipTrace& trace,
                                                            const DecisionTrace& decisions,
                                                            const DetectionConfig& cfg) {
    cfg.validate();
    if (trace.samples.size() != decisions.entries.size())
        throw InputError("detect_cross_boundary: trace and decisions are not aligned");
    std::vector<CrossBoundaryPair> pairs;
    for (std::size_t i = 0; i + 1 < decisions.entries.size(); ++i) {
        const DecisionEntry& l = decisions.entries[i];
        const DecisionEntry& r = decisions.entries[i + 1];
        if (l.label != r.label && l.quality >= cfg.tau && l.iteration > cfg.warmup_t0) {
            pairs.push_back({l.iteration, trace.samples[i].image, trace.samples[i + 1].image,
                             l.label, r.label, l.quality});
        }
    }
    return pairs;
}

// The final min(K, |pairs|) pairs, in trace order.
inline std::vector<CrossBoundaryPair> select_last_k(std::vector<CrossBoundaryPair> pairs, int k) {
    if (static_cast<int>(pairs.size()) > k)
        pairs.erase(pairs.begin(), pairs.end() - k);
    return pairs;
}

// Pixelwise convex combination alpha*left + (1-alpha)*right.
inline Tensor interpolate(const Tensor& left, const Tensor& right, float alpha) {
    require_same_shape(left, right, "interpolate");
    if (alpha < 0.0f || alpha > 1.0f) throw InputError("interpolate: alpha must be in [0,1]");
    Tensor out(left.c, left.h, left.w);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = alpha * left.v[i] + (1.0f - alpha) * right.v[i];
    return out;
}

// Grid search for the alpha minimizing the confidence gap between the pair's
// two classes, alpha in {0, 1/N, ..., 1}; ties go to the smallest alpha. The
// localization error in image space is bounded by (1/2N)*||left - right||
// when the true gap has a single zero crossing.
inline OnBoundaryImage localize_on_boundary(const CrossBoundaryPair& pair, ClassifierAdapter& adapter,
                                            int grid_sections_n) {
    if (grid_sections_n < 2) throw ConfigError("localize_on_boundary: N must be >= 2");
    std::vector<Tensor> grid;
    grid.reserve(static_cast<std::size_t>(grid_sections_n) + 1);
    for (int i = 0; i <= grid_sections_n; ++i)
        grid.push_back(interpolate(pair.left, pair.right, static_cast<float>(i) / grid_sections_n));
    const auto confs = adapter.predict(grid);

    int best = 0;
    float best_gap = std::numeric_limits<float>::infinity();
    for (int i = 0; i <= grid_sections_n; ++i) {
        const auto& c = confs[static_cast<std::size_t>(i)];
        const float gap = std::abs(c[static_cast<std::size_t>(pair.left_label)] -
                                   c[static_cast<std::size_t>(pair.right_label)]);
        if (gap < best_gap) {
            best_gap = gap;
            best = i;
        }
    }
    OnBoundaryImage out;
    out.alpha = static_cast<float>(best) / grid_sections_n;
    out.image = std::move(grid[static_cast<std::size_t>(best)]);
    out.image.clip(0.0f, 1.0f);
    out.gap = best_gap;
    out.source_index = pair.index;
    const int winner = argmax_label(confs[static_cast<std::size_t>(best)]);
    out.argmax_off_pair = winner != pair.left_label && winner != pair.right_label;
    return out;
}

}  // namespace dipdef

#endif
