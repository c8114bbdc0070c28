#ifndef DIPDEF_RECONSTRUCT_HPP
#define DIPDEF_RECONSTRUCT_HPP

#include <optional>
#include <vector>

#include "dipdef/boundary.hpp"
#include "dipdef/classifier.hpp"
#include "dipdef/config_file.hpp"
#include "dipdef/dip.hpp"
#include "dipdef/errors.hpp"
#include "dipdef/tensor.hpp"

namespace dipdef {

struct ReconstructionConfig {
    float beta = 0.5f;

    void validate() const {
        if (beta < 0.0f) throw ConfigError("ReconstructionConfig: beta must be >= 0");
    }

    static ReconstructionConfig from_config(const KeyValueConfig& kv,
                                            const std::string& prefix = "reconstruction.") {
        ReconstructionConfig c;
        c.beta = static_cast<float>(kv.get_real(prefix + "beta", c.beta));
        c.validate();
        return c;
    }
};

// Optional per-stage record for visualization and debugging.
struct DefenseDiagnostics {
    DecisionTrace decisions;
    std::vector<int> pair_indices;      // iteration index of every detected pair
    std::vector<int> used_indices;      // the last-K subset actually used
    std::vector<float> alphas, gaps;
    std::vector<Tensor> on_boundary;    // localized boundary images
};

struct DefenseResult {
    Tensor reconstructed;
    bool used_fallback = false;
    int pairs_used = 0;
    int predicted_label = 0;
    std::vector<float> predicted_confidences;
    std::optional<DefenseDiagnostics> diagnostics;
};

// Moves an on-boundary image a step of size beta along the direction away
// from the input x0, then clips to [0,1].
inline Tensor perturb_to_manifold(const Tensor& x_bd, const Tensor& x0, float beta) {
    require_same_shape(x_bd, x0, "perturb_to_manifold");
    if (beta < 0.0f) throw InputError("perturb_to_manifold: beta must be >= 0");
    Tensor out(x_bd.c, x_bd.h, x_bd.w);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = x_bd.v[i] + beta * (x_bd.v[i] - x0.v[i]);
    return out.clip(0.0f, 1.0f);
}

// Pixelwise arithmetic mean; the divisor is the actual image count.
inline Tensor stitch(const std::vector<Tensor>& images) {
    if (images.empty()) throw InputError("stitch: empty image list");
    Tensor out(images.front().c, images.front().h, images.front().w);
    for (const Tensor& img : images) {
        require_same_shape(out, img, "stitch");
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += img.v[i];
    }
    const float inv = 1.0f / static_cast<float>(images.size());
    for (float& v : out.v) v *= inv;
    return out;
}

// The end-to-end defense: DIP trace -> decision space -> cross-boundary
// detection -> on-boundary localization -> manifold step -> stitching.
// When no cross-boundary pair exists the last K trace samples are averaged
// unchanged (beta = 0). The optional eval_adapter scores the reconstruction
// on a different model than the one used to build the decision trace.
// Core of the defense given an already-computed decision trace (scripted
// traces and tests enter here; the quality values in `decisions` are taken
// as-is).
inline DefenseResult defend_from_decisions(const DipTrace& trace, const DecisionTrace& decisions,
                                           const Tensor& x0, ClassifierAdapter& adapter,
                                           const DetectionConfig& det_cfg,
                                           const ReconstructionConfig& rec_cfg,
                                           ClassifierAdapter* eval_adapter = nullptr,
                                           bool want_diagnostics = false) {
    det_cfg.validate();
    rec_cfg.validate();

    const auto all_pairs = detect_cross_boundary(trace, decisions, det_cfg);
    const auto pairs = select_last_k(all_pairs, det_cfg.max_pairs_k);

    DefenseResult result;
    if (want_diagnostics) {
        DefenseDiagnostics diag;
        diag.decisions = decisions;
        for (const auto& p : all_pairs) diag.pair_indices.push_back(p.index);
        for (const auto& p : pairs) diag.used_indices.push_back(p.index);
        result.diagnostics = std::move(diag);
    }

    if (pairs.empty()) {
        // The trace never crossed the boundary: average the last K samples.
        const int k = std::min<int>(det_cfg.max_pairs_k, static_cast<int>(trace.samples.size()));
        std::vector<Tensor> tail;
        tail.reserve(static_cast<std::size_t>(k));
        for (std::size_t i = trace.samples.size() - static_cast<std::size_t>(k); i < trace.samples.size(); ++i)
            tail.push_back(trace.samples[i].image);
        result.reconstructed = stitch(tail);
        result.used_fallback = true;
        result.pairs_used = 0;
    } else {
        std::vector<Tensor> on_manifold;
        on_manifold.reserve(pairs.size());
        for (const auto& pair : pairs) {
            OnBoundaryImage bd = localize_on_boundary(pair, adapter, det_cfg.grid_sections_n);
            if (result.diagnostics) {
                result.diagnostics->alphas.push_back(bd.alpha);
                result.diagnostics->gaps.push_back(bd.gap);
                result.diagnostics->on_boundary.push_back(bd.image);
            }
            on_manifold.push_back(perturb_to_manifold(bd.image, x0, rec_cfg.beta));
        }
        result.reconstructed = stitch(on_manifold);
        result.pairs_used = static_cast<int>(pairs.size());
    }
    result.reconstructed.clip(0.0f, 1.0f);

    ClassifierAdapter& scorer = eval_adapter ? *eval_adapter : adapter;
    result.predicted_confidences = scorer.predict_one(result.reconstructed);
    result.predicted_label = argmax_label(result.predicted_confidences);
    return result;
}

inline DefenseResult defend_from_trace(const DipTrace& trace, const Tensor& x0,
                                       ClassifierAdapter& adapter, const DetectionConfig& det_cfg,
                                       const ReconstructionConfig& rec_cfg,
                                       ClassifierAdapter* eval_adapter = nullptr,
                                       bool want_diagnostics = false, const SsimConfig& ssim_cfg = {}) {
    const DecisionTrace decisions = map_trace_to_decisions(trace, adapter, x0, ssim_cfg);
    return defend_from_decisions(trace, decisions, x0, adapter, det_cfg, rec_cfg, eval_adapter,
                                 want_diagnostics);
}

inline DefenseResult defend(const Tensor& x0, ClassifierAdapter& adapter, const GeneratorConfig& gen_cfg,
                            const DetectionConfig& det_cfg, const ReconstructionConfig& rec_cfg,
                            ClassifierAdapter* eval_adapter = nullptr, bool want_diagnostics = false,
                            const SsimConfig& ssim_cfg = {}) {
    gen_cfg.validate();
    const DipTrace trace = run_dip_trace(x0, gen_cfg);
    return defend_from_trace(trace, x0, adapter, det_cfg, rec_cfg, eval_adapter, want_diagnostics,
                             ssim_cfg);
}

}  // namespace dipdef

#endif
