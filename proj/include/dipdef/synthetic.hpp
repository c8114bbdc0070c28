#ifndef DIPDEF_SYNTHETIC_HPP
#define DIPDEF_SYNTHETIC_HPP

#include <vector>

#include "dipdef/classifier.hpp"
#include "dipdef/errors.hpp"
#include "dipdef/rng.hpp"
#include "dipdef/tensor.hpp"

namespace dipdef {

// Analytic linear-softmax classifier: confidences = softmax(W x + b) over the
// flattened image. Makes the boundary machinery exactly verifiable, with
// closed-form cross-entropy gradients for the attack suite.
class LinearClassifier final : public ClassifierAdapter {
  public:
    LinearClassifier(std::vector<std::vector<float>> weights, std::vector<float> bias)
        : weights_(std::move(weights)), bias_(std::move(bias)) {
        if (weights_.empty() || weights_.size() != bias_.size())
            throw ConfigError("LinearClassifier: need one weight row and bias per class");
        for (const auto& row : weights_)
            if (row.size() != weights_.front().size())
                throw ConfigError("LinearClassifier: ragged weight rows");
    }

    static LinearClassifier random(int num_classes, int dim, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<std::vector<float>> w(static_cast<std::size_t>(num_classes));
        std::vector<float> b(static_cast<std::size_t>(num_classes));
        for (auto& row : w) {
            row.resize(static_cast<std::size_t>(dim));
            for (float& v : row) v = rng.normal();
        }
        for (float& v : b) v = 0.1f * rng.normal();
        return LinearClassifier(std::move(w), std::move(b));
    }

    int num_classes() const override { return static_cast<int>(weights_.size()); }
    bool differentiable() const override { return true; }
    bool thread_safe() const override { return true; }

    std::vector<float> logits(const Tensor& x) const {
        const std::size_t dim = weights_.front().size();
        if (x.size() != dim) throw InputError("LinearClassifier: input dimension mismatch");
        std::vector<float> out(weights_.size());
        for (std::size_t c = 0; c < weights_.size(); ++c) {
            double acc = bias_[c];
            for (std::size_t i = 0; i < dim; ++i)
                acc += static_cast<double>(weights_[c][i]) * x.v[i];
            out[c] = static_cast<float>(acc);
        }
        return out;
    }

    std::vector<std::vector<float>> predict(const std::vector<Tensor>& images) override {
        std::vector<std::vector<float>> out;
        out.reserve(images.size());
        for (const Tensor& img : images) out.push_back(nn::softmax(logits(img)));
        return out;
    }

    // d/dx of CE(softmax(Wx+b), label) = W^T (p - onehot)
    Tensor loss_input_gradient(const Tensor& x, int label) override {
        const std::vector<float> p = nn::softmax(logits(x));
        Tensor g(x.c, x.h, x.w);
        for (std::size_t c = 0; c < weights_.size(); ++c) {
            const float coef = p[c] - (static_cast<int>(c) == label ? 1.0f : 0.0f);
            for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += coef * weights_[c][i];
        }
        return g;
    }

    // Raw parameters, exposed so reference computations can be done at
    // higher precision than the forward pass.
    const std::vector<std::vector<float>>& weights() const { return weights_; }
    const std::vector<float>& bias() const { return bias_; }

  private:
    std::vector<std::vector<float>> weights_;
    std::vector<float> bias_;
};

// A hand-authored stand-in for a DIP trace: explicit waypoint images plus
// injected quality values that bypass the SSIM computation.
struct ScriptedTrace {
    std::vector<Tensor> waypoints;
    std::vector<float> qualities;
    std::vector<int> iterations;  // optional; defaults to 0,1,2,...
};

// Exact root of a gap linear in alpha with gap(alpha=1)=gap_left and
// gap(alpha=0)=gap_right: alpha* = -gap_right / (gap_left - gap_right).
inline float analytic_boundary_alpha(float gap_left, float gap_right) {
    if (gap_left * gap_right >= 0.0f)
        throw InputError("analytic_boundary_alpha: gaps must have opposite signs");
    return -gap_right / (gap_left - gap_right);
}

// Converts a scripted trace into (DipTrace, DecisionTrace) against an
// analytic classifier, taking the quality values verbatim from the script.
inline std::pair<DipTrace, DecisionTrace> scripted_trace_decisions(const ScriptedTrace& script,
                                                                   ClassifierAdapter& clf) {
    if (script.waypoints.empty()) throw InputError("scripted_trace_decisions: empty script");
    if (script.waypoints.size() != script.qualities.size())
        throw InputError("scripted_trace_decisions: waypoint/quality length mismatch");
    for (const Tensor& wp : script.waypoints)
        require_same_shape(wp, script.waypoints.front(), "scripted_trace_decisions");

    DipTrace trace;
    trace.target = script.waypoints.front();
    DecisionTrace decisions;
    const auto confs = clf.predict(script.waypoints);
    for (std::size_t i = 0; i < script.waypoints.size(); ++i) {
        const int t = i < script.iterations.size() ? script.iterations[i] : static_cast<int>(i);
        trace.samples.push_back({t, script.waypoints[i], 0.0f});
        DecisionEntry e;
        e.iteration = t;
        e.confidences = confs[i];
        e.label = argmax_label(e.confidences);
        e.quality = script.qualities[i];
        decisions.entries.push_back(std::move(e));
    }
    return {std::move(trace), std::move(decisions)};
}

}  // namespace dipdef

#endif
