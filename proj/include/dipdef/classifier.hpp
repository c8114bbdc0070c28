#ifndef DIPDEF_CLASSIFIER_HPP
#define DIPDEF_CLASSIFIER_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dipdef/config_file.hpp"
#include "dipdef/dip.hpp"
#include "dipdef/errors.hpp"
#include "dipdef/metrics.hpp"
#include "dipdef/tensor.hpp"

namespace dipdef {

// Abstracts the pretrained victim classifier. Implementations own all
// model-specific preprocessing; callers always pass raw [0,1] pixel tensors
// and receive softmax confidence vectors.
class ClassifierAdapter {
  public:
    virtual ~ClassifierAdapter() = default;

    virtual int num_classes() const = 0;

    // Softmax confidence vectors, one per image; batched evaluation must be
    // identical to one-by-one evaluation.
    virtual std::vector<std::vector<float>> predict(const std::vector<Tensor>& images) = 0;

    virtual bool differentiable() const { return false; }

    // Gradient of cross-entropy loss w.r.t. the input image.
    virtual Tensor loss_input_gradient(const Tensor& /*image*/, int /*label*/) {
        throw CapabilityError("this classifier adapter does not provide gradients");
    }

    // Whether predict() may be called from several threads concurrently.
    virtual bool thread_safe() const { return false; }

    std::vector<float> predict_one(const Tensor& image) { return predict({image}).front(); }
};

// argmax with ties broken by the lowest class id
inline int argmax_label(const std::vector<float>& confidences) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(confidences.size()); ++i)
        if (confidences[i] > confidences[static_cast<std::size_t>(best)]) best = i;
    return best;
}

struct DecisionEntry {
    int iteration = 0;               // aligned with the DipTrace sample index
    int label = 0;                   // argmax of confidences
    std::vector<float> confidences;  // softmax, sums to 1
    float quality = 0.0f;            // v = SSIM(sample, reference), in [-1,1]
};

// The DIP trace projected into the victim classifier's decision space.
struct DecisionTrace {
    std::vector<DecisionEntry> entries;
};

inline DecisionTrace map_trace_to_decisions(const DipTrace& trace, ClassifierAdapter& adapter,
                                            const Tensor& reference, const SsimConfig& ssim_cfg = {}) {
    if (trace.samples.empty()) throw InputError("map_trace_to_decisions: empty trace");
    std::vector<Tensor> images;
    images.reserve(trace.samples.size());
    for (const DipSample& s : trace.samples) images.push_back(s.image);
    const auto confs = adapter.predict(images);

    DecisionTrace out;
    out.entries.reserve(trace.samples.size());
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        DecisionEntry e;
        e.iteration = trace.samples[i].iteration;
        e.confidences = confs[i];
        e.label = argmax_label(e.confidences);
        e.quality = ssim(trace.samples[i].image, reference, ssim_cfg);
        out.entries.push_back(std::move(e));
    }
    return out;
}

// Registry of adapter factories keyed by name. Factories receive the full
// experiment config plus a key prefix (e.g. "adapter." or "eval_adapter.")
// so they can locate weight files etc.
class AdapterRegistry {
  public:
    using Factory =
        std::function<std::unique_ptr<ClassifierAdapter>(const KeyValueConfig&, const std::string&)>;

    static AdapterRegistry& instance() {
        static AdapterRegistry reg;
        return reg;
    }

    void add(const std::string& name, Factory f) { factories_[name] = std::move(f); }

    std::unique_ptr<ClassifierAdapter> create(const std::string& name, const KeyValueConfig& cfg,
                                              const std::string& prefix = "adapter.") const {
        auto it = factories_.find(name);
        if (it == factories_.end()) throw ConfigError("unknown classifier adapter: " + name);
        return it->second(cfg, prefix);
    }

    bool known(const std::string& name) const { return factories_.count(name) != 0; }

  private:
    std::map<std::string, Factory> factories_;
};

}  // namespace dipdef

#endif
