#ifndef DIPDEF_ADAPTERS_HPP
#define DIPDEF_ADAPTERS_HPP

#include <memory>
#include <string>
#include <vector>

#include "dipdef/classifier.hpp"
#include "dipdef/nn/small_cnn.hpp"
#include "dipdef/synthetic.hpp"

namespace dipdef {

// Per-channel normalization descriptor applied inside the adapter; the
// defense pipeline itself only ever sees raw [0,1] tensors.
struct Preprocess {
    std::vector<float> mean, std;

    bool identity() const { return mean.empty(); }

    Tensor apply(const Tensor& x) const {
        if (identity()) return x;
        Tensor y = x;
        for (int c = 0; c < x.c; ++c) {
            const float m = mean[static_cast<std::size_t>(c)], s = std[static_cast<std::size_t>(c)];
            for (int i = 0; i < x.h * x.w; ++i) {
                float& v = y.v[static_cast<std::size_t>(c) * x.h * x.w + i];
                v = (v - m) / s;
            }
        }
        return y;
    }

    // Chain rule through (x - mean) / std.
    Tensor apply_grad(const Tensor& g) const {
        if (identity()) return g;
        Tensor y = g;
        for (int c = 0; c < g.c; ++c) {
            const float s = std[static_cast<std::size_t>(c)];
            for (int i = 0; i < g.h * g.w; ++i)
                y.v[static_cast<std::size_t>(c) * g.h * g.w + i] /= s;
        }
        return y;
    }
};

class SmallCnnAdapter final : public ClassifierAdapter {
  public:
    explicit SmallCnnAdapter(nn::SmallCnn net, Preprocess pre = {})
        : net_(std::move(net)), pre_(std::move(pre)) {}

    static std::unique_ptr<SmallCnnAdapter> from_file(const std::string& weights_path) {
        return std::make_unique<SmallCnnAdapter>(nn::SmallCnn::load(weights_path));
    }

    int num_classes() const override { return net_.num_classes(); }
    bool differentiable() const override { return true; }

    std::vector<std::vector<float>> predict(const std::vector<Tensor>& images) override {
        std::vector<std::vector<float>> out;
        out.reserve(images.size());
        for (const Tensor& img : images) out.push_back(nn::softmax(net_.logits(pre_.apply(img))));
        return out;
    }

    Tensor loss_input_gradient(const Tensor& image, int label) override {
        const std::vector<float> lg = net_.logits(pre_.apply(image));
        std::vector<float> dlg;
        nn::softmax_cross_entropy(lg, label, dlg);
        return pre_.apply_grad(net_.backward(dlg));
    }

    nn::SmallCnn& net() { return net_; }

  private:
    nn::SmallCnn net_;
    Preprocess pre_;
};

// Registers the built-in adapter families. "small-cnn" loads SCNN weights
// from "<prefix>weights"; "synthetic-linear" builds a random analytic
// classifier from "<prefix>classes"/"<prefix>dim"/"<prefix>seed".
inline void register_builtin_adapters() {
    auto& reg = AdapterRegistry::instance();
    if (reg.known("small-cnn")) return;
    reg.add("small-cnn", [](const KeyValueConfig& cfg, const std::string& prefix) {
        return SmallCnnAdapter::from_file(cfg.get(prefix + "weights"));
    });
    reg.add("synthetic-linear", [](const KeyValueConfig& cfg, const std::string& prefix)
                -> std::unique_ptr<ClassifierAdapter> {
        const int classes = static_cast<int>(cfg.get_int(prefix + "classes", 2));
        const int dim = static_cast<int>(cfg.get_int(prefix + "dim", 16));
        const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int(prefix + "seed", 1));
        return std::make_unique<LinearClassifier>(LinearClassifier::random(classes, dim, seed));
    });
}

}  // namespace dipdef

#endif
