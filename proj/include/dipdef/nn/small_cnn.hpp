#ifndef DIPDEF_NN_SMALL_CNN_HPP
#define DIPDEF_NN_SMALL_CNN_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "dipdef/errors.hpp"
#include "dipdef/nn/adam.hpp"
#include "dipdef/nn/layers.hpp"
#include "dipdef/rng.hpp"

namespace dipdef::nn {

// Compact convolutional classifier for 32x32 RGB inputs:
// 3x [conv3x3 -> relu -> maxpool2] with 16/32/64 filters, then a linear head.
// Small enough to train on the desk-scale dataset in minutes, differentiable
// down to the input for gradient attacks.
class SmallCnn {
  public:
    explicit SmallCnn(int num_classes, std::uint64_t seed = 0)
        : num_classes_(num_classes) {
        Rng rng(derive_seed(seed, 0xc1a55));
        auto conv = [&rng](int in, int out) {
            auto c = std::make_unique<Conv2d>(in, out, 3, 1);
            c->init_xavier(rng);
            return c;
        };
        features_.push_back(conv(3, 16));
        features_.push_back(std::make_unique<Relu>());
        features_.push_back(std::make_unique<MaxPool2x>());
        features_.push_back(conv(16, 32));
        features_.push_back(std::make_unique<Relu>());
        features_.push_back(std::make_unique<MaxPool2x>());
        features_.push_back(conv(32, 64));
        features_.push_back(std::make_unique<Relu>());
        features_.push_back(std::make_unique<MaxPool2x>());
        head_ = std::make_unique<Linear>(64 * 4 * 4, num_classes);
        head_->init_xavier(rng);
    }

    int num_classes() const { return num_classes_; }

    std::vector<float> logits(const Tensor& x) {
        if (x.c != 3 || x.h != 32 || x.w != 32)
            throw InputError("SmallCnn: expected 3x32x32 input");
        Tensor y = x;
        for (auto& layer : features_) y = layer->forward(y);
        y = head_->forward(y);
        return y.v;
    }

    // Backpropagates dL/dlogits and returns dL/dinput; parameter gradients
    // accumulate in the layers.
    Tensor backward(const std::vector<float>& dlogits) {
        Tensor g(num_classes_, 1, 1);
        g.v = dlogits;
        g = head_->backward(g);
        for (auto it = features_.rbegin(); it != features_.rend(); ++it) g = (*it)->backward(g);
        return g;
    }

    std::vector<Param*> params() {
        std::vector<Param*> ps;
        for (auto& layer : features_)
            for (Param* p : layer->params()) ps.push_back(p);
        for (Param* p : head_->params()) ps.push_back(p);
        return ps;
    }

    void save(const std::string& path) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw InputError("cannot open for write: " + path);
        const char magic[4] = {'S', 'C', 'N', 'N'};
        const std::uint32_t version = 1;
        const std::uint32_t classes = static_cast<std::uint32_t>(num_classes_);
        out.write(magic, 4);
        out.write(reinterpret_cast<const char*>(&version), 4);
        out.write(reinterpret_cast<const char*>(&classes), 4);
        for (Param* p : params()) {
            const std::uint64_t n = p->size();
            out.write(reinterpret_cast<const char*>(&n), 8);
            out.write(reinterpret_cast<const char*>(p->w.data()), static_cast<std::streamsize>(n * 4));
        }
        if (!out) throw InputError("short write: " + path);
    }

    static SmallCnn load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InputError("cannot open: " + path);
        char magic[4];
        std::uint32_t version = 0, classes = 0;
        in.read(magic, 4);
        in.read(reinterpret_cast<char*>(&version), 4);
        in.read(reinterpret_cast<char*>(&classes), 4);
        if (!in || std::memcmp(magic, "SCNN", 4) != 0) throw InputError("not a SCNN file: " + path);
        if (version != 1) throw InputError("unsupported SCNN version in " + path);
        SmallCnn net(static_cast<int>(classes));
        for (Param* p : net.params()) {
            std::uint64_t n = 0;
            in.read(reinterpret_cast<char*>(&n), 8);
            if (!in || n != p->size()) throw InputError("weight shape mismatch in " + path);
            in.read(reinterpret_cast<char*>(p->w.data()), static_cast<std::streamsize>(n * 4));
        }
        if (!in) throw InputError("truncated SCNN file: " + path);
        return net;
    }

  private:
    int num_classes_;
    std::vector<std::unique_ptr<Layer>> features_;
    std::unique_ptr<Linear> head_;
};

struct TrainStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

// One epoch of Adam on (images, labels) in the given order, gradients
// accumulated over mini-batches.
inline TrainStats train_epoch(SmallCnn& net, Adam& opt, const std::vector<Tensor>& images,
                              const std::vector<int>& labels, const std::vector<std::size_t>& order,
                              int batch_size) {
    TrainStats stats;
    long hits = 0;
    std::size_t done = 0;
    while (done < order.size()) {
        const std::size_t bsz = std::min<std::size_t>(batch_size, order.size() - done);
        opt.zero_grad();
        for (std::size_t b = 0; b < bsz; ++b) {
            const std::size_t idx = order[done + b];
            const std::vector<float> lg = net.logits(images[idx]);
            std::vector<float> dlg;
            stats.loss += softmax_cross_entropy(lg, labels[idx], dlg);
            int best = 0;
            for (std::size_t c = 1; c < lg.size(); ++c)
                if (lg[c] > lg[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
            if (best == labels[idx]) ++hits;
            const float inv = 1.0f / static_cast<float>(bsz);
            for (float& v : dlg) v *= inv;
            net.backward(dlg);
        }
        opt.step();
        done += bsz;
    }
    stats.loss /= static_cast<double>(order.size());
    stats.accuracy = static_cast<double>(hits) / static_cast<double>(order.size());
    return stats;
}

}  // namespace dipdef::nn

#endif
