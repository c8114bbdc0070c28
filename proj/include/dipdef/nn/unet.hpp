#ifndef DIPDEF_NN_UNET_HPP
#define DIPDEF_NN_UNET_HPP

#include <memory>
#include <vector>

#include "dipdef/errors.hpp"
#include "dipdef/nn/layers.hpp"

namespace dipdef::nn {

// Multi-scale encoder-decoder with per-scale skip connections and bilinear
// upsampling. Each encoder scale halves the resolution with a strided
// convolution; each decoder scale concatenates the upsampled deeper feature
// with a 1x1-ish skip projection of the same-resolution encoder feature.
class UNet {
  public:
    struct Spec {
        int in_channels;
        int out_channels;
        std::vector<int> filters_down, kernels_down;
        std::vector<int> filters_up, kernels_up;
        std::vector<int> filters_skip, kernels_skip;
    };

    UNet(const Spec& spec, Rng& rng) : scales_(static_cast<int>(spec.filters_down.size())) {
        if (spec.filters_up.size() != spec.filters_down.size() ||
            spec.filters_skip.size() != spec.filters_down.size() ||
            spec.kernels_down.size() != spec.filters_down.size() ||
            spec.kernels_up.size() != spec.filters_down.size() ||
            spec.kernels_skip.size() != spec.filters_down.size())
            throw ConfigError("UNet: per-scale lists must all have the same length");

        for (int i = 0; i < scales_; ++i) {
            const int in_ch = i == 0 ? spec.in_channels : spec.filters_down[i - 1];
            down_.push_back(make_block(in_ch, spec.filters_down[i], spec.kernels_down[i], 2, rng));
            skip_.push_back(make_block(in_ch, spec.filters_skip[i], spec.kernels_skip[i], 1, rng));
        }
        for (int i = 0; i < scales_; ++i) {
            const int deeper_ch = (i + 1 == scales_) ? spec.filters_down[scales_ - 1] : spec.filters_up[i + 1];
            up_.push_back(make_block(deeper_ch + spec.filters_skip[i], spec.filters_up[i],
                                     spec.kernels_up[i], 1, rng));
            upsample_.push_back(std::make_unique<BilinearUp2x>());
        }
        head_conv_ = std::make_unique<Conv2d>(spec.filters_up[0], spec.out_channels, 1, 1);
        head_conv_->init_xavier(rng);
        head_act_ = std::make_unique<Sigmoid>();
    }

    // Input H and W must be divisible by 2^scales.
    Tensor forward(const Tensor& z) {
        if (z.h % (1 << scales_) != 0 || z.w % (1 << scales_) != 0)
            throw InputError("UNet: input size must be divisible by 2^num_scales");
        Tensor e = z;
        std::vector<Tensor> skips(static_cast<std::size_t>(scales_));
        for (int i = 0; i < scales_; ++i) {
            skips[i] = run(skip_[i], e);
            e = run(down_[i], e);
        }
        Tensor u = e;
        deeper_ch_.assign(static_cast<std::size_t>(scales_), 0);
        for (int i = scales_ - 1; i >= 0; --i) {
            deeper_ch_[i] = u.c;
            Tensor up = upsample_[i]->forward(u);
            u = run(up_[i], concat(up, skips[i]));
        }
        return head_act_->forward(head_conv_->forward(u));
    }

    // Backpropagates the loss gradient through the whole net, accumulating
    // parameter gradients. Returns nothing: the DIP input is fixed noise.
    void backward(const Tensor& grad_out) {
        Tensor g = head_conv_->backward(head_act_->backward(grad_out));
        std::vector<Tensor> grad_enc(static_cast<std::size_t>(scales_));
        for (int i = 0; i < scales_; ++i) {
            Tensor gcat = run_back(up_[i], g);
            auto [g_up, g_skip] = split(gcat, deeper_ch_[i]);
            grad_enc[i] = run_back(skip_[i], g_skip);
            g = upsample_[i]->backward(g_up);
        }
        // g now holds the gradient at the deepest encoder feature
        for (int i = scales_ - 1; i >= 0; --i) {
            Tensor ge = run_back(down_[i], g);
            g = grad_enc[i] + ge;
        }
    }

    std::vector<Param*> params() {
        std::vector<Param*> ps;
        auto add = [&ps](std::vector<std::vector<std::unique_ptr<Layer>>>& blocks) {
            for (auto& block : blocks)
                for (auto& layer : block)
                    for (Param* p : layer->params()) ps.push_back(p);
        };
        add(down_);
        add(skip_);
        add(up_);
        for (Param* p : head_conv_->params()) ps.push_back(p);
        return ps;
    }

    int scales() const { return scales_; }

  private:
    using Block = std::vector<std::unique_ptr<Layer>>;

    static Block make_block(int in_ch, int out_ch, int k, int stride, Rng& rng) {
        Block b;
        auto conv = std::make_unique<Conv2d>(in_ch, out_ch, k, stride);
        conv->init_xavier(rng);
        b.push_back(std::move(conv));
        b.push_back(std::make_unique<InstanceNorm>(out_ch));
        b.push_back(std::make_unique<LeakyRelu>(0.1f));
        return b;
    }

    static Tensor run(Block& b, const Tensor& x) {
        Tensor y = x;
        for (auto& layer : b) y = layer->forward(y);
        return y;
    }
    static Tensor run_back(Block& b, const Tensor& g) {
        Tensor y = g;
        for (auto it = b.rbegin(); it != b.rend(); ++it) y = (*it)->backward(y);
        return y;
    }

    static Tensor concat(const Tensor& a, const Tensor& b) {
        if (a.h != b.h || a.w != b.w) throw InputError("UNet concat: spatial mismatch");
        Tensor r(a.c + b.c, a.h, a.w);
        std::copy(a.v.begin(), a.v.end(), r.v.begin());
        std::copy(b.v.begin(), b.v.end(), r.v.begin() + static_cast<std::ptrdiff_t>(a.size()));
        return r;
    }

    static std::pair<Tensor, Tensor> split(const Tensor& g, int first_ch) {
        Tensor a(first_ch, g.h, g.w), b(g.c - first_ch, g.h, g.w);
        std::copy(g.v.begin(), g.v.begin() + static_cast<std::ptrdiff_t>(a.size()), a.v.begin());
        std::copy(g.v.begin() + static_cast<std::ptrdiff_t>(a.size()), g.v.end(), b.v.begin());
        return {std::move(a), std::move(b)};
    }

    int scales_;
    std::vector<Block> down_, skip_, up_;
    std::vector<std::unique_ptr<BilinearUp2x>> upsample_;
    std::unique_ptr<Conv2d> head_conv_;
    std::unique_ptr<Sigmoid> head_act_;
    std::vector<int> deeper_ch_;
};

}  // namespace dipdef::nn

#endif
