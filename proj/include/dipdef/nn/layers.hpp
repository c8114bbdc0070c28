#ifndef DIPDEF_NN_LAYERS_HPP
#define DIPDEF_NN_LAYERS_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "dipdef/rng.hpp"
#include "dipdef/tensor.hpp"

namespace dipdef::nn {

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

// One trainable parameter block: values and the accumulated gradient.
struct Param {
    std::vector<float> w, g;
    explicit Param(std::size_t n) : w(n, 0.0f), g(n, 0.0f) {}
    std::size_t size() const { return w.size(); }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0f); }
};

class Layer {
  public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Param*> params() { return {}; }
};

// 2-d convolution with TF-style SAME padding: output is ceil(H/stride) x
// ceil(W/stride), zero padding split floor/ceil between begin/end. Handles
// even kernels (the paper's small/large nets use k=2 and k=4).
class Conv2d final : public Layer {
  public:
    Conv2d(int in_ch, int out_ch, int k, int stride)
        : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride),
          weight_(static_cast<std::size_t>(out_ch) * in_ch * k * k), bias_(out_ch) {}

    void init_xavier(Rng& rng) {
        const float fan_in = static_cast<float>(in_ch_ * k_ * k_);
        const float fan_out = static_cast<float>(out_ch_ * k_ * k_);
        const float a = std::sqrt(6.0f / (fan_in + fan_out));
        for (float& w : weight_.w) w = rng.uniform(-a, a);
        std::fill(bias_.w.begin(), bias_.w.end(), 0.0f);
    }

    Tensor forward(const Tensor& x) override {
        in_shape_ = {x.c, x.h, x.w};
        out_h_ = (x.h + stride_ - 1) / stride_;
        out_w_ = (x.w + stride_ - 1) / stride_;
        const int pad_h = std::max((out_h_ - 1) * stride_ + k_ - x.h, 0);
        const int pad_w = std::max((out_w_ - 1) * stride_ + k_ - x.w, 0);
        pad_top_ = pad_h / 2;
        pad_left_ = pad_w / 2;

        im2col(x);
        Tensor y(out_ch_, out_h_, out_w_);
        ConstMapRM w(weight_.w.data(), out_ch_, static_cast<Eigen::Index>(in_ch_) * k_ * k_);
        ConstMapRM col(col_.data(), static_cast<Eigen::Index>(in_ch_) * k_ * k_,
                       static_cast<Eigen::Index>(out_h_) * out_w_);
        MapRM out(y.data(), out_ch_, static_cast<Eigen::Index>(out_h_) * out_w_);
        out.noalias() = w * col;
        for (int oc = 0; oc < out_ch_; ++oc) out.row(oc).array() += bias_.w[oc];
        return y;
    }

    Tensor backward(const Tensor& gout) override {
        const Eigen::Index cols = static_cast<Eigen::Index>(out_h_) * out_w_;
        const Eigen::Index rows = static_cast<Eigen::Index>(in_ch_) * k_ * k_;
        ConstMapRM go(gout.data(), out_ch_, cols);
        ConstMapRM col(col_.data(), rows, cols);
        MapRM gw(weight_.g.data(), out_ch_, rows);
        gw.noalias() += go * col.transpose();
        // fixed-order scalar sum: vectorized reductions change their
        // accumulation order with buffer alignment, breaking bit determinism
        for (int oc = 0; oc < out_ch_; ++oc) {
            float acc = 0.0f;
            const float* row = gout.data() + static_cast<std::size_t>(oc) * cols;
            for (Eigen::Index i = 0; i < cols; ++i) acc += row[i];
            bias_.g[oc] += acc;
        }

        gcol_.assign(col_.size(), 0.0f);
        MapRM gc(gcol_.data(), rows, cols);
        ConstMapRM w(weight_.w.data(), out_ch_, rows);
        gc.noalias() = w.transpose() * go;
        return col2im();
    }

    std::vector<Param*> params() override { return {&weight_, &bias_}; }

  private:
    void im2col(const Tensor& x) {
        const Eigen::Index cols = static_cast<Eigen::Index>(out_h_) * out_w_;
        col_.assign(static_cast<std::size_t>(in_ch_) * k_ * k_ * cols, 0.0f);
        std::size_t row = 0;
        for (int ic = 0; ic < in_ch_; ++ic)
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx, ++row) {
                    float* dst = col_.data() + row * cols;
                    for (int oy = 0; oy < out_h_; ++oy) {
                        const int iy = oy * stride_ + ky - pad_top_;
                        if (iy < 0 || iy >= x.h) continue;
                        const float* src = &x.v[(static_cast<std::size_t>(ic) * x.h + iy) * x.w];
                        for (int ox = 0; ox < out_w_; ++ox) {
                            const int ix = ox * stride_ + kx - pad_left_;
                            if (ix >= 0 && ix < x.w) dst[oy * out_w_ + ox] = src[ix];
                        }
                    }
                }
    }

    Tensor col2im() const {
        Tensor gx(in_shape_.c, in_shape_.h, in_shape_.w);
        const Eigen::Index cols = static_cast<Eigen::Index>(out_h_) * out_w_;
        std::size_t row = 0;
        for (int ic = 0; ic < in_shape_.c; ++ic)
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx, ++row) {
                    const float* src = gcol_.data() + row * cols;
                    for (int oy = 0; oy < out_h_; ++oy) {
                        const int iy = oy * stride_ + ky - pad_top_;
                        if (iy < 0 || iy >= gx.h) continue;
                        float* dst = &gx.v[(static_cast<std::size_t>(ic) * gx.h + iy) * gx.w];
                        for (int ox = 0; ox < out_w_; ++ox) {
                            const int ix = ox * stride_ + kx - pad_left_;
                            if (ix >= 0 && ix < gx.w) dst[ix] += src[oy * out_w_ + ox];
                        }
                    }
                }
        return gx;
    }

    struct Shape {
        int c, h, w;
    };

    int in_ch_, out_ch_, k_, stride_;
    int out_h_ = 0, out_w_ = 0, pad_top_ = 0, pad_left_ = 0;
    Shape in_shape_{0, 0, 0};
    Param weight_, bias_;
    std::vector<float> col_, gcol_;
};

// Per-channel normalization over the spatial extent with learned scale/shift
// (batch size is always 1 here, so this is batch norm and instance norm at
// once).
class InstanceNorm final : public Layer {
  public:
    explicit InstanceNorm(int channels, float eps = 1e-5f)
        : channels_(channels), eps_(eps), gamma_(channels), beta_(channels) {
        std::fill(gamma_.w.begin(), gamma_.w.end(), 1.0f);
    }

    Tensor forward(const Tensor& x) override {
        xhat_ = Tensor(x.c, x.h, x.w);
        inv_std_.assign(channels_, 0.0f);
        const int n = x.h * x.w;
        Tensor y(x.c, x.h, x.w);
        for (int ch = 0; ch < channels_; ++ch) {
            const float* px = &x.v[static_cast<std::size_t>(ch) * n];
            double sum = 0.0, sq = 0.0;
            for (int i = 0; i < n; ++i) {
                sum += px[i];
                sq += static_cast<double>(px[i]) * px[i];
            }
            const float mu = static_cast<float>(sum / n);
            const float var = static_cast<float>(sq / n) - mu * mu;
            const float inv = 1.0f / std::sqrt(std::max(var, 0.0f) + eps_);
            inv_std_[ch] = inv;
            float* ph = &xhat_.v[static_cast<std::size_t>(ch) * n];
            float* py = &y.v[static_cast<std::size_t>(ch) * n];
            for (int i = 0; i < n; ++i) {
                ph[i] = (px[i] - mu) * inv;
                py[i] = gamma_.w[ch] * ph[i] + beta_.w[ch];
            }
        }
        return y;
    }

    Tensor backward(const Tensor& gout) override {
        const int n = gout.h * gout.w;
        Tensor gx(gout.c, gout.h, gout.w);
        for (int ch = 0; ch < channels_; ++ch) {
            const float* go = &gout.v[static_cast<std::size_t>(ch) * n];
            const float* xh = &xhat_.v[static_cast<std::size_t>(ch) * n];
            double sum_go = 0.0, sum_go_xh = 0.0;
            for (int i = 0; i < n; ++i) {
                sum_go += go[i];
                sum_go_xh += static_cast<double>(go[i]) * xh[i];
            }
            gamma_.g[ch] += static_cast<float>(sum_go_xh);
            beta_.g[ch] += static_cast<float>(sum_go);
            const float mean_go = static_cast<float>(sum_go / n);
            const float mean_go_xh = static_cast<float>(sum_go_xh / n);
            const float scale = gamma_.w[ch] * inv_std_[ch];
            float* px = &gx.v[static_cast<std::size_t>(ch) * n];
            for (int i = 0; i < n; ++i)
                px[i] = scale * (go[i] - mean_go - xh[i] * mean_go_xh);
        }
        return gx;
    }

    std::vector<Param*> params() override { return {&gamma_, &beta_}; }

  private:
    int channels_;
    float eps_;
    Param gamma_, beta_;
    Tensor xhat_;
    std::vector<float> inv_std_;
};

class LeakyRelu final : public Layer {
  public:
    explicit LeakyRelu(float slope = 0.1f) : slope_(slope) {}

    Tensor forward(const Tensor& x) override {
        in_ = x;
        Tensor y = x;
        for (float& v : y.v)
            if (v < 0.0f) v *= slope_;
        return y;
    }
    Tensor backward(const Tensor& gout) override {
        Tensor gx = gout;
        for (std::size_t i = 0; i < gx.size(); ++i)
            if (in_.v[i] < 0.0f) gx.v[i] *= slope_;
        return gx;
    }

  private:
    float slope_;
    Tensor in_;
};

class Relu final : public Layer {
  public:
    Tensor forward(const Tensor& x) override {
        in_ = x;
        Tensor y = x;
        for (float& v : y.v)
            if (v < 0.0f) v = 0.0f;
        return y;
    }
    Tensor backward(const Tensor& gout) override {
        Tensor gx = gout;
        for (std::size_t i = 0; i < gx.size(); ++i)
            if (in_.v[i] <= 0.0f) gx.v[i] = 0.0f;
        return gx;
    }

  private:
    Tensor in_;
};

class Sigmoid final : public Layer {
  public:
    Tensor forward(const Tensor& x) override {
        out_ = x;
        for (float& v : out_.v) v = 1.0f / (1.0f + std::exp(-v));
        return out_;
    }
    Tensor backward(const Tensor& gout) override {
        Tensor gx = gout;
        for (std::size_t i = 0; i < gx.size(); ++i)
            gx.v[i] *= out_.v[i] * (1.0f - out_.v[i]);
        return gx;
    }

  private:
    Tensor out_;
};

// x2 bilinear upsampling (half-pixel centers, align_corners=false); the
// backward pass is the exact transpose of the forward interpolation.
class BilinearUp2x final : public Layer {
  public:
    Tensor forward(const Tensor& x) override {
        in_shape_ = {x.c, x.h, x.w};
        Tensor y(x.c, x.h * 2, x.w * 2);
        apply<false>(const_cast<Tensor&>(x), y);
        return y;
    }
    Tensor backward(const Tensor& gout) override {
        Tensor gx(in_shape_.c, in_shape_.h, in_shape_.w);
        apply<true>(gx, const_cast<Tensor&>(gout));
        return gx;
    }

  private:
    struct Shape {
        int c, h, w;
    };

    // forward: gathers from coarse into fine; transpose: scatters fine into coarse
    template <bool Transpose>
    void apply(Tensor& coarse, Tensor& fine) const {
        const int h = coarse.h, w = coarse.w;
        for (int ch = 0; ch < coarse.c; ++ch)
            for (int y = 0; y < fine.h; ++y) {
                const float sy = (y + 0.5f) / 2.0f - 0.5f;
                const int y0 = static_cast<int>(std::floor(sy));
                const float fy = sy - y0;
                const int ya = std::min(std::max(y0, 0), h - 1);
                const int yb = std::min(std::max(y0 + 1, 0), h - 1);
                for (int x = 0; x < fine.w; ++x) {
                    const float sx = (x + 0.5f) / 2.0f - 0.5f;
                    const int x0 = static_cast<int>(std::floor(sx));
                    const float fx = sx - x0;
                    const int xa = std::min(std::max(x0, 0), w - 1);
                    const int xb = std::min(std::max(x0 + 1, 0), w - 1);
                    const float w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
                    const float w10 = fy * (1 - fx), w11 = fy * fx;
                    if constexpr (Transpose) {
                        const float g = fine.at(ch, y, x);
                        coarse.at(ch, ya, xa) += w00 * g;
                        coarse.at(ch, ya, xb) += w01 * g;
                        coarse.at(ch, yb, xa) += w10 * g;
                        coarse.at(ch, yb, xb) += w11 * g;
                    } else {
                        fine.at(ch, y, x) = w00 * coarse.at(ch, ya, xa) + w01 * coarse.at(ch, ya, xb) +
                                            w10 * coarse.at(ch, yb, xa) + w11 * coarse.at(ch, yb, xb);
                    }
                }
            }
    }

    Shape in_shape_{0, 0, 0};
};

class MaxPool2x final : public Layer {
  public:
    Tensor forward(const Tensor& x) override {
        in_shape_ = {x.c, x.h, x.w};
        Tensor y(x.c, x.h / 2, x.w / 2);
        argmax_.assign(y.size(), 0);
        std::size_t o = 0;
        for (int ch = 0; ch < x.c; ++ch)
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx, ++o) {
                    float best = -1e30f;
                    std::size_t best_idx = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::size_t idx =
                                (static_cast<std::size_t>(ch) * x.h + yy * 2 + dy) * x.w + xx * 2 + dx;
                            if (x.v[idx] > best) {
                                best = x.v[idx];
                                best_idx = idx;
                            }
                        }
                    y.v[o] = best;
                    argmax_[o] = best_idx;
                }
        return y;
    }
    Tensor backward(const Tensor& gout) override {
        Tensor gx(in_shape_.c, in_shape_.h, in_shape_.w);
        for (std::size_t o = 0; o < gout.size(); ++o) gx.v[argmax_[o]] += gout.v[o];
        return gx;
    }

  private:
    struct Shape {
        int c, h, w;
    };
    Shape in_shape_{0, 0, 0};
    std::vector<std::size_t> argmax_;
};

// Fully connected layer; flattens whatever shape it is given.
class Linear final : public Layer {
  public:
    Linear(int in_dim, int out_dim)
        : in_dim_(in_dim), out_dim_(out_dim),
          weight_(static_cast<std::size_t>(out_dim) * in_dim), bias_(out_dim) {}

    void init_xavier(Rng& rng) {
        const float a = std::sqrt(6.0f / static_cast<float>(in_dim_ + out_dim_));
        for (float& w : weight_.w) w = rng.uniform(-a, a);
        std::fill(bias_.w.begin(), bias_.w.end(), 0.0f);
    }

    // Plain loops rather than matrix-vector products: the dimensions are
    // small and vectorized reductions would make the result depend on buffer
    // alignment, which must not happen (see Conv2d::backward).
    Tensor forward(const Tensor& x) override {
        in_ = x;
        Tensor y(out_dim_, 1, 1);
        for (int o = 0; o < out_dim_; ++o) {
            float acc = bias_.w[static_cast<std::size_t>(o)];
            const float* wr = weight_.w.data() + static_cast<std::size_t>(o) * in_dim_;
            for (int i = 0; i < in_dim_; ++i) acc += wr[i] * x.v[static_cast<std::size_t>(i)];
            y.v[static_cast<std::size_t>(o)] = acc;
        }
        return y;
    }

    Tensor backward(const Tensor& gout) override {
        Tensor gx(in_.c, in_.h, in_.w);
        for (int o = 0; o < out_dim_; ++o) {
            const float g = gout.v[static_cast<std::size_t>(o)];
            bias_.g[static_cast<std::size_t>(o)] += g;
            const float* wr = weight_.w.data() + static_cast<std::size_t>(o) * in_dim_;
            float* gwr = weight_.g.data() + static_cast<std::size_t>(o) * in_dim_;
            for (int i = 0; i < in_dim_; ++i) {
                gwr[i] += g * in_.v[static_cast<std::size_t>(i)];
                gx.v[static_cast<std::size_t>(i)] += g * wr[i];
            }
        }
        return gx;
    }

    std::vector<Param*> params() override { return {&weight_, &bias_}; }

  private:
    int in_dim_, out_dim_;
    Param weight_, bias_;
    Tensor in_;
};

inline std::vector<float> softmax(const std::vector<float>& logits) {
    std::vector<float> p(logits.size());
    float mx = logits[0];
    for (float v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (float& v : p) v = static_cast<float>(v / sum);
    return p;
}

// Cross-entropy of softmax(logits) against a hard label; returns loss and
// fills grad with dL/dlogits = softmax - onehot.
inline float softmax_cross_entropy(const std::vector<float>& logits, int label,
                                   std::vector<float>& grad) {
    const std::vector<float> p = softmax(logits);
    grad = p;
    grad[static_cast<std::size_t>(label)] -= 1.0f;
    return -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-12f));
}

}  // namespace dipdef::nn

#endif
