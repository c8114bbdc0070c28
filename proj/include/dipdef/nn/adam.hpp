#ifndef DIPDEF_NN_ADAM_HPP
#define DIPDEF_NN_ADAM_HPP

#include <cmath>
#include <vector>

#include "dipdef/nn/layers.hpp"

namespace dipdef::nn {

// Adaptive-moment first-order optimizer, fixed learning rate, no decay.
class Adam {
  public:
    explicit Adam(std::vector<Param*> params, float lr, float beta1 = 0.9f, float beta2 = 0.999f,
                  float eps = 1e-8f)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const Param* p : params_) {
            m_.emplace_back(p->size(), 0.0f);
            v_.emplace_back(p->size(), 0.0f);
        }
    }

    void zero_grad() {
        for (Param* p : params_) p->zero_grad();
    }

    void step() {
        ++t_;
        const float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
        const float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            Param& p = *params_[pi];
            std::vector<float>& m = m_[pi];
            std::vector<float>& v = v_[pi];
            for (std::size_t i = 0; i < p.size(); ++i) {
                const float g = p.g[i];
                m[i] = beta1_ * m[i] + (1.0f - beta1_) * g;
                v[i] = beta2_ * v[i] + (1.0f - beta2_) * g * g;
                const float mhat = m[i] / bc1;
                const float vhat = v[i] / bc2;
                p.w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

  private:
    std::vector<Param*> params_;
    std::vector<std::vector<float>> m_, v_;
    float lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace dipdef::nn

#endif
