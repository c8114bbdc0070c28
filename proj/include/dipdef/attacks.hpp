#ifndef DIPDEF_ATTACKS_HPP
#define DIPDEF_ATTACKS_HPP

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dipdef/classifier.hpp"
#include "dipdef/config_file.hpp"
#include "dipdef/errors.hpp"
#include "dipdef/rng.hpp"
#include "dipdef/tensor.hpp"

namespace dipdef {

enum class AttackMethod { FGSM, PGD, BIM, MIFGSM, BPDA_PGD };

inline AttackMethod attack_method_from_string(const std::string& s) {
    if (s == "fgsm" || s == "FGSM") return AttackMethod::FGSM;
    if (s == "pgd" || s == "PGD") return AttackMethod::PGD;
    if (s == "bim" || s == "BIM") return AttackMethod::BIM;
    if (s == "mifgsm" || s == "MIFGSM") return AttackMethod::MIFGSM;
    if (s == "bpda" || s == "bpda-pgd" || s == "BPDA_PGD") return AttackMethod::BPDA_PGD;
    throw ConfigError("unknown attack method: " + s);
}

inline std::string to_string(AttackMethod m) {
    switch (m) {
        case AttackMethod::FGSM: return "fgsm";
        case AttackMethod::PGD: return "pgd";
        case AttackMethod::BIM: return "bim";
        case AttackMethod::MIFGSM: return "mifgsm";
        case AttackMethod::BPDA_PGD: return "bpda";
    }
    return "?";
}

// epsilon and step_size are in [0,1] pixel units; configuration files give
// epsilon on the 0-255 scale (matching the usual 2/4/8 budgets) and it is
// divided by 255 at this boundary.
struct AttackConfig {
    AttackMethod method = AttackMethod::PGD;
    float epsilon = 8.0f / 255.0f;
    int steps = 20;
    float step_size = 0.0f;  // 0 -> default 2.5*epsilon/steps
    bool random_start = true;
    float momentum_decay = 1.0f;  // MIFGSM only
    std::uint64_t rng_seed = 0;

    float effective_step() const { return step_size > 0.0f ? step_size : 2.5f * epsilon / steps; }

    void validate() const {
        if (epsilon < 0.0f) throw ConfigError("AttackConfig: epsilon must be >= 0");
        if (steps < 1) throw ConfigError("AttackConfig: steps must be >= 1");
        if (step_size < 0.0f) throw ConfigError("AttackConfig: step_size must be >= 0");
        if (momentum_decay < 0.0f) throw ConfigError("AttackConfig: momentum_decay must be >= 0");
    }

    static AttackConfig from_config(const KeyValueConfig& kv, const std::string& prefix) {
        AttackConfig c;
        c.method = attack_method_from_string(kv.get(prefix + "method", "pgd"));
        c.epsilon = static_cast<float>(kv.get_real(prefix + "epsilon", 8.0)) / 255.0f;
        c.steps = static_cast<int>(kv.get_int(prefix + "steps", c.steps));
        c.step_size = static_cast<float>(kv.get_real(prefix + "step_size", 0.0)) / 255.0f;
        c.random_start = kv.get_bool(prefix + "random_start", c.random_start);
        c.momentum_decay = static_cast<float>(kv.get_real(prefix + "momentum_decay", c.momentum_decay));
        c.rng_seed = static_cast<std::uint64_t>(kv.get_int(prefix + "rng_seed", 0));
        c.validate();
        return c;
    }
};

namespace detail {

inline void require_gradient(ClassifierAdapter& adapter) {
    if (!adapter.differentiable())
        throw CapabilityError("attack requires a differentiable classifier adapter");
}

// Project onto the l-inf epsilon ball around origin, then onto [0,1].
inline void project(Tensor& x, const Tensor& origin, float epsilon) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const float lo = std::max(origin.v[i] - epsilon, 0.0f);
        const float hi = std::min(origin.v[i] + epsilon, 1.0f);
        x.v[i] = std::min(hi, std::max(lo, x.v[i]));
    }
}

inline void step_sign(Tensor& x, const Tensor& grad, float step) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (grad.v[i] > 0.0f) x.v[i] += step;
        else if (grad.v[i] < 0.0f) x.v[i] -= step;
    }
}

}  // namespace detail

// Single signed-gradient step of size epsilon.
inline Tensor fgsm(ClassifierAdapter& adapter, const Tensor& x, int label, float epsilon) {
    detail::require_gradient(adapter);
    Tensor adv = x;
    const Tensor grad = adapter.loss_input_gradient(x, label);
    detail::step_sign(adv, grad, epsilon);
    return adv.clip(0.0f, 1.0f);
}

// Iterative signed-gradient ascent projected onto the epsilon ball and [0,1]
// after every step; optional uniform random start inside the ball.
inline Tensor pgd(ClassifierAdapter& adapter, const Tensor& x, int label, float epsilon, int steps,
                  float step_size, bool random_start, std::uint64_t seed = 0) {
    detail::require_gradient(adapter);
    Tensor adv = x;
    if (random_start) {
        Rng rng(derive_seed(seed, 0x9d9u));
        for (std::size_t i = 0; i < adv.size(); ++i) adv.v[i] += rng.uniform(-epsilon, epsilon);
        detail::project(adv, x, epsilon);
    }
    for (int s = 0; s < steps; ++s) {
        const Tensor grad = adapter.loss_input_gradient(adv, label);
        detail::step_sign(adv, grad, step_size);
        detail::project(adv, x, epsilon);
    }
    return adv;
}

inline Tensor bim(ClassifierAdapter& adapter, const Tensor& x, int label, float epsilon, int steps,
                  float step_size) {
    return pgd(adapter, x, label, epsilon, steps, step_size, /*random_start=*/false);
}

// Momentum attack: g <- mu*g + grad/||grad||_1, step by sign(g).
inline Tensor mifgsm(ClassifierAdapter& adapter, const Tensor& x, int label, float epsilon, int steps,
                     float step_size, float momentum_decay) {
    detail::require_gradient(adapter);
    Tensor adv = x;
    Tensor g(x.c, x.h, x.w);
    for (int s = 0; s < steps; ++s) {
        Tensor grad = adapter.loss_input_gradient(adv, label);
        double l1 = 0.0;
        for (float v : grad.v) l1 += std::abs(v);
        const float inv = l1 > 0.0 ? static_cast<float>(1.0 / l1) : 0.0f;
        for (std::size_t i = 0; i < g.size(); ++i)
            g.v[i] = momentum_decay * g.v[i] + inv * grad.v[i];
        detail::step_sign(adv, g, step_size);
        detail::project(adv, x, epsilon);
    }
    return adv;
}

// PGD through a defended model: the forward pass runs the full defense, the
// backward pass substitutes the defense with the identity, so the gradient is
// taken at z = defense(x_i).
inline Tensor bpda_attack(ClassifierAdapter& adapter, const std::function<Tensor(const Tensor&)>& defense,
                          const Tensor& x, int label, const AttackConfig& cfg) {
    detail::require_gradient(adapter);
    cfg.validate();
    Tensor adv = x;
    if (cfg.random_start) {
        Rng rng(derive_seed(cfg.rng_seed, 0x9d9u));
        for (std::size_t i = 0; i < adv.size(); ++i) adv.v[i] += rng.uniform(-cfg.epsilon, cfg.epsilon);
        detail::project(adv, x, cfg.epsilon);
    }
    const float step = cfg.effective_step();
    for (int s = 0; s < cfg.steps; ++s) {
        const Tensor z = defense(adv);
        const Tensor grad = adapter.loss_input_gradient(z, label);
        detail::step_sign(adv, grad, step);
        detail::project(adv, x, cfg.epsilon);
    }
    return adv;
}

// Dispatch on AttackConfig (BPDA excluded: it needs the defense callable).
inline Tensor run_attack(ClassifierAdapter& adapter, const Tensor& x, int label, const AttackConfig& cfg) {
    cfg.validate();
    switch (cfg.method) {
        case AttackMethod::FGSM: return fgsm(adapter, x, label, cfg.epsilon);
        case AttackMethod::PGD:
            return pgd(adapter, x, label, cfg.epsilon, cfg.steps, cfg.effective_step(),
                       cfg.random_start, cfg.rng_seed);
        case AttackMethod::BIM:
            return bim(adapter, x, label, cfg.epsilon, cfg.steps, cfg.effective_step());
        case AttackMethod::MIFGSM:
            return mifgsm(adapter, x, label, cfg.epsilon, cfg.steps, cfg.effective_step(),
                          cfg.momentum_decay);
        case AttackMethod::BPDA_PGD:
            throw CapabilityError("BPDA needs a defense callable; use bpda_attack()");
    }
    throw ConfigError("run_attack: bad method");
}

// A set of adversarial examples with their originals and provenance.
struct AdversarialBatch {
    std::vector<Tensor> originals, adversarials;
    std::vector<int> true_labels;
    AttackConfig attack;

    void check_invariants(float slack = 1e-6f) const {
        for (std::size_t i = 0; i < adversarials.size(); ++i) {
            if (linf_distance(adversarials[i], originals[i]) > attack.epsilon + slack)
                throw InputError("AdversarialBatch: l-inf budget violated");
            for (float v : adversarials[i].v)
                if (v < 0.0f || v > 1.0f) throw InputError("AdversarialBatch: pixel out of range");
        }
    }
};

}  // namespace dipdef

#endif
