#ifndef DIPDEF_TENSOR_HPP
#define DIPDEF_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dipdef/errors.hpp"

namespace dipdef {

// Dense C x H x W float tensor, row-major (channel, then row, then column).
// The universal image currency of the toolkit: pixel intensities live in
// [0, 1]; the same type carries feature maps and gradients inside the nets.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, float fill = 0.0f)
        : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, fill) {}

    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    float& at(int ci, int hi, int wi) { return v[(static_cast<std::size_t>(ci) * h + hi) * w + wi]; }
    float at(int ci, int hi, int wi) const { return v[(static_cast<std::size_t>(ci) * h + hi) * w + wi]; }

    float* data() { return v.data(); }
    const float* data() const { return v.data(); }

    void fill(float x) { std::fill(v.begin(), v.end(), x); }

    Tensor& clip(float lo, float hi) {
        for (float& x : v) x = std::min(hi, std::max(lo, x));
        return *this;
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) throw InputError(std::string(what) + ": tensor shape mismatch");
}

inline Tensor operator+(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "operator+");
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.v[i] += b.v[i];
    return r;
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "operator-");
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.v[i] -= b.v[i];
    return r;
}

inline Tensor operator*(float s, const Tensor& a) {
    Tensor r = a;
    for (float& x : r.v) x *= s;
    return r;
}

inline float mse(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.v[i]) - b.v[i];
        acc += d * d;
    }
    return static_cast<float>(acc / static_cast<double>(a.size()));
}

inline float linf_distance(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "linf_distance");
    float m = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

inline float l2_norm(const Tensor& a) {
    double acc = 0.0;
    for (float x : a.v) acc += static_cast<double>(x) * x;
    return static_cast<float>(std::sqrt(acc));
}

inline bool all_finite(const Tensor& a) {
    for (float x : a.v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace dipdef

#endif
