#include "lulc/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

namespace lulc::ad {

namespace {

std::size_t normalize_axis(int axis, std::size_t rank) {
    const int r = static_cast<int>(rank);
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
        throw ShapeError("axis " + std::to_string(axis) + " invalid for rank " + std::to_string(rank));
    }
    return static_cast<std::size_t>(a);
}

// Size of the trailing block of `a` that `b` broadcasts over.
std::size_t broadcast_inner(const Shape& a, const Shape& b, const char* op) {
    if (a == b) return numel(a);
    if (b.size() <= a.size() && std::equal(b.begin(), b.end(), a.end() - static_cast<long>(b.size()))) {
        return numel(b);
    }
    throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(b) + " onto " + to_string(a));
}

struct AxisSplit {
    std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
    AxisSplit r;
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    r.extent = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

template <typename T>
bool wants_grad(const Node<T>& n, std::size_t i) {
    return n.inputs[i]->requires_grad;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    const std::size_t inner = broadcast_inner(a.shape(), b.shape(), "add");
    auto av = a.values();
    auto bv = b.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i % inner];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, "add", [inner](Node<T>& self) {
        if (wants_grad(self, 0)) {
            auto& ga = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
        }
        if (wants_grad(self, 1)) {
            auto& gb = self.inputs[1]->grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i % inner] += self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    const std::size_t inner = broadcast_inner(a.shape(), b.shape(), "sub");
    auto av = a.values();
    auto bv = b.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i % inner];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, "sub", [inner](Node<T>& self) {
        if (wants_grad(self, 0)) {
            auto& ga = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
        }
        if (wants_grad(self, 1)) {
            auto& gb = self.inputs[1]->grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i % inner] -= self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    const std::size_t inner = broadcast_inner(a.shape(), b.shape(), "mul");
    auto av = a.values();
    auto bv = b.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i % inner];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, "mul", [inner](Node<T>& self) {
        const auto& x = self.inputs[0]->value;
        const auto& y = self.inputs[1]->value;
        if (wants_grad(self, 0)) {
            auto& ga = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * y[i % inner];
        }
        if (wants_grad(self, 1)) {
            auto& gb = self.inputs[1]->grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i % inner] += self.grad[i] * x[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    auto av = a.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
    return Tensor<T>::make_result(a.shape(), std::move(out), {a}, "scale", [factor](Node<T>& self) {
        auto& ga = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * factor;
    });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    auto mismatch = [&] {
        return ShapeError("matmul shape mismatch: " + to_string(as) + " x " + to_string(bs));
    };
    if (as.size() < 2 || bs.size() < 2) throw mismatch();
    const std::size_t m = as[as.size() - 2];
    const std::size_t k = as.back();
    const std::size_t kb = bs[bs.size() - 2];
    const std::size_t n = bs.back();
    if (k != kb) throw mismatch();
    const bool shared = bs.size() == 2;
    if (!shared &&
        (as.size() != bs.size() || !std::equal(as.begin(), as.end() - 2, bs.begin()))) {
        throw mismatch();
    }
    const std::size_t batch = numel(as) / (m * k);

    Shape out_shape(as.begin(), as.end() - 1);
    out_shape.push_back(n);
    auto av = a.values();
    auto bv = b.values();
    std::vector<T> out(batch * m * n, T(0));
    for (std::size_t s = 0; s < batch; ++s) {
        const T* A = av.data() + s * m * k;
        const T* B = bv.data() + (shared ? 0 : s * k * n);
        T* C = out.data() + s * m * n;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const T aip = A[i * k + p];
                const T* brow = B + p * n;
                T* crow = C + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
        }
    }
    return Tensor<T>::make_result(
        std::move(out_shape), std::move(out), {a, b}, "matmul",
        [batch, m, k, n, shared](Node<T>& self) {
            const auto& A = self.inputs[0]->value;
            const auto& B = self.inputs[1]->value;
            const auto& G = self.grad;
            const T fault = active_fault() == Fault::matmul_backward ? T(1.5) : T(1);
            if (wants_grad(self, 0)) {
                auto& gA = self.inputs[0]->grad_buffer();
                for (std::size_t s = 0; s < batch; ++s) {
                    const T* g = G.data() + s * m * n;
                    const T* Bs = B.data() + (shared ? 0 : s * k * n);
                    T* ga = gA.data() + s * m * k;
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t p = 0; p < k; ++p) {
                            T acc = 0;
                            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * Bs[p * n + j];
                            ga[i * k + p] += fault * acc;
                        }
                    }
                }
            }
            if (wants_grad(self, 1)) {
                auto& gB = self.inputs[1]->grad_buffer();
                for (std::size_t s = 0; s < batch; ++s) {
                    const T* g = G.data() + s * m * n;
                    const T* As = A.data() + s * m * k;
                    T* gb = gB.data() + (shared ? 0 : s * k * n);
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t p = 0; p < k; ++p) {
                            const T aip = As[i * k + p];
                            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                        }
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (weight.rank() != 2 || x.dim(-1) != weight.dim(0)) {
        throw ShapeError("linear: input " + to_string(x.shape()) + " incompatible with weight " +
                         to_string(weight.shape()));
    }
    Tensor<T> y = x.rank() == 1 ? reshape(matmul(reshape(x, {1, x.dim(0)}), weight), {weight.dim(1)})
                                : matmul(x, weight);
    return bias.defined() ? add(y, bias) : y;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a, int axis0, int axis1) {
    const Shape& in_shape = a.shape();
    const std::size_t r = in_shape.size();
    const std::size_t d0 = normalize_axis(axis0, r);
    const std::size_t d1 = normalize_axis(axis1, r);
    if (d0 == d1) return a;

    Shape out_shape = in_shape;
    std::swap(out_shape[d0], out_shape[d1]);
    std::vector<std::size_t> in_strides(r, 1);
    for (std::size_t i = r - 1; i > 0; --i) in_strides[i - 1] = in_strides[i] * in_shape[i];
    std::vector<std::size_t> perm_strides = in_strides;
    std::swap(perm_strides[d0], perm_strides[d1]);

    const std::size_t total = numel(in_shape);
    auto map = std::make_shared<std::vector<std::size_t>>(total);
    std::vector<std::size_t> idx(r, 0);
    for (std::size_t o = 0; o < total; ++o) {
        std::size_t src = 0;
        for (std::size_t i = 0; i < r; ++i) src += idx[i] * perm_strides[i];
        (*map)[o] = src;
        for (std::size_t i = r; i-- > 0;) {
            if (++idx[i] < out_shape[i]) break;
            idx[i] = 0;
        }
    }
    auto av = a.values();
    std::vector<T> out(total);
    for (std::size_t o = 0; o < total; ++o) out[o] = av[(*map)[o]];
    return Tensor<T>::make_result(std::move(out_shape), std::move(out), {a}, "transpose",
                                  [map](Node<T>& self) {
                                      auto& ga = self.inputs[0]->grad_buffer();
                                      for (std::size_t o = 0; o < map->size(); ++o) {
                                          ga[(*map)[o]] += self.grad[o];
                                      }
                                  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (numel(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
    }
    std::vector<T> out(a.values().begin(), a.values().end());
    return Tensor<T>::make_result(std::move(shape), std::move(out), {a}, "reshape", [](Node<T>& self) {
        auto& ga = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = parts.front().shape();
    const std::size_t ax = normalize_axis(axis, first.size());
    Shape out_shape = first;
    out_shape[ax] = 0;
    std::vector<std::size_t> extents;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == ax) || s[i] == first[i];
        if (!ok) {
            throw ShapeError("concat: shape " + to_string(s) + " incompatible with " + to_string(first) +
                             " along axis " + std::to_string(axis));
        }
        extents.push_back(s[ax]);
        out_shape[ax] += s[ax];
    }
    const AxisSplit split = split_at(out_shape, ax);
    std::vector<T> out(numel(out_shape));
    std::size_t offset = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        auto pv = parts[pi].values();
        const std::size_t block = extents[pi] * split.inner;
        for (std::size_t o = 0; o < split.outer; ++o) {
            std::copy_n(pv.data() + o * block, block,
                        out.data() + o * split.extent * split.inner + offset * split.inner);
        }
        offset += extents[pi];
    }
    return Tensor<T>::make_result(
        std::move(out_shape), std::move(out), parts, "concat", [split, extents](Node<T>& self) {
            std::size_t off = 0;
            for (std::size_t pi = 0; pi < extents.size(); ++pi) {
                const std::size_t block = extents[pi] * split.inner;
                if (wants_grad(self, pi)) {
                    auto& gp = self.inputs[pi]->grad_buffer();
                    for (std::size_t o = 0; o < split.outer; ++o) {
                        const T* src = self.grad.data() + o * split.extent * split.inner + off * split.inner;
                        T* dst = gp.data() + o * block;
                        for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                    }
                }
                off += extents[pi];
            }
        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, std::size_t start, std::size_t length) {
    const std::size_t ax = normalize_axis(axis, a.rank());
    const AxisSplit split = split_at(a.shape(), ax);
    if (length == 0 || start + length > split.extent) {
        throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of range for axis of size " + std::to_string(split.extent));
    }
    Shape out_shape = a.shape();
    out_shape[ax] = length;
    auto av = a.values();
    std::vector<T> out(split.outer * length * split.inner);
    for (std::size_t o = 0; o < split.outer; ++o) {
        std::copy_n(av.data() + (o * split.extent + start) * split.inner, length * split.inner,
                    out.data() + o * length * split.inner);
    }
    return Tensor<T>::make_result(std::move(out_shape), std::move(out), {a}, "slice",
                                  [split, start, length](Node<T>& self) {
                                      auto& ga = self.inputs[0]->grad_buffer();
                                      const std::size_t block = length * split.inner;
                                      for (std::size_t o = 0; o < split.outer; ++o) {
                                          const T* src = self.grad.data() + o * block;
                                          T* dst = ga.data() + (o * split.extent + start) * split.inner;
                                          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                                      }
                                  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    T acc = 0;
    for (T v : a.values()) acc += v;
    return Tensor<T>::make_result({1}, {acc}, {a}, "sum", [](Node<T>& self) {
        auto& ga = self.inputs[0]->grad_buffer();
        for (auto& g : ga) g += self.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a, int axis) {
    const std::size_t ax = normalize_axis(axis, a.rank());
    const AxisSplit split = split_at(a.shape(), ax);
    Shape out_shape;
    for (std::size_t i = 0; i < a.rank(); ++i) {
        if (i != ax) out_shape.push_back(a.shape()[i]);
    }
    if (out_shape.empty()) out_shape.push_back(1);
    auto av = a.values();
    const T inv = T(1) / static_cast<T>(split.extent);
    std::vector<T> out(split.outer * split.inner, T(0));
    for (std::size_t o = 0; o < split.outer; ++o) {
        for (std::size_t e = 0; e < split.extent; ++e) {
            for (std::size_t i = 0; i < split.inner; ++i) {
                out[o * split.inner + i] += av[(o * split.extent + e) * split.inner + i];
            }
        }
    }
    for (auto& v : out) v *= inv;
    return Tensor<T>::make_result(std::move(out_shape), std::move(out), {a}, "mean_axis",
                                  [split, inv](Node<T>& self) {
                                      auto& ga = self.inputs[0]->grad_buffer();
                                      for (std::size_t o = 0; o < split.outer; ++o) {
                                          for (std::size_t e = 0; e < split.extent; ++e) {
                                              for (std::size_t i = 0; i < split.inner; ++i) {
                                                  ga[(o * split.extent + e) * split.inner + i] +=
                                                      inv * self.grad[o * split.inner + i];
                                              }
                                          }
                                      }
                                  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, int axis) {
    const std::size_t ax = normalize_axis(axis, a.rank());
    const AxisSplit split = split_at(a.shape(), ax);
    auto av = a.values();
    std::vector<T> out(av.size());
    for (std::size_t o = 0; o < split.outer; ++o) {
        for (std::size_t i = 0; i < split.inner; ++i) {
            const std::size_t base = o * split.extent * split.inner + i;
            T mx = av[base];
            for (std::size_t e = 1; e < split.extent; ++e) mx = std::max(mx, av[base + e * split.inner]);
            T total = 0;
            for (std::size_t e = 0; e < split.extent; ++e) {
                const T ex = std::exp(av[base + e * split.inner] - mx);
                out[base + e * split.inner] = ex;
                total += ex;
            }
            for (std::size_t e = 0; e < split.extent; ++e) out[base + e * split.inner] /= total;
        }
    }
    return Tensor<T>::make_result(a.shape(), std::move(out), {a}, "softmax", [split](Node<T>& self) {
        const auto& y = self.value;
        const auto& g = self.grad;
        auto& ga = self.inputs[0]->grad_buffer();
        const bool broken = active_fault() == Fault::softmax_backward;
        for (std::size_t o = 0; o < split.outer; ++o) {
            for (std::size_t i = 0; i < split.inner; ++i) {
                const std::size_t base = o * split.extent * split.inner + i;
                T dot = 0;
                for (std::size_t e = 0; e < split.extent; ++e) {
                    const std::size_t at = base + e * split.inner;
                    dot += g[at] * y[at];
                }
                if (broken) dot = 0;
                for (std::size_t e = 0; e < split.extent; ++e) {
                    const std::size_t at = base + e * split.inner;
                    ga[at] += y[at] * (g[at] - dot);
                }
            }
        }
    });
}

template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
    const std::size_t d = x.dim(-1);
    if (gamma.numel() != d || beta.numel() != d || gamma.rank() != 1 || beta.rank() != 1) {
        throw ShapeError("layernorm: gamma " + to_string(gamma.shape()) + " / beta " +
                         to_string(beta.shape()) + " do not match feature size of " + to_string(x.shape()));
    }
    if (!(eps > T(0))) throw ShapeError("layernorm: eps must be positive");
    const std::size_t rows = x.numel() / d;
    auto xv = x.values();
    auto gv = gamma.values();
    auto bv = beta.values();
    auto xhat = std::make_shared<std::vector<T>>(xv.size());
    auto rstd = std::make_shared<std::vector<T>>(rows);
    std::vector<T> out(xv.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = xv.data() + r * d;
        T mu = 0;
        for (std::size_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<T>(d);
        T var = 0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<T>(d);
        const T inv = T(1) / std::sqrt(var + eps);
        (*rstd)[r] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            const T h = (row[j] - mu) * inv;
            (*xhat)[r * d + j] = h;
            out[r * d + j] = h * gv[j] + bv[j];
        }
    }
    return Tensor<T>::make_result(
        x.shape(), std::move(out), {x, gamma, beta}, "layernorm", [d, rows, xhat, rstd](Node<T>& self) {
            const auto& g = self.grad;
            const auto& gam = self.inputs[1]->value;
            if (wants_grad(self, 0)) {
                auto& gx = self.inputs[0]->grad_buffer();
                const bool broken = active_fault() == Fault::layernorm_backward;
                std::vector<T> gh(d);
                for (std::size_t r = 0; r < rows; ++r) {
                    T mean_gh = 0, mean_ghx = 0;
                    for (std::size_t j = 0; j < d; ++j) {
                        gh[j] = g[r * d + j] * gam[j];
                        mean_gh += gh[j];
                        mean_ghx += gh[j] * (*xhat)[r * d + j];
                    }
                    mean_gh /= static_cast<T>(d);
                    mean_ghx /= static_cast<T>(d);
                    if (broken) mean_ghx = 0;
                    for (std::size_t j = 0; j < d; ++j) {
                        gx[r * d + j] += (*rstd)[r] * (gh[j] - mean_gh - (*xhat)[r * d + j] * mean_ghx);
                    }
                }
            }
            if (wants_grad(self, 1)) {
                auto& gg = self.inputs[1]->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * (*xhat)[i];
            }
            if (wants_grad(self, 2)) {
                auto& gb = self.inputs[2]->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
            }
        });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
    auto xv = x.values();
    std::vector<T> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * inv_sqrt2));
    return Tensor<T>::make_result(x.shape(), std::move(out), {x}, "gelu", [inv_sqrt2](Node<T>& self) {
        const auto& xs = self.inputs[0]->value;
        auto& gx = self.inputs[0]->grad_buffer();
        const T inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<T>;
        const bool broken = active_fault() == Fault::gelu_backward;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const T v = xs[i];
            const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
            const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
            const T dydx = broken ? cdf : cdf + v * pdf;
            gx[i] += self.grad[i] * dydx;
        }
    });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Mode mode, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must lie in [0, 1)");
    if (mode == Mode::eval || p == 0.0) return x;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    auto mask = std::make_shared<std::vector<T>>(x.numel());
    for (auto& m : *mask) m = rng.bernoulli(p) ? T(0) : keep_scale;
    auto xv = x.values();
    std::vector<T> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * (*mask)[i];
    return Tensor<T>::make_result(x.shape(), std::move(out), {x}, "dropout", [mask](Node<T>& self) {
        auto& gx = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * (*mask)[i];
    });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<std::size_t>& indices) {
    if (table.rank() != 2) throw ShapeError("gather_rows: table must be 2-D, got " + to_string(table.shape()));
    if (indices.empty()) throw ShapeError("gather_rows: empty index list");
    const std::size_t rows = table.dim(0);
    const std::size_t d = table.dim(1);
    auto tv = table.values();
    std::vector<T> out(indices.size() * d);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= rows) {
            throw ShapeError("gather_rows: index " + std::to_string(indices[r]) + " out of range for " +
                             std::to_string(rows) + " rows");
        }
        std::copy_n(tv.data() + indices[r] * d, d, out.data() + r * d);
    }
    return Tensor<T>::make_result({indices.size(), d}, std::move(out), {table}, "gather_rows",
                                  [indices, d](Node<T>& self) {
                                      auto& gt = self.inputs[0]->grad_buffer();
                                      for (std::size_t r = 0; r < indices.size(); ++r) {
                                          for (std::size_t j = 0; j < d; ++j) {
                                              gt[indices[r] * d + j] += self.grad[r * d + j];
                                          }
                                      }
                                  });
}

#define LULC_INSTANTIATE_OPS(T)                                                                    \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
    template Tensor<T> scale(const Tensor<T>&, T);                                                 \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
    template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
    template Tensor<T> transpose(const Tensor<T>&, int, int);                                      \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                           \
    template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                 \
    template Tensor<T> slice(const Tensor<T>&, int, std::size_t, std::size_t);                     \
    template Tensor<T> sum(const Tensor<T>&);                                                      \
    template Tensor<T> mean(const Tensor<T>&);                                                     \
    template Tensor<T> mean(const Tensor<T>&, int);                                                \
    template Tensor<T> softmax(const Tensor<T>&, int);                                             \
    template Tensor<T> layernorm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);         \
    template Tensor<T> gelu(const Tensor<T>&);                                                     \
    template Tensor<T> dropout(const Tensor<T>&, double, Mode, Rng&);                              \
    template Tensor<T> gather_rows(const Tensor<T>&, const std::vector<std::size_t>&);

LULC_INSTANTIATE_OPS(float)
LULC_INSTANTIATE_OPS(double)

#undef LULC_INSTANTIATE_OPS

}  // namespace lulc::ad
