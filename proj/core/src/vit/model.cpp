#include "lulc/vit/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace lulc::vit {

using ad::Shape;

template <typename T>
Tensor<T> patchify(const Tensor<T>& images, std::size_t patch_size) {
    const bool batched = images.rank() == 4;
    if (!batched && images.rank() != 3) {
        throw ShapeError("patchify expects [C,H,W] or [B,C,H,W], got " + ad::to_string(images.shape()));
    }
    const std::size_t b = batched ? images.dim(0) : 1;
    const std::size_t c = images.dim(-3);
    const std::size_t h = images.dim(-2);
    const std::size_t w = images.dim(-1);
    if (patch_size == 0 || h != w || h % patch_size != 0) {
        throw ShapeError("patchify: image " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not a square multiple of patch size " + std::to_string(patch_size));
    }
    const std::size_t side = h / patch_size;
    const std::size_t n = side * side;
    const std::size_t row_len = c * patch_size * patch_size;

    auto map = std::make_shared<std::vector<std::size_t>>(b * n * row_len);
    std::size_t o = 0;
    for (std::size_t bi = 0; bi < b; ++bi) {
        for (std::size_t py = 0; py < side; ++py) {
            for (std::size_t px = 0; px < side; ++px) {
                for (std::size_t ci = 0; ci < c; ++ci) {
                    for (std::size_t y = 0; y < patch_size; ++y) {
                        for (std::size_t x = 0; x < patch_size; ++x) {
                            const std::size_t row = py * patch_size + y;
                            const std::size_t col = px * patch_size + x;
                            (*map)[o++] = ((bi * c + ci) * h + row) * w + col;
                        }
                    }
                }
            }
        }
    }
    auto in = images.values();
    std::vector<T> out(map->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[(*map)[i]];
    Shape shape = batched ? Shape{b, n, row_len} : Shape{n, row_len};
    return Tensor<T>::make_result(std::move(shape), std::move(out), {images}, "patchify",
                                  [map](ad::Node<T>& self) {
                                      auto& g = self.inputs[0]->grad_buffer();
                                      for (std::size_t i = 0; i < map->size(); ++i) g[(*map)[i]] += self.grad[i];
                                  });
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, AttentionTrace<T>* trace) {
    if (q.rank() != 4 || q.shape() != k.shape() || q.shape() != v.shape()) {
        throw ShapeError("attention: q " + ad::to_string(q.shape()) + ", k " + ad::to_string(k.shape()) +
                         ", v " + ad::to_string(v.shape()) + " must share one [B,h,T,d] shape");
    }
    const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(q.dim(3)));
    auto scores = ad::scale(ad::matmul(q, ad::transpose(k, 2, 3)), inv_sqrt_d);
    auto weights = ad::softmax(scores, -1);
    if (trace) trace->weights.push_back(weights);
    return ad::matmul(weights, v);
}

namespace {

template <typename T>
Tensor<T> truncated(Shape shape, Rng& rng, double stddev) {
    std::vector<T> values(ad::numel(shape));
    for (auto& x : values) x = static_cast<T>(rng.truncated_normal(stddev));
    return Tensor<T>::from_values(std::move(shape), std::move(values), true);
}

template <typename T>
LinearParams<T> make_linear(std::size_t in, std::size_t out, Rng& rng, double stddev) {
    return {truncated<T>({in, out}, rng, stddev), Tensor<T>::zeros({out}, true)};
}

template <typename T>
NormParams<T> make_norm(std::size_t d) {
    return {Tensor<T>::full({d}, T(1), true), Tensor<T>::zeros({d}, true)};
}

}  // namespace

template <typename T>
VisionTransformer<T>::VisionTransformer(const ViTConfig& config, const InitOptions& init) : config_(config) {
    config_.validate();
    Rng rng(derive_seed(init.seed, "init"));
    const std::size_t d = config_.embed_dim;
    patch_embed_ = make_linear<T>(config_.patch_dim(), d, rng, init.stddev);
    cls_token_ = Tensor<T>::zeros({d}, true);
    pos_embed_ = truncated<T>({config_.num_tokens(), d}, rng, init.stddev);
    blocks_.reserve(config_.num_layers);
    for (std::size_t i = 0; i < config_.num_layers; ++i) {
        EncoderBlock<T> blk;
        blk.norm1 = make_norm<T>(d);
        blk.q = make_linear<T>(d, d, rng, init.stddev);
        blk.k = make_linear<T>(d, d, rng, init.stddev);
        blk.v = make_linear<T>(d, d, rng, init.stddev);
        blk.proj = make_linear<T>(d, d, rng, init.stddev);
        blk.norm2 = make_norm<T>(d);
        blk.fc1 = make_linear<T>(d, config_.mlp_hidden(), rng, init.stddev);
        blk.fc2 = make_linear<T>(config_.mlp_hidden(), d, rng, init.stddev);
        blocks_.push_back(std::move(blk));
    }
    norm_ = make_norm<T>(d);
    head_ = make_linear<T>(d, config_.num_classes, rng, init.stddev);
}

template <typename T>
Tensor<T> VisionTransformer<T>::forward(const Tensor<T>& batch, Mode mode, Rng* dropout_rng,
                                        AttentionTrace<T>* trace) const {
    const ViTConfig& c = config_;
    if (batch.rank() != 4 || batch.dim(1) != c.channels || batch.dim(2) != c.image_size ||
        batch.dim(3) != c.image_size) {
        throw ShapeError("forward expects [B," + std::to_string(c.channels) + "," + std::to_string(c.image_size) +
                         "," + std::to_string(c.image_size) + "], got " + ad::to_string(batch.shape()) +
                         " (resize inputs to the model resolution first)");
    }
    const bool stochastic = mode == Mode::train && c.dropout_p > 0.0;
    if (stochastic && dropout_rng == nullptr) {
        throw ConfigError("train-mode forward with dropout needs a random stream");
    }
    Rng unused(0);
    Rng& rng = dropout_rng ? *dropout_rng : unused;
    auto drop = [&](const Tensor<T>& x) { return ad::dropout(x, c.dropout_p, mode, rng); };

    const std::size_t b = batch.dim(0);
    const std::size_t d = c.embed_dim;
    const std::size_t tokens = c.num_tokens();
    const std::size_t heads = c.num_heads;
    const std::size_t hd = c.head_dim();

    auto x = ad::linear(patchify(batch, c.patch_size), patch_embed_.weight, patch_embed_.bias);
    auto cls = ad::reshape(ad::gather_rows(ad::reshape(cls_token_, {1, d}), std::vector<std::size_t>(b, 0)),
                           {b, 1, d});
    x = drop(ad::add(ad::concat<T>({cls, x}, 1), pos_embed_));

    auto split_heads = [&](const Tensor<T>& t) { return ad::transpose(ad::reshape(t, {b, tokens, heads, hd}), 1, 2); };
    for (const auto& blk : blocks_) {
        auto h = ad::layernorm(x, blk.norm1.weight, blk.norm1.bias, static_cast<T>(c.layernorm_eps));
        auto q = split_heads(ad::linear(h, blk.q.weight, blk.q.bias));
        auto k = split_heads(ad::linear(h, blk.k.weight, blk.k.bias));
        auto v = split_heads(ad::linear(h, blk.v.weight, blk.v.bias));
        auto merged = ad::reshape(ad::transpose(attention(q, k, v, trace), 1, 2), {b, tokens, d});
        x = ad::add(x, drop(ad::linear(merged, blk.proj.weight, blk.proj.bias)));

        h = ad::layernorm(x, blk.norm2.weight, blk.norm2.bias, static_cast<T>(c.layernorm_eps));
        auto hidden = drop(ad::gelu(ad::linear(h, blk.fc1.weight, blk.fc1.bias)));
        x = ad::add(x, drop(ad::linear(hidden, blk.fc2.weight, blk.fc2.bias)));
    }
    x = ad::layernorm(x, norm_.weight, norm_.bias, static_cast<T>(c.layernorm_eps));
    auto cls_out = ad::reshape(ad::slice(x, 1, 0, 1), {b, d});
    return ad::linear(cls_out, head_.weight, head_.bias);
}

template <typename T>
std::vector<typename VisionTransformer<T>::NamedParameter> VisionTransformer<T>::named_parameters() const {
    std::vector<NamedParameter> out;
    auto lin = [&](const std::string& prefix, const LinearParams<T>& p) {
        out.emplace_back(prefix + ".weight", p.weight);
        out.emplace_back(prefix + ".bias", p.bias);
    };
    auto nrm = [&](const std::string& prefix, const NormParams<T>& p) {
        out.emplace_back(prefix + ".weight", p.weight);
        out.emplace_back(prefix + ".bias", p.bias);
    };
    lin("patch_embed", patch_embed_);
    out.emplace_back("cls_token", cls_token_);
    out.emplace_back("pos_embed", pos_embed_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const std::string p = "blocks." + std::to_string(i);
        const auto& blk = blocks_[i];
        nrm(p + ".norm1", blk.norm1);
        lin(p + ".attn.q", blk.q);
        lin(p + ".attn.k", blk.k);
        lin(p + ".attn.v", blk.v);
        lin(p + ".attn.proj", blk.proj);
        nrm(p + ".norm2", blk.norm2);
        lin(p + ".mlp.fc1", blk.fc1);
        lin(p + ".mlp.fc2", blk.fc2);
    }
    nrm("norm", norm_);
    lin("head", head_);
    return out;
}

template <typename T>
std::vector<Tensor<T>> VisionTransformer<T>::parameters() const {
    std::vector<Tensor<T>> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

template <typename T>
std::optional<Tensor<T>> VisionTransformer<T>::find_parameter(const std::string& name) const {
    for (auto& [n, t] : named_parameters()) {
        if (n == name) return t;
    }
    return std::nullopt;
}

template <typename T>
std::size_t VisionTransformer<T>::parameter_count() const {
    std::size_t n = 0;
    for (auto& [name, t] : named_parameters()) n += t.numel();
    return n;
}

template <typename T>
void VisionTransformer<T>::zero_grad() {
    for (auto& [name, t] : named_parameters()) t.zero_grad();
}

template <typename T>
void VisionTransformer<T>::set_requires_grad(bool flag) {
    for (auto& [name, t] : named_parameters()) t.set_requires_grad(flag);
}

template <typename T>
void VisionTransformer<T>::assign(const std::string& name, std::span<const T> values) {
    auto p = find_parameter(name);
    if (!p) throw ConfigError("unknown parameter '" + name + "'");
    if (p->numel() != values.size()) {
        throw ShapeError("parameter '" + name + "' has " + std::to_string(p->numel()) + " values, got " +
                         std::to_string(values.size()));
    }
    std::copy(values.begin(), values.end(), p->mutable_values().begin());
}

template <typename T>
void VisionTransformer<T>::reset_head(std::uint64_t seed, double stddev) {
    Rng rng(derive_seed(seed, "head"));
    for (auto& w : head_.weight.mutable_values()) w = static_cast<T>(rng.truncated_normal(stddev));
    for (auto& b : head_.bias.mutable_values()) b = T(0);
    head_.weight.zero_grad();
    head_.bias.zero_grad();
}

template <typename T>
VisionTransformer<T> VisionTransformer<T>::clone() const {
    VisionTransformer copy(config_, InitOptions{0, 0.0});
    for (const auto& [name, t] : named_parameters()) {
        copy.assign(name, t.values());
        copy.find_parameter(name)->set_requires_grad(t.requires_grad());
    }
    return copy;
}

template <typename T>
std::vector<T> interpolate_position_table(std::span<const T> table, std::size_t dim, std::size_t old_side,
                                          std::size_t new_side) {
    if (table.size() != (old_side * old_side + 1) * dim) {
        throw ShapeError("position table size does not match a " + std::to_string(old_side) + "x" +
                         std::to_string(old_side) + " grid of dimension " + std::to_string(dim));
    }
    std::vector<T> out((new_side * new_side + 1) * dim);
    std::copy_n(table.begin(), dim, out.begin());
    const double ratio = static_cast<double>(old_side) / static_cast<double>(new_side);
    auto coord = [&](std::size_t i, std::size_t& lo, std::size_t& hi, double& frac) {
        double s = (static_cast<double>(i) + 0.5) * ratio - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(old_side - 1));
        lo = static_cast<std::size_t>(std::floor(s));
        hi = std::min(lo + 1, old_side - 1);
        frac = s - static_cast<double>(lo);
    };
    for (std::size_t y = 0; y < new_side; ++y) {
        std::size_t y0, y1;
        double fy;
        coord(y, y0, y1, fy);
        for (std::size_t x = 0; x < new_side; ++x) {
            std::size_t x0, x1;
            double fx;
            coord(x, x0, x1, fx);
            const T* p00 = table.data() + (1 + y0 * old_side + x0) * dim;
            const T* p01 = table.data() + (1 + y0 * old_side + x1) * dim;
            const T* p10 = table.data() + (1 + y1 * old_side + x0) * dim;
            const T* p11 = table.data() + (1 + y1 * old_side + x1) * dim;
            T* dst = out.data() + (1 + y * new_side + x) * dim;
            for (std::size_t j = 0; j < dim; ++j) {
                const double top = p00[j] * (1.0 - fx) + p01[j] * fx;
                const double bottom = p10[j] * (1.0 - fx) + p11[j] * fx;
                dst[j] = static_cast<T>(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    return out;
}

template Tensor<float> patchify(const Tensor<float>&, std::size_t);
template Tensor<double> patchify(const Tensor<double>&, std::size_t);
template Tensor<float> attention(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                 AttentionTrace<float>*);
template Tensor<double> attention(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                  AttentionTrace<double>*);
template class VisionTransformer<float>;
template class VisionTransformer<double>;
template std::vector<float> interpolate_position_table(std::span<const float>, std::size_t, std::size_t,
                                                       std::size_t);
template std::vector<double> interpolate_position_table(std::span<const double>, std::size_t, std::size_t,
                                                        std::size_t);

}  // namespace lulc::vit
