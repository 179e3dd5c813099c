#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stylekit/tape.hpp"

namespace stylekit {

// Per-forward binding context. P() registers an owned parameter tensor on the
// tape; only tensors in the trainable set become differentiable leaves, so a
// frozen parameter cannot receive a gradient by construction. Repeated
// bindings of the same tensor return the same node and gradients accumulate
// in one place.
struct Ctx {
    Tape& tape;
    const std::unordered_set<Tensor*>* trainable = nullptr;
    std::vector<std::pair<Tensor*, Value>>* binds = nullptr;

    Value P(Tensor& t) {
        auto it = cache_.find(&t);
        if (it != cache_.end()) return it->second;
        const bool req = trainable && trainable->count(&t) > 0;
        Value v = tape.leaf(t, req);
        cache_.emplace(&t, v);
        if (req && binds) binds->push_back({&t, v});
        return v;
    }
    Value C(const Tensor& t) { return tape.constant(t); }

private:
    std::unordered_map<Tensor*, Value> cache_;
};

using ParamFn = std::function<void(const std::string&, Tensor&)>;

struct Linear {
    Tensor w;  // (in, out)
    Tensor b;  // (out), unused when has_bias is false
    bool has_bias = true;

    Linear() = default;
    Linear(int in, int out, Rng& rng, bool bias = true, double gain = 1.0);

    Value fwd(Ctx& c, Value x);
    void visit(const std::string& prefix, const ParamFn& f);
};

struct Conv2d {
    Tensor w;  // (cout, cin, k, k)
    Tensor b;  // (cout)
    int stride = 1;
    int pad = 1;

    Conv2d() = default;
    Conv2d(int cin, int cout, int k, int stride, int pad, Rng& rng, double gain = 1.0);
    static Conv2d zero_init(int cin, int cout, int k, int stride, int pad);

    Value fwd(Ctx& c, Value x);
    void visit(const std::string& prefix, const ParamFn& f);
};

struct LayerNorm {
    Tensor gamma, beta;

    LayerNorm() = default;
    explicit LayerNorm(int width);

    Value fwd(Ctx& c, Value x);
    void visit(const std::string& prefix, const ParamFn& f);
};

struct ChannelAffine {
    Tensor gamma, beta;

    ChannelAffine() = default;
    explicit ChannelAffine(int channels);

    Value fwd(Ctx& c, Value x);
    void visit(const std::string& prefix, const ParamFn& f);
};

// conv - norm - activation - conv with an additive skip; optional stride-2
// first conv and optional per-channel timestep shift after the norm.
struct ResBlock {
    Conv2d conv1, conv2;
    ChannelAffine norm;
    std::optional<Conv2d> shortcut;  // present when shape changes
    std::optional<Linear> time_proj;
    int stride = 1;

    ResBlock() = default;
    ResBlock(int cin, int cout, int stride, Rng& rng, int time_dim = 0);

    Value fwd(Ctx& c, Value x, std::optional<Value> temb = std::nullopt);
    void visit(const std::string& prefix, const ParamFn& f);
};

// Pre-norm self-attention + MLP block over token rows. No positional state of
// any kind: the block is permutation-equivariant over rows.
struct TransformerBlock {
    LayerNorm ln1, ln2;
    Linear wq, wk, wv, wo;
    Linear mlp1, mlp2;
    int heads = 1;

    TransformerBlock() = default;
    TransformerBlock(int d, int heads, int mlp_hidden, Rng& rng);

    Value fwd(Ctx& c, Value x);
    void visit(const std::string& prefix, const ParamFn& f);
};

struct TimeEmbed {
    Linear l1, l2;
    int sin_dim = 0;

    TimeEmbed() = default;
    TimeEmbed(int sin_dim, int out_dim, Rng& rng);

    Value fwd(Ctx& c, int t);
    void visit(const std::string& prefix, const ParamFn& f);
};

// softmax(q k^T / sqrt(d_k)) v
Value scaled_dot_attention(Ctx& c, Value q, Value k, Value v);

// (C,H,W) -> (H*W, C) token rows and back.
Value image_to_tokens(Ctx& c, Value x);
Value tokens_to_image(Ctx& c, Value tok, int channels, int h, int w);

Tensor sinusoidal_embedding(int t, int dim);

}  // namespace stylekit
