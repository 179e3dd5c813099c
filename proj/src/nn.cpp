#include "stylekit/nn.hpp"

#include <cmath>

namespace stylekit {

Linear::Linear(int in, int out, Rng& rng, bool bias, double gain)
    : w(Tensor::randn({in, out}, rng, gain / std::sqrt(static_cast<double>(in)))),
      b(Tensor::zeros({out})),
      has_bias(bias) {}

Value Linear::fwd(Ctx& c, Value x) {
    Value y = c.tape.matmul(x, c.P(w));
    if (has_bias) y = c.tape.row_bias_add(y, c.P(b));
    return y;
}

void Linear::visit(const std::string& prefix, const ParamFn& f) {
    f(prefix + ".w", w);
    if (has_bias) f(prefix + ".b", b);
}

Conv2d::Conv2d(int cin, int cout, int k, int stride, int pad, Rng& rng, double gain)
    : w(Tensor::randn({cout, cin, k, k}, rng,
                      gain / std::sqrt(static_cast<double>(cin) * k * k))),
      b(Tensor::zeros({cout})),
      stride(stride),
      pad(pad) {}

Conv2d Conv2d::zero_init(int cin, int cout, int k, int stride, int pad) {
    Conv2d c;
    c.w = Tensor::zeros({cout, cin, k, k});
    c.b = Tensor::zeros({cout});
    c.stride = stride;
    c.pad = pad;
    return c;
}

Value Conv2d::fwd(Ctx& c, Value x) {
    return c.tape.conv2d(x, c.P(w), c.P(b), stride, pad);
}

void Conv2d::visit(const std::string& prefix, const ParamFn& f) {
    f(prefix + ".w", w);
    f(prefix + ".b", b);
}

LayerNorm::LayerNorm(int width)
    : gamma(Tensor::full({width}, 1.0)), beta(Tensor::zeros({width})) {}

Value LayerNorm::fwd(Ctx& c, Value x) {
    return c.tape.layer_norm_rows(x, c.P(gamma), c.P(beta));
}

void LayerNorm::visit(const std::string& prefix, const ParamFn& f) {
    f(prefix + ".gamma", gamma);
    f(prefix + ".beta", beta);
}

ChannelAffine::ChannelAffine(int channels)
    : gamma(Tensor::full({channels}, 1.0)), beta(Tensor::zeros({channels})) {}

Value ChannelAffine::fwd(Ctx& c, Value x) {
    return c.tape.channel_affine(x, c.P(gamma), c.P(beta));
}

void ChannelAffine::visit(const std::string& prefix, const ParamFn& f) {
    f(prefix + ".gamma", gamma);
    f(prefix + ".beta", beta);
}

ResBlock::ResBlock(int cin, int cout, int stride, Rng& rng, int time_dim)
    : conv1(cin, cout, 3, stride, 1, rng),
      conv2(cout, cout, 3, 1, 1, rng),
      norm(cout),
      stride(stride) {
    if (cin != cout || stride != 1)
        shortcut = Conv2d(cin, cout, 1, stride, 0, rng);
    if (time_dim > 0) time_proj = Linear(time_dim, cout, rng);
}

Value ResBlock::fwd(Ctx& c, Value x, std::optional<Value> temb) {
    Value h = conv1.fwd(c, x);
    h = norm.fwd(c, c.tape.instance_norm(h));
    if (time_proj && temb) {
        Value shift = time_proj->fwd(c, *temb);  // (1, cout)
        h = c.tape.channel_bias_add(h, c.tape.reshape(shift, {c.tape.val(shift).size()}));
    }
    h = conv2.fwd(c, c.tape.silu(h));
    Value s = shortcut ? shortcut->fwd(c, x) : x;
    return c.tape.add(s, h);
}

void ResBlock::visit(const std::string& prefix, const ParamFn& f) {
    conv1.visit(prefix + ".conv1", f);
    conv2.visit(prefix + ".conv2", f);
    norm.visit(prefix + ".norm", f);
    if (shortcut) shortcut->visit(prefix + ".shortcut", f);
    if (time_proj) time_proj->visit(prefix + ".time_proj", f);
}

TransformerBlock::TransformerBlock(int d, int heads, int mlp_hidden, Rng& rng)
    : ln1(d),
      ln2(d),
      wq(d, d, rng, false),
      wk(d, d, rng, false),
      wv(d, d, rng, false),
      wo(d, d, rng),
      mlp1(d, mlp_hidden, rng),
      mlp2(mlp_hidden, d, rng),
      heads(heads) {}

Value TransformerBlock::fwd(Ctx& c, Value x) {
    const int d = c.tape.val(x).dim(1);
    const int dh = d / heads;
    Value h = ln1.fwd(c, x);
    Value q = wq.fwd(c, h), k = wk.fwd(c, h), v = wv.fwd(c, h);
    std::vector<Value> head_out;
    head_out.reserve(heads);
    for (int i = 0; i < heads; ++i) {
        Value qi = c.tape.slice_cols(q, i * dh, (i + 1) * dh);
        Value ki = c.tape.slice_cols(k, i * dh, (i + 1) * dh);
        Value vi = c.tape.slice_cols(v, i * dh, (i + 1) * dh);
        head_out.push_back(scaled_dot_attention(c, qi, ki, vi));
    }
    Value attn = heads == 1 ? head_out[0] : c.tape.concat_cols(head_out);
    x = c.tape.add(x, wo.fwd(c, attn));
    Value m = ln2.fwd(c, x);
    return c.tape.add(x, mlp2.fwd(c, c.tape.gelu(mlp1.fwd(c, m))));
}

void TransformerBlock::visit(const std::string& prefix, const ParamFn& f) {
    ln1.visit(prefix + ".ln1", f);
    ln2.visit(prefix + ".ln2", f);
    wq.visit(prefix + ".wq", f);
    wk.visit(prefix + ".wk", f);
    wv.visit(prefix + ".wv", f);
    wo.visit(prefix + ".wo", f);
    mlp1.visit(prefix + ".mlp1", f);
    mlp2.visit(prefix + ".mlp2", f);
}

TimeEmbed::TimeEmbed(int sin_dim, int out_dim, Rng& rng)
    : l1(sin_dim, out_dim, rng), l2(out_dim, out_dim, rng), sin_dim(sin_dim) {}

Value TimeEmbed::fwd(Ctx& c, int t) {
    Value e = c.C(sinusoidal_embedding(t, sin_dim).reshaped({1, sin_dim}));
    return l2.fwd(c, c.tape.silu(l1.fwd(c, e)));
}

void TimeEmbed::visit(const std::string& prefix, const ParamFn& f) {
    l1.visit(prefix + ".l1", f);
    l2.visit(prefix + ".l2", f);
}

Value scaled_dot_attention(Ctx& c, Value q, Value k, Value v) {
    const int dk = c.tape.val(q).dim(1);
    Value logits = c.tape.scale(c.tape.matmul(q, c.tape.transpose(k)),
                                1.0 / std::sqrt(static_cast<double>(dk)));
    return c.tape.matmul(c.tape.softmax_rows(logits), v);
}

Value image_to_tokens(Ctx& c, Value x) {
    const Tensor& X = c.tape.val(x);
    return c.tape.transpose(c.tape.reshape(x, {X.dim(0), X.dim(1) * X.dim(2)}));
}

Value tokens_to_image(Ctx& c, Value tok, int channels, int h, int w) {
    return c.tape.reshape(c.tape.transpose(tok), {channels, h, w});
}

Tensor sinusoidal_embedding(int t, int dim) {
    Tensor e({dim});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
        e[i] = std::sin(t * freq);
        e[half + i] = std::cos(t * freq);
    }
    return e;
}

}  // namespace stylekit
