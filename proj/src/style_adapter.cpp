#include "stylekit/style_adapter.hpp"

#include <stdexcept>

namespace stylekit {

AttentionParams::AttentionParams(int d_latent, int d_text, int d_style, int d_attn, Rng& rng)
    : w_q(Tensor::randn({d_latent, d_attn}, rng, 1.0 / std::sqrt(static_cast<double>(d_latent)))),
      w_kt(Tensor::randn({d_text, d_attn}, rng, 1.0 / std::sqrt(static_cast<double>(d_text)))),
      w_vt(Tensor::randn({d_text, d_attn}, rng, 1.0 / std::sqrt(static_cast<double>(d_text)))),
      w_ks(Tensor::randn({d_style, d_attn}, rng, 1.0 / std::sqrt(static_cast<double>(d_style)))),
      w_vs(Tensor::zeros({d_style, d_attn})) {}

Value cross_attention(Ctx& c, Value f, Value source, Value w_q, Value w_k, Value w_v) {
    const Tensor& F = c.tape.val(f);
    const Tensor& S = c.tape.val(source);
    const Tensor& Wq = c.tape.val(w_q);
    const Tensor& Wk = c.tape.val(w_k);
    if (F.rank() != 2 || F.dim(1) != Wq.dim(0))
        throw std::invalid_argument("cross_attention: latent width " + shape_str(F.shape()) +
                                    " does not match query projection " +
                                    shape_str(Wq.shape()));
    if (S.rank() != 2 || S.dim(1) != Wk.dim(0))
        throw std::invalid_argument("cross_attention: source width " + shape_str(S.shape()) +
                                    " does not match key projection " +
                                    shape_str(Wk.shape()));
    Value q = c.tape.matmul(f, w_q);
    Value k = c.tape.matmul(source, w_k);
    Value v = c.tape.matmul(source, w_v);
    return scaled_dot_attention(c, q, k, v);
}

Value blended_attention(Ctx& c, Value f, Value f_t, Value f_s, double style_scale,
                        AttentionParams& params) {
    if (!std::isfinite(style_scale))
        throw std::invalid_argument("blended_attention: style scale must be finite");
    Value text = cross_attention(c, f, f_t, c.P(params.w_q), c.P(params.w_kt), c.P(params.w_vt));
    if (style_scale == 0.0) return text;
    if (!f_s.valid())
        throw std::invalid_argument(
            "blended_attention: style scale is nonzero but no style embedding was supplied");
    Value style = cross_attention(c, f, f_s, c.P(params.w_q), c.P(params.w_ks), c.P(params.w_vs));
    return c.tape.add(text, c.tape.scale(style, style_scale));
}

AdapterSite& AdapterStore::at(const std::string& path) {
    auto it = sites.find(path);
    if (it == sites.end())
        throw std::out_of_range("adapter: no weights for attention site '" + path + "'");
    return it->second;
}

const AdapterSite& AdapterStore::at(const std::string& path) const {
    auto it = sites.find(path);
    if (it == sites.end())
        throw std::out_of_range("adapter: no weights for attention site '" + path + "'");
    return it->second;
}

void AdapterStore::visit(const std::string& prefix, const ParamFn& f) {
    for (auto& [path, site] : sites) {
        f(prefix + "." + path + ".w_ks", site.w_ks);
        f(prefix + "." + path + ".w_vs", site.w_vs);
    }
}

ParamList AdapterStore::params() {
    ParamList out;
    visit("adapter", [&out](const std::string& n, Tensor& t) { out.emplace_back(n, &t); });
    sort_params(out);
    return out;
}

}  // namespace stylekit
