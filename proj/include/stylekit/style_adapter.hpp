#pragma once

#include <map>
#include <string>

#include "stylekit/checkpoint.hpp"
#include "stylekit/nn.hpp"

namespace stylekit {

// Projection weights for one attention site. The query projection is shared;
// the style branch owns key/value projections independent of the text branch.
struct AttentionParams {
    Tensor w_q;   // (d_latent, d_attn)
    Tensor w_kt;  // (d_text, d_attn)
    Tensor w_vt;  // (d_text, d_attn)
    Tensor w_ks;  // (d_style, d_attn)
    Tensor w_vs;  // (d_style, d_attn)

    AttentionParams() = default;
    AttentionParams(int d_latent, int d_text, int d_style, int d_attn, Rng& rng);
};

// softmax(f W_q (src W_k)^T / sqrt(d)) (src W_v)
Value cross_attention(Ctx& c, Value f, Value source, Value w_q, Value w_k, Value w_v);

// Text-branch attention plus style_scale times the style-branch attention
// over the shared query. style_scale == 0 skips the style branch entirely so
// the result is bit-identical to text-only attention; a nonzero scale without
// style tokens is an error rather than a silent fallback.
Value blended_attention(Ctx& c, Value f, Value f_t, Value f_s, double style_scale,
                        AttentionParams& params);

// Per-site adapter weights injected next to the base text cross-attention.
// The value projection starts at zero so an installed adapter is exactly
// inert until trained.
struct AdapterSite {
    Tensor w_ks;
    Tensor w_vs;

    AdapterSite() = default;
    AdapterSite(int d_style, int d_attn, Rng& rng)
        : w_ks(Tensor::randn({d_style, d_attn}, rng,
                             1.0 / std::sqrt(static_cast<double>(d_style)))),
          w_vs(Tensor::zeros({d_style, d_attn})) {}
};

// All adapter weights, keyed by attention-site path (e.g. "down.1", "mid",
// "up.2"). Stored and checkpointed separately from the base denoiser.
struct AdapterStore {
    std::map<std::string, AdapterSite> sites;

    AdapterSite& at(const std::string& path);
    const AdapterSite& at(const std::string& path) const;

    void visit(const std::string& prefix, const ParamFn& f);
    ParamList params();
};

}  // namespace stylekit
