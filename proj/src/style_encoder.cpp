#include "stylekit/style_encoder.hpp"

#include <stdexcept>
#include <string>

namespace stylekit {

PatchExpert::PatchExpert(int patch_side, int depth, int channels, int d, Rng& rng)
    : stem(3, channels, 3, 1, 1, rng), head(channels, d, rng) {
    int spatial = patch_side;
    blocks.reserve(static_cast<std::size_t>(depth));
    for (int i = 0; i < depth; ++i) {
        const int stride = spatial > 1 ? 2 : 1;
        blocks.emplace_back(channels, channels, stride, rng);
        if (stride == 2) spatial = (spatial + 1) / 2;  // 3x3 conv, pad 1
    }
}

Value PatchExpert::fwd(Ctx& c, Value patch_chw) {
    Value h = stem.fwd(c, patch_chw);
    for (auto& b : blocks) h = b.fwd(c, h);
    return head.fwd(c, c.tape.spatial_mean(h));
}

void PatchExpert::visit(const std::string& prefix, const ParamFn& f) {
    stem.visit(prefix + ".stem", f);
    for (std::size_t i = 0; i < blocks.size(); ++i)
        blocks[i].visit(prefix + ".block" + std::to_string(i), f);
    head.visit(prefix + ".head", f);
}

StyleEncoder::StyleEncoder(const StyleEncoderConfig& cfg, Rng& rng)
    : cfg_(cfg),
      expert_deep_(cfg.image_size / 4, kDeepExpertDepth, cfg.expert_channels, cfg.d, rng),
      expert_mid_(cfg.image_size / 8, kMidExpertDepth, cfg.expert_channels, cfg.d, rng),
      expert_shallow_(cfg.image_size / 16, kShallowExpertDepth, cfg.expert_channels, cfg.d,
                      rng),
      style_tokens_(Tensor::randn({cfg.n_style_tokens, cfg.d}, rng, 0.02)),
      proj1_(cfg.d, cfg.d, rng),
      proj2_(cfg.d, cfg.d_out, rng),
      null_style_(Tensor::randn({cfg.n_style_tokens, cfg.d_out}, rng, 0.02)) {
    if (cfg.image_size % 16 != 0)
        throw std::invalid_argument("style encoder: image_size must be divisible by 16");
    if (cfg.d % cfg.heads != 0)
        throw std::invalid_argument("style encoder: d must be divisible by heads");
    phi_.reserve(static_cast<std::size_t>(cfg.transformer_blocks));
    for (int i = 0; i < cfg.transformer_blocks; ++i)
        phi_.emplace_back(cfg.d, cfg.heads, cfg.d * cfg.mlp_ratio, rng);
}

Value StyleEncoder::embed_patches(Ctx& c, const PatchSet& patches) {
    if (patches.large.size() != kLargePatchCount ||
        patches.medium.size() != kMediumPatchCount ||
        patches.small.size() != kSmallPatchCount)
        throw std::invalid_argument("style encoder: malformed patch set");
    if (patches.source_size != cfg_.image_size)
        throw std::invalid_argument(
            "style encoder: patch set was cut from a " +
            std::to_string(patches.source_size) + "px image but the encoder expects " +
            std::to_string(cfg_.image_size) + "px");

    std::vector<Value> rows;
    rows.reserve(kTotalPatchCount);
    for (const auto& t : patches.large)
        rows.push_back(expert_deep_.fwd(c, c.C(image_to_chw(t.pixels))));
    for (const auto& t : patches.medium)
        rows.push_back(expert_mid_.fwd(c, c.C(image_to_chw(t.pixels))));
    for (const auto& t : patches.small)
        rows.push_back(expert_shallow_.fwd(c, c.C(image_to_chw(t.pixels))));
    return c.tape.concat_rows(rows);
}

Value StyleEncoder::encode_style(Ctx& c, Value patch_embeddings) {
    const Tensor& fp = c.tape.val(patch_embeddings);
    if (fp.rank() != 2 || fp.dim(1) != cfg_.d)
        throw std::invalid_argument("style encoder: patch embeddings must be (*, " +
                                    std::to_string(cfg_.d) + "), got " +
                                    shape_str(fp.shape()));
    Value tokens = c.tape.concat_rows({c.P(style_tokens_), patch_embeddings});
    for (std::size_t i = 0; i < phi_.size(); ++i) {
        tokens = phi_[i].fwd(c, tokens);
        if (!c.tape.val(tokens).all_finite())
            throw std::runtime_error("style encoder: non-finite activations after transformer block " +
                                     std::to_string(i));
    }
    Value style_rows = c.tape.slice_rows(tokens, 0, cfg_.n_style_tokens);
    return proj2_.fwd(c, c.tape.gelu(proj1_.fwd(c, style_rows)));
}

Tensor StyleEncoder::encode_tensor(const PatchSet& patches) {
    Tape tape;
    Ctx c{tape};
    return tape.val(encode(c, patches));
}

void StyleEncoder::visit(const std::string& prefix, const ParamFn& f) {
    expert_deep_.visit(prefix + ".expert_deep", f);
    expert_mid_.visit(prefix + ".expert_mid", f);
    expert_shallow_.visit(prefix + ".expert_shallow", f);
    f(prefix + ".style_tokens", style_tokens_);
    for (std::size_t i = 0; i < phi_.size(); ++i)
        phi_[i].visit(prefix + ".phi" + std::to_string(i), f);
    proj1_.visit(prefix + ".proj1", f);
    proj2_.visit(prefix + ".proj2", f);
    f(prefix + ".null_style_tokens", null_style_);
}

ParamList StyleEncoder::params() {
    ParamList out;
    visit("style", [&out](const std::string& n, Tensor& t) { out.emplace_back(n, &t); });
    sort_params(out);
    return out;
}

}  // namespace stylekit
