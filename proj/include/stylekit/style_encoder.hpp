#pragma once

#include <vector>

#include "stylekit/checkpoint.hpp"
#include "stylekit/nn.hpp"
#include "stylekit/patch_partition.hpp"

namespace stylekit {

struct StyleEncoderConfig {
    int image_size = 64;        // reference image side fed to partition()
    int d = 64;                 // token width inside the encoder
    int d_out = 64;             // projected style width consumed by attention sites
    int n_style_tokens = 4;
    int heads = 4;
    int transformer_blocks = 2;
    int expert_channels = 16;
    int mlp_ratio = 2;
};

// Fixed per-scale expert depths.
constexpr int kDeepExpertDepth = 6;    // large patches
constexpr int kMidExpertDepth = 5;     // medium patches
constexpr int kShallowExpertDepth = 4; // small patches

// Residual conv stack collapsing one patch to one token. Blocks downsample by
// two until the spatial extent reaches 1; any leftover extent is mean-pooled.
struct PatchExpert {
    Conv2d stem;
    std::vector<ResBlock> blocks;
    Linear head;

    PatchExpert() = default;
    PatchExpert(int patch_side, int depth, int channels, int d, Rng& rng);

    Value fwd(Ctx& c, Value patch_chw);  // (3,s,s) -> (1,d)
    void visit(const std::string& prefix, const ParamFn& f);
};

// Maps a PatchSet to style tokens: one expert per scale produces per-patch
// embeddings, learnable style tokens are prepended, the joint sequence runs
// through transformer blocks (no positional state anywhere), and the style
// rows are projected to the attention width.
class StyleEncoder {
public:
    StyleEncoder() = default;
    StyleEncoder(const StyleEncoderConfig& cfg, Rng& rng);

    const StyleEncoderConfig& config() const { return cfg_; }

    // Per-patch embeddings, rows ordered [8 large; 16 medium; 32 small].
    Value embed_patches(Ctx& c, const PatchSet& patches);

    // Transformer pass over [style tokens; patch tokens]; returns the
    // projected style rows. Throws on non-finite activations, naming the
    // offending block.
    Value encode_style(Ctx& c, Value patch_embeddings);

    Value encode(Ctx& c, const PatchSet& patches) {
        return encode_style(c, embed_patches(c, patches));
    }

    // Tape-free convenience for inference callers.
    Tensor encode_tensor(const PatchSet& patches);

    // Learned stand-in used when the style condition is dropped.
    Tensor& null_style_tokens() { return null_style_; }

    void visit(const std::string& prefix, const ParamFn& f);
    ParamList params();

private:
    StyleEncoderConfig cfg_;
    PatchExpert expert_deep_, expert_mid_, expert_shallow_;
    Tensor style_tokens_;  // (n_style_tokens, d)
    std::vector<TransformerBlock> phi_;
    Linear proj1_, proj2_;  // output MLP d -> d -> d_out
    Tensor null_style_;     // (n_style_tokens, d_out)
};

}  // namespace stylekit
