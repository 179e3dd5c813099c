#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stylekit/checkpoint.hpp"
#include "stylekit/nn.hpp"
#include "stylekit/style_adapter.hpp"

namespace stylekit {

// Forward-process schedule. alpha_bar[0] is exactly 1 (no noise) and
// alpha_bar is strictly decreasing over [1, T].
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;      // betas[0] unused
    std::vector<double> alpha_bar;  // size T+1

    static NoiseSchedule linear(int T, double beta_start = 1e-4, double beta_end = 0.02);
    void validate() const;
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, t in [1, T].
Tensor forward_noise(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);

struct DenoiserConfig {
    int latent_channels = 4;
    int latent_size = 16;
    int base_channels = 16;
    std::vector<int> widths = {16, 32};  // per down layer, shallow to deep
    int d_attn = 32;
    int d_text = 32;
    int d_style = 64;
    int time_dim = 32;

    int num_layers() const { return static_cast<int>(widths.size()); }
    void validate() const;
};

// Conditioning inputs bound on a tape. An invalid f_s means "no style
// branch"; style_scale weighs the style attention against the text attention.
struct Condition {
    Value f_t;
    Value f_s;  // optional
    double style_scale = 1.0;
};

// Per-layer content residuals as tape values; down[i] is the residual of
// down block i+1 (one-based f_c^{i+1}).
struct ContentResidualValues {
    Value mid;
    std::vector<Value> down;
};

// Up block i (one-based, first = deepest) consumes down residual L-i+1;
// returns the zero-based index into the down residual list.
inline int up_block_residual_index(int up_block, int num_layers) {
    return num_layers - up_block;
}

// Cross-attention over latent tokens with an optional parallel style branch.
// The base site owns the shared query and the text projections; style
// key/value projections come from the adapter (or are owned directly by the
// style-only variant in the content encoder).
struct DenoiserAttn {
    std::string path;
    LayerNorm ln;
    Tensor w_q, w_kt, w_vt;
    Linear wout;

    DenoiserAttn() = default;
    DenoiserAttn(std::string path, int channels, const DenoiserConfig& cfg, Rng& rng);

    Value fwd(Ctx& c, Value x, const Condition& cond, AdapterSite* adapter);
    void visit(const std::string& prefix, const ParamFn& f);
};

struct DownBlock {
    ResBlock res;
    DenoiserAttn attn;
    Conv2d down;  // stride-2

    Value fwd(Ctx& c, Value x, Value temb, const Condition& cond, AdapterSite* adapter);
};

struct MidBlock {
    ResBlock res1;
    DenoiserAttn attn;
    ResBlock res2;

    Value fwd(Ctx& c, Value x, Value temb, const Condition& cond, AdapterSite* adapter);
};

struct UpBlock {
    ResBlock res;  // consumes [u; skip]
    DenoiserAttn attn;
    Conv2d post_up;

    Value fwd(Ctx& c, Value x, Value skip, Value temb, const Condition& cond,
              AdapterSite* adapter);
};

// Noise-prediction U-Net. Attention sites are named down.1..L, mid, up.1..L;
// an installed AdapterStore supplies the per-site style projections. Content
// residuals, when given, are added to the mid output and to each up block
// input in reversed layer order.
class UNet {
public:
    UNet() = default;
    UNet(const DenoiserConfig& cfg, Rng& rng);

    const DenoiserConfig& config() const { return cfg_; }

    Value fwd(Ctx& c, Value x_t, int t, const Condition& cond, AdapterStore* adapter,
              const ContentResidualValues* residuals = nullptr);

    // Tape-free prediction for samplers.
    Tensor predict(const Tensor& x_t, int t, const Tensor& f_t, const Tensor* f_s,
                   double style_scale, AdapterStore* adapter,
                   const std::function<ContentResidualValues(Ctx&, Value x_t, int t)>*
                       content_hook = nullptr);

    std::vector<std::string> attention_site_paths() const;
    void install_adapter_sites(AdapterStore& store, Rng& rng) const;

    void visit(const std::string& prefix, const ParamFn& f);
    ParamList params();

private:
    DenoiserConfig cfg_;
    Conv2d stem_;
    TimeEmbed temb_;
    std::vector<DownBlock> down_;
    MidBlock mid_;
    std::vector<UpBlock> up_;
    ChannelAffine out_norm_;
    Conv2d out_;

    friend class ContentEncoder;
};

// Squared-error denoising objective: |eps - eps_hat|^2 summed over elements.
Value denoise_loss(Ctx& c, UNet& unet, const Tensor& x0, int t, const Tensor& eps,
                   const Condition& cond, const NoiseSchedule& sched, AdapterStore* adapter,
                   const ContentResidualValues* residuals = nullptr);

// eps_uncond + s (eps_cond - eps_uncond); s==1 and s==0 short-circuit to the
// single matching branch so the identities hold exactly.
Tensor cfg_predict(const std::function<Tensor(bool cond)>& predict_branch, double s);

struct SamplerParams {
    int steps = 50;
    double guidance = 7.5;
    double style_scale = 1.0;
    std::uint64_t seed = 0;
};

// Deterministic coarse-to-fine timestep subset: steps values from T down,
// final transition lands on 0 (clean data).
std::vector<int> sampler_timesteps(int T, int steps);

using EpsPredictor = std::function<Tensor(const Tensor& x_t, int t)>;

// Deterministic multi-step probability-flow sampler: at each selected
// timestep the clean-data estimate is formed from the predicted noise and
// re-noised to the next level. Aborts on non-finite latents, reporting the
// step index.
Tensor sample_loop(const NoiseSchedule& sched, const Shape& latent_shape,
                   const EpsPredictor& predict, int steps, std::uint64_t seed);

}  // namespace stylekit
