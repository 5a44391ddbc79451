#pragma once

#include <json.hpp>

#include "latvsr/diffusion.hpp"
#include "latvsr/nn.hpp"

namespace latvsr::denoiser {

using json = nlohmann::json;

// Fusion form for the multi-scale temporal block. `Corrected` combines the
// full-resolution branch with the upsampled low-resolution branch;
// `Printed` keeps the literal published combination (which consumes the
// low-resolution branch twice) and exists for auditability.
enum class MstaForm { Corrected, Printed };

struct DenoiserConfig {
    int64_t base_channels = 8;
    int depth = 2;
    int temporal_heads = 2;
    double msta_alpha = 0.5;
    bool msta_enabled = true;
    MstaForm msta_form = MstaForm::Corrected;
    int64_t latent_channels = 4;
    int64_t cond_channels = 3;
    int64_t embed_dim = 8;       // generic conditioning vector
    int64_t time_embed_dim = 32;

    void validate() const;
    json to_json() const;
    static DenoiserConfig from_json(const json& j);
};

struct ParamGroups {
    std::vector<std::string> spatial;
    std::vector<std::string> temporal;
};

// Multi-scale temporal attention slot: temporal attention at native and
// 2x-downsampled resolution, AdaLN-modulated by the shared embedding,
// fused with weight alpha. Fresh blocks are exact identities (attention
// output projections and the upsampling conv are zero-initialized).
class MstaBlock {
public:
    MstaBlock() = default;
    MstaBlock(nn::ParamStore& ps, const std::string& prefix, int64_t channels,
              const DenoiserConfig& cfg, Rng& rng);

    // h is (T, C, H, W); emb is (1, time_embed_dim). Output shape == input shape.
    ag::Var operator()(const ag::Var& h, const ag::Var& emb) const;

private:
    ag::Var modulated_norm(const ag::Var& h, const nn::Linear& mod, const ag::Var& emb) const;

    nn::Linear mod_full_, mod_down_;
    nn::TemporalAttention ta_full_, ta_down_;
    nn::Conv2d dconv_, upconv_;
    double alpha_ = 0.5;
    bool enabled_ = true;
    MstaForm form_ = MstaForm::Corrected;
    int64_t channels_ = 0;
};

// Toy temporal U-Net predicting v. Conditioning enters by channel
// concatenation of the noise-perturbed LR clip and by FiLM from the
// timestep/embedding vector.
class DenoiserModel {
public:
    DenoiserModel(DenoiserConfig cfg, uint64_t seed);

    const DenoiserConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    // Training-path forward; z_t (T,Cz,h,w), x_tau (T,Cc,h,w).
    ag::Var forward_ag(const ag::Var& z_t, const Tensor& x_tau, int t, const Tensor& embed) const;

    Tensor forward(const Tensor& z_t, const diffusion::Conditioning& cond, int t) const;

    // Every parameter lands in exactly one group; unknown names fail loudly.
    ParamGroups param_groups() const;

    json save_meta() const;
    static DenoiserModel from_checkpoint(const json& meta,
                                         const std::map<std::string, Tensor>& tensors);

private:
    ag::Var embed_vector(int t, const Tensor& embed) const;

    DenoiserConfig cfg_;
    nn::ParamStore params_;
    nn::Linear emb_in_;
    nn::Conv2d conv_in_;

    struct ResBlock {
        nn::GroupNorm gn1, gn2;
        nn::Conv2d conv1, conv2, skip;
        nn::Linear mod;
        bool has_skip = false;
        ag::Var operator()(const ag::Var& x, const ag::Var& emb) const;
    };
    ResBlock make_resblock(const std::string& prefix, int64_t cin, int64_t cout, Rng& rng);

    struct Level {
        ResBlock res;
        MstaBlock temporal;
    };
    std::vector<Level> down_;
    std::vector<nn::Conv2d> downsample_;
    ResBlock mid_res1_, mid_res2_;
    MstaBlock mid_temporal_;
    std::vector<nn::Conv2d> up_conv_;
    std::vector<Level> up_;
    nn::GroupNorm out_norm_;
    nn::Conv2d out_conv_;
};

}  // namespace latvsr::denoiser
