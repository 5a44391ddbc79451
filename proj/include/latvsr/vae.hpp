#pragma once

#include <json.hpp>

#include "latvsr/nn.hpp"

namespace latvsr::vae {

using json = nlohmann::json;

enum class Variant { Vae2d, Vae3d, Te3dVae };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct VaeConfig {
    int64_t latent_channels = 4;
    int downscale = 4;  // power of two
    Variant variant = Variant::Te3dVae;
    double kl_weight = 1e-6;
    double adv_weight = 0.0;  // adversarial stub off by default
    double perceptual_weight = 1.0;
    int64_t base_channels = 8;
    int temporal_heads = 2;

    void validate() const;
    json to_json() const;
    static VaeConfig from_json(const json& j);
};

struct VaeLossReport {
    double l1 = 0.0;
    double perceptual = 0.0;
    double adversarial = 0.0;
    double kl = 0.0;
    double total = 0.0;
    json to_json() const;
};

// Video autoencoder with three variants: per-frame 2D convs, 3D residual
// blocks, and 3D residual blocks plus temporal attention at the lowest
// resolution (the temporal-enhanced variant).
class VideoVae {
public:
    VideoVae(VaeConfig cfg, uint64_t seed);

    const VaeConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    // Deterministic eval encode (posterior mean); clip (T,3,H,W).
    Tensor encode(const Tensor& clip) const;
    // Deterministic eval decode; output clamped to [0,1].
    Tensor decode(const Tensor& latent) const;

    struct TrainForward {
        ag::Var recon;   // un-clamped reconstruction
        ag::Var mu, logvar;
    };
    TrainForward forward_train(const Tensor& clip, Rng& rng) const;

    // Loss composition per config; `kl` is supplied by the caller when a
    // posterior is available (0 otherwise).
    VaeLossReport vae_loss(const Tensor& recon, const Tensor& target, double kl = 0.0,
                           double adversarial = 0.0) const;
    ag::Var loss_ag(const TrainForward& fwd, const Tensor& target, VaeLossReport* report) const;

    json save_meta() const;
    static VideoVae from_checkpoint(const json& meta, const std::map<std::string, Tensor>& tensors);

private:
    struct Block;  // conv/res building blocks, variant-dependent
    ag::Var encode_ag(const ag::Var& clip) const;
    ag::Var decode_ag(const ag::Var& latent) const;

    VaeConfig cfg_;
    nn::ParamStore params_;

    // Convolution that is 2-D per frame or temporal 3-D depending on the
    // variant; activations stay (T,C,H,W).
    struct VConv {
        nn::Conv2d c2;
        nn::Conv3d c3;
        bool use3d = false;
        ag::Var operator()(const ag::Var& x) const;
    };
    VConv make_conv(const std::string& prefix, int64_t cin, int64_t cout, int k, int stride,
                    Rng& rng, bool zero_init = false);

    struct Res {
        nn::GroupNorm gn1, gn2;
        VConv conv1, conv2;
        ag::Var operator()(const ag::Var& x) const;
    };
    Res make_res(const std::string& prefix, int64_t c, Rng& rng);

    VConv enc_in_;
    std::vector<Res> enc_res_;
    std::vector<VConv> enc_down_;
    Res enc_mid_;
    nn::TemporalAttention enc_ta_;
    nn::GroupNorm enc_out_norm_;
    VConv enc_out_;

    VConv dec_in_;
    Res dec_mid_;
    nn::TemporalAttention dec_ta_;
    std::vector<VConv> dec_up_;
    std::vector<Res> dec_res_;
    nn::GroupNorm dec_out_norm_;
    VConv dec_out_;
    bool has_ta_ = false;
    int stages_ = 2;
};

// Minimal temporal PatchGAN discriminator (hinge loss), used only when
// adv_weight > 0.
class TemporalDiscriminator {
public:
    TemporalDiscriminator(uint64_t seed, int64_t in_channels = 3, int64_t base = 8);
    nn::ParamStore& params() { return params_; }
    ag::Var operator()(const ag::Var& clip) const;  // (T,3,H,W) -> patch logits

private:
    nn::ParamStore params_;
    std::vector<nn::Conv3d> convs_;
};

}  // namespace latvsr::vae
