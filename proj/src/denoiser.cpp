#include "latvsr/denoiser.hpp"

#include <cmath>

namespace latvsr::denoiser {

using nn::ParamKind;

void DenoiserConfig::validate() const {
    if (depth < 1) throw std::invalid_argument("denoiser config: depth must be >= 1");
    if (msta_alpha < 0.0 || msta_alpha > 1.0)
        throw std::invalid_argument("denoiser config: msta_alpha must be in [0,1]");
    if (base_channels < temporal_heads || base_channels % temporal_heads != 0)
        throw std::invalid_argument("denoiser config: heads must divide base_channels");
}

json DenoiserConfig::to_json() const {
    return json{{"base_channels", base_channels},
                {"depth", depth},
                {"temporal_heads", temporal_heads},
                {"msta_alpha", msta_alpha},
                {"msta_enabled", msta_enabled},
                {"msta_form", msta_form == MstaForm::Corrected ? "corrected" : "printed"},
                {"latent_channels", latent_channels},
                {"cond_channels", cond_channels},
                {"embed_dim", embed_dim},
                {"time_embed_dim", time_embed_dim}};
}

DenoiserConfig DenoiserConfig::from_json(const json& j) {
    DenoiserConfig c;
    c.base_channels = j.value("base_channels", 8);
    c.depth = j.value("depth", 2);
    c.temporal_heads = j.value("temporal_heads", 2);
    c.msta_alpha = j.value("msta_alpha", 0.5);
    c.msta_enabled = j.value("msta_enabled", true);
    std::string form = j.value("msta_form", std::string("corrected"));
    if (form == "corrected")
        c.msta_form = MstaForm::Corrected;
    else if (form == "printed")
        c.msta_form = MstaForm::Printed;
    else
        throw std::invalid_argument("denoiser config: unknown msta_form " + form);
    c.latent_channels = j.value("latent_channels", 4);
    c.cond_channels = j.value("cond_channels", 3);
    c.embed_dim = j.value("embed_dim", 8);
    c.time_embed_dim = j.value("time_embed_dim", 32);
    c.validate();
    return c;
}

// ---- MstaBlock ----

MstaBlock::MstaBlock(nn::ParamStore& ps, const std::string& prefix, int64_t channels,
                     const DenoiserConfig& cfg, Rng& rng)
    : alpha_(cfg.msta_alpha), enabled_(cfg.msta_enabled), form_(cfg.msta_form),
      channels_(channels) {
    int heads = cfg.temporal_heads;
    mod_full_ = nn::Linear(ps, prefix + ".ta_mod", cfg.time_embed_dim, 2 * channels, rng,
                           ParamKind::Temporal, /*zero_init=*/true);
    ta_full_ = nn::TemporalAttention(ps, prefix + ".ta", channels, heads, rng, ParamKind::Temporal);
    if (enabled_) {
        dconv_ = nn::Conv2d(ps, prefix + ".msta.dconv", channels, channels, 3, 2, rng,
                            ParamKind::Temporal);
        mod_down_ = nn::Linear(ps, prefix + ".msta.mod", cfg.time_embed_dim, 2 * channels, rng,
                               ParamKind::Temporal, /*zero_init=*/true);
        ta_down_ = nn::TemporalAttention(ps, prefix + ".msta.ta", channels, heads, rng,
                                         ParamKind::Temporal);
        upconv_ = nn::Conv2d(ps, prefix + ".msta.upconv", channels, channels, 3, 1, rng,
                             ParamKind::Temporal, /*zero_init=*/true);
    }
}

ag::Var MstaBlock::modulated_norm(const ag::Var& h, const nn::Linear& mod,
                                  const ag::Var& emb) const {
    auto m = mod(emb);  // (1, 2C)
    auto s = ag::reshape(ag::slice_c(ag::reshape(m, {1, 2 * channels_, 1, 1}), 0, channels_),
                         {channels_});
    auto t = ag::reshape(
        ag::slice_c(ag::reshape(m, {1, 2 * channels_, 1, 1}), channels_, 2 * channels_),
        {channels_});
    return ag::film(ag::layer_norm_c(h), s, t);
}

ag::Var MstaBlock::operator()(const ag::Var& h, const ag::Var& emb) const {
    if (h->value.ndim() != 4) throw std::invalid_argument("msta: need (T,C,H,W)");
    if (h->value.dim(0) < 1) throw std::invalid_argument("msta: empty clip (T=0)");
    if (h->value.dim(1) != channels_) throw std::invalid_argument("msta: channel mismatch");
    auto h_ori = ag::add(ta_full_(modulated_norm(h, mod_full_, emb)), h);
    if (!enabled_) return h_ori;
    auto hd = dconv_(h);
    auto h_down = ag::add(ta_down_(modulated_norm(hd, mod_down_, emb)), hd);
    auto up = upconv_(ag::upsample_nearest(h_down, h->value.dim(2), h->value.dim(3)));
    if (form_ == MstaForm::Corrected) return ag::add(h_ori, ag::scale(up, alpha_));
    // Literal published combination; the low-resolution branch appears on
    // both sides, upsampled to make the shapes meet.
    return ag::add(up, ag::scale(up, alpha_));
}

// ---- ResBlock ----

DenoiserModel::ResBlock DenoiserModel::make_resblock(const std::string& prefix, int64_t cin,
                                                     int64_t cout, Rng& rng) {
    ResBlock rb;
    rb.gn1 = nn::GroupNorm(params_, prefix + ".gn1", cin, 1, ParamKind::Spatial);
    rb.conv1 = nn::Conv2d(params_, prefix + ".conv1", cin, cout, 3, 1, rng, ParamKind::Spatial);
    rb.mod = nn::Linear(params_, prefix + ".mod", cfg_.time_embed_dim, 2 * cout, rng,
                        ParamKind::Spatial, /*zero_init=*/true);
    rb.gn2 = nn::GroupNorm(params_, prefix + ".gn2", cout, 1, ParamKind::Spatial);
    rb.conv2 = nn::Conv2d(params_, prefix + ".conv2", cout, cout, 3, 1, rng, ParamKind::Spatial);
    if (cin != cout) {
        rb.skip = nn::Conv2d(params_, prefix + ".skip", cin, cout, 1, 1, rng, ParamKind::Spatial);
        rb.has_skip = true;
    }
    return rb;
}

ag::Var DenoiserModel::ResBlock::operator()(const ag::Var& x, const ag::Var& emb) const {
    auto a = conv1(ag::silu(gn1(x)));
    int64_t c = a->value.dim(1);
    auto m = mod(emb);
    auto s = ag::reshape(ag::slice_c(ag::reshape(m, {1, 2 * c, 1, 1}), 0, c), {c});
    auto t = ag::reshape(ag::slice_c(ag::reshape(m, {1, 2 * c, 1, 1}), c, 2 * c), {c});
    a = conv2(ag::silu(ag::film(gn2(a), s, t)));
    return ag::add(a, has_skip ? skip(x) : x);
}

// ---- DenoiserModel ----

DenoiserModel::DenoiserModel(DenoiserConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng = Rng::child(seed, 0xd30u);
    int64_t in_ch = cfg_.latent_channels + cfg_.cond_channels;
    emb_in_ = nn::Linear(params_, "emb_in", cfg_.time_embed_dim + cfg_.embed_dim,
                         cfg_.time_embed_dim, rng, ParamKind::Spatial);
    conv_in_ = nn::Conv2d(params_, "conv_in", in_ch, cfg_.base_channels, 3, 1, rng,
                          ParamKind::Spatial);
    int64_t c = cfg_.base_channels;
    for (int l = 0; l < cfg_.depth; ++l) {
        std::string p = "down" + std::to_string(l);
        Level lev;
        lev.res = make_resblock(p + ".res", c, c, rng);
        lev.temporal = MstaBlock(params_, p + ".temporal", c, cfg_, rng);
        down_.push_back(std::move(lev));
        if (l + 1 < cfg_.depth) {
            downsample_.push_back(nn::Conv2d(params_, p + ".down", c, 2 * c, 3, 2, rng,
                                             ParamKind::Spatial));
            c *= 2;
        }
    }
    mid_res1_ = make_resblock("mid.res1", c, c, rng);
    mid_temporal_ = MstaBlock(params_, "mid.temporal", c, cfg_, rng);
    mid_res2_ = make_resblock("mid.res2", c, c, rng);
    for (int l = cfg_.depth - 2; l >= 0; --l) {
        std::string p = "up" + std::to_string(l);
        up_conv_.push_back(nn::Conv2d(params_, p + ".conv", c, c / 2, 3, 1, rng,
                                      ParamKind::Spatial));
        c /= 2;
        Level lev;
        lev.res = make_resblock(p + ".res", 2 * c, c, rng);
        lev.temporal = MstaBlock(params_, p + ".temporal", c, cfg_, rng);
        up_.push_back(std::move(lev));
    }
    out_norm_ = nn::GroupNorm(params_, "out.norm", c, 1, ParamKind::Spatial);
    out_conv_ = nn::Conv2d(params_, "out.conv", c, cfg_.latent_channels, 3, 1, rng,
                           ParamKind::Spatial);
}

ag::Var DenoiserModel::embed_vector(int t, const Tensor& embed) const {
    if (embed.numel() != cfg_.embed_dim)
        throw std::invalid_argument("denoiser: conditioning embed has wrong dimension");
    Tensor te = nn::timestep_embedding(t, cfg_.time_embed_dim);
    Tensor joint({1, cfg_.time_embed_dim + cfg_.embed_dim});
    for (int64_t i = 0; i < cfg_.time_embed_dim; ++i) joint[i] = te[i];
    for (int64_t i = 0; i < cfg_.embed_dim; ++i) joint[cfg_.time_embed_dim + i] = embed[i];
    return ag::silu(emb_in_(ag::constant(joint)));
}

ag::Var DenoiserModel::forward_ag(const ag::Var& z_t, const Tensor& x_tau, int t,
                                  const Tensor& embed) const {
    const Tensor& z = z_t->value;
    if (z.ndim() != 4 || z.dim(1) != cfg_.latent_channels)
        throw std::invalid_argument("denoiser: latent geometry mismatch");
    if (x_tau.ndim() != 4 || x_tau.dim(0) != z.dim(0) || x_tau.dim(1) != cfg_.cond_channels ||
        x_tau.dim(2) != z.dim(2) || x_tau.dim(3) != z.dim(3))
        throw std::invalid_argument("denoiser: conditioning geometry mismatch");
    auto emb = embed_vector(t, embed);

    auto h = conv_in_(ag::concat_c(z_t, ag::constant(x_tau)));
    std::vector<ag::Var> skips;
    for (int l = 0; l < cfg_.depth; ++l) {
        h = down_[static_cast<size_t>(l)].res(h, emb);
        h = down_[static_cast<size_t>(l)].temporal(h, emb);
        if (l + 1 < cfg_.depth) {
            skips.push_back(h);
            h = downsample_[static_cast<size_t>(l)](h);
        }
    }
    h = mid_res1_(h, emb);
    h = mid_temporal_(h, emb);
    h = mid_res2_(h, emb);
    for (size_t i = 0; i < up_.size(); ++i) {
        const ag::Var& skip = skips[skips.size() - 1 - i];
        h = up_conv_[i](
            ag::upsample_nearest(h, skip->value.dim(2), skip->value.dim(3)));
        h = up_[i].res(ag::concat_c(h, skip), emb);
        h = up_[i].temporal(h, emb);
    }
    return out_conv_(ag::silu(out_norm_(h)));
}

Tensor DenoiserModel::forward(const Tensor& z_t, const diffusion::Conditioning& cond,
                              int t) const {
    return forward_ag(ag::constant(z_t), cond.lr_latent, t, cond.embed)->value;
}

ParamGroups DenoiserModel::param_groups() const {
    ParamGroups g;
    for (const auto& [name, var] : params_.params()) {
        switch (params_.kind(name)) {
            case ParamKind::Spatial: g.spatial.push_back(name); break;
            case ParamKind::Temporal: g.temporal.push_back(name); break;
        }
    }
    return g;
}

json DenoiserModel::save_meta() const { return cfg_.to_json(); }

DenoiserModel DenoiserModel::from_checkpoint(const json& meta,
                                             const std::map<std::string, Tensor>& tensors) {
    DenoiserModel model(DenoiserConfig::from_json(meta), /*seed=*/0);
    model.params_.load(tensors);
    return model;
}

}  // namespace latvsr::denoiser
