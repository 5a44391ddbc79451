#include "latvsr/vae.hpp"

#include <cmath>

namespace latvsr::vae {

Variant variant_from_string(const std::string& s) {
    if (s == "vae2d") return Variant::Vae2d;
    if (s == "vae3d") return Variant::Vae3d;
    if (s == "te3dvae") return Variant::Te3dVae;
    throw std::invalid_argument("unknown vae variant: " + s);
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Vae2d: return "vae2d";
        case Variant::Vae3d: return "vae3d";
        case Variant::Te3dVae: return "te3dvae";
    }
    throw std::logic_error("bad variant");
}

void VaeConfig::validate() const {
    if (latent_channels < 1) throw std::invalid_argument("vae config: latent_channels must be >= 1");
    if (downscale < 2 || (downscale & (downscale - 1)) != 0)
        throw std::invalid_argument("vae config: downscale must be a power of two >= 2");
    if (kl_weight < 0 || adv_weight < 0 || perceptual_weight < 0)
        throw std::invalid_argument("vae config: loss weights must be >= 0");
    if (base_channels < 1) throw std::invalid_argument("vae config: base_channels must be >= 1");
    if (temporal_heads < 1) throw std::invalid_argument("vae config: temporal_heads must be >= 1");
}

json VaeConfig::to_json() const {
    return json{{"latent_channels", latent_channels}, {"downscale", downscale},
                {"variant", to_string(variant)},      {"kl_weight", kl_weight},
                {"adv_weight", adv_weight},           {"perceptual_weight", perceptual_weight},
                {"base_channels", base_channels},     {"temporal_heads", temporal_heads}};
}

VaeConfig VaeConfig::from_json(const json& j) {
    VaeConfig c;
    c.latent_channels = j.value("latent_channels", int64_t{4});
    c.downscale = j.value("downscale", 4);
    c.variant = variant_from_string(j.value("variant", std::string("te3dvae")));
    c.kl_weight = j.value("kl_weight", 1e-6);
    c.adv_weight = j.value("adv_weight", 0.0);
    c.perceptual_weight = j.value("perceptual_weight", 1.0);
    c.base_channels = j.value("base_channels", int64_t{8});
    c.temporal_heads = j.value("temporal_heads", 2);
    c.validate();
    return c;
}

json VaeLossReport::to_json() const {
    return json{{"l1", l1},
                {"perceptual", perceptual},
                {"adversarial", adversarial},
                {"kl", kl},
                {"total", total}};
}

namespace {
int norm_groups(int64_t channels) { return channels % 4 == 0 ? 4 : 1; }
}  // namespace

ag::Var VideoVae::VConv::operator()(const ag::Var& x) const {
    if (!use3d) return c2(x);
    // conv3d wants (C,T,H,W); activations travel as (T,C,H,W).
    return ag::transpose01(c3(ag::transpose01(x)));
}

VideoVae::VConv VideoVae::make_conv(const std::string& prefix, int64_t cin, int64_t cout, int k,
                                    int stride, Rng& rng, bool zero_init) {
    VConv c;
    if (cfg_.variant == Variant::Vae2d) {
        c.c2 = nn::Conv2d(params_, prefix, cin, cout, k, stride, rng, nn::ParamKind::Spatial,
                          zero_init);
    } else {
        c.use3d = true;
        c.c3 = nn::Conv3d(params_, prefix, cin, cout, /*kt=*/3, k, stride, rng,
                          nn::ParamKind::Spatial, zero_init);
    }
    return c;
}

ag::Var VideoVae::Res::operator()(const ag::Var& x) const {
    auto h = conv1(ag::silu(gn1(x)));
    h = conv2(ag::silu(gn2(h)));
    return ag::add(x, h);
}

VideoVae::Res VideoVae::make_res(const std::string& prefix, int64_t c, Rng& rng) {
    Res r;
    r.gn1 = nn::GroupNorm(params_, prefix + ".gn1", c, norm_groups(c), nn::ParamKind::Spatial);
    r.conv1 = make_conv(prefix + ".conv1", c, c, 3, 1, rng);
    r.gn2 = nn::GroupNorm(params_, prefix + ".gn2", c, norm_groups(c), nn::ParamKind::Spatial);
    r.conv2 = make_conv(prefix + ".conv2", c, c, 3, 1, rng);
    return r;
}

VideoVae::VideoVae(VaeConfig cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    stages_ = 0;
    for (int f = cfg_.downscale; f > 1; f /= 2) ++stages_;
    has_ta_ = cfg_.variant == Variant::Te3dVae;
    const int64_t base = cfg_.base_channels;
    const int64_t cz = cfg_.latent_channels;
    const int64_t cbot = base << stages_;

    enc_in_ = make_conv("enc.in", 3, base, 3, 1, rng);
    for (int s = 0; s < stages_; ++s) {
        int64_t c = base << s;
        enc_res_.push_back(make_res("enc.res" + std::to_string(s), c, rng));
        enc_down_.push_back(make_conv("enc.down" + std::to_string(s), c, c * 2, 3, 2, rng));
    }
    enc_mid_ = make_res("enc.mid", cbot, rng);
    if (has_ta_)
        enc_ta_ = nn::TemporalAttention(params_, "enc.ta", cbot, cfg_.temporal_heads, rng,
                                        nn::ParamKind::Temporal);
    enc_out_norm_ = nn::GroupNorm(params_, "enc.out_norm", cbot, norm_groups(cbot),
                                  nn::ParamKind::Spatial);
    enc_out_ = make_conv("enc.out", cbot, 2 * cz, 3, 1, rng);

    dec_in_ = make_conv("dec.in", cz, cbot, 3, 1, rng);
    dec_mid_ = make_res("dec.mid", cbot, rng);
    if (has_ta_)
        dec_ta_ = nn::TemporalAttention(params_, "dec.ta", cbot, cfg_.temporal_heads, rng,
                                        nn::ParamKind::Temporal);
    for (int s = stages_ - 1; s >= 0; --s) {
        int64_t c = base << s;
        dec_up_.push_back(make_conv("dec.up" + std::to_string(s), c * 2, c, 3, 1, rng));
        dec_res_.push_back(make_res("dec.res" + std::to_string(s), c, rng));
    }
    dec_out_norm_ = nn::GroupNorm(params_, "dec.out_norm", base, norm_groups(base),
                                  nn::ParamKind::Spatial);
    dec_out_ = make_conv("dec.out", base, 3, 3, 1, rng);
}

ag::Var VideoVae::encode_ag(const ag::Var& clip) const {
    const Tensor& v = clip->value;
    if (v.ndim() != 4 || v.dim(1) != 3)
        throw std::invalid_argument("vae encode: expected clip (T,3,H,W)");
    if (v.dim(2) % cfg_.downscale != 0 || v.dim(3) % cfg_.downscale != 0)
        throw std::invalid_argument("vae encode: H and W must be divisible by the downscale factor");
    auto h = enc_in_(clip);
    for (int s = 0; s < stages_; ++s) h = enc_down_[s](enc_res_[s](h));
    h = enc_mid_(h);
    if (has_ta_) h = ag::add(h, enc_ta_(h));
    return enc_out_(ag::silu(enc_out_norm_(h)));
}

ag::Var VideoVae::decode_ag(const ag::Var& latent) const {
    const Tensor& v = latent->value;
    if (v.ndim() != 4 || v.dim(1) != cfg_.latent_channels)
        throw std::invalid_argument("vae decode: latent geometry does not match config");
    auto h = dec_in_(latent);
    h = dec_mid_(h);
    if (has_ta_) h = ag::add(h, dec_ta_(h));
    for (size_t i = 0; i < dec_up_.size(); ++i) {
        h = ag::upsample_nearest(h, h->value.dim(2) * 2, h->value.dim(3) * 2);
        h = dec_res_[i](dec_up_[i](h));
    }
    return dec_out_(ag::silu(dec_out_norm_(h)));
}

Tensor VideoVae::encode(const Tensor& clip) const {
    auto out = encode_ag(ag::constant(clip));
    // posterior mean only; the logvar half is a training-time output
    Tensor mu(
        {clip.dim(0), cfg_.latent_channels, clip.dim(2) / cfg_.downscale, clip.dim(3) / cfg_.downscale});
    const Tensor& full = out->value;
    for (int64_t t = 0; t < mu.dim(0); ++t)
        for (int64_t c = 0; c < mu.dim(1); ++c)
            for (int64_t y = 0; y < mu.dim(2); ++y)
                for (int64_t x = 0; x < mu.dim(3); ++x) mu.at4(t, c, y, x) = full.at4(t, c, y, x);
    return mu;
}

Tensor VideoVae::decode(const Tensor& latent) const {
    Tensor out = decode_ag(ag::constant(latent))->value;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
    return out;
}

VideoVae::TrainForward VideoVae::forward_train(const Tensor& clip, Rng& rng) const {
    auto post = encode_ag(ag::constant(clip));
    int64_t cz = cfg_.latent_channels;
    TrainForward f;
    f.mu = ag::slice_c(post, 0, cz);
    f.logvar = ag::slice_c(post, cz, 2 * cz);
    Tensor eps = rng.normal_tensor(f.mu->value.shape());
    auto std = ag::expv(ag::scale(f.logvar, 0.5));
    auto z = ag::add(f.mu, ag::mul(std, ag::constant(eps)));
    f.recon = decode_ag(z);
    return f;
}

namespace {
// Mean absolute difference of forward spatial differences; matches the
// autograd finite_diff_h / finite_diff_w maps.
double grad_domain_l1(const Tensor& a, const Tensor& b) {
    int64_t T = a.dim(0), C = a.dim(1), H = a.dim(2), W = a.dim(3);
    double acc = 0.0;
    int64_t n = 0;
    for (int64_t t = 0; t < T; ++t)
        for (int64_t c = 0; c < C; ++c) {
            for (int64_t y = 0; y + 1 < H; ++y)
                for (int64_t x = 0; x < W; ++x) {
                    double da = a.at4(t, c, y + 1, x) - a.at4(t, c, y, x);
                    double db = b.at4(t, c, y + 1, x) - b.at4(t, c, y, x);
                    acc += std::abs(da - db);
                    ++n;
                }
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x + 1 < W; ++x) {
                    double da = a.at4(t, c, y, x + 1) - a.at4(t, c, y, x);
                    double db = b.at4(t, c, y, x + 1) - b.at4(t, c, y, x);
                    acc += std::abs(da - db);
                    ++n;
                }
        }
    return n ? acc / static_cast<double>(n) : 0.0;
}
}  // namespace

VaeLossReport VideoVae::vae_loss(const Tensor& recon, const Tensor& target, double kl,
                                 double adversarial) const {
    if (!recon.same_shape(target)) throw std::invalid_argument("vae_loss: shape mismatch");
    VaeLossReport r;
    double acc = 0.0;
    for (int64_t i = 0; i < recon.numel(); ++i) acc += std::abs(recon[i] - target[i]);
    r.l1 = acc / static_cast<double>(recon.numel());
    r.perceptual = grad_domain_l1(recon, target);
    r.adversarial = adversarial;
    r.kl = kl;
    r.total = r.l1 + cfg_.perceptual_weight * r.perceptual + cfg_.adv_weight * r.adversarial +
              cfg_.kl_weight * r.kl;
    if (!std::isfinite(r.total)) throw std::domain_error("vae_loss: non-finite loss");
    return r;
}

ag::Var VideoVae::loss_ag(const TrainForward& fwd, const Tensor& target,
                          VaeLossReport* report) const {
    auto tgt = ag::constant(target);
    auto l1 = ag::l1(fwd.recon, tgt);
    auto perc = ag::scale(ag::add(ag::l1(ag::finite_diff_h(fwd.recon), ag::finite_diff_h(tgt)),
                                  ag::l1(ag::finite_diff_w(fwd.recon), ag::finite_diff_w(tgt))),
                          0.5);
    // KL(q || N(0,1)) = mean over elements of 0.5 (mu^2 + e^logvar - 1 - logvar)
    auto klt = ag::add_scalar(
        ag::add(ag::square(fwd.mu), ag::sub(ag::expv(fwd.logvar), fwd.logvar)), -1.0);
    auto kl = ag::scale(ag::mean(klt), 0.5);
    auto total = ag::add(ag::add(l1, ag::scale(perc, cfg_.perceptual_weight)),
                         ag::scale(kl, cfg_.kl_weight));
    if (report) {
        report->l1 = l1->value[0];
        report->perceptual = perc->value[0];
        report->adversarial = 0.0;
        report->kl = kl->value[0];
        report->total = total->value[0];
    }
    if (!total->value.all_finite()) throw std::domain_error("vae loss: non-finite loss");
    return total;
}

json VideoVae::save_meta() const { return json{{"kind", "vae"}, {"config", cfg_.to_json()}}; }

VideoVae VideoVae::from_checkpoint(const json& meta, const std::map<std::string, Tensor>& tensors) {
    if (meta.value("kind", std::string()) != "vae")
        throw std::runtime_error("checkpoint is not a vae checkpoint");
    VideoVae m(VaeConfig::from_json(meta.at("config")), /*seed=*/0);
    m.params_.load(tensors);
    return m;
}

TemporalDiscriminator::TemporalDiscriminator(uint64_t seed, int64_t in_channels, int64_t base) {
    Rng rng(seed);
    int64_t chans[5] = {in_channels, base, base * 2, base * 2, 1};
    for (int i = 0; i < 4; ++i) {
        int stride = i < 3 ? 2 : 1;
        convs_.emplace_back(params_, "disc.conv" + std::to_string(i), chans[i], chans[i + 1],
                            /*kt=*/3, 3, stride, rng, nn::ParamKind::Spatial);
    }
}

ag::Var TemporalDiscriminator::operator()(const ag::Var& clip) const {
    auto h = ag::transpose01(clip);  // (C,T,H,W) for the 3D convs
    for (size_t i = 0; i < convs_.size(); ++i) {
        h = convs_[i](h);
        if (i + 1 < convs_.size()) h = ag::silu(h);
    }
    return ag::transpose01(h);
}

}  // namespace latvsr::vae
