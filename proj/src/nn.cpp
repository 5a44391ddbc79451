#include "latvsr/nn.hpp"

#include <cmath>

namespace latvsr::nn {

void ParamStore::load(const std::map<std::string, Tensor>& named) {
    for (auto& [name, var] : params_) {
        auto it = named.find(name);
        if (it == named.end()) throw std::runtime_error("checkpoint missing parameter: " + name);
        if (!it->second.same_shape(var->value))
            throw std::runtime_error("checkpoint shape mismatch for parameter: " + name);
        var->value = it->second;
    }
}

std::map<std::string, Tensor> ParamStore::snapshot() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, var] : params_) out[name] = var->value;
    return out;
}

Tensor init_normal(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    double s = 1.0 / std::sqrt(static_cast<double>(std::max<int64_t>(fan_in, 1)));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal() * s;
    return t;
}

Linear::Linear(ParamStore& ps, const std::string& prefix, int64_t in, int64_t out, Rng& rng,
               ParamKind kind, bool zero_init) {
    Tensor wt = zero_init ? Tensor::zeros({in, out}) : init_normal({in, out}, in, rng);
    w = ps.create(prefix + ".w", std::move(wt), kind);
    b = ps.create(prefix + ".b", Tensor::zeros({out}), kind);
}

Conv2d::Conv2d(ParamStore& ps, const std::string& prefix, int64_t in, int64_t out, int k,
               int stride_, Rng& rng, ParamKind kind, bool zero_init)
    : stride(stride_), pad(k / 2) {
    Tensor wt = zero_init ? Tensor::zeros({out, in, k, k})
                          : init_normal({out, in, k, k}, in * k * k, rng);
    w = ps.create(prefix + ".w", std::move(wt), kind);
    b = ps.create(prefix + ".b", Tensor::zeros({out}), kind);
}

Conv3d::Conv3d(ParamStore& ps, const std::string& prefix, int64_t in, int64_t out, int kt, int k,
               int stride_, Rng& rng, ParamKind kind, bool zero_init)
    : stride(stride_) {
    Tensor wt = zero_init ? Tensor::zeros({out, in, kt, k, k})
                          : init_normal({out, in, kt, k, k}, in * kt * k * k, rng);
    w = ps.create(prefix + ".w", std::move(wt), kind);
    b = ps.create(prefix + ".b", Tensor::zeros({out}), kind);
}

GroupNorm::GroupNorm(ParamStore& ps, const std::string& prefix, int64_t channels, int groups_,
                     ParamKind kind)
    : groups(groups_) {
    gamma = ps.create(prefix + ".g", Tensor::full({channels}, 1.0), kind);
    beta = ps.create(prefix + ".b", Tensor::zeros({channels}), kind);
}

TemporalAttention::TemporalAttention(ParamStore& ps, const std::string& prefix, int64_t channels,
                                     int heads_, Rng& rng, ParamKind kind)
    : heads(heads_) {
    if (channels % heads != 0) throw std::invalid_argument("TemporalAttention: heads must divide channels");
    q = Linear(ps, prefix + ".q", channels, channels, rng, kind);
    k = Linear(ps, prefix + ".k", channels, channels, rng, kind);
    v = Linear(ps, prefix + ".v", channels, channels, rng, kind);
    o = Linear(ps, prefix + ".o", channels, channels, rng, kind, /*zero_init=*/true);
}

ag::Var TemporalAttention::operator()(const ag::Var& x) const {
    int64_t T = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    int64_t S = H * W;
    auto seq = ag::to_seq(x);                                   // (S,T,C)
    auto flat = ag::reshape(seq, {S * T, C});
    auto qs = ag::reshape(q(flat), {S, T, C});
    auto ks = ag::reshape(k(flat), {S, T, C});
    auto vs = ag::reshape(v(flat), {S, T, C});
    auto qh = ag::split_heads(qs, heads);                       // (S*h,T,Ch)
    auto kh = ag::split_heads(ks, heads);
    auto vh = ag::split_heads(vs, heads);
    double sc = 1.0 / std::sqrt(static_cast<double>(C / heads));
    auto att = ag::softmax_last(ag::scale(ag::bmm(qh, ag::transpose12(kh)), sc));
    auto ctx = ag::merge_heads(ag::bmm(att, vh), heads);        // (S,T,C)
    auto out = ag::reshape(o(ag::reshape(ctx, {S * T, C})), {S, T, C});
    return ag::from_seq(out, H, W);
}

void AdamW::step(ParamStore& ps) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, var] : ps.params()) {
        if (!trainable_.empty()) {
            auto it = trainable_.find(name);
            if (it != trainable_.end() && !it->second) continue;
        }
        if (var->grad.numel() == 0) continue;
        auto& [m, v] = moments_[name];
        if (m.numel() == 0) {
            m = Tensor::zeros(var->value.shape());
            v = Tensor::zeros(var->value.shape());
        }
        Tensor& val = var->value;
        const Tensor& g = var->grad;
        for (int64_t i = 0; i < val.numel(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            double mh = m[i] / bc1, vh = v[i] / bc2;
            val[i] -= cfg_.lr * (mh / (std::sqrt(vh) + cfg_.eps) + cfg_.weight_decay * val[i]);
        }
    }
}

Tensor timestep_embedding(int t, int64_t dim) {
    Tensor e({dim});
    int64_t half = dim / 2;
    for (int64_t i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                               static_cast<double>(std::max<int64_t>(half - 1, 1)));
        e[2 * i] = std::sin(t * freq);
        e[2 * i + 1] = std::cos(t * freq);
    }
    if (dim % 2) e[dim - 1] = 0.0;
    return e;
}

}  // namespace latvsr::nn
