#pragma once

#include <map>
#include <optional>
#include <string>

#include "latvsr/autograd.hpp"
#include "latvsr/tensor.hpp"

namespace latvsr::nn {

enum class ParamKind { Spatial, Temporal };

// Flat registry of named parameters. Every parameter is tagged spatial or
// temporal at registration time; the trainer's freeze masks and the
// checkpoint format both key off the names.
class ParamStore {
public:
    ag::Var create(const std::string& name, Tensor init, ParamKind kind) {
        if (params_.count(name)) throw std::logic_error("duplicate parameter: " + name);
        auto v = ag::param(std::move(init));
        params_[name] = v;
        kinds_[name] = kind;
        return v;
    }

    const std::map<std::string, ag::Var>& params() const { return params_; }
    ParamKind kind(const std::string& name) const {
        auto it = kinds_.find(name);
        if (it == kinds_.end()) throw std::logic_error("unclassified parameter: " + name);
        return it->second;
    }

    int64_t total_count() const {
        int64_t n = 0;
        for (const auto& [k, v] : params_) n += v->value.numel();
        return n;
    }

    void zero_grad() {
        for (auto& [k, v] : params_)
            if (v->grad.numel()) std::fill(v->grad.data(), v->grad.data() + v->grad.numel(), 0.0);
    }

    // Load values by name; throws on missing or shape-mismatched entries.
    void load(const std::map<std::string, Tensor>& named);
    std::map<std::string, Tensor> snapshot() const;

private:
    std::map<std::string, ag::Var> params_;
    std::map<std::string, ParamKind> kinds_;
};

// Initialization helpers (fan-in scaled normal; zero).
Tensor init_normal(std::vector<int64_t> shape, int64_t fan_in, Rng& rng);

struct Linear {
    ag::Var w, b;
    Linear() = default;
    Linear(ParamStore& ps, const std::string& prefix, int64_t in, int64_t out, Rng& rng,
           ParamKind kind, bool zero_init = false);
    ag::Var operator()(const ag::Var& x) const { return ag::linear(x, w, b); }
};

struct Conv2d {
    ag::Var w, b;
    int stride = 1, pad = 1;
    Conv2d() = default;
    Conv2d(ParamStore& ps, const std::string& prefix, int64_t in, int64_t out, int k, int stride,
           Rng& rng, ParamKind kind, bool zero_init = false);
    ag::Var operator()(const ag::Var& x) const { return ag::conv2d(x, w, b, stride, pad); }
};

struct Conv3d {
    ag::Var w, b;
    int stride = 1;
    Conv3d() = default;
    Conv3d(ParamStore& ps, const std::string& prefix, int64_t in, int64_t out, int kt, int k,
           int stride, Rng& rng, ParamKind kind, bool zero_init = false);
    ag::Var operator()(const ag::Var& x) const { return ag::conv3d(x, w, b, stride); }
};

struct GroupNorm {
    ag::Var gamma, beta;
    int groups = 1;
    GroupNorm() = default;
    GroupNorm(ParamStore& ps, const std::string& prefix, int64_t channels, int groups,
              ParamKind kind);
    ag::Var operator()(const ag::Var& x) const { return ag::group_norm(x, groups, gamma, beta); }
};

// Attention across the frame axis, one shared projection applied at every
// spatial location. The output projection is zero-initialized so a fresh
// block is an identity in its residual context.
struct TemporalAttention {
    Linear q, k, v, o;
    int heads = 1;
    TemporalAttention() = default;
    TemporalAttention(ParamStore& ps, const std::string& prefix, int64_t channels, int heads,
                      Rng& rng, ParamKind kind);
    // x is (T, C, H, W); attends over T per spatial location.
    ag::Var operator()(const ag::Var& x) const;
};

// AdamW with decoupled weight decay and optional per-parameter freezing.
class AdamW {
public:
    struct Config {
        double lr = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 1e-4;
    };

    AdamW() = default;
    explicit AdamW(Config cfg) : cfg_(cfg) {}

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }

    // Frozen parameters receive no update and no decay.
    void set_trainable(const std::map<std::string, bool>& mask) { trainable_ = mask; }

    void step(ParamStore& ps);

    // Moment state keyed by parameter name, for checkpointing.
    std::map<std::string, std::pair<Tensor, Tensor>>& moments() { return moments_; }
    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }

private:
    Config cfg_;
    std::map<std::string, bool> trainable_;
    std::map<std::string, std::pair<Tensor, Tensor>> moments_;
    int64_t t_ = 0;
};

// Sinusoidal embedding of an integer timestep into `dim` values.
Tensor timestep_embedding(int t, int64_t dim);

}  // namespace latvsr::nn
