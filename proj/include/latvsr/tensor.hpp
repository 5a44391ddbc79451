#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace latvsr {

// Dense row-major double tensor. Small and deliberately boring: every
// numerical routine in this project goes through it.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape)
        : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}
    Tensor(std::vector<int64_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<int64_t>(data_.size()) != checked_numel(shape_))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int64_t> shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 4-D accessor (the dominant layout here is (N, C, H, W)).
    double& at4(int64_t a, int64_t b, int64_t c, int64_t d) {
        return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
    }
    double at4(int64_t a, int64_t b, int64_t c, int64_t d) const {
        return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
    }
    double& at3(int64_t a, int64_t b, int64_t c) {
        return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
    }
    double at3(int64_t a, int64_t b, int64_t c) const {
        return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
    }

    Tensor reshaped(std::vector<int64_t> shape) const {
        Tensor t(std::move(shape), data_);
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    double max_abs() const;
    double max_abs_diff(const Tensor& o) const;

private:
    static int64_t checked_numel(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

// Seeded generator wrapper. Serializable so training state can resume
// bit-compatibly.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : gen_(seed) {}

    double normal() { return normal_(gen_); }
    double uniform() { return uniform_(gen_); }
    // Uniform integer in [lo, hi].
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return std::uniform_int_distribution<int64_t>(lo, hi)(gen_);
    }
    uint64_t next_u64() { return gen_(); }

    // Independent stream derived from this seed and an index; used so
    // per-clip work is order-independent.
    static Rng child(uint64_t seed, uint64_t index) {
        std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                          static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32)};
        std::mt19937_64 g(0);
        g.seed(seq);
        Rng r;
        r.gen_ = g;
        return r;
    }

    Tensor normal_tensor(std::vector<int64_t> shape) {
        Tensor t(std::move(shape));
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = normal();
        return t;
    }

    // normal_distribution caches a spare variate, so it is serialized
    // alongside the generator; otherwise resume would diverge by one draw.
    std::string serialize() const {
        std::ostringstream os;
        os << gen_ << '\n' << normal_;
        return os.str();
    }
    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> gen_ >> normal_;
        uniform_.reset();
    }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace latvsr
