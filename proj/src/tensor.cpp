#include "latvsr/tensor.hpp"

#include <cmath>

namespace latvsr {

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

double Tensor::max_abs_diff(const Tensor& o) const {
    if (!same_shape(o)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (int64_t i = 0; i < numel(); ++i) m = std::max(m, std::fabs(data_[static_cast<size_t>(i)] - o[i]));
    return m;
}

}  // namespace latvsr
