#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "latvsr/tensor.hpp"

namespace latvsr::ag {

// Reverse-mode tape. Each op records its parents and a closure that
// scatters the output gradient back into them. Nodes that do not require
// gradients record nothing, so eval-mode forwards pay only the value
// computation.
struct Node {
    Tensor value;
    Tensor grad;  // lazily sized
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> back;

    Tensor& ensure_grad() {
        if (grad.numel() == 0) grad = Tensor::zeros(value.shape());
        return grad;
    }
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor value);
Var param(Tensor value);

// Runs backpropagation from a scalar root.
void backward(const Var& root);

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var silu(const Var& a);
Var relu(const Var& a);
Var expv(const Var& a);
Var square(const Var& a);

// ---- reductions / losses ----
Var sum(const Var& a);
Var mean(const Var& a);
Var mse(const Var& a, const Var& b);
Var l1(const Var& a, const Var& b);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);                       // (M,K)x(K,N)
Var linear(const Var& x, const Var& w, const Var& b);         // (N,D)x(D,O)+(O)
Var bmm(const Var& a, const Var& b);                          // (B,M,K)x(B,K,N)
Var transpose12(const Var& a);                                // (B,M,K)->(B,K,M)
Var softmax_last(const Var& a);                               // rows of last dim

// ---- convolution ----
// x (N,C,H,W), w (O,C,kh,kw), b (O) or nullptr; zero padding.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// x (C,T,H,W), w (O,C,kt,kh,kw), b (O) or nullptr; temporal stride 1,
// spatial stride `stride`; "same"-style zero padding from kernel size.
Var conv3d(const Var& x, const Var& w, const Var& b, int stride);

// ---- normalization / modulation ----
Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta);
Var layer_norm_c(const Var& x);  // per-(n,h,w) over channels, no affine
// y = x * (1 + s_c) + t_c with per-channel vectors s, t.
Var film(const Var& x, const Var& s, const Var& t);

// ---- shape ----
Var reshape(const Var& x, std::vector<int64_t> shape);
Var concat_c(const Var& a, const Var& b);           // along dim 1 of (N,C,H,W)
Var slice_c(const Var& x, int64_t c0, int64_t c1);  // channels [c0,c1)
Var transpose01(const Var& x);                      // swap dims 0,1 of 4-D
Var upsample_nearest(const Var& x, int64_t ho, int64_t wo);
Var to_seq(const Var& x);                           // (T,C,H,W)->(H*W,T,C)
Var from_seq(const Var& x, int64_t h, int64_t w);   // inverse of to_seq
Var split_heads(const Var& x, int heads);           // (S,T,C)->(S*h,T,C/h)
Var merge_heads(const Var& x, int heads);
Var finite_diff_h(const Var& x);
Var finite_diff_w(const Var& x);

}  // namespace latvsr::ag
