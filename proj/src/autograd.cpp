#include "latvsr/autograd.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <unordered_set>

namespace latvsr::ag {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

namespace {

Var make_node(Tensor value, std::vector<Var> parents, std::function<void()> back) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool rg = false;
    for (const auto& p : parents)
        if (p && p->requires_grad) rg = true;
    n->requires_grad = rg;
    if (rg) {
        n->parents = std::move(parents);
        n->back = std::move(back);
    }
    return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = false;
    return n;
}

Var param(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return n;
}

void backward(const Var& root) {
    if (root->value.numel() != 1) throw std::invalid_argument("backward: root must be scalar");
    // Iterative post-order DFS to get a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->back) n->back();
    }
}

// ---- elementwise ----

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
    auto n = make_node(std::move(out), {a, b}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, b]() {
            const Tensor& g = np->grad;
            if (a->requires_grad) {
                Tensor& ga = a->ensure_grad();
                for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
            }
            if (b->requires_grad) {
                Tensor& gb = b->ensure_grad();
                for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
            }
        };
    }
    return n;
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
    auto n = make_node(std::move(out), {a, b}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, b]() {
            const Tensor& g = np->grad;
            if (a->requires_grad) {
                Tensor& ga = a->ensure_grad();
                for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
            }
            if (b->requires_grad) {
                Tensor& gb = b->ensure_grad();
                for (int64_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
            }
        };
    }
    return n;
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
    auto n = make_node(std::move(out), {a, b}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, b]() {
            const Tensor& g = np->grad;
            if (a->requires_grad) {
                Tensor& ga = a->ensure_grad();
                for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * b->value[i];
            }
            if (b->requires_grad) {
                Tensor& gb = b->ensure_grad();
                for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * a->value[i];
            }
        };
    }
    return n;
}

Var scale(const Var& a, double s) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * s;
    auto n = make_node(std::move(out), {a}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, s]() {
            Tensor& ga = a->ensure_grad();
            for (int64_t i = 0; i < np->grad.numel(); ++i) ga[i] += np->grad[i] * s;
        };
    }
    return n;
}

Var add_scalar(const Var& a, double s) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + s;
    auto n = make_node(std::move(out), {a}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a]() {
            Tensor& ga = a->ensure_grad();
            for (int64_t i = 0; i < np->grad.numel(); ++i) ga[i] += np->grad[i];
        };
    }
    return n;
}

Var silu(const Var& a) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) {
        double x = a->value[i];
        out[i] = x / (1.0 + std::exp(-x));
    }
    auto n = make_node(std::move(out), {a}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a]() {
            Tensor& ga = a->ensure_grad();
            for (int64_t i = 0; i < np->grad.numel(); ++i) {
                double x = a->value[i];
                double s = 1.0 / (1.0 + std::exp(-x));
                ga[i] += np->grad[i] * s * (1.0 + x * (1.0 - s));
            }
        };
    }
    return n;
}

Var relu(const Var& a) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
    auto n = make_node(std::move(out), {a}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a]() {
            Tensor& ga = a->ensure_grad();
            for (int64_t i = 0; i < np->grad.numel(); ++i)
                if (a->value[i] > 0.0) ga[i] += np->grad[i];
        };
    }
    return n;
}

Var expv(const Var& a) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(a->value[i]);
    auto n = make_node(std::move(out), {a}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a]() {
            Tensor& ga = a->ensure_grad();
            for (int64_t i = 0; i < np->grad.numel(); ++i) ga[i] += np->grad[i] * np->value[i];
        };
    }
    return n;
}

Var square(const Var& a) { return mul(a, a); }

// ---- reductions ----

Var sum(const Var& a) {
    double s = 0.0;
    for (int64_t i = 0; i < a->value.numel(); ++i) s += a->value[i];
    auto n = make_node(Tensor({1}, {s}), {a}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a]() {
            Tensor& ga = a->ensure_grad();
            double g = np->grad[0];
            for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
        };
    }
    return n;
}

Var mean(const Var& a) {
    int64_t m = a->value.numel();
    double s = 0.0;
    for (int64_t i = 0; i < m; ++i) s += a->value[i];
    auto n = make_node(Tensor({1}, {s / static_cast<double>(m)}), {a}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, m]() {
            Tensor& ga = a->ensure_grad();
            double g = np->grad[0] / static_cast<double>(m);
            for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
        };
    }
    return n;
}

Var mse(const Var& a, const Var& b) {
    check_same_shape(a, b, "mse");
    int64_t m = a->value.numel();
    double s = 0.0;
    for (int64_t i = 0; i < m; ++i) {
        double d = a->value[i] - b->value[i];
        s += d * d;
    }
    auto n = make_node(Tensor({1}, {s / static_cast<double>(m)}), {a, b}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, b, m]() {
            double g = np->grad[0] * 2.0 / static_cast<double>(m);
            for (int64_t i = 0; i < m; ++i) {
                double d = g * (a->value[i] - b->value[i]);
                if (a->requires_grad) a->ensure_grad()[i] += d;
                if (b->requires_grad) b->ensure_grad()[i] -= d;
            }
        };
    }
    return n;
}

Var l1(const Var& a, const Var& b) {
    check_same_shape(a, b, "l1");
    int64_t m = a->value.numel();
    double s = 0.0;
    for (int64_t i = 0; i < m; ++i) s += std::fabs(a->value[i] - b->value[i]);
    auto n = make_node(Tensor({1}, {s / static_cast<double>(m)}), {a, b}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, b, m]() {
            double g = np->grad[0] / static_cast<double>(m);
            for (int64_t i = 0; i < m; ++i) {
                double d = a->value[i] - b->value[i];
                double sg = d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
                if (a->requires_grad) a->ensure_grad()[i] += sg;
                if (b->requires_grad) b->ensure_grad()[i] -= sg;
            }
        };
    }
    return n;
}

// ---- linear algebra ----

Var matmul(const Var& a, const Var& b) {
    if (a->value.ndim() != 2 || b->value.ndim() != 2 || a->value.dim(1) != b->value.dim(0))
        throw std::invalid_argument("matmul: bad shapes");
    int64_t M = a->value.dim(0), K = a->value.dim(1), N = b->value.dim(1);
    Tensor out({M, N});
    MapM(out.data(), M, N).noalias() =
        MapCM(a->value.data(), M, K) * MapCM(b->value.data(), K, N);
    auto n = make_node(std::move(out), {a, b}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, b, M, K, N]() {
            MapCM g(np->grad.data(), M, N);
            if (a->requires_grad)
                MapM(a->ensure_grad().data(), M, K).noalias() +=
                    g * MapCM(b->value.data(), K, N).transpose();
            if (b->requires_grad)
                MapM(b->ensure_grad().data(), K, N).noalias() +=
                    MapCM(a->value.data(), M, K).transpose() * g;
        };
    }
    return n;
}

Var linear(const Var& x, const Var& w, const Var& b) {
    if (x->value.ndim() != 2 || w->value.ndim() != 2 || x->value.dim(1) != w->value.dim(0))
        throw std::invalid_argument("linear: bad shapes");
    int64_t N = x->value.dim(0), D = x->value.dim(1), O = w->value.dim(1);
    if (b && b->value.numel() != O) throw std::invalid_argument("linear: bad bias");
    Tensor out({N, O});
    MapM om(out.data(), N, O);
    om.noalias() = MapCM(x->value.data(), N, D) * MapCM(w->value.data(), D, O);
    if (b) om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b->value.data(), O);
    auto n = make_node(std::move(out), {x, w, b ? b : constant(Tensor({0}))}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, w, b, N, D, O]() {
            MapCM g(np->grad.data(), N, O);
            if (x->requires_grad)
                MapM(x->ensure_grad().data(), N, D).noalias() +=
                    g * MapCM(w->value.data(), D, O).transpose();
            if (w->requires_grad)
                MapM(w->ensure_grad().data(), D, O).noalias() +=
                    MapCM(x->value.data(), N, D).transpose() * g;
            if (b && b->requires_grad)
                Eigen::Map<Eigen::RowVectorXd>(b->ensure_grad().data(), O) += g.colwise().sum();
        };
    }
    return n;
}

Var bmm(const Var& a, const Var& b) {
    if (a->value.ndim() != 3 || b->value.ndim() != 3 || a->value.dim(0) != b->value.dim(0) ||
        a->value.dim(2) != b->value.dim(1))
        throw std::invalid_argument("bmm: bad shapes");
    int64_t B = a->value.dim(0), M = a->value.dim(1), K = a->value.dim(2), N = b->value.dim(2);
    Tensor out({B, M, N});
    for (int64_t i = 0; i < B; ++i)
        MapM(out.data() + i * M * N, M, N).noalias() =
            MapCM(a->value.data() + i * M * K, M, K) * MapCM(b->value.data() + i * K * N, K, N);
    auto n = make_node(std::move(out), {a, b}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, b, B, M, K, N]() {
            for (int64_t i = 0; i < B; ++i) {
                MapCM g(np->grad.data() + i * M * N, M, N);
                if (a->requires_grad)
                    MapM(a->ensure_grad().data() + i * M * K, M, K).noalias() +=
                        g * MapCM(b->value.data() + i * K * N, K, N).transpose();
                if (b->requires_grad)
                    MapM(b->ensure_grad().data() + i * K * N, K, N).noalias() +=
                        MapCM(a->value.data() + i * M * K, M, K).transpose() * g;
            }
        };
    }
    return n;
}

Var transpose12(const Var& a) {
    if (a->value.ndim() != 3) throw std::invalid_argument("transpose12: need 3-D");
    int64_t B = a->value.dim(0), M = a->value.dim(1), K = a->value.dim(2);
    Tensor out({B, K, M});
    for (int64_t i = 0; i < B; ++i)
        for (int64_t m = 0; m < M; ++m)
            for (int64_t k = 0; k < K; ++k) out.at3(i, k, m) = a->value.at3(i, m, k);
    auto n = make_node(std::move(out), {a}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, B, M, K]() {
            Tensor& ga = a->ensure_grad();
            for (int64_t i = 0; i < B; ++i)
                for (int64_t m = 0; m < M; ++m)
                    for (int64_t k = 0; k < K; ++k) ga.at3(i, m, k) += np->grad.at3(i, k, m);
        };
    }
    return n;
}

Var softmax_last(const Var& a) {
    if (a->value.ndim() != 3) throw std::invalid_argument("softmax_last: need 3-D");
    int64_t rows = a->value.dim(0) * a->value.dim(1), N = a->value.dim(2);
    Tensor out(a->value.shape());
    for (int64_t r = 0; r < rows; ++r) {
        const double* xi = a->value.data() + r * N;
        double* yo = out.data() + r * N;
        double mx = xi[0];
        for (int64_t j = 1; j < N; ++j) mx = std::max(mx, xi[j]);
        double s = 0.0;
        for (int64_t j = 0; j < N; ++j) {
            yo[j] = std::exp(xi[j] - mx);
            s += yo[j];
        }
        for (int64_t j = 0; j < N; ++j) yo[j] /= s;
    }
    auto n = make_node(std::move(out), {a}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, rows, N]() {
            Tensor& ga = a->ensure_grad();
            for (int64_t r = 0; r < rows; ++r) {
                const double* y = np->value.data() + r * N;
                const double* g = np->grad.data() + r * N;
                double dot = 0.0;
                for (int64_t j = 0; j < N; ++j) dot += g[j] * y[j];
                double* gx = ga.data() + r * N;
                for (int64_t j = 0; j < N; ++j) gx[j] += y[j] * (g[j] - dot);
            }
        };
    }
    return n;
}

// ---- convolution ----

namespace {

// im2col for (C,H,W) -> (C*kh*kw, Ho*Wo) with zero padding.
void im2col2d(const double* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
              int64_t stride, int64_t pad, int64_t Ho, int64_t Wo, double* col) {
    for (int64_t c = 0; c < C; ++c)
        for (int64_t i = 0; i < kh; ++i)
            for (int64_t j = 0; j < kw; ++j) {
                double* row = col + ((c * kh + i) * kw + j) * Ho * Wo;
                for (int64_t oh = 0; oh < Ho; ++oh) {
                    int64_t ih = oh * stride - pad + i;
                    if (ih < 0 || ih >= H) {
                        std::fill(row + oh * Wo, row + (oh + 1) * Wo, 0.0);
                        continue;
                    }
                    const double* xr = x + (c * H + ih) * W;
                    for (int64_t ow = 0; ow < Wo; ++ow) {
                        int64_t iw = ow * stride - pad + j;
                        row[oh * Wo + ow] = (iw >= 0 && iw < W) ? xr[iw] : 0.0;
                    }
                }
            }
}

void col2im2d(const double* col, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
              int64_t stride, int64_t pad, int64_t Ho, int64_t Wo, double* x) {
    for (int64_t c = 0; c < C; ++c)
        for (int64_t i = 0; i < kh; ++i)
            for (int64_t j = 0; j < kw; ++j) {
                const double* row = col + ((c * kh + i) * kw + j) * Ho * Wo;
                for (int64_t oh = 0; oh < Ho; ++oh) {
                    int64_t ih = oh * stride - pad + i;
                    if (ih < 0 || ih >= H) continue;
                    double* xr = x + (c * H + ih) * W;
                    for (int64_t ow = 0; ow < Wo; ++ow) {
                        int64_t iw = ow * stride - pad + j;
                        if (iw >= 0 && iw < W) xr[iw] += row[oh * Wo + ow];
                    }
                }
            }
}

int64_t conv_out(int64_t in, int64_t k, int64_t stride, int64_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    if (x->value.ndim() != 4 || w->value.ndim() != 4 || x->value.dim(1) != w->value.dim(1))
        throw std::invalid_argument("conv2d: bad shapes");
    int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    int64_t O = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
    int64_t Ho = conv_out(H, kh, stride, pad), Wo = conv_out(W, kw, stride, pad);
    if (Ho < 1 || Wo < 1) throw std::invalid_argument("conv2d: output would be empty");
    int64_t K = C * kh * kw, P = Ho * Wo;
    Tensor out({N, O, Ho, Wo});
    std::vector<double> col(static_cast<size_t>(K * P));
    for (int64_t nimg = 0; nimg < N; ++nimg) {
        im2col2d(x->value.data() + nimg * C * H * W, C, H, W, kh, kw, stride, pad, Ho, Wo,
                 col.data());
        MapM om(out.data() + nimg * O * P, O, P);
        om.noalias() = MapCM(w->value.data(), O, K) * MapCM(col.data(), K, P);
        if (b)
            for (int64_t o = 0; o < O; ++o) om.row(o).array() += b->value[o];
    }
    std::vector<Var> parents{x, w};
    if (b) parents.push_back(b);
    auto n = make_node(std::move(out), std::move(parents), nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, w, b, N, C, H, W, O, kh, kw, Ho, Wo, stride, pad, K, P]() {
            std::vector<double> col(static_cast<size_t>(K * P));
            std::vector<double> dcol(static_cast<size_t>(K * P));
            for (int64_t nimg = 0; nimg < N; ++nimg) {
                MapCM g(np->grad.data() + nimg * O * P, O, P);
                if (w->requires_grad || x->requires_grad)
                    im2col2d(x->value.data() + nimg * C * H * W, C, H, W, kh, kw, stride, pad,
                             Ho, Wo, col.data());
                if (w->requires_grad)
                    MapM(w->ensure_grad().data(), O, K).noalias() +=
                        g * MapCM(col.data(), K, P).transpose();
                if (x->requires_grad) {
                    MapM(dcol.data(), K, P).noalias() =
                        MapCM(w->value.data(), O, K).transpose() * g;
                    col2im2d(dcol.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
                             x->ensure_grad().data() + nimg * C * H * W);
                }
                if (b && b->requires_grad) {
                    Tensor& gb = b->ensure_grad();
                    for (int64_t o = 0; o < O; ++o) gb[o] += g.row(o).sum();
                }
            }
        };
    }
    return n;
}

namespace {

// im2col for (C,T,H,W) with temporal kernel kt (stride 1, pad kt/2) and
// spatial kernel kh x kw with the given spatial stride/pad.
void im2col3d(const double* x, int64_t C, int64_t T, int64_t H, int64_t W, int64_t kt,
              int64_t kh, int64_t kw, int64_t stride, int64_t pad, int64_t Ho, int64_t Wo,
              double* col) {
    int64_t tpad = kt / 2;
    int64_t P = T * Ho * Wo;
    for (int64_t c = 0; c < C; ++c)
        for (int64_t dt = 0; dt < kt; ++dt)
            for (int64_t i = 0; i < kh; ++i)
                for (int64_t j = 0; j < kw; ++j) {
                    double* row = col + (((c * kt + dt) * kh + i) * kw + j) * P;
                    for (int64_t t = 0; t < T; ++t) {
                        int64_t it = t - tpad + dt;
                        for (int64_t oh = 0; oh < Ho; ++oh) {
                            int64_t ih = oh * stride - pad + i;
                            double* dst = row + (t * Ho + oh) * Wo;
                            if (it < 0 || it >= T || ih < 0 || ih >= H) {
                                std::fill(dst, dst + Wo, 0.0);
                                continue;
                            }
                            const double* xr = x + ((c * T + it) * H + ih) * W;
                            for (int64_t ow = 0; ow < Wo; ++ow) {
                                int64_t iw = ow * stride - pad + j;
                                dst[ow] = (iw >= 0 && iw < W) ? xr[iw] : 0.0;
                            }
                        }
                    }
                }
}

void col2im3d(const double* col, int64_t C, int64_t T, int64_t H, int64_t W, int64_t kt,
              int64_t kh, int64_t kw, int64_t stride, int64_t pad, int64_t Ho, int64_t Wo,
              double* x) {
    int64_t tpad = kt / 2;
    int64_t P = T * Ho * Wo;
    for (int64_t c = 0; c < C; ++c)
        for (int64_t dt = 0; dt < kt; ++dt)
            for (int64_t i = 0; i < kh; ++i)
                for (int64_t j = 0; j < kw; ++j) {
                    const double* row = col + (((c * kt + dt) * kh + i) * kw + j) * P;
                    for (int64_t t = 0; t < T; ++t) {
                        int64_t it = t - tpad + dt;
                        if (it < 0 || it >= T) continue;
                        for (int64_t oh = 0; oh < Ho; ++oh) {
                            int64_t ih = oh * stride - pad + i;
                            if (ih < 0 || ih >= H) continue;
                            const double* src = row + (t * Ho + oh) * Wo;
                            double* xr = x + ((c * T + it) * H + ih) * W;
                            for (int64_t ow = 0; ow < Wo; ++ow) {
                                int64_t iw = ow * stride - pad + j;
                                if (iw >= 0 && iw < W) xr[iw] += src[ow];
                            }
                        }
                    }
                }
}

}  // namespace

Var conv3d(const Var& x, const Var& w, const Var& b, int stride) {
    if (x->value.ndim() != 4 || w->value.ndim() != 5 || x->value.dim(0) != w->value.dim(1))
        throw std::invalid_argument("conv3d: bad shapes");
    int64_t C = x->value.dim(0), T = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    int64_t O = w->value.dim(0), kt = w->value.dim(2), kh = w->value.dim(3), kw = w->value.dim(4);
    int64_t pad = kh / 2;
    int64_t Ho = conv_out(H, kh, stride, pad), Wo = conv_out(W, kw, stride, pad);
    if (Ho < 1 || Wo < 1) throw std::invalid_argument("conv3d: output would be empty");
    int64_t K = C * kt * kh * kw, P = T * Ho * Wo;
    Tensor out({O, T, Ho, Wo});
    std::vector<double> col(static_cast<size_t>(K * P));
    im2col3d(x->value.data(), C, T, H, W, kt, kh, kw, stride, pad, Ho, Wo, col.data());
    MapM om(out.data(), O, P);
    om.noalias() = MapCM(w->value.data(), O, K) * MapCM(col.data(), K, P);
    if (b)
        for (int64_t o = 0; o < O; ++o) om.row(o).array() += b->value[o];
    std::vector<Var> parents{x, w};
    if (b) parents.push_back(b);
    auto n = make_node(std::move(out), std::move(parents), nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, w, b, C, T, H, W, O, kt, kh, kw, Ho, Wo, stride, pad, K, P]() {
            std::vector<double> col(static_cast<size_t>(K * P));
            MapCM g(np->grad.data(), O, P);
            if (w->requires_grad || x->requires_grad)
                im2col3d(x->value.data(), C, T, H, W, kt, kh, kw, stride, pad, Ho, Wo,
                         col.data());
            if (w->requires_grad)
                MapM(w->ensure_grad().data(), O, K).noalias() +=
                    g * MapCM(col.data(), K, P).transpose();
            if (x->requires_grad) {
                std::vector<double> dcol(static_cast<size_t>(K * P));
                MapM(dcol.data(), K, P).noalias() = MapCM(w->value.data(), O, K).transpose() * g;
                col2im3d(dcol.data(), C, T, H, W, kt, kh, kw, stride, pad, Ho, Wo,
                         x->ensure_grad().data());
            }
            if (b && b->requires_grad) {
                Tensor& gb = b->ensure_grad();
                for (int64_t o = 0; o < O; ++o) gb[o] += g.row(o).sum();
            }
        };
    }
    return n;
}

// ---- normalization ----

namespace {
constexpr double kNormEps = 1e-5;

// Shared normalization backward over contiguous slices of length m:
// dx = istd * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)).
void norm_backward_slice(const double* xhat, const double* dxhat, double istd, int64_t m,
                         double* dx) {
    double s1 = 0.0, s2 = 0.0;
    for (int64_t i = 0; i < m; ++i) {
        s1 += dxhat[i];
        s2 += dxhat[i] * xhat[i];
    }
    s1 /= static_cast<double>(m);
    s2 /= static_cast<double>(m);
    for (int64_t i = 0; i < m; ++i) dx[i] += istd * (dxhat[i] - s1 - xhat[i] * s2);
}
}  // namespace

Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta) {
    if (x->value.ndim() != 4) throw std::invalid_argument("group_norm: need 4-D");
    int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    if (C % groups != 0) throw std::invalid_argument("group_norm: channels not divisible");
    if (gamma->value.numel() != C || beta->value.numel() != C)
        throw std::invalid_argument("group_norm: bad affine shapes");
    int64_t cg = C / groups, m = cg * H * W, hw = H * W;
    Tensor out(x->value.shape());
    // xhat and istd are needed by backward; stash them in shared buffers.
    auto xhat = std::make_shared<Tensor>(x->value.shape());
    auto istd = std::make_shared<std::vector<double>>(static_cast<size_t>(N * groups));
    for (int64_t nimg = 0; nimg < N; ++nimg)
        for (int64_t g = 0; g < groups; ++g) {
            const double* xs = x->value.data() + (nimg * C + g * cg) * hw;
            double mu = 0.0;
            for (int64_t i = 0; i < m; ++i) mu += xs[i];
            mu /= static_cast<double>(m);
            double var = 0.0;
            for (int64_t i = 0; i < m; ++i) {
                double d = xs[i] - mu;
                var += d * d;
            }
            var /= static_cast<double>(m);
            double is = 1.0 / std::sqrt(var + kNormEps);
            (*istd)[static_cast<size_t>(nimg * groups + g)] = is;
            double* xh = xhat->data() + (nimg * C + g * cg) * hw;
            double* yo = out.data() + (nimg * C + g * cg) * hw;
            for (int64_t c = 0; c < cg; ++c) {
                double ga = gamma->value[g * cg + c], be = beta->value[g * cg + c];
                for (int64_t i = 0; i < hw; ++i) {
                    double h = (xs[c * hw + i] - mu) * is;
                    xh[c * hw + i] = h;
                    yo[c * hw + i] = ga * h + be;
                }
            }
        }
    auto n = make_node(std::move(out), {x, gamma, beta}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        int64_t gi = groups;
        n->back = [np, x, gamma, beta, xhat, istd, N, C, H, W, cg, m, hw, gi]() {
            std::vector<double> dxhat(static_cast<size_t>(m));
            for (int64_t nimg = 0; nimg < N; ++nimg)
                for (int64_t g = 0; g < gi; ++g) {
                    const double* gr = np->grad.data() + (nimg * C + g * cg) * hw;
                    const double* xh = xhat->data() + (nimg * C + g * cg) * hw;
                    for (int64_t c = 0; c < cg; ++c) {
                        double ga = gamma->value[g * cg + c];
                        double dg = 0.0, db = 0.0;
                        for (int64_t i = 0; i < hw; ++i) {
                            dxhat[c * hw + i] = gr[c * hw + i] * ga;
                            dg += gr[c * hw + i] * xh[c * hw + i];
                            db += gr[c * hw + i];
                        }
                        if (gamma->requires_grad) gamma->ensure_grad()[g * cg + c] += dg;
                        if (beta->requires_grad) beta->ensure_grad()[g * cg + c] += db;
                    }
                    if (x->requires_grad)
                        norm_backward_slice(xh, dxhat.data(),
                                            (*istd)[static_cast<size_t>(nimg * gi + g)], m,
                                            x->ensure_grad().data() + (nimg * C + g * cg) * hw);
                }
        };
    }
    return n;
}

Var layer_norm_c(const Var& x) {
    if (x->value.ndim() != 4) throw std::invalid_argument("layer_norm_c: need 4-D");
    int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    int64_t hw = H * W;
    Tensor out(x->value.shape());
    auto istd = std::make_shared<std::vector<double>>(static_cast<size_t>(N * hw));
    for (int64_t nimg = 0; nimg < N; ++nimg)
        for (int64_t p = 0; p < hw; ++p) {
            double mu = 0.0;
            for (int64_t c = 0; c < C; ++c) mu += x->value[(nimg * C + c) * hw + p];
            mu /= static_cast<double>(C);
            double var = 0.0;
            for (int64_t c = 0; c < C; ++c) {
                double d = x->value[(nimg * C + c) * hw + p] - mu;
                var += d * d;
            }
            var /= static_cast<double>(C);
            double is = 1.0 / std::sqrt(var + kNormEps);
            (*istd)[static_cast<size_t>(nimg * hw + p)] = is;
            for (int64_t c = 0; c < C; ++c)
                out[(nimg * C + c) * hw + p] = (x->value[(nimg * C + c) * hw + p] - mu) * is;
        }
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, istd, N, C, hw]() {
            Tensor& gx = x->ensure_grad();
            std::vector<double> xh(static_cast<size_t>(C)), dh(static_cast<size_t>(C)),
                dx(static_cast<size_t>(C));
            for (int64_t nimg = 0; nimg < N; ++nimg)
                for (int64_t p = 0; p < hw; ++p) {
                    for (int64_t c = 0; c < C; ++c) {
                        xh[static_cast<size_t>(c)] = np->value[(nimg * C + c) * hw + p];
                        dh[static_cast<size_t>(c)] = np->grad[(nimg * C + c) * hw + p];
                        dx[static_cast<size_t>(c)] = 0.0;
                    }
                    norm_backward_slice(xh.data(), dh.data(),
                                        (*istd)[static_cast<size_t>(nimg * hw + p)], C,
                                        dx.data());
                    for (int64_t c = 0; c < C; ++c)
                        gx[(nimg * C + c) * hw + p] += dx[static_cast<size_t>(c)];
                }
        };
    }
    return n;
}

Var film(const Var& x, const Var& s, const Var& t) {
    if (x->value.ndim() != 4) throw std::invalid_argument("film: need 4-D input");
    int64_t N = x->value.dim(0), C = x->value.dim(1), hw = x->value.dim(2) * x->value.dim(3);
    if (s->value.numel() != C || t->value.numel() != C)
        throw std::invalid_argument("film: modulation size mismatch");
    Tensor out(x->value.shape());
    for (int64_t nimg = 0; nimg < N; ++nimg)
        for (int64_t c = 0; c < C; ++c) {
            double sc = 1.0 + s->value[c], tc = t->value[c];
            const double* xi = x->value.data() + (nimg * C + c) * hw;
            double* yo = out.data() + (nimg * C + c) * hw;
            for (int64_t i = 0; i < hw; ++i) yo[i] = xi[i] * sc + tc;
        }
    auto n = make_node(std::move(out), {x, s, t}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, s, t, N, C, hw]() {
            for (int64_t nimg = 0; nimg < N; ++nimg)
                for (int64_t c = 0; c < C; ++c) {
                    const double* g = np->grad.data() + (nimg * C + c) * hw;
                    const double* xi = x->value.data() + (nimg * C + c) * hw;
                    if (x->requires_grad) {
                        double sc = 1.0 + s->value[c];
                        double* gx = x->ensure_grad().data() + (nimg * C + c) * hw;
                        for (int64_t i = 0; i < hw; ++i) gx[i] += g[i] * sc;
                    }
                    if (s->requires_grad || t->requires_grad) {
                        double ds = 0.0, dt = 0.0;
                        for (int64_t i = 0; i < hw; ++i) {
                            ds += g[i] * xi[i];
                            dt += g[i];
                        }
                        if (s->requires_grad) s->ensure_grad()[c] += ds;
                        if (t->requires_grad) t->ensure_grad()[c] += dt;
                    }
                }
        };
    }
    return n;
}

// ---- shape ops ----

Var reshape(const Var& x, std::vector<int64_t> shape) {
    Tensor out = x->value.reshaped(std::move(shape));
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x]() {
            Tensor& gx = x->ensure_grad();
            for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += np->grad[i];
        };
    }
    return n;
}

Var concat_c(const Var& a, const Var& b) {
    if (a->value.ndim() != 4 || b->value.ndim() != 4)
        throw std::invalid_argument("concat_c: need 4-D");
    int64_t N = a->value.dim(0), Ca = a->value.dim(1), Cb = b->value.dim(1);
    int64_t H = a->value.dim(2), W = a->value.dim(3);
    if (b->value.dim(0) != N || b->value.dim(2) != H || b->value.dim(3) != W)
        throw std::invalid_argument("concat_c: geometry mismatch");
    int64_t hw = H * W;
    Tensor out({N, Ca + Cb, H, W});
    for (int64_t nimg = 0; nimg < N; ++nimg) {
        std::copy(a->value.data() + nimg * Ca * hw, a->value.data() + (nimg + 1) * Ca * hw,
                  out.data() + nimg * (Ca + Cb) * hw);
        std::copy(b->value.data() + nimg * Cb * hw, b->value.data() + (nimg + 1) * Cb * hw,
                  out.data() + (nimg * (Ca + Cb) + Ca) * hw);
    }
    auto n = make_node(std::move(out), {a, b}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, a, b, N, Ca, Cb, hw]() {
            for (int64_t nimg = 0; nimg < N; ++nimg) {
                if (a->requires_grad) {
                    double* ga = a->ensure_grad().data() + nimg * Ca * hw;
                    const double* g = np->grad.data() + nimg * (Ca + Cb) * hw;
                    for (int64_t i = 0; i < Ca * hw; ++i) ga[i] += g[i];
                }
                if (b->requires_grad) {
                    double* gb = b->ensure_grad().data() + nimg * Cb * hw;
                    const double* g = np->grad.data() + (nimg * (Ca + Cb) + Ca) * hw;
                    for (int64_t i = 0; i < Cb * hw; ++i) gb[i] += g[i];
                }
            }
        };
    }
    return n;
}

Var slice_c(const Var& x, int64_t c0, int64_t c1) {
    if (x->value.ndim() != 4 || c0 < 0 || c1 > x->value.dim(1) || c0 >= c1)
        throw std::invalid_argument("slice_c: bad range");
    int64_t N = x->value.dim(0), C = x->value.dim(1), hw = x->value.dim(2) * x->value.dim(3);
    int64_t Cs = c1 - c0;
    Tensor out({N, Cs, x->value.dim(2), x->value.dim(3)});
    for (int64_t nimg = 0; nimg < N; ++nimg)
        std::copy(x->value.data() + (nimg * C + c0) * hw, x->value.data() + (nimg * C + c1) * hw,
                  out.data() + nimg * Cs * hw);
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, N, C, c0, Cs, hw]() {
            Tensor& gx = x->ensure_grad();
            for (int64_t nimg = 0; nimg < N; ++nimg) {
                double* g = gx.data() + (nimg * C + c0) * hw;
                const double* go = np->grad.data() + nimg * Cs * hw;
                for (int64_t i = 0; i < Cs * hw; ++i) g[i] += go[i];
            }
        };
    }
    return n;
}

Var transpose01(const Var& x) {
    if (x->value.ndim() != 4) throw std::invalid_argument("transpose01: need 4-D");
    int64_t A = x->value.dim(0), B = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    int64_t hw = H * W;
    Tensor out({B, A, H, W});
    for (int64_t a = 0; a < A; ++a)
        for (int64_t b = 0; b < B; ++b)
            std::copy(x->value.data() + (a * B + b) * hw, x->value.data() + (a * B + b + 1) * hw,
                      out.data() + (b * A + a) * hw);
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, A, B, hw]() {
            Tensor& gx = x->ensure_grad();
            for (int64_t a = 0; a < A; ++a)
                for (int64_t b = 0; b < B; ++b) {
                    double* g = gx.data() + (a * B + b) * hw;
                    const double* go = np->grad.data() + (b * A + a) * hw;
                    for (int64_t i = 0; i < hw; ++i) g[i] += go[i];
                }
        };
    }
    return n;
}

Var upsample_nearest(const Var& x, int64_t ho, int64_t wo) {
    if (x->value.ndim() != 4) throw std::invalid_argument("upsample_nearest: need 4-D");
    int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    if (ho < H || wo < W) throw std::invalid_argument("upsample_nearest: target smaller than input");
    Tensor out({N, C, ho, wo});
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* xi = x->value.data() + nc * H * W;
        double* yo = out.data() + nc * ho * wo;
        for (int64_t i = 0; i < ho; ++i) {
            int64_t ih = i * H / ho;
            for (int64_t j = 0; j < wo; ++j) yo[i * wo + j] = xi[ih * W + j * W / wo];
        }
    }
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, N, C, H, W, ho, wo]() {
            Tensor& gx = x->ensure_grad();
            for (int64_t nc = 0; nc < N * C; ++nc) {
                double* g = gx.data() + nc * H * W;
                const double* go = np->grad.data() + nc * ho * wo;
                for (int64_t i = 0; i < ho; ++i) {
                    int64_t ih = i * H / ho;
                    for (int64_t j = 0; j < wo; ++j) g[ih * W + j * W / wo] += go[i * wo + j];
                }
            }
        };
    }
    return n;
}

Var to_seq(const Var& x) {
    if (x->value.ndim() != 4) throw std::invalid_argument("to_seq: need 4-D");
    int64_t T = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    int64_t S = H * W;
    Tensor out({S, T, C});
    for (int64_t t = 0; t < T; ++t)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t s = 0; s < S; ++s) out.at3(s, t, c) = x->value[(t * C + c) * S + s];
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, T, C, S]() {
            Tensor& gx = x->ensure_grad();
            for (int64_t t = 0; t < T; ++t)
                for (int64_t c = 0; c < C; ++c)
                    for (int64_t s = 0; s < S; ++s)
                        gx[(t * C + c) * S + s] += np->grad.at3(s, t, c);
        };
    }
    return n;
}

Var from_seq(const Var& x, int64_t h, int64_t w) {
    if (x->value.ndim() != 3 || x->value.dim(0) != h * w)
        throw std::invalid_argument("from_seq: bad shapes");
    int64_t S = x->value.dim(0), T = x->value.dim(1), C = x->value.dim(2);
    Tensor out({T, C, h, w});
    for (int64_t t = 0; t < T; ++t)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t s = 0; s < S; ++s) out[(t * C + c) * S + s] = x->value.at3(s, t, c);
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, T, C, S]() {
            Tensor& gx = x->ensure_grad();
            for (int64_t t = 0; t < T; ++t)
                for (int64_t c = 0; c < C; ++c)
                    for (int64_t s = 0; s < S; ++s)
                        gx.at3(s, t, c) += np->grad[(t * C + c) * S + s];
        };
    }
    return n;
}

Var split_heads(const Var& x, int heads) {
    if (x->value.ndim() != 3 || x->value.dim(2) % heads != 0)
        throw std::invalid_argument("split_heads: bad shapes");
    int64_t S = x->value.dim(0), T = x->value.dim(1), C = x->value.dim(2), Ch = C / heads;
    Tensor out({S * heads, T, Ch});
    for (int64_t s = 0; s < S; ++s)
        for (int64_t j = 0; j < heads; ++j)
            for (int64_t t = 0; t < T; ++t)
                for (int64_t d = 0; d < Ch; ++d)
                    out.at3(s * heads + j, t, d) = x->value.at3(s, t, j * Ch + d);
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        int64_t h = heads;
        n->back = [np, x, S, T, Ch, h]() {
            Tensor& gx = x->ensure_grad();
            for (int64_t s = 0; s < S; ++s)
                for (int64_t j = 0; j < h; ++j)
                    for (int64_t t = 0; t < T; ++t)
                        for (int64_t d = 0; d < Ch; ++d)
                            gx.at3(s, t, j * Ch + d) += np->grad.at3(s * h + j, t, d);
        };
    }
    return n;
}

Var merge_heads(const Var& x, int heads) {
    if (x->value.ndim() != 3 || x->value.dim(0) % heads != 0)
        throw std::invalid_argument("merge_heads: bad shapes");
    int64_t S = x->value.dim(0) / heads, T = x->value.dim(1), Ch = x->value.dim(2);
    Tensor out({S, T, Ch * heads});
    for (int64_t s = 0; s < S; ++s)
        for (int64_t j = 0; j < heads; ++j)
            for (int64_t t = 0; t < T; ++t)
                for (int64_t d = 0; d < Ch; ++d)
                    out.at3(s, t, j * Ch + d) = x->value.at3(s * heads + j, t, d);
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        int64_t h = heads;
        n->back = [np, x, S, T, Ch, h]() {
            Tensor& gx = x->ensure_grad();
            for (int64_t s = 0; s < S; ++s)
                for (int64_t j = 0; j < h; ++j)
                    for (int64_t t = 0; t < T; ++t)
                        for (int64_t d = 0; d < Ch; ++d)
                            gx.at3(s * h + j, t, d) += np->grad.at3(s, t, j * Ch + d);
        };
    }
    return n;
}

Var finite_diff_h(const Var& x) {
    if (x->value.ndim() != 4 || x->value.dim(2) < 2)
        throw std::invalid_argument("finite_diff_h: bad shape");
    int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    Tensor out({N, C, H - 1, W});
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* xi = x->value.data() + nc * H * W;
        double* yo = out.data() + nc * (H - 1) * W;
        for (int64_t i = 0; i < (H - 1) * W; ++i) yo[i] = xi[i + W] - xi[i];
    }
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, N, C, H, W]() {
            Tensor& gx = x->ensure_grad();
            for (int64_t nc = 0; nc < N * C; ++nc) {
                double* g = gx.data() + nc * H * W;
                const double* go = np->grad.data() + nc * (H - 1) * W;
                for (int64_t i = 0; i < (H - 1) * W; ++i) {
                    g[i + W] += go[i];
                    g[i] -= go[i];
                }
            }
        };
    }
    return n;
}

Var finite_diff_w(const Var& x) {
    if (x->value.ndim() != 4 || x->value.dim(3) < 2)
        throw std::invalid_argument("finite_diff_w: bad shape");
    int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    Tensor out({N, C, H, W - 1});
    for (int64_t nch = 0; nch < N * C * H; ++nch) {
        const double* xi = x->value.data() + nch * W;
        double* yo = out.data() + nch * (W - 1);
        for (int64_t j = 0; j < W - 1; ++j) yo[j] = xi[j + 1] - xi[j];
    }
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* np = n.get();
        n->back = [np, x, N, C, H, W]() {
            Tensor& gx = x->ensure_grad();
            for (int64_t nch = 0; nch < N * C * H; ++nch) {
                double* g = gx.data() + nch * W;
                const double* go = np->grad.data() + nch * (W - 1);
                for (int64_t j = 0; j < W - 1; ++j) {
                    g[j + 1] += go[j];
                    g[j] -= go[j];
                }
            }
        };
    }
    return n;
}

}  // namespace latvsr::ag
