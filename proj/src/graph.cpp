#include "owsm/graph.hpp"

#include "owsm/kernels.hpp"
#include "owsm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace owsm {

namespace {

template <class Real>
void require_rank2(const TensorT<Real>& t, const char* op) {
    if (t.rank() != 2) throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

} // namespace

template <class Real>
typename Graph<Real>::Id Graph<Real>::push(TensorT<Real> val, bool needs_grad, std::function<void(Graph&)> back) {
    Node n;
    n.val = std::move(val);
    n.needs_grad = record_ && needs_grad;
    if (n.needs_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size()) - 1;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::leaf(TensorT<Real> value, bool needs_grad) {
    return push(std::move(value), needs_grad, {});
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::use(ParameterT<Real>& p) {
    Id id = push(p.value, true, {});
    if (record_) bindings_.emplace_back(id, &p);
    return id;
}

// Gradient accumulation helpers. Parents that do not require grads are
// skipped entirely; buffers are allocated on first touch.

template <class Real>
void Graph<Real>::backward(Id loss) {
    if (!record_) throw std::logic_error("backward on a non-recording graph");
    auto& lg = grad_at(loss);
    for (auto& g : lg) g = Real(1);
    for (Id i = loss; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.back && n.val.has_grad()) n.back(*this);
    }
    for (auto& [id, p] : bindings_) {
        auto& n = nodes_[static_cast<size_t>(id)];
        if (n.val.has_grad())
            kernels::axpy(Real(1), n.val.grad().data(), p->grad.vec().data(), p->grad.vec().size());
    }
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::add(Id a, Id b) {
    const auto& ta = value(a);
    const auto& tb = value(b);
    if (ta.shape() != tb.shape())
        throw std::invalid_argument("add: shape mismatch " + shape_str(ta.shape()) + " vs " + shape_str(tb.shape()));
    TensorT<Real> out(ta.shape());
    kernels::add(ta.data(), tb.data(), out.data(), out.numel());
    Id y = push(std::move(out), wants_grad(a) || wants_grad(b), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, a, b](Graph& g) {
            const auto& gy = g.grad_at(y);
            if (g.wants_grad(a)) kernels::axpy(Real(1), gy.data(), g.grad_at(a).data(), gy.size());
            if (g.wants_grad(b)) kernels::axpy(Real(1), gy.data(), g.grad_at(b).data(), gy.size());
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::mul(Id a, Id b) {
    const auto& ta = value(a);
    const auto& tb = value(b);
    if (ta.shape() != tb.shape())
        throw std::invalid_argument("mul: shape mismatch " + shape_str(ta.shape()) + " vs " + shape_str(tb.shape()));
    TensorT<Real> out(ta.shape());
    kernels::mul(ta.data(), tb.data(), out.data(), out.numel());
    Id y = push(std::move(out), wants_grad(a) || wants_grad(b), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, a, b](Graph& g) {
            const auto& gy = g.grad_at(y);
            if (g.wants_grad(a)) {
                auto& ga = g.grad_at(a);
                const auto& vb = g.value(b).vec();
                for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * vb[i];
            }
            if (g.wants_grad(b)) {
                auto& gb = g.grad_at(b);
                const auto& va = g.value(a).vec();
                for (size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * va[i];
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::scale(Id a, Real s) {
    const auto& ta = value(a);
    TensorT<Real> out(ta.shape());
    kernels::scale(ta.data(), s, out.data(), out.numel());
    Id y = push(std::move(out), wants_grad(a), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, a, s](Graph& g) {
            const auto& gy = g.grad_at(y);
            kernels::axpy(s, gy.data(), g.grad_at(a).data(), gy.size());
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::add_rowvec(Id x, Id b) {
    const auto& tx = value(x);
    const auto& tb = value(b);
    require_rank2(tx, "add_rowvec");
    const int R = tx.dim(0), C = tx.dim(1);
    if (tb.numel() != static_cast<size_t>(C))
        throw std::invalid_argument("add_rowvec: bias length " + std::to_string(tb.numel()) + " vs " + std::to_string(C) + " columns");
    TensorT<Real> out(tx.shape());
    for (int r = 0; r < R; ++r)
        kernels::add(tx.data() + static_cast<size_t>(r) * C, tb.data(), out.data() + static_cast<size_t>(r) * C,
                     static_cast<size_t>(C));
    Id y = push(std::move(out), wants_grad(x) || wants_grad(b), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, x, b, R, C](Graph& g) {
            const auto& gy = g.grad_at(y);
            if (g.wants_grad(x)) kernels::axpy(Real(1), gy.data(), g.grad_at(x).data(), gy.size());
            if (g.wants_grad(b)) {
                auto& gb = g.grad_at(b);
                for (int c = 0; c < C; ++c) {
                    double acc = 0.0;
                    for (int r = 0; r < R; ++r) acc += static_cast<double>(gy[static_cast<size_t>(r) * C + c]);
                    gb[static_cast<size_t>(c)] += static_cast<Real>(acc);
                }
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::matmul(Id a, Id b) {
    const auto& ta = value(a);
    const auto& tb = value(b);
    require_rank2(ta, "matmul");
    require_rank2(tb, "matmul");
    const int m = ta.dim(0), k = ta.dim(1), k2 = tb.dim(0), n = tb.dim(1);
    if (k != k2)
        throw std::invalid_argument("matmul: inner dimensions do not match: " + shape_str(ta.shape()) + " x " +
                                    shape_str(tb.shape()));
    TensorT<Real> out({m, n});
    kernels::mm(ta.data(), tb.data(), out.data(), m, k, n);
    Id y = push(std::move(out), wants_grad(a) || wants_grad(b), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, a, b, m, k, n](Graph& g) {
            const auto& gy = g.grad_at(y);
            if (g.wants_grad(a)) {
                // dA += dC * B^T
                std::vector<Real> bt(static_cast<size_t>(k) * n);
                kernels::transpose(g.value(b).data(), bt.data(), k, n);
                std::vector<Real> tmp(static_cast<size_t>(m) * k);
                kernels::mm(gy.data(), bt.data(), tmp.data(), m, n, k);
                kernels::axpy(Real(1), tmp.data(), g.grad_at(a).data(), tmp.size());
            }
            if (g.wants_grad(b)) {
                // dB += A^T * dC
                std::vector<Real> at(static_cast<size_t>(m) * k);
                kernels::transpose(g.value(a).data(), at.data(), m, k);
                std::vector<Real> tmp(static_cast<size_t>(k) * n);
                kernels::mm(at.data(), gy.data(), tmp.data(), k, m, n);
                kernels::axpy(Real(1), tmp.data(), g.grad_at(b).data(), tmp.size());
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::matmul_nt(Id a, Id b) {
    const auto& ta = value(a);
    const auto& tb = value(b);
    require_rank2(ta, "matmul_nt");
    require_rank2(tb, "matmul_nt");
    const int m = ta.dim(0), k = ta.dim(1), n = tb.dim(0);
    if (tb.dim(1) != k)
        throw std::invalid_argument("matmul_nt: inner dimensions do not match: " + shape_str(ta.shape()) + " x " +
                                    shape_str(tb.shape()) + "^T");
    std::vector<Real> bt(static_cast<size_t>(k) * n);
    kernels::transpose(tb.data(), bt.data(), n, k);
    TensorT<Real> out({m, n});
    kernels::mm(ta.data(), bt.data(), out.data(), m, k, n);
    Id y = push(std::move(out), wants_grad(a) || wants_grad(b), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, a, b, m, k, n](Graph& g) {
            const auto& gy = g.grad_at(y);
            if (g.wants_grad(a)) {
                // dA += dC * B
                std::vector<Real> tmp(static_cast<size_t>(m) * k);
                kernels::mm(gy.data(), g.value(b).data(), tmp.data(), m, n, k);
                kernels::axpy(Real(1), tmp.data(), g.grad_at(a).data(), tmp.size());
            }
            if (g.wants_grad(b)) {
                // dB += dC^T * A
                std::vector<Real> gt(static_cast<size_t>(m) * n);
                kernels::transpose(gy.data(), gt.data(), m, n);
                std::vector<Real> tmp(static_cast<size_t>(n) * k);
                kernels::mm(gt.data(), g.value(a).data(), tmp.data(), n, m, k);
                kernels::axpy(Real(1), tmp.data(), g.grad_at(b).data(), tmp.size());
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::softmax_rows(Id x) {
    const auto& tx = value(x);
    require_rank2(tx, "softmax_rows");
    const int R = tx.dim(0), C = tx.dim(1);
    TensorT<Real> out(tx.shape());
    for (int r = 0; r < R; ++r) {
        const Real* row = tx.data() + static_cast<size_t>(r) * C;
        Real* orow = out.data() + static_cast<size_t>(r) * C;
        double mx = static_cast<double>(row[0]);
        for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(row[c]));
        double sum = 0.0;
        for (int c = 0; c < C; ++c) sum += std::exp(static_cast<double>(row[c]) - mx);
        for (int c = 0; c < C; ++c) orow[c] = static_cast<Real>(std::exp(static_cast<double>(row[c]) - mx) / sum);
    }
    Id y = push(std::move(out), wants_grad(x), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, x, R, C](Graph& g) {
            const auto& gy = g.grad_at(y);
            const auto& p = g.value(y).vec();
            auto& gx = g.grad_at(x);
            for (int r = 0; r < R; ++r) {
                const size_t base = static_cast<size_t>(r) * C;
                double dot = 0.0;
                for (int c = 0; c < C; ++c) dot += static_cast<double>(gy[base + c]) * static_cast<double>(p[base + c]);
                for (int c = 0; c < C; ++c)
                    gx[base + c] += static_cast<Real>(static_cast<double>(p[base + c]) *
                                                      (static_cast<double>(gy[base + c]) - dot));
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::causal_mask(Id s) {
    const auto& ts = value(s);
    require_rank2(ts, "causal_mask");
    const int L = ts.dim(0);
    if (ts.dim(1) != L) throw std::invalid_argument("causal_mask: expected square scores, got " + shape_str(ts.shape()));
    TensorT<Real> out = ts.clone();
    for (int i = 0; i < L; ++i)
        for (int j = i + 1; j < L; ++j) out.at(i, j) = Real(-1e30);
    Id y = push(std::move(out), wants_grad(s), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, s, L](Graph& g) {
            const auto& gy = g.grad_at(y);
            auto& gs = g.grad_at(s);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j <= i; ++j) gs[static_cast<size_t>(i) * L + j] += gy[static_cast<size_t>(i) * L + j];
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::layer_norm(Id x, Id gamma, Id beta, Real eps) {
    const auto& tx = value(x);
    require_rank2(tx, "layer_norm");
    const int R = tx.dim(0), C = tx.dim(1);
    if (C < 2) throw std::invalid_argument("layer_norm: last dimension must be >= 2, got " + shape_str(tx.shape()));
    if (eps <= Real(0)) throw std::invalid_argument("layer_norm: eps must be positive");
    const auto& tg = value(gamma);
    const auto& tb = value(beta);
    if (tg.numel() != static_cast<size_t>(C) || tb.numel() != static_cast<size_t>(C))
        throw std::invalid_argument("layer_norm: gamma/beta length must equal last dimension");

    auto xhat = std::make_shared<std::vector<Real>>(tx.numel());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(R));
    TensorT<Real> out(tx.shape());
    for (int r = 0; r < R; ++r) {
        const size_t base = static_cast<size_t>(r) * C;
        double mean = 0.0;
        for (int c = 0; c < C; ++c) mean += static_cast<double>(tx.at(base + c));
        mean /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) {
            const double d = static_cast<double>(tx.at(base + c)) - mean;
            var += d * d;
        }
        var /= C;
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
        (*inv_std)[static_cast<size_t>(r)] = inv;
        for (int c = 0; c < C; ++c) {
            const double xh = (static_cast<double>(tx.at(base + c)) - mean) * inv;
            (*xhat)[base + c] = static_cast<Real>(xh);
            out.at(base + c) = static_cast<Real>(xh * static_cast<double>(tg.at(static_cast<size_t>(c))) +
                                                 static_cast<double>(tb.at(static_cast<size_t>(c))));
        }
    }
    Id y = push(std::move(out), wants_grad(x) || wants_grad(gamma) || wants_grad(beta), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, x, gamma, beta, R, C, xhat, inv_std](Graph& g) {
            const auto& gy = g.grad_at(y);
            const auto& tg = g.value(gamma).vec();
            if (g.wants_grad(gamma)) {
                auto& gg = g.grad_at(gamma);
                for (int c = 0; c < C; ++c) {
                    double acc = 0.0;
                    for (int r = 0; r < R; ++r) {
                        const size_t i = static_cast<size_t>(r) * C + c;
                        acc += static_cast<double>(gy[i]) * static_cast<double>((*xhat)[i]);
                    }
                    gg[static_cast<size_t>(c)] += static_cast<Real>(acc);
                }
            }
            if (g.wants_grad(beta)) {
                auto& gb = g.grad_at(beta);
                for (int c = 0; c < C; ++c) {
                    double acc = 0.0;
                    for (int r = 0; r < R; ++r) acc += static_cast<double>(gy[static_cast<size_t>(r) * C + c]);
                    gb[static_cast<size_t>(c)] += static_cast<Real>(acc);
                }
            }
            if (g.wants_grad(x)) {
                auto& gx = g.grad_at(x);
                for (int r = 0; r < R; ++r) {
                    const size_t base = static_cast<size_t>(r) * C;
                    double m1 = 0.0, m2 = 0.0;
                    for (int c = 0; c < C; ++c) {
                        const double dxh = static_cast<double>(gy[base + c]) * static_cast<double>(tg[static_cast<size_t>(c)]);
                        m1 += dxh;
                        m2 += dxh * static_cast<double>((*xhat)[base + c]);
                    }
                    m1 /= C;
                    m2 /= C;
                    const double inv = (*inv_std)[static_cast<size_t>(r)];
                    for (int c = 0; c < C; ++c) {
                        const double dxh = static_cast<double>(gy[base + c]) * static_cast<double>(tg[static_cast<size_t>(c)]);
                        gx[base + c] += static_cast<Real>(inv * (dxh - m1 - static_cast<double>((*xhat)[base + c]) * m2));
                    }
                }
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::dwconv(Id x, Id w) {
    const auto& tx = value(x);
    const auto& tw = value(w);
    require_rank2(tx, "dwconv");
    require_rank2(tw, "dwconv");
    const int T = tx.dim(0), C = tx.dim(1), K = tw.dim(0);
    if (tw.dim(1) != C)
        throw std::invalid_argument("dwconv: kernel channels " + shape_str(tw.shape()) + " vs input " + shape_str(tx.shape()));
    if (K % 2 == 0) throw std::invalid_argument("dwconv: kernel size must be odd, got " + std::to_string(K));
    TensorT<Real> out(tx.shape());
    kernels::dwconv(tx.data(), tw.data(), out.data(), T, C, K);
    Id y = push(std::move(out), wants_grad(x) || wants_grad(w), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, x, w, T, C, K](Graph& g) {
            const auto& gy = g.grad_at(y);
            if (g.wants_grad(x)) {
                // dX is gY convolved with the tap-reversed kernel.
                std::vector<Real> wflip(static_cast<size_t>(K) * C);
                const auto& wv = g.value(w).vec();
                for (int j = 0; j < K; ++j)
                    for (int c = 0; c < C; ++c)
                        wflip[static_cast<size_t>(j) * C + c] = wv[static_cast<size_t>(K - 1 - j) * C + c];
                std::vector<Real> tmp(static_cast<size_t>(T) * C);
                kernels::dwconv(gy.data(), wflip.data(), tmp.data(), T, C, K);
                kernels::axpy(Real(1), tmp.data(), g.grad_at(x).data(), tmp.size());
            }
            if (g.wants_grad(w)) {
                std::vector<Real> tmp(static_cast<size_t>(K) * C);
                kernels::dwconv_grad_w(g.value(x).data(), gy.data(), tmp.data(), T, C, K);
                kernels::axpy(Real(1), tmp.data(), g.grad_at(w).data(), tmp.size());
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::gelu(Id x) {
    const auto& tx = value(x);
    TensorT<Real> out(tx.shape());
    for (size_t i = 0; i < tx.numel(); ++i) {
        const double v = static_cast<double>(tx.at(i));
        out.at(i) = static_cast<Real>(0.5 * v * (1.0 + std::erf(v * 0.7071067811865475244)));
    }
    Id y = push(std::move(out), wants_grad(x), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, x](Graph& g) {
            const auto& gy = g.grad_at(y);
            const auto& vx = g.value(x).vec();
            auto& gx = g.grad_at(x);
            for (size_t i = 0; i < gy.size(); ++i) {
                const double v = static_cast<double>(vx[i]);
                const double cdf = 0.5 * (1.0 + std::erf(v * 0.7071067811865475244));
                const double pdf = 0.3989422804014326779 * std::exp(-0.5 * v * v);
                gx[i] += static_cast<Real>(static_cast<double>(gy[i]) * (cdf + v * pdf));
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::silu(Id x) {
    const auto& tx = value(x);
    TensorT<Real> out(tx.shape());
    for (size_t i = 0; i < tx.numel(); ++i) {
        const double v = static_cast<double>(tx.at(i));
        out.at(i) = static_cast<Real>(v / (1.0 + std::exp(-v)));
    }
    Id y = push(std::move(out), wants_grad(x), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, x](Graph& g) {
            const auto& gy = g.grad_at(y);
            const auto& vx = g.value(x).vec();
            auto& gx = g.grad_at(x);
            for (size_t i = 0; i < gy.size(); ++i) {
                const double v = static_cast<double>(vx[i]);
                const double s = 1.0 / (1.0 + std::exp(-v));
                gx[i] += static_cast<Real>(static_cast<double>(gy[i]) * (s * (1.0 + v * (1.0 - s))));
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::sigmoid(Id x) {
    const auto& tx = value(x);
    TensorT<Real> out(tx.shape());
    for (size_t i = 0; i < tx.numel(); ++i)
        out.at(i) = static_cast<Real>(1.0 / (1.0 + std::exp(-static_cast<double>(tx.at(i)))));
    Id y = push(std::move(out), wants_grad(x), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, x](Graph& g) {
            const auto& gy = g.grad_at(y);
            const auto& vy = g.value(y).vec();
            auto& gx = g.grad_at(x);
            for (size_t i = 0; i < gy.size(); ++i) {
                const double s = static_cast<double>(vy[i]);
                gx[i] += static_cast<Real>(static_cast<double>(gy[i]) * s * (1.0 - s));
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::slice_cols(Id x, int c0, int c1) {
    const auto& tx = value(x);
    require_rank2(tx, "slice_cols");
    const int R = tx.dim(0), C = tx.dim(1);
    if (c0 < 0 || c1 > C || c0 >= c1)
        throw std::invalid_argument("slice_cols: invalid range [" + std::to_string(c0) + "," + std::to_string(c1) +
                                    ") for " + shape_str(tx.shape()));
    const int W = c1 - c0;
    TensorT<Real> out({R, W});
    for (int r = 0; r < R; ++r)
        std::copy_n(tx.data() + static_cast<size_t>(r) * C + c0, W, out.data() + static_cast<size_t>(r) * W);
    Id y = push(std::move(out), wants_grad(x), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, x, c0, R, C, W](Graph& g) {
            const auto& gy = g.grad_at(y);
            auto& gx = g.grad_at(x);
            for (int r = 0; r < R; ++r)
                for (int c = 0; c < W; ++c)
                    gx[static_cast<size_t>(r) * C + c0 + c] += gy[static_cast<size_t>(r) * W + c];
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::concat_cols(Id a, Id b) {
    const auto& ta = value(a);
    const auto& tb = value(b);
    require_rank2(ta, "concat_cols");
    require_rank2(tb, "concat_cols");
    if (ta.dim(0) != tb.dim(0))
        throw std::invalid_argument("concat_cols: row mismatch " + shape_str(ta.shape()) + " vs " + shape_str(tb.shape()));
    const int R = ta.dim(0), Ca = ta.dim(1), Cb = tb.dim(1);
    TensorT<Real> out({R, Ca + Cb});
    for (int r = 0; r < R; ++r) {
        std::copy_n(ta.data() + static_cast<size_t>(r) * Ca, Ca, out.data() + static_cast<size_t>(r) * (Ca + Cb));
        std::copy_n(tb.data() + static_cast<size_t>(r) * Cb, Cb, out.data() + static_cast<size_t>(r) * (Ca + Cb) + Ca);
    }
    Id y = push(std::move(out), wants_grad(a) || wants_grad(b), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, a, b, R, Ca, Cb](Graph& g) {
            const auto& gy = g.grad_at(y);
            if (g.wants_grad(a)) {
                auto& ga = g.grad_at(a);
                for (int r = 0; r < R; ++r)
                    for (int c = 0; c < Ca; ++c)
                        ga[static_cast<size_t>(r) * Ca + c] += gy[static_cast<size_t>(r) * (Ca + Cb) + c];
            }
            if (g.wants_grad(b)) {
                auto& gb = g.grad_at(b);
                for (int r = 0; r < R; ++r)
                    for (int c = 0; c < Cb; ++c)
                        gb[static_cast<size_t>(r) * Cb + c] += gy[static_cast<size_t>(r) * (Ca + Cb) + Ca + c];
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::embedding(std::vector<int> ids, Id table) {
    const auto& tt = value(table);
    require_rank2(tt, "embedding");
    const int V = tt.dim(0), D = tt.dim(1);
    for (int id : ids)
        if (id < 0 || id >= V)
            throw std::out_of_range("embedding: token id " + std::to_string(id) + " outside vocabulary of size " +
                                    std::to_string(V));
    const int L = static_cast<int>(ids.size());
    TensorT<Real> out({L, D});
    for (int i = 0; i < L; ++i)
        std::copy_n(tt.data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * D, D,
                    out.data() + static_cast<size_t>(i) * D);
    Id y = push(std::move(out), wants_grad(table), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, table, ids = std::move(ids), D](Graph& g) {
            const auto& gy = g.grad_at(y);
            auto& gt = g.grad_at(table);
            for (size_t i = 0; i < ids.size(); ++i)
                for (int d = 0; d < D; ++d)
                    gt[static_cast<size_t>(ids[i]) * D + d] += gy[i * static_cast<size_t>(D) + d];
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::unfold_k3_s2(Id x) {
    const auto& tx = value(x);
    require_rank2(tx, "unfold_k3_s2");
    const int T = tx.dim(0), C = tx.dim(1);
    const int T2 = T / 2;
    if (T2 < 1) throw std::invalid_argument("unfold_k3_s2: input shorter than one output frame");
    TensorT<Real> out({T2, 3 * C});
    for (int t2 = 0; t2 < T2; ++t2) {
        const int center = 2 * t2 + 1;
        for (int j = 0; j < 3; ++j) {
            const int tt = center + j - 1;
            Real* dst = out.data() + static_cast<size_t>(t2) * 3 * C + static_cast<size_t>(j) * C;
            if (tt < 0 || tt >= T)
                std::fill_n(dst, C, Real(0));
            else
                std::copy_n(tx.data() + static_cast<size_t>(tt) * C, C, dst);
        }
    }
    Id y = push(std::move(out), wants_grad(x), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, x, T, C, T2](Graph& g) {
            const auto& gy = g.grad_at(y);
            auto& gx = g.grad_at(x);
            for (int t2 = 0; t2 < T2; ++t2) {
                const int center = 2 * t2 + 1;
                for (int j = 0; j < 3; ++j) {
                    const int tt = center + j - 1;
                    if (tt < 0 || tt >= T) continue;
                    for (int c = 0; c < C; ++c)
                        gx[static_cast<size_t>(tt) * C + c] +=
                            gy[static_cast<size_t>(t2) * 3 * C + static_cast<size_t>(j) * C + c];
                }
            }
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::sum_all(Id x) {
    const auto& tx = value(x);
    double acc = 0.0;
    for (size_t i = 0; i < tx.numel(); ++i) acc += static_cast<double>(tx.at(i));
    TensorT<Real> out({1});
    out.at(size_t{0}) = static_cast<Real>(acc);
    Id y = push(std::move(out), wants_grad(x), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, x](Graph& g) {
            const Real gv = g.grad_at(y)[0];
            auto& gx = g.grad_at(x);
            for (auto& v : gx) v += gv;
        };
    }
    return y;
}

template <class Real>
typename Graph<Real>::Id Graph<Real>::cross_entropy(Id logits, std::vector<int> targets, int ignore_id) {
    const auto& tl = value(logits);
    require_rank2(tl, "cross_entropy");
    const int N = tl.dim(0), V = tl.dim(1);
    if (static_cast<int>(targets.size()) != N)
        throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                    std::to_string(N) + " rows");
    int count = 0;
    for (int t : targets) {
        if (t == ignore_id) continue;
        if (t < 0 || t >= V)
            throw std::out_of_range("cross_entropy: target " + std::to_string(t) + " outside vocabulary of size " +
                                    std::to_string(V));
        ++count;
    }
    if (count == 0) throw std::runtime_error("cross_entropy: no supervised positions");

    double loss = 0.0;
    for (int i = 0; i < N; ++i) {
        const int t = targets[static_cast<size_t>(i)];
        if (t == ignore_id) continue;
        const Real* row = tl.data() + static_cast<size_t>(i) * V;
        double mx = static_cast<double>(row[0]);
        for (int c = 1; c < V; ++c) mx = std::max(mx, static_cast<double>(row[c]));
        double sum = 0.0;
        for (int c = 0; c < V; ++c) sum += std::exp(static_cast<double>(row[c]) - mx);
        loss += (std::log(sum) + mx) - static_cast<double>(row[t]);
    }
    loss /= count;

    TensorT<Real> out({1});
    out.at(size_t{0}) = static_cast<Real>(loss);
    Id y = push(std::move(out), wants_grad(logits), {});
    if (nodes_.back().needs_grad) {
        nodes_.back().back = [y, logits, targets = std::move(targets), ignore_id, N, V, count](Graph& g) {
            const double gv = static_cast<double>(g.grad_at(y)[0]);
            const auto& tl = g.value(logits);
            auto& gl = g.grad_at(logits);
            for (int i = 0; i < N; ++i) {
                const int t = targets[static_cast<size_t>(i)];
                if (t == ignore_id) continue;
                const Real* row = tl.data() + static_cast<size_t>(i) * V;
                double mx = static_cast<double>(row[0]);
                for (int c = 1; c < V; ++c) mx = std::max(mx, static_cast<double>(row[c]));
                double sum = 0.0;
                for (int c = 0; c < V; ++c) sum += std::exp(static_cast<double>(row[c]) - mx);
                for (int c = 0; c < V; ++c) {
                    const double p = std::exp(static_cast<double>(row[c]) - mx) / sum;
                    const double onehot = (c == t) ? 1.0 : 0.0;
                    gl[static_cast<size_t>(i) * V + c] += static_cast<Real>(gv * (p - onehot) / count);
                }
            }
        };
    }
    return y;
}

double grad_check(const std::function<double(bool)>& loss_fn, std::vector<ParameterT<double>*> params, double h,
                  int max_coords, uint64_t sample_seed) {
    for (auto* p : params) p->zero_grad();
    loss_fn(true);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->grad.vec());

    SeededRng rng(sample_seed ^ 0x6772616463686bULL);
    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto* p = params[pi];
        const size_t n = p->value.numel();
        std::vector<size_t> coords;
        if (n <= static_cast<size_t>(max_coords)) {
            coords.resize(n);
            for (size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (int i = 0; i < max_coords; ++i) coords.push_back(static_cast<size_t>(rng.uniform_int(n)));
        }
        for (size_t idx : coords) {
            const double orig = p->value.at(idx);
            p->value.at(idx) = orig + h;
            const double lp = loss_fn(false);
            p->value.at(idx) = orig - h;
            const double lm = loss_fn(false);
            p->value.at(idx) = orig;
            const double num = (lp - lm) / (2.0 * h);
            const double ana = analytic[pi][idx];
            const double rel = std::abs(num - ana) / (std::abs(num) + std::abs(ana) + 1e-8);
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

template class Graph<float>;
template class Graph<double>;

} // namespace owsm
