#include "stylekit/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stylekit {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Value Tape::leaf(const Tensor& t, bool requires_grad) {
    return make(t, requires_grad, nullptr);
}

Value Tape::make(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::grad(Value v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.empty())
        throw std::logic_error("Tape::grad: no gradient accumulated; call backward first");
    return n.grad;
}

Tensor& Tape::grad_ref(Value v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
}

void Tape::check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

void Tape::backward(Value root) {
    Node& r = nodes_[root.id];
    if (r.value.size() != 1)
        throw std::invalid_argument("Tape::backward: root must be a scalar");
    grad_ref(root)[0] = 1.0;
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.back || n.grad.empty()) continue;
        n.back(*this);
    }
}

Value Tape::add(Value a, Value b) {
    check_same_shape(val(a), val(b), "add");
    Tensor out = val(a);
    const Tensor& tb = val(b);
    for (int i = 0; i < out.size(); ++i) out[i] += tb[i];
    bool rg = needs(a) || needs(b);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, b, o](Tape& t) {
            const Tensor& g = t.grad(o);
            if (t.needs(a)) {
                Tensor& ga = t.grad_ref(a);
                for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (t.needs(b)) {
                Tensor& gb = t.grad_ref(b);
                for (int i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        };
    return o;
}

Value Tape::sub(Value a, Value b) {
    check_same_shape(val(a), val(b), "sub");
    Tensor out = val(a);
    const Tensor& tb = val(b);
    for (int i = 0; i < out.size(); ++i) out[i] -= tb[i];
    bool rg = needs(a) || needs(b);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, b, o](Tape& t) {
            const Tensor& g = t.grad(o);
            if (t.needs(a)) {
                Tensor& ga = t.grad_ref(a);
                for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (t.needs(b)) {
                Tensor& gb = t.grad_ref(b);
                for (int i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        };
    return o;
}

Value Tape::mul(Value a, Value b) {
    check_same_shape(val(a), val(b), "mul");
    Tensor out = val(a);
    const Tensor& tb = val(b);
    for (int i = 0; i < out.size(); ++i) out[i] *= tb[i];
    bool rg = needs(a) || needs(b);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, b, o](Tape& t) {
            const Tensor& g = t.grad(o);
            const Tensor& va = t.val(a);
            const Tensor& vb = t.val(b);
            if (t.needs(a)) {
                Tensor& ga = t.grad_ref(a);
                for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
            }
            if (t.needs(b)) {
                Tensor& gb = t.grad_ref(b);
                for (int i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
            }
        };
    return o;
}

Value Tape::scale(Value a, double s) {
    Tensor out = val(a);
    for (int i = 0; i < out.size(); ++i) out[i] *= s;
    bool rg = needs(a);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, o, s](Tape& t) {
            const Tensor& g = t.grad(o);
            Tensor& ga = t.grad_ref(a);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
        };
    return o;
}

Value Tape::add_scalar(Value a, double s) {
    Tensor out = val(a);
    for (int i = 0; i < out.size(); ++i) out[i] += s;
    bool rg = needs(a);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, o](Tape& t) {
            const Tensor& g = t.grad(o);
            Tensor& ga = t.grad_ref(a);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
        };
    return o;
}

Value Tape::relu(Value a) {
    Tensor out = val(a);
    for (int i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
    bool rg = needs(a);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, o](Tape& t) {
            const Tensor& g = t.grad(o);
            const Tensor& x = t.val(a);
            Tensor& ga = t.grad_ref(a);
            for (int i = 0; i < g.size(); ++i) ga[i] += x[i] > 0.0 ? g[i] : 0.0;
        };
    return o;
}

Value Tape::silu(Value a) {
    const Tensor& x = val(a);
    Tensor out(x.shape());
    for (int i = 0; i < x.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-x[i]));
        out[i] = x[i] * s;
    }
    bool rg = needs(a);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, o](Tape& t) {
            const Tensor& g = t.grad(o);
            const Tensor& x = t.val(a);
            Tensor& ga = t.grad_ref(a);
            for (int i = 0; i < g.size(); ++i) {
                const double s = 1.0 / (1.0 + std::exp(-x[i]));
                ga[i] += g[i] * (s + x[i] * s * (1.0 - s));
            }
        };
    return o;
}

Value Tape::gelu(Value a) {
    const Tensor& x = val(a);
    Tensor out(x.shape());
    for (int i = 0; i < x.size(); ++i)
        out[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
    bool rg = needs(a);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, o](Tape& t) {
            const Tensor& g = t.grad(o);
            const Tensor& x = t.val(a);
            Tensor& ga = t.grad_ref(a);
            for (int i = 0; i < g.size(); ++i) {
                const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
                ga[i] += g[i] * (cdf + x[i] * pdf);
            }
        };
    return o;
}

Value Tape::matmul(Value a, Value b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(A.shape()) +
                                    " x " + shape_str(B.shape()));
    const int n = A.dim(0), k = A.dim(1), m = B.dim(1);
    Tensor out({n, m});
    for (int i = 0; i < n; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = A.at(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < m; ++j) out.at(i, j) += av * B.at(p, j);
        }
    bool rg = needs(a) || needs(b);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, b, o, n, k, m](Tape& t) {
            const Tensor& g = t.grad(o);
            const Tensor& A = t.val(a);
            const Tensor& B = t.val(b);
            if (t.needs(a)) {  // gA = g * B^T
                Tensor& ga = t.grad_ref(a);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j) {
                        const double gv = g.at(i, j);
                        if (gv == 0.0) continue;
                        for (int p = 0; p < k; ++p) ga.at(i, p) += gv * B.at(p, j);
                    }
            }
            if (t.needs(b)) {  // gB = A^T * g
                Tensor& gb = t.grad_ref(b);
                for (int i = 0; i < n; ++i)
                    for (int p = 0; p < k; ++p) {
                        const double av = A.at(i, p);
                        if (av == 0.0) continue;
                        for (int j = 0; j < m; ++j) gb.at(p, j) += av * g.at(i, j);
                    }
            }
        };
    return o;
}

Value Tape::transpose(Value a) {
    const Tensor& A = val(a);
    if (A.rank() != 2) throw std::invalid_argument("transpose: rank-2 tensor required");
    const int n = A.dim(0), m = A.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.at(j, i) = A.at(i, j);
    bool rg = needs(a);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, o, n, m](Tape& t) {
            const Tensor& g = t.grad(o);
            Tensor& ga = t.grad_ref(a);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) ga.at(i, j) += g.at(j, i);
        };
    return o;
}

Value Tape::softmax_rows(Value a) {
    const Tensor& A = val(a);
    if (A.rank() != 2) throw std::invalid_argument("softmax_rows: rank-2 tensor required");
    const int n = A.dim(0), m = A.dim(1);
    Tensor out({n, m});
    for (int i = 0; i < n; ++i) {
        double mx = A.at(i, 0);
        for (int j = 1; j < m; ++j) mx = std::max(mx, A.at(i, j));
        double z = 0.0;
        for (int j = 0; j < m; ++j) {
            out.at(i, j) = std::exp(A.at(i, j) - mx);
            z += out.at(i, j);
        }
        for (int j = 0; j < m; ++j) out.at(i, j) /= z;
    }
    bool rg = needs(a);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, o, n, m](Tape& t) {
            // dx = y * (g - sum(g*y))
            const Tensor& g = t.grad(o);
            const Tensor& y = t.val(o);
            Tensor& ga = t.grad_ref(a);
            for (int i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int j = 0; j < m; ++j) dot += g.at(i, j) * y.at(i, j);
                for (int j = 0; j < m; ++j)
                    ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
            }
        };
    return o;
}

Value Tape::layer_norm_rows(Value x, Value gamma, Value beta, double eps) {
    const Tensor& X = val(x);
    const Tensor& G = val(gamma);
    const Tensor& B = val(beta);
    if (X.rank() != 2) throw std::invalid_argument("layer_norm_rows: rank-2 tensor required");
    const int n = X.dim(0), m = X.dim(1);
    if (G.size() != m || B.size() != m)
        throw std::invalid_argument("layer_norm_rows: affine params must have width " +
                                    std::to_string(m));
    Tensor out({n, m});
    for (int i = 0; i < n; ++i) {
        double mu = 0.0;
        for (int j = 0; j < m; ++j) mu += X.at(i, j);
        mu /= m;
        double var = 0.0;
        for (int j = 0; j < m; ++j) {
            const double d = X.at(i, j) - mu;
            var += d * d;
        }
        var /= m;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < m; ++j)
            out.at(i, j) = (X.at(i, j) - mu) * inv * G[j] + B[j];
    }
    bool rg = needs(x) || needs(gamma) || needs(beta);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [x, gamma, beta, o, n, m, eps](Tape& t) {
            const Tensor& g = t.grad(o);
            const Tensor& X = t.val(x);
            const Tensor& G = t.val(gamma);
            for (int i = 0; i < n; ++i) {
                double mu = 0.0;
                for (int j = 0; j < m; ++j) mu += X.at(i, j);
                mu /= m;
                double var = 0.0;
                for (int j = 0; j < m; ++j) {
                    const double d = X.at(i, j) - mu;
                    var += d * d;
                }
                var /= m;
                const double inv = 1.0 / std::sqrt(var + eps);
                if (t.needs(gamma)) {
                    Tensor& gg = t.grad_ref(gamma);
                    for (int j = 0; j < m; ++j)
                        gg[j] += g.at(i, j) * (X.at(i, j) - mu) * inv;
                }
                if (t.needs(beta)) {
                    Tensor& gb = t.grad_ref(beta);
                    for (int j = 0; j < m; ++j) gb[j] += g.at(i, j);
                }
                if (t.needs(x)) {
                    // dL/dxhat_j = g_j * gamma_j; standard layer-norm backward
                    Tensor& gx = t.grad_ref(x);
                    double s1 = 0.0, s2 = 0.0;
                    for (int j = 0; j < m; ++j) {
                        const double dxh = g.at(i, j) * G[j];
                        const double xh = (X.at(i, j) - mu) * inv;
                        s1 += dxh;
                        s2 += dxh * xh;
                    }
                    for (int j = 0; j < m; ++j) {
                        const double dxh = g.at(i, j) * G[j];
                        const double xh = (X.at(i, j) - mu) * inv;
                        gx.at(i, j) += inv * (dxh - s1 / m - xh * s2 / m);
                    }
                }
            }
        };
    return o;
}

Value Tape::row_bias_add(Value x, Value b) {
    const Tensor& X = val(x);
    const Tensor& B = val(b);
    if (X.rank() != 2 || B.size() != X.dim(1))
        throw std::invalid_argument("row_bias_add: bias width must match columns");
    const int n = X.dim(0), m = X.dim(1);
    Tensor out = X;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.at(i, j) += B[j];
    bool rg = needs(x) || needs(b);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [x, b, o, n, m](Tape& t) {
            const Tensor& g = t.grad(o);
            if (t.needs(x)) {
                Tensor& gx = t.grad_ref(x);
                for (int i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (t.needs(b)) {
                Tensor& gb = t.grad_ref(b);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j) gb[j] += g.at(i, j);
            }
        };
    return o;
}

Value Tape::concat_rows(const std::vector<Value>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_rows: empty input");
    const int m = val(xs[0]).dim(1);
    int n = 0;
    bool rg = false;
    for (Value v : xs) {
        const Tensor& T = val(v);
        if (T.rank() != 2 || T.dim(1) != m)
            throw std::invalid_argument("concat_rows: column mismatch");
        n += T.dim(0);
        rg = rg || needs(v);
    }
    Tensor out({n, m});
    int r = 0;
    for (Value v : xs) {
        const Tensor& T = val(v);
        std::copy(T.data(), T.data() + T.size(), out.data() + static_cast<std::size_t>(r) * m);
        r += T.dim(0);
    }
    Value o = make(std::move(out), rg, nullptr);
    if (rg) {
        std::vector<Value> parts = xs;
        nodes_[o.id].back = [parts, o, m](Tape& t) {
            const Tensor& g = t.grad(o);
            int r = 0;
            for (Value v : parts) {
                const int rows = t.val(v).dim(0);
                if (t.needs(v)) {
                    Tensor& gv = t.grad_ref(v);
                    for (int i = 0; i < rows * m; ++i)
                        gv[i] += g[r * m + i];
                }
                r += rows;
            }
        };
    }
    return o;
}

Value Tape::slice_rows(Value x, int r0, int r1) {
    const Tensor& X = val(x);
    if (X.rank() != 2 || r0 < 0 || r1 > X.dim(0) || r0 >= r1)
        throw std::invalid_argument("slice_rows: bad range");
    const int m = X.dim(1);
    Tensor out({r1 - r0, m});
    std::copy(X.data() + static_cast<std::size_t>(r0) * m,
              X.data() + static_cast<std::size_t>(r1) * m, out.data());
    bool rg = needs(x);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [x, o, r0, m](Tape& t) {
            const Tensor& g = t.grad(o);
            Tensor& gx = t.grad_ref(x);
            for (int i = 0; i < g.size(); ++i) gx[r0 * m + i] += g[i];
        };
    return o;
}

Value Tape::slice_cols(Value x, int c0, int c1) {
    const Tensor& X = val(x);
    if (X.rank() != 2 || c0 < 0 || c1 > X.dim(1) || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad range");
    const int n = X.dim(0), m = X.dim(1), w = c1 - c0;
    Tensor out({n, w});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < w; ++j) out.at(i, j) = X.at(i, c0 + j);
    bool rg = needs(x);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [x, o, c0, n, w](Tape& t) {
            const Tensor& g = t.grad(o);
            Tensor& gx = t.grad_ref(x);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < w; ++j) gx.at(i, c0 + j) += g.at(i, j);
        };
    return o;
}

Value Tape::concat_cols(const std::vector<Value>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols: empty input");
    const int n = val(xs[0]).dim(0);
    int m = 0;
    bool rg = false;
    for (Value v : xs) {
        const Tensor& T = val(v);
        if (T.rank() != 2 || T.dim(0) != n)
            throw std::invalid_argument("concat_cols: row mismatch");
        m += T.dim(1);
        rg = rg || needs(v);
    }
    Tensor out({n, m});
    int c = 0;
    for (Value v : xs) {
        const Tensor& T = val(v);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < T.dim(1); ++j) out.at(i, c + j) = T.at(i, j);
        c += T.dim(1);
    }
    Value o = make(std::move(out), rg, nullptr);
    if (rg) {
        std::vector<Value> parts = xs;
        nodes_[o.id].back = [parts, o, n](Tape& t) {
            const Tensor& g = t.grad(o);
            int c = 0;
            for (Value v : parts) {
                const int w = t.val(v).dim(1);
                if (t.needs(v)) {
                    Tensor& gv = t.grad_ref(v);
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < w; ++j) gv.at(i, j) += g.at(i, c + j);
                }
                c += w;
            }
        };
    }
    return o;
}

Value Tape::conv2d(Value x, Value w, Value b, int stride, int pad) {
    const Tensor& X = val(x);
    const Tensor& W = val(w);
    const Tensor& B = val(b);
    if (X.rank() != 3 || W.rank() != 4)
        throw std::invalid_argument("conv2d: expects x(C,H,W), w(Co,Ci,kh,kw)");
    const int ci = X.dim(0), h = X.dim(1), wd = X.dim(2);
    const int co = W.dim(0), kh = W.dim(2), kw = W.dim(3);
    if (W.dim(1) != ci)
        throw std::invalid_argument("conv2d: input channels " + std::to_string(ci) +
                                    " do not match kernel " + std::to_string(W.dim(1)));
    if (B.size() != co) throw std::invalid_argument("conv2d: bias size mismatch");
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor out({co, oh, ow});
    const auto widx = [ci, kh, kw](int o, int i, int y, int xk) {
        return ((o * ci + i) * kh + y) * kw + xk;
    };
    for (int o = 0; o < co; ++o)
        for (int y = 0; y < oh; ++y)
            for (int xo = 0; xo < ow; ++xo) {
                double acc = B[o];
                for (int i = 0; i < ci; ++i)
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = y * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = xo * stride - pad + kx;
                            if (ix < 0 || ix >= wd) continue;
                            acc += X.at(i, iy, ix) * W[widx(o, i, ky, kx)];
                        }
                    }
                out.at(o, y, xo) = acc;
            }
    bool rg = needs(x) || needs(w) || needs(b);
    Value ov = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[ov.id].back = [x, w, b, ov, stride, pad, ci, h, wd, co, kh, kw, oh,
                              ow, widx](Tape& t) {
            const Tensor& g = t.grad(ov);
            const Tensor& X = t.val(x);
            const Tensor& W = t.val(w);
            const bool nx = t.needs(x), nw = t.needs(w), nb = t.needs(b);
            Tensor* gx = nx ? &t.grad_ref(x) : nullptr;
            Tensor* gw = nw ? &t.grad_ref(w) : nullptr;
            Tensor* gb = nb ? &t.grad_ref(b) : nullptr;
            for (int o = 0; o < co; ++o)
                for (int y = 0; y < oh; ++y)
                    for (int xo = 0; xo < ow; ++xo) {
                        const double gv = g.at(o, y, xo);
                        if (gv == 0.0) continue;
                        if (nb) (*gb)[o] += gv;
                        for (int i = 0; i < ci; ++i)
                            for (int ky = 0; ky < kh; ++ky) {
                                const int iy = y * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int ix = xo * stride - pad + kx;
                                    if (ix < 0 || ix >= wd) continue;
                                    if (nw) (*gw)[widx(o, i, ky, kx)] += gv * X.at(i, iy, ix);
                                    if (nx) gx->at(i, iy, ix) += gv * W[widx(o, i, ky, kx)];
                                }
                            }
                    }
        };
    return ov;
}

Value Tape::upsample2x(Value x) {
    const Tensor& X = val(x);
    if (X.rank() != 3) throw std::invalid_argument("upsample2x: rank-3 tensor required");
    const int c = X.dim(0), h = X.dim(1), w = X.dim(2);
    Tensor out({c, 2 * h, 2 * w});
    for (int i = 0; i < c; ++i)
        for (int y = 0; y < 2 * h; ++y)
            for (int xo = 0; xo < 2 * w; ++xo) out.at(i, y, xo) = X.at(i, y / 2, xo / 2);
    bool rg = needs(x);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [x, o, c, h, w](Tape& t) {
            const Tensor& g = t.grad(o);
            Tensor& gx = t.grad_ref(x);
            for (int i = 0; i < c; ++i)
                for (int y = 0; y < 2 * h; ++y)
                    for (int xo = 0; xo < 2 * w; ++xo)
                        gx.at(i, y / 2, xo / 2) += g.at(i, y, xo);
        };
    return o;
}

Value Tape::concat_channels(Value a, Value b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 3 || B.rank() != 3 || A.dim(1) != B.dim(1) || A.dim(2) != B.dim(2))
        throw std::invalid_argument("concat_channels: spatial mismatch " +
                                    shape_str(A.shape()) + " vs " + shape_str(B.shape()));
    const int ca = A.dim(0), cb = B.dim(0), h = A.dim(1), w = A.dim(2);
    Tensor out({ca + cb, h, w});
    std::copy(A.data(), A.data() + A.size(), out.data());
    std::copy(B.data(), B.data() + B.size(), out.data() + A.size());
    bool rg = needs(a) || needs(b);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, b, o, ca, cb, h, w](Tape& t) {
            const Tensor& g = t.grad(o);
            const int na = ca * h * w;
            if (t.needs(a)) {
                Tensor& ga = t.grad_ref(a);
                for (int i = 0; i < na; ++i) ga[i] += g[i];
            }
            if (t.needs(b)) {
                Tensor& gb = t.grad_ref(b);
                for (int i = 0; i < cb * h * w; ++i) gb[i] += g[na + i];
            }
        };
    return o;
}

Value Tape::channel_affine(Value x, Value gscale, Value b) {
    const Tensor& X = val(x);
    const Tensor& G = val(gscale);
    const Tensor& B = val(b);
    if (X.rank() != 3 || G.size() != X.dim(0) || B.size() != X.dim(0))
        throw std::invalid_argument("channel_affine: params must match channel count");
    const int c = X.dim(0), hw = X.dim(1) * X.dim(2);
    Tensor out = X;
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < hw; ++j) out[i * hw + j] = X[i * hw + j] * G[i] + B[i];
    bool rg = needs(x) || needs(gscale) || needs(b);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [x, gscale, b, o, c, hw](Tape& t) {
            const Tensor& g = t.grad(o);
            const Tensor& X = t.val(x);
            const Tensor& G = t.val(gscale);
            if (t.needs(x)) {
                Tensor& gx = t.grad_ref(x);
                for (int i = 0; i < c; ++i)
                    for (int j = 0; j < hw; ++j) gx[i * hw + j] += g[i * hw + j] * G[i];
            }
            if (t.needs(gscale)) {
                Tensor& gg = t.grad_ref(gscale);
                for (int i = 0; i < c; ++i)
                    for (int j = 0; j < hw; ++j) gg[i] += g[i * hw + j] * X[i * hw + j];
            }
            if (t.needs(b)) {
                Tensor& gb = t.grad_ref(b);
                for (int i = 0; i < c; ++i)
                    for (int j = 0; j < hw; ++j) gb[i] += g[i * hw + j];
            }
        };
    return o;
}

Value Tape::channel_bias_add(Value x, Value b) {
    const Tensor& X = val(x);
    const Tensor& B = val(b);
    if (X.rank() != 3 || B.size() != X.dim(0))
        throw std::invalid_argument("channel_bias_add: bias must match channel count");
    const int c = X.dim(0), hw = X.dim(1) * X.dim(2);
    Tensor out = X;
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < hw; ++j) out[i * hw + j] += B[i];
    bool rg = needs(x) || needs(b);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [x, b, o, c, hw](Tape& t) {
            const Tensor& g = t.grad(o);
            if (t.needs(x)) {
                Tensor& gx = t.grad_ref(x);
                for (int i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (t.needs(b)) {
                Tensor& gb = t.grad_ref(b);
                for (int i = 0; i < c; ++i)
                    for (int j = 0; j < hw; ++j) gb[i] += g[i * hw + j];
            }
        };
    return o;
}

Value Tape::instance_norm(Value x, double eps) {
    const Tensor& X = val(x);
    if (X.rank() != 3) throw std::invalid_argument("instance_norm: rank-3 tensor required");
    const int c = X.dim(0), h = X.dim(1), w = X.dim(2);
    Tensor ones = Tensor::full({h * w}, 1.0);
    Tensor zero = Tensor::zeros({h * w});
    Value rows = reshape(x, {c, h * w});
    Value normed = layer_norm_rows(rows, constant(ones), constant(zero), eps);
    return reshape(normed, {c, h, w});
}

Value Tape::spatial_mean(Value x) {
    const Tensor& X = val(x);
    if (X.rank() != 3) throw std::invalid_argument("spatial_mean: rank-3 tensor required");
    const int c = X.dim(0), hw = X.dim(1) * X.dim(2);
    Tensor out({1, c});
    for (int i = 0; i < c; ++i) {
        double s = 0.0;
        for (int j = 0; j < hw; ++j) s += X[i * hw + j];
        out.at(0, i) = s / hw;
    }
    bool rg = needs(x);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [x, o, c, hw](Tape& t) {
            const Tensor& g = t.grad(o);
            Tensor& gx = t.grad_ref(x);
            for (int i = 0; i < c; ++i)
                for (int j = 0; j < hw; ++j) gx[i * hw + j] += g.at(0, i) / hw;
        };
    return o;
}

Value Tape::sum_all(Value a) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (int i = 0; i < A.size(); ++i) s += A[i];
    bool rg = needs(a);
    Value o = make(Tensor::scalar(s), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, o](Tape& t) {
            const double g = t.grad(o)[0];
            Tensor& ga = t.grad_ref(a);
            for (int i = 0; i < ga.size(); ++i) ga[i] += g;
        };
    return o;
}

Value Tape::mean_all(Value a) {
    const int n = val(a).size();
    return scale(sum_all(a), 1.0 / n);
}

Value Tape::reshape(Value a, Shape s) {
    Tensor out = val(a).reshaped(s);
    bool rg = needs(a);
    Value o = make(std::move(out), rg, nullptr);
    if (rg)
        nodes_[o.id].back = [a, o](Tape& t) {
            const Tensor& g = t.grad(o);
            Tensor& ga = t.grad_ref(a);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
        };
    return o;
}

}  // namespace stylekit
