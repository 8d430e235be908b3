#include "ssfnet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "ssfnet/error.hpp"

namespace ssfnet::ops {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void require_same(const Var& a, const Var& b, const char* op) {
    if (!(a.shape() == b.shape())) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                         b.shape().str());
    }
}

// Accumulate g into the grad buffer of parent i when it participates in backprop.
Tensor* parent_grad(Node& self, std::size_t i) {
    Node& p = *self.parents[i];
    return p.requires_grad ? &p.grad_buffer() : nullptr;
}

const Tensor& parent_value(Node& self, std::size_t i) { return self.parents[i]->value; }

int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same(a, b, "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (Tensor* g = parent_grad(self, k)) {
                for (std::size_t i = 0; i < g->size(); ++i) g->data[i] += self.grad.data[i];
            }
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same(a, b, "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.value().data[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        if (Tensor* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) g->data[i] += self.grad.data[i];
        }
        if (Tensor* g = parent_grad(self, 1)) {
            for (std::size_t i = 0; i < g->size(); ++i) g->data[i] -= self.grad.data[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same(a, b, "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.value().data[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        const Tensor& av = parent_value(self, 0);
        const Tensor& bv = parent_value(self, 1);
        if (Tensor* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) g->data[i] += self.grad.data[i] * bv.data[i];
        }
        if (Tensor* g = parent_grad(self, 1)) {
            for (std::size_t i = 0; i < g->size(); ++i) g->data[i] += self.grad.data[i] * av.data[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (auto& v : out.data) v *= s;
    return make_op(std::move(out), {a}, [s](Node& self) {
        if (Tensor* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) g->data[i] += s * self.grad.data[i];
        }
    });
}

Var mul_channel(const Var& x, const Var& v) {
    const Shape xs = x.shape();
    const Shape vs = v.shape();
    if (vs.h != 1 || vs.w != 1 || vs.c != xs.c || (vs.n != 1 && vs.n != xs.n)) {
        throw ShapeError("mul_channel: cannot broadcast " + vs.str() + " over " + xs.str());
    }
    const bool per_sample = vs.n != 1;
    const std::size_t pix = static_cast<std::size_t>(xs.h) * xs.w;
    Tensor out = x.value();
    for (int n = 0; n < xs.n; ++n) {
        const double* vp = v.value().data.data() + (per_sample ? n * xs.c : 0);
        double* op = out.data.data() + n * pix * xs.c;
        for (std::size_t p = 0; p < pix; ++p)
            for (int c = 0; c < xs.c; ++c) op[p * xs.c + c] *= vp[c];
    }
    return make_op(std::move(out), {x, v}, [xs, per_sample, pix](Node& self) {
        const Tensor& xv = parent_value(self, 0);
        const Tensor& vv = parent_value(self, 1);
        Tensor* gx = parent_grad(self, 0);
        Tensor* gv = parent_grad(self, 1);
        for (int n = 0; n < xs.n; ++n) {
            const std::size_t vo = per_sample ? static_cast<std::size_t>(n) * xs.c : 0;
            const std::size_t base = n * pix * xs.c;
            for (std::size_t p = 0; p < pix; ++p) {
                for (int c = 0; c < xs.c; ++c) {
                    const std::size_t i = base + p * xs.c + c;
                    const double go = self.grad.data[i];
                    if (gx) gx->data[i] += go * vv.data[vo + c];
                    if (gv) gv->data[vo + c] += go * xv.data[i];
                }
            }
        }
    });
}

Var add_bias(const Var& x, const Var& b) {
    const Shape xs = x.shape();
    if (!(b.shape() == Shape{1, 1, 1, xs.c})) throw ShapeError("add_bias: bias shape " + b.shape().str());
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i % xs.c];
    return make_op(std::move(out), {x, b}, [xs](Node& self) {
        if (Tensor* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) g->data[i] += self.grad.data[i];
        }
        if (Tensor* g = parent_grad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g->data[i % xs.c] += self.grad.data[i];
        }
    });
}

Var mul_scalar(const Var& x, const Var& s) {
    if (s.value().size() != 1) throw ShapeError("mul_scalar: expected scalar, got " + s.shape().str());
    const double sv = s.value().data[0];
    Tensor out = x.value();
    for (auto& v : out.data) v *= sv;
    return make_op(std::move(out), {x, s}, [](Node& self) {
        const double sv = parent_value(self, 1).data[0];
        const Tensor& xv = parent_value(self, 0);
        if (Tensor* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) g->data[i] += sv * self.grad.data[i];
        }
        if (Tensor* g = parent_grad(self, 1)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < xv.size(); ++i) acc += xv.data[i] * self.grad.data[i];
            g->data[0] += acc;
        }
    });
}

Var relu(const Var& x) {
    Tensor out = x.value();
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    return make_op(std::move(out), {x}, [](Node& self) {
        if (Tensor* g = parent_grad(self, 0)) {
            const Tensor& xv = parent_value(self, 0);
            for (std::size_t i = 0; i < g->size(); ++i)
                if (xv.data[i] > 0.0) g->data[i] += self.grad.data[i];
        }
    });
}

Var sigmoid(const Var& x) {
    Tensor out = x.value();
    for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return make_op(std::move(out), {x}, [](Node& self) {
        if (Tensor* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                const double y = self.value.data[i];
                g->data[i] += self.grad.data[i] * y * (1.0 - y);
            }
        }
    });
}

Var exp_capped(const Var& x, double cap) {
    Tensor out = x.value();
    for (auto& v : out.data) v = std::exp(std::min(v, cap));
    return make_op(std::move(out), {x}, [cap](Node& self) {
        if (Tensor* g = parent_grad(self, 0)) {
            const Tensor& xv = parent_value(self, 0);
            for (std::size_t i = 0; i < g->size(); ++i)
                if (xv.data[i] < cap) g->data[i] += self.grad.data[i] * self.value.data[i];
        }
    });
}

Var global_avg_pool(const Var& x) {
    const Shape xs = x.shape();
    const std::size_t pix = static_cast<std::size_t>(xs.h) * xs.w;
    Tensor out(Shape{xs.n, 1, 1, xs.c});
    const double inv = 1.0 / static_cast<double>(pix);
    for (int n = 0; n < xs.n; ++n)
        for (std::size_t p = 0; p < pix; ++p)
            for (int c = 0; c < xs.c; ++c)
                out.data[n * xs.c + c] += x.value().data[(n * pix + p) * xs.c + c] * inv;
    return make_op(std::move(out), {x}, [xs, pix, inv](Node& self) {
        if (Tensor* g = parent_grad(self, 0)) {
            for (int n = 0; n < xs.n; ++n)
                for (std::size_t p = 0; p < pix; ++p)
                    for (int c = 0; c < xs.c; ++c)
                        g->data[(n * pix + p) * xs.c + c] += self.grad.data[n * xs.c + c] * inv;
        }
    });
}

Var channel_sum(const Var& x) {
    const Shape xs = x.shape();
    const std::size_t positions = static_cast<std::size_t>(xs.n) * xs.h * xs.w;
    Tensor out(Shape{xs.n, xs.h, xs.w, 1});
    for (std::size_t p = 0; p < positions; ++p) {
        double s = 0.0;
        for (int c = 0; c < xs.c; ++c) s += x.value().data[p * xs.c + c];
        out.data[p] = s;
    }
    return make_op(std::move(out), {x}, [xs, positions](Node& self) {
        if (Tensor* g = parent_grad(self, 0)) {
            for (std::size_t p = 0; p < positions; ++p)
                for (int c = 0; c < xs.c; ++c) g->data[p * xs.c + c] += self.grad.data[p];
        }
    });
}

Var sum(const Var& x) {
    return make_op(Tensor::scalar(x.value().sum()), {x}, [](Node& self) {
        if (Tensor* g = parent_grad(self, 0)) {
            const double go = self.grad.data[0];
            for (auto& v : g->data) v += go;
        }
    });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var conv1d_channels(const Var& v, const Var& w, const Var& b) {
    const Shape vs = v.shape();
    if (vs.h != 1 || vs.w != 1) throw ShapeError("conv1d_channels: expected [N,1,1,C], got " + vs.str());
    const int k = w.shape().c;
    if (w.value().size() != static_cast<std::size_t>(k) || k % 2 == 0) {
        throw ShapeError("conv1d_channels: kernel must be [1,1,1,k] with odd k");
    }
    if (b.value().size() != 1) throw ShapeError("conv1d_channels: bias must be scalar");
    const int half = k / 2;
    const int C = vs.c;
    Tensor out(vs);
    for (int n = 0; n < vs.n; ++n) {
        for (int c = 0; c < C; ++c) {
            double s = b.value().data[0];
            for (int j = 0; j < k; ++j) {
                const int src = c + j - half;
                if (src >= 0 && src < C) s += w.value().data[j] * v.value().data[n * C + src];
            }
            out.data[n * C + c] = s;
        }
    }
    return make_op(std::move(out), {v, w, b}, [vs, k, half, C](Node& self) {
        const Tensor& vv = parent_value(self, 0);
        const Tensor& wv = parent_value(self, 1);
        Tensor* gv = parent_grad(self, 0);
        Tensor* gw = parent_grad(self, 1);
        Tensor* gb = parent_grad(self, 2);
        for (int n = 0; n < vs.n; ++n) {
            for (int c = 0; c < C; ++c) {
                const double go = self.grad.data[n * C + c];
                if (gb) gb->data[0] += go;
                for (int j = 0; j < k; ++j) {
                    const int src = c + j - half;
                    if (src < 0 || src >= C) continue;
                    if (gv) gv->data[n * C + src] += go * wv.data[j];
                    if (gw) gw->data[j] += go * vv.data[n * C + src];
                }
            }
        }
    });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const Shape xs = x.shape();
    const Shape ws = w.shape();
    if (ws.n != ws.h || ws.w != xs.c) {
        throw ShapeError("conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
    }
    const int k = ws.n;
    const int cout = ws.c;
    const int ho = conv_out(xs.h, k, stride, pad);
    const int wo = conv_out(xs.w, k, stride, pad);
    if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: empty output for input " + xs.str());
    if (b.defined() && !(b.shape() == Shape{1, 1, 1, cout})) throw ShapeError("conv2d: bias shape");

    const long rows = static_cast<long>(xs.n) * ho * wo;
    const long kcols = static_cast<long>(k) * k * xs.c;
    // 1x1 stride-1 convolutions use the input directly as the column matrix.
    const bool direct = k == 1 && stride == 1 && pad == 0;
    MatR cols;
    if (!direct) {
        cols = MatR::Zero(rows, kcols);
        for (int n = 0; n < xs.n; ++n)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    double* row = cols.data() + ((static_cast<long>(n) * ho + oy) * wo + ox) * kcols;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= xs.h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= xs.w) continue;
                            const double* src = x.value().data.data() + x.value().index(n, iy, ix, 0);
                            std::copy_n(src, xs.c, row + (ky * k + kx) * xs.c);
                        }
                    }
                }
    }
    Tensor out(Shape{xs.n, ho, wo, cout});
    MapR Y(out.data.data(), rows, cout);
    CMapR W(w.value().data.data(), kcols, cout);
    if (direct) {
        Y.noalias() = CMapR(x.value().data.data(), rows, kcols) * W;
    } else {
        Y.noalias() = cols * W;
    }
    if (b.defined()) {
        Eigen::Map<const Eigen::RowVectorXd> bias(b.value().data.data(), cout);
        Y.rowwise() += bias;
    }

    std::vector<Var> inputs{x, w};
    if (b.defined()) inputs.push_back(b);
    const bool has_bias = b.defined();
    return make_op(std::move(out), std::move(inputs),
                   [xs, k, cout, ho, wo, stride, pad, rows, kcols, direct, has_bias,
                    cols = std::move(cols)](Node& self) {
                       CMapR dY(self.grad.data.data(), rows, cout);
                       const Tensor& xv = parent_value(self, 0);
                       const Tensor& wv = parent_value(self, 1);
                       if (Tensor* gw = parent_grad(self, 1)) {
                           MapR dW(gw->data.data(), kcols, cout);
                           if (direct) {
                               dW.noalias() += CMapR(xv.data.data(), rows, kcols).transpose() * dY;
                           } else {
                               dW.noalias() += cols.transpose() * dY;
                           }
                       }
                       if (has_bias) {
                           if (Tensor* gb = parent_grad(self, 2)) {
                               Eigen::Map<Eigen::RowVectorXd> db(gb->data.data(), cout);
                               db += dY.colwise().sum();
                           }
                       }
                       if (Tensor* gx = parent_grad(self, 0)) {
                           CMapR W(wv.data.data(), kcols, cout);
                           if (direct) {
                               MapR(gx->data.data(), rows, kcols).noalias() += dY * W.transpose();
                               return;
                           }
                           MatR dcols = dY * W.transpose();
                           for (int n = 0; n < xs.n; ++n)
                               for (int oy = 0; oy < ho; ++oy)
                                   for (int ox = 0; ox < wo; ++ox) {
                                       const double* row =
                                           dcols.data() + ((static_cast<long>(n) * ho + oy) * wo + ox) * kcols;
                                       for (int ky = 0; ky < k; ++ky) {
                                           const int iy = oy * stride + ky - pad;
                                           if (iy < 0 || iy >= xs.h) continue;
                                           for (int kx = 0; kx < k; ++kx) {
                                               const int ix = ox * stride + kx - pad;
                                               if (ix < 0 || ix >= xs.w) continue;
                                               double* dst = gx->data.data() + gx->index(n, iy, ix, 0);
                                               const double* src = row + (ky * k + kx) * xs.c;
                                               for (int c = 0; c < xs.c; ++c) dst[c] += src[c];
                                           }
                                       }
                                   }
                       }
                   });
}

Var pointwise(const Var& x, const Var& w, const Var& b) {
    if (w.shape().n != 1 || w.shape().h != 1) throw ShapeError("pointwise: weight must be [1,1,Cin,Cout]");
    return conv2d(x, w, b, 1, 0);
}

Var depthwise(const Var& x, const Var& w, int stride, int pad) {
    const Shape xs = x.shape();
    const Shape ws = w.shape();
    if (ws.n != ws.h || ws.w != 1 || ws.c != xs.c) {
        throw ShapeError("depthwise: weight " + ws.str() + " incompatible with input " + xs.str());
    }
    const int k = ws.n;
    const int ho = conv_out(xs.h, k, stride, pad);
    const int wo = conv_out(xs.w, k, stride, pad);
    if (ho <= 0 || wo <= 0) throw ShapeError("depthwise: empty output for input " + xs.str());
    const int C = xs.c;
    Tensor out(Shape{xs.n, ho, wo, C});
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    for (int n = 0; n < xs.n; ++n)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double* dst = out.data.data() + out.index(n, oy, ox, 0);
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= xs.h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= xs.w) continue;
                        const double* src = xv.data.data() + xv.index(n, iy, ix, 0);
                        const double* kw = wv.data.data() + (ky * k + kx) * C;
                        for (int c = 0; c < C; ++c) dst[c] += src[c] * kw[c];
                    }
                }
            }
    return make_op(std::move(out), {x, w}, [xs, k, ho, wo, stride, pad, C](Node& self) {
        const Tensor& xv = parent_value(self, 0);
        const Tensor& wv = parent_value(self, 1);
        Tensor* gx = parent_grad(self, 0);
        Tensor* gw = parent_grad(self, 1);
        for (int n = 0; n < xs.n; ++n)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    const double* go = self.grad.data.data() + self.grad.index(n, oy, ox, 0);
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= xs.h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= xs.w) continue;
                            const std::size_t xi = xv.index(n, iy, ix, 0);
                            const std::size_t wi = static_cast<std::size_t>(ky * k + kx) * C;
                            for (int c = 0; c < C; ++c) {
                                if (gx) gx->data[xi + c] += go[c] * wv.data[wi + c];
                                if (gw) gw->data[wi + c] += go[c] * xv.data[xi + c];
                            }
                        }
                    }
                }
    });
}

Var spectral_conv3d(const Var& x, const Var& w, const Var& b, int stride) {
    const Shape xs = x.shape();
    const Shape ws = w.shape();
    if (ws.h != 3 || ws.w != 3 || ws.c != 3) throw ShapeError("spectral_conv3d: weight must be [m,3,3,3]");
    const int m = ws.n;
    if (b.defined() && !(b.shape() == Shape{1, 1, 1, m})) throw ShapeError("spectral_conv3d: bias shape");
    const int ho = conv_out(xs.h, 3, stride, 1);
    const int wo = conv_out(xs.w, 3, stride, 1);
    const int D = xs.c;
    const int cout = m * D;
    Tensor out(Shape{xs.n, ho, wo, cout});
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    // weight index: ((f*3 + kd)*3 + ky)*3 + kx
    for (int n = 0; n < xs.n; ++n)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double* dst = out.data.data() + out.index(n, oy, ox, 0);
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = oy * stride + ky - 1;
                    if (iy < 0 || iy >= xs.h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = ox * stride + kx - 1;
                        if (ix < 0 || ix >= xs.w) continue;
                        const double* src = xv.data.data() + xv.index(n, iy, ix, 0);
                        for (int f = 0; f < m; ++f) {
                            double* d = dst + f * D;
                            for (int kd = 0; kd < 3; ++kd) {
                                const double wt = wv.data[((f * 3 + kd) * 3 + ky) * 3 + kx];
                                const int lo = std::max(0, 1 - kd);
                                const int hi = std::min(D, D + 1 - kd);
                                for (int dd = lo; dd < hi; ++dd) d[dd] += wt * src[dd + kd - 1];
                            }
                        }
                    }
                }
                if (b.defined())
                    for (int f = 0; f < m; ++f)
                        for (int dd = 0; dd < D; ++dd) dst[f * D + dd] += b.value().data[f];
            }
    std::vector<Var> inputs{x, w};
    const bool has_bias = b.defined();
    if (has_bias) inputs.push_back(b);
    return make_op(std::move(out), std::move(inputs), [xs, m, D, ho, wo, stride, has_bias](Node& self) {
        const Tensor& xv = parent_value(self, 0);
        const Tensor& wv = parent_value(self, 1);
        Tensor* gx = parent_grad(self, 0);
        Tensor* gw = parent_grad(self, 1);
        Tensor* gb = has_bias ? parent_grad(self, 2) : nullptr;
        for (int n = 0; n < xs.n; ++n)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    const double* go = self.grad.data.data() + self.grad.index(n, oy, ox, 0);
                    if (gb)
                        for (int f = 0; f < m; ++f)
                            for (int dd = 0; dd < D; ++dd) gb->data[f] += go[f * D + dd];
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = oy * stride + ky - 1;
                        if (iy < 0 || iy >= xs.h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = ox * stride + kx - 1;
                            if (ix < 0 || ix >= xs.w) continue;
                            const std::size_t xi = xv.index(n, iy, ix, 0);
                            for (int f = 0; f < m; ++f) {
                                const double* g = go + f * D;
                                for (int kd = 0; kd < 3; ++kd) {
                                    const std::size_t wi = ((f * 3 + kd) * 3 + ky) * 3 + kx;
                                    const int lo = std::max(0, 1 - kd);
                                    const int hi = std::min(D, D + 1 - kd);
                                    double acc = 0.0;
                                    for (int dd = lo; dd < hi; ++dd) {
                                        acc += g[dd] * xv.data[xi + dd + kd - 1];
                                        if (gx) gx->data[xi + dd + kd - 1] += g[dd] * wv.data[wi];
                                    }
                                    if (gw) gw->data[wi] += acc;
                                }
                            }
                        }
                    }
                }
    });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState state, NormMode mode,
               double momentum, double eps) {
    const Shape xs = x.shape();
    const int C = xs.c;
    if (gamma.value().size() != static_cast<std::size_t>(C) || beta.value().size() != static_cast<std::size_t>(C)) {
        throw ShapeError("batch_norm: affine parameters must have " + std::to_string(C) + " channels");
    }
    const std::size_t m = static_cast<std::size_t>(xs.n) * xs.h * xs.w;
    std::vector<double> mu(C, 0.0), inv_std(C, 0.0);
    const Tensor& xv = x.value();
    if (mode == NormMode::Running) {
        for (int c = 0; c < C; ++c) {
            mu[c] = state.running_mean->value.data[c];
            inv_std[c] = 1.0 / std::sqrt(state.running_var->value.data[c] + eps);
        }
    } else {
        std::vector<double> var(C, 0.0);
        for (std::size_t p = 0; p < m; ++p)
            for (int c = 0; c < C; ++c) mu[c] += xv.data[p * C + c];
        for (int c = 0; c < C; ++c) mu[c] /= static_cast<double>(m);
        for (std::size_t p = 0; p < m; ++p)
            for (int c = 0; c < C; ++c) {
                const double d = xv.data[p * C + c] - mu[c];
                var[c] += d * d;
            }
        for (int c = 0; c < C; ++c) {
            var[c] /= static_cast<double>(m);
            inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
        }
        if (mode == NormMode::Batch && state.running_mean && state.running_var) {
            const double unbias = m > 1 ? static_cast<double>(m) / static_cast<double>(m - 1) : 1.0;
            for (int c = 0; c < C; ++c) {
                double& rm = state.running_mean->value.data[c];
                double& rv = state.running_var->value.data[c];
                rm = (1.0 - momentum) * rm + momentum * mu[c];
                rv = (1.0 - momentum) * rv + momentum * var[c] * unbias;
            }
        }
    }
    Tensor xhat(xs);
    Tensor out(xs);
    for (std::size_t p = 0; p < m; ++p)
        for (int c = 0; c < C; ++c) {
            const std::size_t i = p * C + c;
            xhat.data[i] = (xv.data[i] - mu[c]) * inv_std[c];
            out.data[i] = gamma.value().data[c] * xhat.data[i] + beta.value().data[c];
        }
    const bool batch_stats = mode != NormMode::Running;
    return make_op(std::move(out), {x, gamma, beta},
                   [C, m, batch_stats, inv_std = std::move(inv_std), xhat = std::move(xhat)](Node& self) {
                       const Tensor& gv = parent_value(self, 1);
                       std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
                       for (std::size_t p = 0; p < m; ++p)
                           for (int c = 0; c < C; ++c) {
                               const std::size_t i = p * C + c;
                               sum_dy[c] += self.grad.data[i];
                               sum_dy_xhat[c] += self.grad.data[i] * xhat.data[i];
                           }
                       if (Tensor* gg = parent_grad(self, 1))
                           for (int c = 0; c < C; ++c) gg->data[c] += sum_dy_xhat[c];
                       if (Tensor* gb = parent_grad(self, 2))
                           for (int c = 0; c < C; ++c) gb->data[c] += sum_dy[c];
                       Tensor* gx = parent_grad(self, 0);
                       if (!gx) return;
                       const double md = static_cast<double>(m);
                       for (std::size_t p = 0; p < m; ++p)
                           for (int c = 0; c < C; ++c) {
                               const std::size_t i = p * C + c;
                               const double scale = gv.data[c] * inv_std[c];
                               if (batch_stats) {
                                   gx->data[i] += scale * (self.grad.data[i] - sum_dy[c] / md -
                                                           xhat.data[i] * sum_dy_xhat[c] / md);
                               } else {
                                   gx->data[i] += scale * self.grad.data[i];
                               }
                           }
                   });
}

Var dw_xcorr(const Var& z, const Var& x) {
    const Shape zs = z.shape();
    const Shape xs = x.shape();
    if (zs.n != xs.n || zs.c != xs.c) throw ShapeError("dw_xcorr: batch/channel mismatch " + zs.str() + " vs " + xs.str());
    if (zs.h > xs.h || zs.w > xs.w) throw ShapeError("dw_xcorr: template " + zs.str() + " larger than search " + xs.str());
    const int oh = xs.h - zs.h + 1;
    const int ow = xs.w - zs.w + 1;
    const int C = xs.c;
    Tensor out(Shape{xs.n, oh, ow, C});
    const Tensor& zv = z.value();
    const Tensor& xv = x.value();
    for (int n = 0; n < xs.n; ++n)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                double* dst = out.data.data() + out.index(n, i, j, 0);
                for (int a = 0; a < zs.h; ++a)
                    for (int b = 0; b < zs.w; ++b) {
                        const double* zp = zv.data.data() + zv.index(n, a, b, 0);
                        const double* xp = xv.data.data() + xv.index(n, i + a, j + b, 0);
                        for (int c = 0; c < C; ++c) dst[c] += zp[c] * xp[c];
                    }
            }
    return make_op(std::move(out), {z, x}, [zs, xs, oh, ow, C](Node& self) {
        const Tensor& zv = parent_value(self, 0);
        const Tensor& xv = parent_value(self, 1);
        Tensor* gz = parent_grad(self, 0);
        Tensor* gx = parent_grad(self, 1);
        for (int n = 0; n < xs.n; ++n)
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    const double* go = self.grad.data.data() + self.grad.index(n, i, j, 0);
                    for (int a = 0; a < zs.h; ++a)
                        for (int b = 0; b < zs.w; ++b) {
                            const std::size_t zi = zv.index(n, a, b, 0);
                            const std::size_t xi = xv.index(n, i + a, j + b, 0);
                            for (int c = 0; c < C; ++c) {
                                if (gz) gz->data[zi + c] += go[c] * xv.data[xi + c];
                                if (gx) gx->data[xi + c] += go[c] * zv.data[zi + c];
                            }
                        }
                }
    });
}

Var l2_normalize_channels(const Var& x, double eps) {
    const Shape xs = x.shape();
    const std::size_t positions = static_cast<std::size_t>(xs.n) * xs.h * xs.w;
    const int C = xs.c;
    Tensor out = x.value();
    std::vector<double> norms(positions);
    for (std::size_t p = 0; p < positions; ++p) {
        double s = eps;
        for (int c = 0; c < C; ++c) s += out.data[p * C + c] * out.data[p * C + c];
        norms[p] = std::sqrt(s);
        for (int c = 0; c < C; ++c) out.data[p * C + c] /= norms[p];
    }
    return make_op(std::move(out), {x}, [positions, C, norms = std::move(norms)](Node& self) {
        Tensor* g = parent_grad(self, 0);
        if (!g) return;
        for (std::size_t p = 0; p < positions; ++p) {
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += self.grad.data[p * C + c] * self.value.data[p * C + c];
            for (int c = 0; c < C; ++c) {
                const std::size_t i = p * C + c;
                g->data[i] += (self.grad.data[i] - self.value.data[i] * dot) / norms[p];
            }
        }
    });
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
    const Shape xs = x.shape();
    if (out_h <= 0 || out_w <= 0) throw ShapeError("resize_bilinear: non-positive size");
    if (xs.h == out_h && xs.w == out_w) return x;
    struct Tap {
        int i0, i1;
        double f;
    };
    auto taps = [](int in, int out) {
        std::vector<Tap> t(out);
        for (int o = 0; o < out; ++o) {
            const double pos = out > 1 ? static_cast<double>(o) * (in - 1) / (out - 1) : 0.0;
            const int i0 = std::min(static_cast<int>(std::floor(pos)), in - 1);
            const int i1 = std::min(i0 + 1, in - 1);
            t[o] = Tap{i0, i1, pos - i0};
        }
        return t;
    };
    const auto ty = taps(xs.h, out_h);
    const auto tx = taps(xs.w, out_w);
    const int C = xs.c;
    Tensor out(Shape{xs.n, out_h, out_w, C});
    const Tensor& xv = x.value();
    for (int n = 0; n < xs.n; ++n)
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox) {
                const Tap& a = ty[oy];
                const Tap& b = tx[ox];
                for (int c = 0; c < C; ++c) {
                    out.at(n, oy, ox, c) = (1 - a.f) * ((1 - b.f) * xv.at(n, a.i0, b.i0, c) + b.f * xv.at(n, a.i0, b.i1, c)) +
                                           a.f * ((1 - b.f) * xv.at(n, a.i1, b.i0, c) + b.f * xv.at(n, a.i1, b.i1, c));
                }
            }
    return make_op(std::move(out), {x}, [xs, out_h, out_w, C, ty, tx](Node& self) {
        Tensor* g = parent_grad(self, 0);
        if (!g) return;
        for (int n = 0; n < xs.n; ++n)
            for (int oy = 0; oy < out_h; ++oy)
                for (int ox = 0; ox < out_w; ++ox) {
                    const Tap& a = ty[oy];
                    const Tap& b = tx[ox];
                    for (int c = 0; c < C; ++c) {
                        const double go = self.grad.at(n, oy, ox, c);
                        g->at(n, a.i0, b.i0, c) += go * (1 - a.f) * (1 - b.f);
                        g->at(n, a.i0, b.i1, c) += go * (1 - a.f) * b.f;
                        g->at(n, a.i1, b.i0, c) += go * a.f * (1 - b.f);
                        g->at(n, a.i1, b.i1, c) += go * a.f * b.f;
                    }
                }
    });
}

Var slice_channels(const Var& x, int c0, int count) {
    const Shape xs = x.shape();
    Tensor out = x.value().channels(c0, count);
    const std::size_t positions = static_cast<std::size_t>(xs.n) * xs.h * xs.w;
    return make_op(std::move(out), {x}, [xs, c0, count, positions](Node& self) {
        if (Tensor* g = parent_grad(self, 0)) {
            for (std::size_t p = 0; p < positions; ++p)
                for (int c = 0; c < count; ++c) g->data[p * xs.c + c0 + c] += self.grad.data[p * count + c];
        }
    });
}

}  // namespace ssfnet::ops
