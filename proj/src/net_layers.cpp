#include "net_layers.hpp"

#include <algorithm>
#include <cmath>

#include "sietrack/errors.hpp"

namespace sietrack::net {

namespace {

using EMap = Eigen::Map<RowMat>;
using CEMap = Eigen::Map<const RowMat>;

// Gathers the im2col patch matrix for one sample: (oh*ow) x (k*k*in_c),
// zero-filled where the window hangs over the border.
void im2col(const double* x, int h, int w, int c, const ConvSpec& s, RowMat& patches) {
    const int oh = s.out_size(h);
    const int ow = s.out_size(w);
    patches.resize(static_cast<Eigen::Index>(oh) * ow, static_cast<Eigen::Index>(s.k) * s.k * c);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            double* row = patches.data() + (static_cast<size_t>(oy) * ow + ox) * patches.cols();
            for (int ky = 0; ky < s.k; ++ky) {
                const int iy = oy * s.stride - s.pad + ky;
                for (int kx = 0; kx < s.k; ++kx) {
                    const int ix = ox * s.stride - s.pad + kx;
                    double* dst = row + (static_cast<size_t>(ky) * s.k + kx) * c;
                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                        std::fill(dst, dst + c, 0.0);
                    } else {
                        const double* src = x + (static_cast<size_t>(iy) * w + ix) * c;
                        std::copy(src, src + c, dst);
                    }
                }
            }
        }
    }
}

// Scatter-adds a patch-gradient matrix back onto the input gradient.
void col2im_add(const RowMat& dpatches, int h, int w, int c, const ConvSpec& s, double* dx) {
    const int oh = s.out_size(h);
    const int ow = s.out_size(w);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const double* row = dpatches.data() + (static_cast<size_t>(oy) * ow + ox) * dpatches.cols();
            for (int ky = 0; ky < s.k; ++ky) {
                const int iy = oy * s.stride - s.pad + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < s.k; ++kx) {
                    const int ix = ox * s.stride - s.pad + kx;
                    if (ix < 0 || ix >= w) continue;
                    const double* src = row + (static_cast<size_t>(ky) * s.k + kx) * c;
                    double* dst = dx + (static_cast<size_t>(iy) * w + ix) * c;
                    for (int ci = 0; ci < c; ++ci) dst[ci] += src[ci];
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const ConvSpec& s, const std::vector<double>& w,
                      const std::vector<double>& b, ConvCache* cache) {
    if (x.c() != s.in_c) {
        throw ShapeError("conv2d: expected " + std::to_string(s.in_c) + " input channels, got " +
                         std::to_string(x.c()) + " (input " + x.shape_str() + ")");
    }
    const int oh = s.out_size(x.h());
    const int ow = s.out_size(x.w());
    if (oh <= 0 || ow <= 0) {
        throw ShapeError("conv2d: input " + x.shape_str() + " too small for kernel " +
                         std::to_string(s.k) + "/stride " + std::to_string(s.stride));
    }
    Tensor y(x.n(), oh, ow, s.out_c);
    CEMap wm(w.data(), static_cast<Eigen::Index>(s.k) * s.k * s.in_c, s.out_c);
    RowMat patches;
    for (int bi = 0; bi < x.n(); ++bi) {
        im2col(x.sample(bi), x.h(), x.w(), x.c(), s, patches);
        EMap ym(y.sample(bi), static_cast<Eigen::Index>(oh) * ow, s.out_c);
        ym.noalias() = patches * wm;
        ym.rowwise() += CEMap(b.data(), 1, s.out_c).row(0);
    }
    if (cache) cache->x = x;
    return y;
}

Tensor conv2d_backward(const Tensor& dy, const ConvSpec& s, const std::vector<double>& w,
                       const ConvCache& cache, std::vector<double>& dw, std::vector<double>& db) {
    const Tensor& x = cache.x;
    const int oh = s.out_size(x.h());
    const int ow = s.out_size(x.w());
    Tensor dx(x.n(), x.h(), x.w(), x.c());
    CEMap wm(w.data(), static_cast<Eigen::Index>(s.k) * s.k * s.in_c, s.out_c);
    EMap dwm(dw.data(), static_cast<Eigen::Index>(s.k) * s.k * s.in_c, s.out_c);
    EMap dbm(db.data(), 1, s.out_c);
    RowMat patches, dpatches;
    for (int bi = 0; bi < x.n(); ++bi) {
        CEMap dym(dy.sample(bi), static_cast<Eigen::Index>(oh) * ow, s.out_c);
        im2col(x.sample(bi), x.h(), x.w(), x.c(), s, patches);
        dwm.noalias() += patches.transpose() * dym;
        dbm.row(0) += dym.colwise().sum();
        dpatches.noalias() = dym * wm.transpose();
        col2im_add(dpatches, x.h(), x.w(), x.c(), s, dx.sample(bi));
    }
    return dx;
}

Tensor bn_forward_train(const Tensor& x, const std::vector<double>& gamma,
                        const std::vector<double>& beta, std::vector<double>& running_mean,
                        std::vector<double>& running_var, bool update_running, BnCache* cache) {
    const int c = x.c();
    const size_t count = x.size() / c;  // n*h*w
    std::vector<double> mean(c, 0.0), var(c, 0.0);
    const double* p = x.data();
    for (size_t i = 0; i < count; ++i, p += c) {
        for (int k = 0; k < c; ++k) mean[k] += p[k];
    }
    for (int k = 0; k < c; ++k) mean[k] /= static_cast<double>(count);
    p = x.data();
    for (size_t i = 0; i < count; ++i, p += c) {
        for (int k = 0; k < c; ++k) {
            const double d = p[k] - mean[k];
            var[k] += d * d;
        }
    }
    std::vector<double> inv_std(c);
    for (int k = 0; k < c; ++k) {
        var[k] /= static_cast<double>(count);
        inv_std[k] = 1.0 / std::sqrt(var[k] + kBnEps);
    }
    if (update_running) {
        for (int k = 0; k < c; ++k) {
            running_mean[k] = (1.0 - kBnMomentum) * running_mean[k] + kBnMomentum * mean[k];
            running_var[k] = (1.0 - kBnMomentum) * running_var[k] + kBnMomentum * var[k];
        }
    }
    Tensor xhat(x.n(), x.h(), x.w(), c);
    Tensor y(x.n(), x.h(), x.w(), c);
    const double* px = x.data();
    double* ph = xhat.data();
    double* py = y.data();
    for (size_t i = 0; i < count; ++i, px += c, ph += c, py += c) {
        for (int k = 0; k < c; ++k) {
            ph[k] = (px[k] - mean[k]) * inv_std[k];
            py[k] = gamma[k] * ph[k] + beta[k];
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Tensor bn_forward_eval(const Tensor& x, const std::vector<double>& gamma,
                       const std::vector<double>& beta, const std::vector<double>& running_mean,
                       const std::vector<double>& running_var) {
    const int c = x.c();
    std::vector<double> scale(c), shift(c);
    for (int k = 0; k < c; ++k) {
        scale[k] = gamma[k] / std::sqrt(running_var[k] + kBnEps);
        shift[k] = beta[k] - scale[k] * running_mean[k];
    }
    Tensor y(x.n(), x.h(), x.w(), c);
    const size_t count = x.size() / c;
    const double* px = x.data();
    double* py = y.data();
    for (size_t i = 0; i < count; ++i, px += c, py += c) {
        for (int k = 0; k < c; ++k) py[k] = scale[k] * px[k] + shift[k];
    }
    return y;
}

Tensor bn_backward(const Tensor& dy, const std::vector<double>& gamma, const BnCache& cache,
                   std::vector<double>& dgamma, std::vector<double>& dbeta) {
    const Tensor& xhat = cache.xhat;
    const int c = xhat.c();
    const size_t count = xhat.size() / c;
    std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
    {
        const double* pd = dy.data();
        const double* ph = xhat.data();
        for (size_t i = 0; i < count; ++i, pd += c, ph += c) {
            for (int k = 0; k < c; ++k) {
                sum_dy[k] += pd[k];
                sum_dy_xhat[k] += pd[k] * ph[k];
            }
        }
    }
    for (int k = 0; k < c; ++k) {
        dgamma[k] += sum_dy_xhat[k];
        dbeta[k] += sum_dy[k];
    }
    Tensor dx(dy.n(), dy.h(), dy.w(), c);
    const double n = static_cast<double>(count);
    const double* pd = dy.data();
    const double* ph = xhat.data();
    double* px = dx.data();
    for (size_t i = 0; i < count; ++i, pd += c, ph += c, px += c) {
        for (int k = 0; k < c; ++k) {
            px[k] = gamma[k] * cache.inv_std[k] / n *
                    (n * pd[k] - sum_dy[k] - ph[k] * sum_dy_xhat[k]);
        }
    }
    return dx;
}

Tensor relu_forward(const Tensor& x, ReluCache* cache) {
    Tensor y(x.n(), x.h(), x.w(), x.c());
    if (cache) cache->pos.assign(x.size(), 0);
    const double* px = x.data();
    double* py = y.data();
    for (size_t i = 0; i < x.size(); ++i) {
        if (px[i] > 0.0) {
            py[i] = px[i];
            if (cache) cache->pos[i] = 1;
        }
    }
    return y;
}

Tensor relu_backward(const Tensor& dy, const ReluCache& cache) {
    Tensor dx(dy.n(), dy.h(), dy.w(), dy.c());
    const double* pd = dy.data();
    double* px = dx.data();
    for (size_t i = 0; i < dy.size(); ++i) px[i] = cache.pos[i] ? pd[i] : 0.0;
    return dx;
}

Tensor maxpool2_forward(const Tensor& x, PoolCache* cache) {
    const int oh = (x.h() - 2) / 2 + 1;
    const int ow = (x.w() - 2) / 2 + 1;
    if (oh <= 0 || ow <= 0) throw ShapeError("maxpool2: input " + x.shape_str() + " too small");
    const int c = x.c();
    Tensor y(x.n(), oh, ow, c);
    if (cache) {
        cache->argmax.assign(y.size(), 0);
        cache->in_h = x.h();
        cache->in_w = x.w();
    }
    for (int bi = 0; bi < x.n(); ++bi) {
        const double* xs = x.sample(bi);
        double* ys = y.sample(bi);
        const size_t base = static_cast<size_t>(bi) * x.sample_size();
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                for (int k = 0; k < c; ++k) {
                    double best = -std::numeric_limits<double>::infinity();
                    size_t best_idx = 0;
                    for (int dy0 = 0; dy0 < 2; ++dy0) {
                        for (int dx0 = 0; dx0 < 2; ++dx0) {
                            const size_t idx =
                                (static_cast<size_t>(oy * 2 + dy0) * x.w() + (ox * 2 + dx0)) * c + k;
                            if (xs[idx] > best) {
                                best = xs[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    const size_t out_idx = (static_cast<size_t>(oy) * ow + ox) * c + k;
                    ys[out_idx] = best;
                    if (cache) {
                        cache->argmax[static_cast<size_t>(bi) * y.sample_size() + out_idx] =
                            static_cast<int32_t>(base + best_idx);
                    }
                }
            }
        }
    }
    return y;
}

Tensor maxpool2_backward(const Tensor& dy, const PoolCache& cache, int c) {
    Tensor dx(dy.n(), cache.in_h, cache.in_w, c);
    const double* pd = dy.data();
    for (size_t i = 0; i < dy.size(); ++i) {
        dx.values()[static_cast<size_t>(cache.argmax[i])] += pd[i];
    }
    return dx;
}

RowMat dense_forward(const RowMat& x, int in, int out, const std::vector<double>& w,
                     const std::vector<double>& b, DenseCache* cache) {
    CEMap wm(w.data(), in, out);
    RowMat y = x * wm;
    y.rowwise() += CEMap(b.data(), 1, out).row(0);
    if (cache) cache->x = x;
    return y;
}

RowMat dense_backward(const RowMat& dy, int in, int out, const std::vector<double>& w,
                      const DenseCache& cache, std::vector<double>& dw, std::vector<double>& db) {
    CEMap wm(w.data(), in, out);
    EMap dwm(dw.data(), in, out);
    EMap dbm(db.data(), 1, out);
    dwm.noalias() += cache.x.transpose() * dy;
    dbm.row(0) += dy.colwise().sum();
    return dy * wm.transpose();
}

namespace {

RowMat se_pool(const Tensor& x) {
    const int c = x.c();
    RowMat z = RowMat::Zero(x.n(), c);
    for (int bi = 0; bi < x.n(); ++bi) {
        const double* p = x.sample(bi);
        const size_t count = x.sample_size() / c;
        for (size_t i = 0; i < count; ++i, p += c) {
            for (int k = 0; k < c; ++k) z(bi, k) += p[k];
        }
        z.row(bi) /= static_cast<double>(count);
    }
    return z;
}

void se_bottleneck(const RowMat& z, int mid, const std::vector<double>& w1,
                   const std::vector<double>& b1, const std::vector<double>& w2,
                   const std::vector<double>& b2, RowMat& a, RowMat& s) {
    const int c = static_cast<int>(z.cols());
    a = z * CEMap(w1.data(), c, mid);
    a.rowwise() += CEMap(b1.data(), 1, mid).row(0);
    a = a.cwiseMax(0.0);
    s = a * CEMap(w2.data(), mid, c);
    s.rowwise() += CEMap(b2.data(), 1, c).row(0);
    s = s.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

RowMat se_gate_batch(const Tensor& x, int mid, const std::vector<double>& w1,
                     const std::vector<double>& b1, const std::vector<double>& w2,
                     const std::vector<double>& b2) {
    RowMat a, s;
    se_bottleneck(se_pool(x), mid, w1, b1, w2, b2, a, s);
    return s;
}

Tensor se_forward(const Tensor& x, int mid, const std::vector<double>& w1,
                  const std::vector<double>& b1, const std::vector<double>& w2,
                  const std::vector<double>& b2, SeCache* cache) {
    RowMat z = se_pool(x);
    RowMat a, s;
    se_bottleneck(z, mid, w1, b1, w2, b2, a, s);
    const int c = x.c();
    Tensor y(x.n(), x.h(), x.w(), c);
    for (int bi = 0; bi < x.n(); ++bi) {
        const double* px = x.sample(bi);
        double* py = y.sample(bi);
        const size_t count = x.sample_size() / c;
        for (size_t i = 0; i < count; ++i, px += c, py += c) {
            for (int k = 0; k < c; ++k) py[k] = px[k] * s(bi, k);
        }
    }
    if (cache) {
        cache->x = x;
        cache->z = std::move(z);
        cache->a = std::move(a);
        cache->s = std::move(s);
    }
    return y;
}

Tensor se_backward(const Tensor& dy, int mid, const std::vector<double>& w1,
                   const std::vector<double>& w2, const SeCache& cache, std::vector<double>& dw1,
                   std::vector<double>& db1, std::vector<double>& dw2, std::vector<double>& db2) {
    const Tensor& x = cache.x;
    const int c = x.c();
    const int n = x.n();
    const size_t count = x.sample_size() / c;

    // gate gradient and the direct rescale path
    RowMat ds = RowMat::Zero(n, c);
    Tensor dx(n, x.h(), x.w(), c);
    for (int bi = 0; bi < n; ++bi) {
        const double* px = x.sample(bi);
        const double* pd = dy.sample(bi);
        double* pdx = dx.sample(bi);
        for (size_t i = 0; i < count; ++i, px += c, pd += c, pdx += c) {
            for (int k = 0; k < c; ++k) {
                ds(bi, k) += pd[k] * px[k];
                pdx[k] = pd[k] * cache.s(bi, k);
            }
        }
    }

    // back through sigmoid, fc2, relu, fc1
    RowMat du2 = ds.cwiseProduct(cache.s.cwiseProduct(RowMat::Constant(n, c, 1.0) - cache.s));
    EMap dw2m(dw2.data(), mid, c);
    EMap db2m(db2.data(), 1, c);
    dw2m.noalias() += cache.a.transpose() * du2;
    db2m.row(0) += du2.colwise().sum();
    RowMat da = du2 * CEMap(w2.data(), mid, c).transpose();
    RowMat du1 = da.cwiseProduct(
        cache.a.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    EMap dw1m(dw1.data(), c, mid);
    EMap db1m(db1.data(), 1, mid);
    dw1m.noalias() += cache.z.transpose() * du1;
    db1m.row(0) += du1.colwise().sum();
    RowMat dz = du1 * CEMap(w1.data(), c, mid).transpose();

    // pooled path back onto the input
    for (int bi = 0; bi < n; ++bi) {
        double* pdx = dx.sample(bi);
        for (size_t i = 0; i < count; ++i, pdx += c) {
            for (int k = 0; k < c; ++k) pdx[k] += dz(bi, k) / static_cast<double>(count);
        }
    }
    return dx;
}

Tensor correlate_forward(const Tensor& fx, const Tensor& fz) {
    if (fx.c() != fz.c()) {
        throw ShapeError("correlate: channel mismatch, detection " + fx.shape_str() +
                         " vs template " + fz.shape_str());
    }
    if (fx.n() != fz.n()) {
        throw ShapeError("correlate: batch mismatch, " + fx.shape_str() + " vs " + fz.shape_str());
    }
    if (fz.h() > fx.h() || fz.w() > fx.w()) {
        throw ShapeError("correlate: template " + fz.shape_str() + " larger than detection " +
                         fx.shape_str());
    }
    const int oh = fx.h() - fz.h() + 1;
    const int ow = fx.w() - fz.w() + 1;
    const int c = fx.c();
    Tensor y(fx.n(), oh, ow, c);
    for (int bi = 0; bi < fx.n(); ++bi) {
        const double* px = fx.sample(bi);
        const double* pz = fz.sample(bi);
        double* py = y.sample(bi);
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double* out = py + (static_cast<size_t>(oy) * ow + ox) * c;
                for (int ky = 0; ky < fz.h(); ++ky) {
                    const double* xrow = px + (static_cast<size_t>(oy + ky) * fx.w() + ox) * c;
                    const double* zrow = pz + static_cast<size_t>(ky) * fz.w() * c;
                    for (int kx = 0; kx < fz.w(); ++kx) {
                        const double* xv = xrow + static_cast<size_t>(kx) * c;
                        const double* zv = zrow + static_cast<size_t>(kx) * c;
                        for (int k = 0; k < c; ++k) out[k] += xv[k] * zv[k];
                    }
                }
            }
        }
    }
    return y;
}

void correlate_backward(const Tensor& dy, const Tensor& fx, const Tensor& fz, Tensor& dfx,
                        Tensor& dfz) {
    const int oh = dy.h();
    const int ow = dy.w();
    const int c = fx.c();
    dfx = Tensor(fx.n(), fx.h(), fx.w(), c);
    dfz = Tensor(fz.n(), fz.h(), fz.w(), c);
    for (int bi = 0; bi < fx.n(); ++bi) {
        const double* pd = dy.sample(bi);
        const double* px = fx.sample(bi);
        const double* pz = fz.sample(bi);
        double* pdx = dfx.sample(bi);
        double* pdz = dfz.sample(bi);
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const double* dout = pd + (static_cast<size_t>(oy) * ow + ox) * c;
                for (int ky = 0; ky < fz.h(); ++ky) {
                    for (int kx = 0; kx < fz.w(); ++kx) {
                        const size_t xoff = (static_cast<size_t>(oy + ky) * fx.w() + (ox + kx)) * c;
                        const size_t zoff = (static_cast<size_t>(ky) * fz.w() + kx) * c;
                        for (int k = 0; k < c; ++k) {
                            pdx[xoff + k] += dout[k] * pz[zoff + k];
                            pdz[zoff + k] += dout[k] * px[xoff + k];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace sietrack::net
