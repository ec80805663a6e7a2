#include "surromesh/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace surromesh {
namespace ops {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

Tape& same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw Error("operands recorded on different tapes");
    return *a.tape;
}

constexpr double kGeluC = 0.7978845608028654;   // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

} // namespace

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    check_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    std::size_t pa = a.id, pb = b.id;
    return t.record(std::move(out), {pa, pb}, [pa, pb](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(pa);
        Tensor& gb = tp.grad(pb);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b);
    check_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    std::size_t pa = a.id, pb = b.id;
    return t.record(std::move(out), {pa, pb}, [pa, pb](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(pa);
        Tensor& gb = tp.grad(pb);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    check_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    std::size_t pa = a.id, pb = b.id;
    return t.record(std::move(out), {pa, pb}, [pa, pb](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av = tp.value(pa);
        const Tensor& bvv = tp.value(pb);
        Tensor& ga = tp.grad(pa);
        Tensor& gb = tp.grad(pb);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bvv[i];
            gb[i] += g[i] * av[i];
        }
    });
}

Var scale(Var a, double c) {
    Tape& t = *a.tape;
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    std::size_t pa = a.id;
    return t.record(std::move(out), {pa}, [pa, c](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
}

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.extent(1) != bv.extent(0))
        throw DimensionError("matmul: incompatible shapes " + av.shape_str() + " and " + bv.shape_str());
    const std::size_t m = av.extent(0), k = av.extent(1), n = bv.extent(1);
    Tensor out({m, n});
    MapM(out.data(), m, n).noalias() = MapC(av.data(), m, k) * MapC(bv.data(), k, n);
    std::size_t pa = a.id, pb = b.id;
    return t.record(std::move(out), {pa, pb}, [pa, pb, m, k, n](Tape& tp, std::size_t self) {
        MapC gc(tp.grad(self).data(), m, n);
        MapC am(tp.value(pa).data(), m, k);
        MapC bm(tp.value(pb).data(), k, n);
        MapM(tp.grad(pa).data(), m, k).noalias() += gc * bm.transpose();
        MapM(tp.grad(pb).data(), k, n).noalias() += am.transpose() * gc;
    });
}

Var transpose2d(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = a.value();
    if (av.rank() != 2) throw DimensionError("transpose2d: expected rank 2, got " + av.shape_str());
    const std::size_t m = av.extent(0), n = av.extent(1);
    Tensor out({n, m});
    MapM(out.data(), n, m) = MapC(av.data(), m, n).transpose();
    std::size_t pa = a.id;
    return t.record(std::move(out), {pa}, [pa, m, n](Tape& tp, std::size_t self) {
        MapM(tp.grad(pa).data(), m, n) += MapC(tp.grad(self).data(), n, m).transpose();
    });
}

Var reshape(Var a, std::vector<std::size_t> shape) {
    Tape& t = *a.tape;
    Tensor out(std::move(shape), a.value().vec());
    std::size_t pa = a.id;
    return t.record(std::move(out), {pa}, [pa](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var concat(Var a, Var b, std::size_t axis) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != bv.rank() || axis >= av.rank())
        throw DimensionError("concat: rank mismatch " + av.shape_str() + " vs " + bv.shape_str());
    for (std::size_t ax = 0; ax < av.rank(); ++ax)
        if (ax != axis && av.extent(ax) != bv.extent(ax))
            throw DimensionError("concat: extent mismatch " + av.shape_str() + " vs " + bv.shape_str());

    std::vector<std::size_t> shape = av.shape();
    shape[axis] += bv.extent(axis);
    // Treat both operands as [outer, rows, inner] around the concat axis.
    std::size_t outer = 1, inner = 1;
    for (std::size_t ax = 0; ax < axis; ++ax) outer *= av.extent(ax);
    for (std::size_t ax = axis + 1; ax < av.rank(); ++ax) inner *= av.extent(ax);
    const std::size_t ra = av.extent(axis) * inner;
    const std::size_t rb = bv.extent(axis) * inner;

    Tensor out(shape);
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(av.data() + o * ra, ra, out.data() + o * (ra + rb));
        std::copy_n(bv.data() + o * rb, rb, out.data() + o * (ra + rb) + ra);
    }
    std::size_t pa = a.id, pb = b.id;
    return t.record(std::move(out), {pa, pb}, [pa, pb, outer, ra, rb](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(pa);
        Tensor& gb = tp.grad(pb);
        for (std::size_t o = 0; o < outer; ++o) {
            const double* src = g.data() + o * (ra + rb);
            for (std::size_t i = 0; i < ra; ++i) ga[o * ra + i] += src[i];
            for (std::size_t i = 0; i < rb; ++i) gb[o * rb + i] += src[ra + i];
        }
    });
}

Var add_bias_rows(Var x, Var bias) {
    Tape& t = same_tape(x, bias);
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    if (xv.rank() != 2 || bv.rank() != 1 || xv.extent(1) != bv.extent(0))
        throw DimensionError("add_bias_rows: " + xv.shape_str() + " vs " + bv.shape_str());
    const std::size_t n = xv.extent(0), d = xv.extent(1);
    Tensor out = xv;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) out[i * d + c] += bv[c];
    std::size_t px = x.id, pb = bias.id;
    return t.record(std::move(out), {px, pb}, [px, pb, n, d](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(px);
        Tensor& gb = tp.grad(pb);
        for (std::size_t i = 0; i < n * d; ++i) gx[i] += g[i];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) gb[c] += g[i * d + c];
    });
}

Var relu(Var x) {
    Tape& t = *x.tape;
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    std::size_t px = x.id;
    return t.record(std::move(out), {px}, [px](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv = tp.value(px);
        Tensor& gx = tp.grad(px);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (xv[i] > 0.0) gx[i] += g[i];
    });
}

Var gelu(Var x) {
    Tape& t = *x.tape;
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = out[i];
        out[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
    }
    std::size_t px = x.id;
    return t.record(std::move(out), {px}, [px](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv = tp.value(px);
        Tensor& gx = tp.grad(px);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = xv[i];
            const double u = kGeluC * (v + kGeluA * v * v * v);
            const double th = std::tanh(u);
            const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
            gx[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du);
        }
    });
}

Var activation(Var x, Activation kind) {
    return kind == Activation::Relu ? relu(x) : gelu(x);
}

Var softmax(Var x, std::size_t axis) {
    Tape& t = *x.tape;
    const Tensor& xv = x.value();
    if (axis >= xv.rank()) throw DimensionError("softmax: axis out of range for " + xv.shape_str());
    std::size_t outer = 1, inner = 1;
    const std::size_t len = xv.extent(axis);
    for (std::size_t ax = 0; ax < axis; ++ax) outer *= xv.extent(ax);
    for (std::size_t ax = axis + 1; ax < xv.rank(); ++ax) inner *= xv.extent(ax);

    Tensor out(xv.shape());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double mx = xv[base];
            for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, xv[base + j * inner]);
            double sum = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                const double e = std::exp(xv[base + j * inner] - mx);
                out[base + j * inner] = e;
                sum += e;
            }
            for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= sum;
        }
    }
    std::size_t px = x.id;
    return t.record(std::move(out), {px}, [px, outer, inner, len](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& y = tp.value(self);
        Tensor& gx = tp.grad(px);
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * len * inner + in;
                double dot = 0.0;
                for (std::size_t j = 0; j < len; ++j) dot += g[base + j * inner] * y[base + j * inner];
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t k = base + j * inner;
                    gx[k] += (g[k] - dot) * y[k];
                }
            }
        }
    });
}

Var layer_norm(Var x, Var gain, Var shift, double eps) {
    Tape& t = same_tape(x, gain);
    same_tape(gain, shift);
    if (eps <= 0.0) throw Error("layer_norm: eps must be > 0");
    const Tensor& xv = x.value();
    const Tensor& gv = gain.value();
    const Tensor& sv = shift.value();
    const std::size_t d = xv.extent(xv.rank() - 1);
    if (gv.rank() != 1 || sv.rank() != 1 || gv.extent(0) != d || sv.extent(0) != d)
        throw DimensionError("layer_norm: gain/shift must have length " + std::to_string(d));
    const std::size_t rows = xv.size() / d;

    Tensor out(xv.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xv.data() + r * d;
        double mean = 0.0;
        for (std::size_t c = 0; c < d; ++c) mean += row[c];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c)
            out[r * d + c] = gv[c] * ((row[c] - mean) * inv) + sv[c];
    }
    std::size_t px = x.id, pg = gain.id, ps = shift.id;
    return t.record(std::move(out), {px, pg, ps},
                    [px, pg, ps, rows, d, eps](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv2 = tp.value(px);
        const Tensor& gv2 = tp.value(pg);
        Tensor& gx = tp.grad(px);
        Tensor& gg = tp.grad(pg);
        Tensor& gs = tp.grad(ps);
        const double dn = static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* row = xv2.data() + r * d;
            const double* gr = g.data() + r * d;
            double mean = 0.0;
            for (std::size_t c = 0; c < d; ++c) mean += row[c];
            mean /= dn;
            double var = 0.0;
            for (std::size_t c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
            var /= dn;
            const double inv = 1.0 / std::sqrt(var + eps);
            // dxhat = g * gain; reduce to the two row sums needed for dx.
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double xhat = (row[c] - mean) * inv;
                const double dxhat = gr[c] * gv2[c];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                gg[c] += gr[c] * xhat;
                gs[c] += gr[c];
            }
            for (std::size_t c = 0; c < d; ++c) {
                const double xhat = (row[c] - mean) * inv;
                const double dxhat = gr[c] * gv2[c];
                gx[r * d + c] += inv * (dxhat - sum_dxhat / dn - xhat * sum_dxhat_xhat / dn);
            }
        }
    });
}

Var mse_loss(Var pred, Var target, std::size_t n_examples) {
    Tape& t = same_tape(pred, target);
    check_same_shape(pred.value(), target.value(), "mse_loss");
    if (n_examples == 0) throw Error("mse_loss: n_examples must be >= 1");
    const Tensor& pv = pred.value();
    const Tensor& tv = target.value();
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double dlt = pv[i] - tv[i];
        acc += dlt * dlt;
    }
    const double n = static_cast<double>(n_examples);
    Tensor out = Tensor::scalar(acc / n);
    std::size_t pp = pred.id, pt = target.id;
    return t.record(std::move(out), {pp, pt}, [pp, pt, n](Tape& tp, std::size_t self) {
        const double g = tp.grad(self)[0];
        const Tensor& pv2 = tp.value(pp);
        const Tensor& tv2 = tp.value(pt);
        Tensor& gp = tp.grad(pp);
        Tensor& gt = tp.grad(pt);
        for (std::size_t i = 0; i < pv2.size(); ++i) {
            const double d = 2.0 * (pv2[i] - tv2[i]) / n * g;
            gp[i] += d;
            gt[i] -= d;
        }
    });
}

namespace {

struct ConvDims {
    std::size_t cin, h, w, cout, kh, kw, oh, ow;
    long ph, pw; // top/left padding
};

ConvDims conv_dims(const Tensor& x, const Tensor& k, const Tensor& b, Padding padding) {
    if (x.rank() != 3 || k.rank() != 4 || b.rank() != 1)
        throw DimensionError("conv2d: expected x[Cin,H,W], kernels[Cout,Cin,kh,kw], bias[Cout]");
    ConvDims d{};
    d.cin = x.extent(0);
    d.h = x.extent(1);
    d.w = x.extent(2);
    d.cout = k.extent(0);
    d.kh = k.extent(2);
    d.kw = k.extent(3);
    if (k.extent(1) != d.cin)
        throw DimensionError("conv2d: kernel Cin " + k.shape_str() + " does not match input " + x.shape_str());
    if (b.extent(0) != d.cout) throw DimensionError("conv2d: bias length must equal Cout");
    if (padding == Padding::Same) {
        if (d.kh % 2 == 0 || d.kw % 2 == 0)
            throw DimensionError("conv2d: same padding requires odd kernel extents");
        d.ph = static_cast<long>(d.kh / 2);
        d.pw = static_cast<long>(d.kw / 2);
        d.oh = d.h;
        d.ow = d.w;
    } else {
        if (d.kh > d.h || d.kw > d.w)
            throw DimensionError("conv2d: kernel " + k.shape_str() + " larger than input " + x.shape_str());
        d.ph = 0;
        d.pw = 0;
        d.oh = d.h - d.kh + 1;
        d.ow = d.w - d.kw + 1;
    }
    return d;
}

} // namespace

Var conv2d(Var x, Var kernels, Var bias, Padding padding) {
    Tape& t = same_tape(x, kernels);
    same_tape(kernels, bias);
    const Tensor& xv = x.value();
    const Tensor& kv = kernels.value();
    const Tensor& bv = bias.value();
    const ConvDims d = conv_dims(xv, kv, bv, padding);

    Tensor out({d.cout, d.oh, d.ow});
    for (std::size_t co = 0; co < d.cout; ++co) {
        double* oc = out.data() + co * d.oh * d.ow;
        for (std::size_t i = 0; i < d.oh * d.ow; ++i) oc[i] = bv[co];
        for (std::size_t ci = 0; ci < d.cin; ++ci) {
            const double* xc = xv.data() + ci * d.h * d.w;
            for (std::size_t ky = 0; ky < d.kh; ++ky) {
                for (std::size_t kx = 0; kx < d.kw; ++kx) {
                    const double kval = kv[((co * d.cin + ci) * d.kh + ky) * d.kw + kx];
                    const long dy = static_cast<long>(ky) - d.ph;
                    const long dx = static_cast<long>(kx) - d.pw;
                    const long oy0 = std::max(0L, -dy);
                    const long oy1 = std::min<long>(d.oh, static_cast<long>(d.h) - dy);
                    const long ox0 = std::max(0L, -dx);
                    const long ox1 = std::min<long>(d.ow, static_cast<long>(d.w) - dx);
                    for (long oy = oy0; oy < oy1; ++oy) {
                        const double* xr = xc + (oy + dy) * d.w + dx;
                        double* orow = oc + oy * d.ow;
                        for (long ox = ox0; ox < ox1; ++ox) orow[ox] += kval * xr[ox];
                    }
                }
            }
        }
    }
    std::size_t px = x.id, pk = kernels.id, pb = bias.id;
    // Backward runs as gemm over an im2col patch matrix; the summation order
    // differs from the forward's canonical per-pixel order, which is fine:
    // gradients only need to be deterministic, not loop-order-exact.
    return t.record(std::move(out), {px, pk, pb}, [px, pk, pb, d](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv2 = tp.value(px);
        const Tensor& kv2 = tp.value(pk);
        const bool need_dx = tp.grad_path(px);
        const bool need_dk = tp.grad_path(pk);
        const std::size_t pixels = d.oh * d.ow;
        const std::size_t patch = d.cin * d.kh * d.kw;
        if (tp.grad_path(pb)) {
            Tensor& gb = tp.grad(pb);
            for (std::size_t co = 0; co < d.cout; ++co) {
                const double* gc = g.data() + co * pixels;
                double acc = 0.0;
                for (std::size_t i = 0; i < pixels; ++i) acc += gc[i];
                gb[co] += acc;
            }
        }
        if (!need_dx && !need_dk) return;
        MapC gmat(g.data(), static_cast<Eigen::Index>(d.cout), static_cast<Eigen::Index>(pixels));
        if (need_dk) {
            // col[(ci,ky,kx), p] = padded x patch value at output pixel p
            Tensor col({patch, pixels});
            std::size_t row = 0;
            for (std::size_t ci = 0; ci < d.cin; ++ci) {
                const double* xc = xv2.data() + ci * d.h * d.w;
                for (std::size_t ky = 0; ky < d.kh; ++ky) {
                    for (std::size_t kx = 0; kx < d.kw; ++kx, ++row) {
                        const long dy = static_cast<long>(ky) - d.ph;
                        const long dx = static_cast<long>(kx) - d.pw;
                        const long oy0 = std::max(0L, -dy);
                        const long oy1 = std::min<long>(d.oh, static_cast<long>(d.h) - dy);
                        const long ox0 = std::max(0L, -dx);
                        const long ox1 = std::min<long>(d.ow, static_cast<long>(d.w) - dx);
                        double* crow = col.data() + row * pixels;
                        for (long oy = oy0; oy < oy1; ++oy) {
                            const double* xr = xc + (oy + dy) * d.w + dx;
                            double* cr = crow + oy * d.ow;
                            for (long ox = ox0; ox < ox1; ++ox) cr[ox] = xr[ox];
                        }
                    }
                }
            }
            MapM(tp.grad(pk).data(), static_cast<Eigen::Index>(d.cout),
                 static_cast<Eigen::Index>(patch))
                .noalias() += gmat * MapC(col.data(), static_cast<Eigen::Index>(patch),
                                          static_cast<Eigen::Index>(pixels))
                                         .transpose();
        }
        if (need_dx) {
            Tensor dcol({patch, pixels});
            MapM(dcol.data(), static_cast<Eigen::Index>(patch),
                 static_cast<Eigen::Index>(pixels))
                .noalias() = MapC(kv2.data(), static_cast<Eigen::Index>(d.cout),
                                  static_cast<Eigen::Index>(patch))
                                 .transpose() *
                             gmat;
            Tensor& gx = tp.grad(px);
            std::size_t row = 0;
            for (std::size_t ci = 0; ci < d.cin; ++ci) {
                double* gxc = gx.data() + ci * d.h * d.w;
                for (std::size_t ky = 0; ky < d.kh; ++ky) {
                    for (std::size_t kx = 0; kx < d.kw; ++kx, ++row) {
                        const long dy = static_cast<long>(ky) - d.ph;
                        const long dx = static_cast<long>(kx) - d.pw;
                        const long oy0 = std::max(0L, -dy);
                        const long oy1 = std::min<long>(d.oh, static_cast<long>(d.h) - dy);
                        const long ox0 = std::max(0L, -dx);
                        const long ox1 = std::min<long>(d.ow, static_cast<long>(d.w) - dx);
                        const double* crow = dcol.data() + row * pixels;
                        for (long oy = oy0; oy < oy1; ++oy) {
                            double* gxr = gxc + (oy + dy) * d.w + dx;
                            const double* cr = crow + oy * d.ow;
                            for (long ox = ox0; ox < ox1; ++ox) gxr[ox] += cr[ox];
                        }
                    }
                }
            }
        }
    });
}

Pool2d maxpool2d(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = x.value();
    if (xv.rank() != 3) throw DimensionError("maxpool2d: expected [C,H,W], got " + xv.shape_str());
    const std::size_t c = xv.extent(0), h = xv.extent(1), w = xv.extent(2);
    const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;

    Tensor out({c, oh, ow});
    auto idx = std::make_shared<std::vector<std::size_t>>(c * oh * ow);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* xc = xv.data() + ch * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::size_t y0 = oy * 2, x0 = ox * 2;
                std::size_t best = y0 * w + x0;
                double bv = xc[best];
                for (std::size_t dy = 0; dy < 2 && y0 + dy < h; ++dy) {
                    for (std::size_t dx = 0; dx < 2 && x0 + dx < w; ++dx) {
                        const std::size_t k = (y0 + dy) * w + (x0 + dx);
                        if (xc[k] > bv) {
                            bv = xc[k];
                            best = k;
                        }
                    }
                }
                out[(ch * oh + oy) * ow + ox] = bv;
                (*idx)[(ch * oh + oy) * ow + ox] = ch * h * w + best;
            }
        }
    }
    std::size_t px = x.id;
    Var v = t.record(std::move(out), {px}, [px, idx](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(px);
        for (std::size_t i = 0; i < g.size(); ++i) gx[(*idx)[i]] += g[i];
    });
    return Pool2d{v, idx};
}

Var upsample2d(Var x, std::size_t target_h, std::size_t target_w) {
    Tape& t = *x.tape;
    const Tensor& xv = x.value();
    if (xv.rank() != 3) throw DimensionError("upsample2d: expected [C,h,w], got " + xv.shape_str());
    const std::size_t c = xv.extent(0), h = xv.extent(1), w = xv.extent(2);
    if (target_h < h || target_w < w)
        throw DimensionError("upsample2d: target " + std::to_string(target_h) + "x" +
                             std::to_string(target_w) + " smaller than source " + xv.shape_str());

    Tensor out({c, target_h, target_w});
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* xc = xv.data() + ch * h * w;
        double* oc = out.data() + ch * target_h * target_w;
        for (std::size_t y = 0; y < target_h; ++y) {
            const std::size_t sy = y * h / target_h;
            for (std::size_t xq = 0; xq < target_w; ++xq)
                oc[y * target_w + xq] = xc[sy * w + xq * w / target_w];
        }
    }
    std::size_t px = x.id;
    return t.record(std::move(out), {px}, [px, c, h, w, target_h, target_w](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(px);
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* gc = g.data() + ch * target_h * target_w;
            double* gxc = gx.data() + ch * h * w;
            for (std::size_t y = 0; y < target_h; ++y) {
                const std::size_t sy = y * h / target_h;
                for (std::size_t xq = 0; xq < target_w; ++xq)
                    gxc[sy * w + xq * w / target_w] += gc[y * target_w + xq];
            }
        }
    });
}

Var split_heads(Var x, std::size_t heads) {
    Tape& t = *x.tape;
    const Tensor& xv = x.value();
    if (xv.rank() != 2) throw DimensionError("split_heads: expected [n,d], got " + xv.shape_str());
    const std::size_t n = xv.extent(0), d = xv.extent(1);
    if (heads == 0 || d % heads != 0)
        throw ConfigError("split_heads: head count " + std::to_string(heads) +
                          " must divide feature dim " + std::to_string(d));
    const std::size_t dh = d / heads;
    Tensor out({heads, n, dh});
    for (std::size_t hh = 0; hh < heads; ++hh)
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(xv.data() + i * d + hh * dh, dh, out.data() + (hh * n + i) * dh);
    std::size_t px = x.id;
    return t.record(std::move(out), {px}, [px, heads, n, dh](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(px);
        const std::size_t d = heads * dh;
        for (std::size_t hh = 0; hh < heads; ++hh)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < dh; ++c)
                    gx[i * d + hh * dh + c] += g[(hh * n + i) * dh + c];
    });
}

Var merge_heads(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = x.value();
    if (xv.rank() != 3) throw DimensionError("merge_heads: expected [h,n,dh], got " + xv.shape_str());
    const std::size_t heads = xv.extent(0), n = xv.extent(1), dh = xv.extent(2);
    const std::size_t d = heads * dh;
    Tensor out({n, d});
    for (std::size_t hh = 0; hh < heads; ++hh)
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(xv.data() + (hh * n + i) * dh, dh, out.data() + i * d + hh * dh);
    std::size_t px = x.id;
    return t.record(std::move(out), {px}, [px, heads, n, dh](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(px);
        const std::size_t d = heads * dh;
        for (std::size_t hh = 0; hh < heads; ++hh)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < dh; ++c)
                    gx[(hh * n + i) * dh + c] += g[i * d + hh * dh + c];
    });
}

Var bmm(Var a, Var b, bool trans_b) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 3 || bv.rank() != 3 || av.extent(0) != bv.extent(0))
        throw DimensionError("bmm: expected matching batched operands, got " + av.shape_str() +
                             " and " + bv.shape_str());
    const std::size_t hb = av.extent(0), m = av.extent(1), k = av.extent(2);
    const std::size_t n = trans_b ? bv.extent(1) : bv.extent(2);
    if ((trans_b ? bv.extent(2) : bv.extent(1)) != k)
        throw DimensionError("bmm: inner extents differ, " + av.shape_str() + " vs " + bv.shape_str());

    Tensor out({hb, m, n});
    for (std::size_t h = 0; h < hb; ++h) {
        MapC am(av.data() + h * m * k, m, k);
        MapM om(out.data() + h * m * n, m, n);
        if (trans_b)
            om.noalias() = am * MapC(bv.data() + h * n * k, n, k).transpose();
        else
            om.noalias() = am * MapC(bv.data() + h * k * n, k, n);
    }
    std::size_t pa = a.id, pb = b.id;
    return t.record(std::move(out), {pa, pb}, [pa, pb, hb, m, k, n, trans_b](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av2 = tp.value(pa);
        const Tensor& bv2 = tp.value(pb);
        Tensor& ga = tp.grad(pa);
        Tensor& gb = tp.grad(pb);
        for (std::size_t h = 0; h < hb; ++h) {
            MapC gm(g.data() + h * m * n, m, n);
            MapC am(av2.data() + h * m * k, m, k);
            MapM gam(ga.data() + h * m * k, m, k);
            if (trans_b) {
                MapC bm(bv2.data() + h * n * k, n, k);
                gam.noalias() += gm * bm;
                MapM(gb.data() + h * n * k, n, k).noalias() += gm.transpose() * am;
            } else {
                MapC bm(bv2.data() + h * k * n, k, n);
                gam.noalias() += gm * bm.transpose();
                MapM(gb.data() + h * k * n, k, n).noalias() += am.transpose() * gm;
            }
        }
    });
}

} // namespace ops
} // namespace surromesh
