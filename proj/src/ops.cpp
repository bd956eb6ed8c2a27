#include "lpnsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>

namespace lpnsr {

// Internal access for op implementations.
struct OpAccess {
    static bool tracked(const Tensor& t) { return t.tracked_; }
    static void mark_output(Tensor& t) {
        t.tracked_ = true;
        t.ensure_slot();
    }
    static const std::vector<float>& grad_of(const Tensor& t) { return t.slot_->g; }
    static void accumulate(const Tensor& t, const std::vector<float>& g) {
        const_cast<Tensor&>(t).accumulate(g.data(), g.size());
    }
};

namespace ops {

namespace {

bool any_tracked(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (OpAccess::tracked(*t)) return true;
    return false;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": operand shapes differ");
}

void require_image(const Tensor& t, const char* what) {
    if (t.ndim() != 4) throw DimensionError(std::string(what) + ": expected a [B,C,H,W] tensor");
}

}  // namespace

Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_image(input, "conv2d");
    if (weight.ndim() != 4 || weight.dim(2) != 3 || weight.dim(3) != 3)
        throw DimensionError("conv2d: weight must be [Cout,Cin,3,3]");
    if (weight.dim(1) != input.dim(1))
        throw DimensionError("conv2d: weight Cin does not match input channels");
    if (bias.ndim() != 1 || bias.dim(0) != weight.dim(0))
        throw DimensionError("conv2d: bias must be [Cout]");

    const int B = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Cout = weight.dim(0);
    const std::size_t plane = static_cast<std::size_t>(H) * W;

    Tensor out({B, Cout, H, W});
    const float* in = input.data();
    const float* wp = weight.data();
    const float* bp = bias.data();
    float* op = out.data();

    for (int b = 0; b < B; ++b) {
        for (int co = 0; co < Cout; ++co) {
            float* obase = op + (static_cast<std::size_t>(b) * Cout + co) * plane;
            const float bv = bp[co];
            for (std::size_t i = 0; i < plane; ++i) obase[i] = bv;
            for (int ci = 0; ci < Cin; ++ci) {
                const float* ibase = in + (static_cast<std::size_t>(b) * Cin + ci) * plane;
                const float* wk = wp + (static_cast<std::size_t>(co) * Cin + ci) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    const int dy = ky - 1;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int dx = kx - 1;
                        const float wv = wk[ky * 3 + kx];
                        const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                        const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                        for (int y = y0; y < y1; ++y) {
                            float* orow = obase + static_cast<std::size_t>(y) * W;
                            const float* irow = ibase + static_cast<std::size_t>(y + dy) * W + dx;
                            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
                        }
                    }
                }
            }
        }
    }

    if (tape && any_tracked({&input, &weight, &bias})) {
        OpAccess::mark_output(out);
        Tensor in_t = input, w_t = weight, b_t = bias, out_t = out;
        tape->record([in_t, w_t, b_t, out_t, B, Cin, Cout, H, W, plane]() {
            const std::vector<float>& g = OpAccess::grad_of(out_t);
            const float* gp = g.data();
            const float* in = in_t.data();
            const float* wp = w_t.data();
            const bool need_in = OpAccess::tracked(in_t);
            const bool need_w = OpAccess::tracked(w_t);
            const bool need_b = OpAccess::tracked(b_t);

            std::vector<float> din, dw, db;
            if (need_in) din.assign(in_t.numel(), 0.0f);
            if (need_w) dw.assign(w_t.numel(), 0.0f);
            if (need_b) db.assign(b_t.numel(), 0.0f);

            for (int b = 0; b < B; ++b) {
                for (int co = 0; co < Cout; ++co) {
                    const float* gbase = gp + (static_cast<std::size_t>(b) * Cout + co) * plane;
                    if (need_b) {
                        float s = 0.0f;
                        for (std::size_t i = 0; i < plane; ++i) s += gbase[i];
                        db[co] += s;
                    }
                    if (!need_in && !need_w) continue;
                    for (int ci = 0; ci < Cin; ++ci) {
                        const float* ibase = in + (static_cast<std::size_t>(b) * Cin + ci) * plane;
                        float* dibase = need_in ? din.data() + (static_cast<std::size_t>(b) * Cin + ci) * plane : nullptr;
                        const float* wk = wp + (static_cast<std::size_t>(co) * Cin + ci) * 9;
                        float* dwk = need_w ? dw.data() + (static_cast<std::size_t>(co) * Cin + ci) * 9 : nullptr;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int dy = ky - 1;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int dx = kx - 1;
                                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                                const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                                const float wv = wk[ky * 3 + kx];
                                float wacc = 0.0f;
                                for (int y = y0; y < y1; ++y) {
                                    const float* grow = gbase + static_cast<std::size_t>(y) * W;
                                    const float* irow = ibase + static_cast<std::size_t>(y + dy) * W + dx;
                                    if (need_w) {
                                        float s = 0.0f;
                                        for (int x = x0; x < x1; ++x) s += grow[x] * irow[x];
                                        wacc += s;
                                    }
                                    if (need_in) {
                                        float* dirow = dibase + static_cast<std::size_t>(y + dy) * W + dx;
                                        for (int x = x0; x < x1; ++x) dirow[x] += wv * grow[x];
                                    }
                                }
                                if (need_w) dwk[ky * 3 + kx] += wacc;
                            }
                        }
                    }
                }
            }
            if (need_in) OpAccess::accumulate(in_t, din);
            if (need_w) OpAccess::accumulate(w_t, dw);
            if (need_b) OpAccess::accumulate(b_t, db);
        });
    }
    return out;
}

namespace {

// add/sub with optional scalar broadcast on either side.
Tensor add_like(Tape* tape, const Tensor& a, const Tensor& b, float sign_b) {
    const bool a_scalar = a.numel() == 1, b_scalar = b.numel() == 1;
    if (!a_scalar && !b_scalar) require_same_shape(a, b, "elementwise");

    const Tensor& big = (a_scalar && !b_scalar) ? b : a;
    Tensor out(big.shape());
    const std::size_t n = out.numel();
    const float* ap = a.data();
    const float* bp = b.data();
    float* op = out.data();
    for (std::size_t i = 0; i < n; ++i)
        op[i] = ap[a_scalar ? 0 : i] + sign_b * bp[b_scalar ? 0 : i];

    if (tape && any_tracked({&a, &b})) {
        OpAccess::mark_output(out);
        Tensor a_t = a, b_t = b, out_t = out;
        tape->record([a_t, b_t, out_t, sign_b, a_scalar, b_scalar, n]() {
            const std::vector<float>& g = OpAccess::grad_of(out_t);
            if (OpAccess::tracked(a_t)) {
                if (a_scalar && n > 1) {
                    float s = 0.0f;
                    for (float v : g) s += v;
                    OpAccess::accumulate(a_t, {s});
                } else {
                    OpAccess::accumulate(a_t, g);
                }
            }
            if (OpAccess::tracked(b_t)) {
                if (b_scalar && n > 1) {
                    float s = 0.0f;
                    for (float v : g) s += v;
                    OpAccess::accumulate(b_t, {sign_b * s});
                } else {
                    std::vector<float> gb(n);
                    for (std::size_t i = 0; i < n; ++i) gb[i] = sign_b * g[i];
                    OpAccess::accumulate(b_t, gb);
                }
            }
        });
    }
    return out;
}

}  // namespace

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    return add_like(tape, a, b, 1.0f);
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
    return add_like(tape, a, b, -1.0f);
}

Tensor mul_scalar(Tape* tape, const Tensor& x, float s) {
    Tensor out(x.shape());
    const std::size_t n = out.numel();
    const float* xp = x.data();
    float* op = out.data();
    for (std::size_t i = 0; i < n; ++i) op[i] = s * xp[i];

    if (tape && OpAccess::tracked(x)) {
        OpAccess::mark_output(out);
        Tensor x_t = x, out_t = out;
        tape->record([x_t, out_t, s, n]() {
            const std::vector<float>& g = OpAccess::grad_of(out_t);
            std::vector<float> gx(n);
            for (std::size_t i = 0; i < n; ++i) gx[i] = s * g[i];
            OpAccess::accumulate(x_t, gx);
        });
    }
    return out;
}

Tensor add_scaled(Tape* tape, float a, const Tensor& x, float b, const Tensor& y) {
    require_same_shape(x, y, "add_scaled");
    Tensor out(x.shape());
    const std::size_t n = out.numel();
    const float* xp = x.data();
    const float* yp = y.data();
    float* op = out.data();
    for (std::size_t i = 0; i < n; ++i) op[i] = a * xp[i] + b * yp[i];

    if (tape && any_tracked({&x, &y})) {
        OpAccess::mark_output(out);
        Tensor x_t = x, y_t = y, out_t = out;
        tape->record([x_t, y_t, out_t, a, b, n]() {
            const std::vector<float>& g = OpAccess::grad_of(out_t);
            std::vector<float> buf(n);
            if (OpAccess::tracked(x_t)) {
                for (std::size_t i = 0; i < n; ++i) buf[i] = a * g[i];
                OpAccess::accumulate(x_t, buf);
            }
            if (OpAccess::tracked(y_t)) {
                for (std::size_t i = 0; i < n; ++i) buf[i] = b * g[i];
                OpAccess::accumulate(y_t, buf);
            }
        });
    }
    return out;
}

Tensor leaky_relu(Tape* tape, const Tensor& x) {
    Tensor out(x.shape());
    const std::size_t n = out.numel();
    const float* xp = x.data();
    float* op = out.data();
    for (std::size_t i = 0; i < n; ++i) op[i] = xp[i] > 0.0f ? xp[i] : kLeakySlope * xp[i];

    if (tape && OpAccess::tracked(x)) {
        OpAccess::mark_output(out);
        Tensor x_t = x, out_t = out;
        tape->record([x_t, out_t, n]() {
            const std::vector<float>& g = OpAccess::grad_of(out_t);
            const float* xp = x_t.data();
            std::vector<float> gx(n);
            for (std::size_t i = 0; i < n; ++i) gx[i] = xp[i] > 0.0f ? g[i] : kLeakySlope * g[i];
            OpAccess::accumulate(x_t, gx);
        });
    }
    return out;
}

Tensor nearest_up(Tape* tape, const Tensor& x, int factor) {
    require_image(x, "nearest_up");
    if (factor != 2 && factor != 4) throw DimensionError("nearest_up: factor must be 2 or 4");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int OH = H * factor, OW = W * factor;
    Tensor out({B, C, OH, OW});
    const float* xp = x.data();
    float* op = out.data();
    for (int bc = 0; bc < B * C; ++bc) {
        const float* ip = xp + static_cast<std::size_t>(bc) * H * W;
        float* ob = op + static_cast<std::size_t>(bc) * OH * OW;
        for (int oy = 0; oy < OH; ++oy) {
            const float* irow = ip + static_cast<std::size_t>(oy / factor) * W;
            float* orow = ob + static_cast<std::size_t>(oy) * OW;
            for (int ox = 0; ox < OW; ++ox) orow[ox] = irow[ox / factor];
        }
    }

    if (tape && OpAccess::tracked(x)) {
        OpAccess::mark_output(out);
        Tensor x_t = x, out_t = out;
        tape->record([x_t, out_t, B, C, H, W, factor]() {
            const std::vector<float>& g = OpAccess::grad_of(out_t);
            const int OH = H * factor, OW = W * factor;
            std::vector<float> gx(x_t.numel(), 0.0f);
            for (int bc = 0; bc < B * C; ++bc) {
                float* gib = gx.data() + static_cast<std::size_t>(bc) * H * W;
                const float* gob = g.data() + static_cast<std::size_t>(bc) * OH * OW;
                for (int oy = 0; oy < OH; ++oy) {
                    float* girow = gib + static_cast<std::size_t>(oy / factor) * W;
                    const float* gorow = gob + static_cast<std::size_t>(oy) * OW;
                    for (int ox = 0; ox < OW; ++ox) girow[ox / factor] += gorow[ox];
                }
            }
            OpAccess::accumulate(x_t, gx);
        });
    }
    return out;
}

Tensor avg_down(Tape* tape, const Tensor& x, int factor) {
    require_image(x, "avg_down");
    if (factor != 2 && factor != 4) throw DimensionError("avg_down: factor must be 2 or 4");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % factor != 0 || W % factor != 0)
        throw DimensionError("avg_down: spatial dims not divisible by factor");
    const int OH = H / factor, OW = W / factor;
    const float inv = 1.0f / static_cast<float>(factor * factor);
    Tensor out({B, C, OH, OW});
    const float* xp = x.data();
    float* op = out.data();
    for (int bc = 0; bc < B * C; ++bc) {
        const float* ip = xp + static_cast<std::size_t>(bc) * H * W;
        float* ob = op + static_cast<std::size_t>(bc) * OH * OW;
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                float s = 0.0f;
                for (int dy = 0; dy < factor; ++dy) {
                    const float* irow = ip + static_cast<std::size_t>(oy * factor + dy) * W + ox * factor;
                    for (int dx = 0; dx < factor; ++dx) s += irow[dx];
                }
                ob[static_cast<std::size_t>(oy) * OW + ox] = s * inv;
            }
        }
    }

    if (tape && OpAccess::tracked(x)) {
        OpAccess::mark_output(out);
        Tensor x_t = x, out_t = out;
        tape->record([x_t, out_t, B, C, H, W, factor, inv]() {
            const std::vector<float>& g = OpAccess::grad_of(out_t);
            const int OH = H / factor, OW = W / factor;
            std::vector<float> gx(x_t.numel(), 0.0f);
            for (int bc = 0; bc < B * C; ++bc) {
                float* gib = gx.data() + static_cast<std::size_t>(bc) * H * W;
                const float* gob = g.data() + static_cast<std::size_t>(bc) * OH * OW;
                for (int oy = 0; oy < OH; ++oy) {
                    for (int ox = 0; ox < OW; ++ox) {
                        const float gv = gob[static_cast<std::size_t>(oy) * OW + ox] * inv;
                        for (int dy = 0; dy < factor; ++dy) {
                            float* girow = gib + static_cast<std::size_t>(oy * factor + dy) * W + ox * factor;
                            for (int dx = 0; dx < factor; ++dx) girow[dx] += gv;
                        }
                    }
                }
            }
            OpAccess::accumulate(x_t, gx);
        });
    }
    return out;
}

Tensor concat_channels(Tape* tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_channels: empty part list");
    const Tensor& first = parts.front();
    require_image(first, "concat_channels");
    const int B = first.dim(0), H = first.dim(2), W = first.dim(3);
    int Ctot = 0;
    for (const Tensor& p : parts) {
        require_image(p, "concat_channels");
        if (p.dim(0) != B || p.dim(2) != H || p.dim(3) != W)
            throw DimensionError("concat_channels: batch/spatial dims differ");
        Ctot += p.dim(1);
    }
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor out({B, Ctot, H, W});
    float* op = out.data();
    for (int b = 0; b < B; ++b) {
        std::size_t coff = 0;
        for (const Tensor& p : parts) {
            const int pc = p.dim(1);
            const float* src = p.data() + static_cast<std::size_t>(b) * pc * plane;
            float* dst = op + (static_cast<std::size_t>(b) * Ctot + coff) * plane;
            std::memcpy(dst, src, sizeof(float) * pc * plane);
            coff += pc;
        }
    }

    bool tracked = false;
    for (const Tensor& p : parts) tracked = tracked || OpAccess::tracked(p);
    if (tape && tracked) {
        OpAccess::mark_output(out);
        std::vector<Tensor> parts_t = parts;
        Tensor out_t = out;
        tape->record([parts_t, out_t, B, Ctot, plane]() {
            const std::vector<float>& g = OpAccess::grad_of(out_t);
            std::size_t coff = 0;
            for (const Tensor& p : parts_t) {
                const int pc = p.dim(1);
                if (OpAccess::tracked(p)) {
                    std::vector<float> gp(p.numel());
                    for (int b = 0; b < B; ++b) {
                        const float* src = g.data() + (static_cast<std::size_t>(b) * Ctot + coff) * plane;
                        float* dst = gp.data() + static_cast<std::size_t>(b) * pc * plane;
                        std::memcpy(dst, src, sizeof(float) * pc * plane);
                    }
                    OpAccess::accumulate(p, gp);
                }
                coff += pc;
            }
        });
    }
    return out;
}

Tensor l1_loss(Tape* tape, const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "l1_loss");
    const std::size_t n = pred.numel();
    const float* pp = pred.data();
    const float* tp = target.data();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::fabs(static_cast<double>(pp[i]) - tp[i]);
    Tensor out = Tensor::scalar(static_cast<float>(s / static_cast<double>(n)));

    if (tape && any_tracked({&pred, &target})) {
        OpAccess::mark_output(out);
        Tensor p_t = pred, t_t = target, out_t = out;
        tape->record([p_t, t_t, out_t, n]() {
            const float g = OpAccess::grad_of(out_t)[0];
            const float* pp = p_t.data();
            const float* tp = t_t.data();
            const float scale = g / static_cast<float>(n);
            std::vector<float> buf(n);
            for (std::size_t i = 0; i < n; ++i) {
                const float d = pp[i] - tp[i];
                buf[i] = d > 0.0f ? scale : (d < 0.0f ? -scale : 0.0f);
            }
            if (OpAccess::tracked(p_t)) OpAccess::accumulate(p_t, buf);
            if (OpAccess::tracked(t_t)) {
                for (auto& v : buf) v = -v;
                OpAccess::accumulate(t_t, buf);
            }
        });
    }
    return out;
}

double bicubic_kernel(double x) {
    // Catmull-Rom: a = -0.5.
    constexpr double a = -0.5;
    x = std::fabs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return a * (((x - 5.0) * x + 8.0) * x - 4.0);
    return 0.0;
}

namespace {

struct Axis1D {
    int in_n = 0;
    int out_n = 0;
    std::vector<int> start;              // first input tap per output index
    std::vector<std::vector<float>> w;   // tap weights per output index
};

Axis1D bicubic_axis(int in_n, int factor, bool up) {
    Axis1D ax;
    ax.in_n = in_n;
    ax.out_n = up ? in_n * factor : in_n / factor;
    ax.start.resize(ax.out_n);
    ax.w.resize(ax.out_n);
    for (int o = 0; o < ax.out_n; ++o) {
        const double src = up ? (o + 0.5) / factor - 0.5 : (o + 0.5) * factor - 0.5;
        int lo, hi;
        double scale;
        if (up) {
            const int base = static_cast<int>(std::floor(src));
            lo = base - 1;
            hi = base + 2;
            scale = 1.0;
        } else {
            lo = static_cast<int>(std::ceil(src - 2.0 * factor));
            hi = static_cast<int>(std::floor(src + 2.0 * factor));
            scale = 1.0 / factor;
        }
        std::vector<double> wd;
        double sum = 0.0;
        for (int t = lo; t <= hi; ++t) {
            const double v = bicubic_kernel((src - t) * scale);
            wd.push_back(v);
            sum += v;
        }
        // Edge clamp: out-of-range taps read the border sample. Weights are
        // normalized so constant inputs are preserved exactly.
        ax.start[o] = lo;
        ax.w[o].resize(wd.size());
        for (std::size_t k = 0; k < wd.size(); ++k)
            ax.w[o][k] = static_cast<float>(wd[k] / sum);
    }
    return ax;
}

int clamp_idx(int i, int n) {
    return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

// Applies ay along H then axx along W to every [H,W] plane.
void bicubic_apply(const float* in, float* out, int planes, const Axis1D& ay, const Axis1D& axx) {
    const int H = ay.in_n, W = axx.in_n, OH = ay.out_n, OW = axx.out_n;
    std::vector<float> tmp(static_cast<std::size_t>(OH) * W);
    for (int p = 0; p < planes; ++p) {
        const float* ip = in + static_cast<std::size_t>(p) * H * W;
        float* op = out + static_cast<std::size_t>(p) * OH * OW;
        for (int oy = 0; oy < OH; ++oy) {
            float* trow = tmp.data() + static_cast<std::size_t>(oy) * W;
            std::fill(trow, trow + W, 0.0f);
            const auto& wy = ay.w[oy];
            for (std::size_t k = 0; k < wy.size(); ++k) {
                const float* irow = ip + static_cast<std::size_t>(clamp_idx(ay.start[oy] + static_cast<int>(k), H)) * W;
                const float wv = wy[k];
                for (int x = 0; x < W; ++x) trow[x] += wv * irow[x];
            }
        }
        for (int oy = 0; oy < OH; ++oy) {
            const float* trow = tmp.data() + static_cast<std::size_t>(oy) * W;
            float* orow = op + static_cast<std::size_t>(oy) * OW;
            for (int ox = 0; ox < OW; ++ox) {
                const auto& wx = axx.w[ox];
                float s = 0.0f;
                for (std::size_t k = 0; k < wx.size(); ++k)
                    s += wx[k] * trow[clamp_idx(axx.start[ox] + static_cast<int>(k), W)];
                orow[ox] = s;
            }
        }
    }
}

// Transpose of bicubic_apply: scatters output-space gradient back to input.
void bicubic_apply_t(const float* gout, float* gin, int planes, const Axis1D& ay, const Axis1D& axx) {
    const int H = ay.in_n, W = axx.in_n, OH = ay.out_n, OW = axx.out_n;
    std::vector<float> tmp(static_cast<std::size_t>(OH) * W);
    for (int p = 0; p < planes; ++p) {
        const float* gop = gout + static_cast<std::size_t>(p) * OH * OW;
        float* gip = gin + static_cast<std::size_t>(p) * H * W;
        std::fill(tmp.begin(), tmp.end(), 0.0f);
        for (int oy = 0; oy < OH; ++oy) {
            const float* gorow = gop + static_cast<std::size_t>(oy) * OW;
            float* trow = tmp.data() + static_cast<std::size_t>(oy) * W;
            for (int ox = 0; ox < OW; ++ox) {
                const auto& wx = axx.w[ox];
                const float gv = gorow[ox];
                for (std::size_t k = 0; k < wx.size(); ++k)
                    trow[clamp_idx(axx.start[ox] + static_cast<int>(k), W)] += wx[k] * gv;
            }
        }
        for (int oy = 0; oy < OH; ++oy) {
            const auto& wy = ay.w[oy];
            const float* trow = tmp.data() + static_cast<std::size_t>(oy) * W;
            for (std::size_t k = 0; k < wy.size(); ++k) {
                float* girow = gip + static_cast<std::size_t>(clamp_idx(ay.start[oy] + static_cast<int>(k), H)) * W;
                const float wv = wy[k];
                for (int x = 0; x < W; ++x) girow[x] += wv * trow[x];
            }
        }
    }
}

Tensor bicubic_resample_impl(Tape* tape, const Tensor& x, int factor, bool up) {
    require_image(x, "bicubic");
    if (factor != 2 && factor != 4) throw DimensionError("bicubic: factor must be 2 or 4");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (!up && (H % factor != 0 || W % factor != 0))
        throw DimensionError("bicubic down: spatial dims not divisible by factor");

    auto ay = std::make_shared<Axis1D>(bicubic_axis(H, factor, up));
    auto axx = std::make_shared<Axis1D>(bicubic_axis(W, factor, up));
    Tensor out({B, C, ay->out_n, axx->out_n});
    bicubic_apply(x.data(), out.data(), B * C, *ay, *axx);

    if (tape && OpAccess::tracked(x)) {
        OpAccess::mark_output(out);
        Tensor x_t = x, out_t = out;
        const int planes = B * C;
        tape->record([x_t, out_t, ay, axx, planes]() {
            const std::vector<float>& g = OpAccess::grad_of(out_t);
            std::vector<float> gx(x_t.numel(), 0.0f);
            bicubic_apply_t(g.data(), gx.data(), planes, *ay, *axx);
            OpAccess::accumulate(x_t, gx);
        });
    }
    return out;
}

}  // namespace

Tensor bicubic_up(Tape* tape, const Tensor& x, int factor) {
    return bicubic_resample_impl(tape, x, factor, true);
}

Tensor bicubic_down(Tape* tape, const Tensor& x, int factor) {
    return bicubic_resample_impl(tape, x, factor, false);
}

namespace {

const float kEdgeKernels[3][9] = {
    {-1, 0, 1, -2, 0, 2, -1, 0, 1},  // Sobel-x
    {-1, -2, -1, 0, 0, 0, 1, 2, 1},  // Sobel-y
    {0, 1, 0, 1, -4, 1, 0, 1, 0},    // Laplacian
};

}  // namespace

Tensor edge_features(Tape* tape, const Tensor& x) {
    require_image(x, "edge_features");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor out({B, 3 * C, H, W});
    const float* xp = x.data();
    float* op = out.data();
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const float* ip = xp + (static_cast<std::size_t>(b) * C + c) * plane;
            for (int f = 0; f < 3; ++f) {
                float* ob = op + (static_cast<std::size_t>(b) * 3 * C + 3 * c + f) * plane;
                const float* k = kEdgeKernels[f];
                for (int y = 0; y < H; ++y) {
                    for (int xcol = 0; xcol < W; ++xcol) {
                        float s = 0.0f;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int sy = clamp_idx(y + ky - 1, H);
                            for (int kx = 0; kx < 3; ++kx) {
                                const int sx = clamp_idx(xcol + kx - 1, W);
                                s += k[ky * 3 + kx] * ip[static_cast<std::size_t>(sy) * W + sx];
                            }
                        }
                        ob[static_cast<std::size_t>(y) * W + xcol] = s;
                    }
                }
            }
        }
    }

    if (tape && OpAccess::tracked(x)) {
        OpAccess::mark_output(out);
        Tensor x_t = x, out_t = out;
        tape->record([x_t, out_t, B, C, H, W, plane]() {
            const std::vector<float>& g = OpAccess::grad_of(out_t);
            std::vector<float> gx(x_t.numel(), 0.0f);
            for (int b = 0; b < B; ++b) {
                for (int c = 0; c < C; ++c) {
                    float* gip = gx.data() + (static_cast<std::size_t>(b) * C + c) * plane;
                    for (int f = 0; f < 3; ++f) {
                        const float* gob = g.data() + (static_cast<std::size_t>(b) * 3 * C + 3 * c + f) * plane;
                        const float* k = kEdgeKernels[f];
                        for (int y = 0; y < H; ++y) {
                            for (int xcol = 0; xcol < W; ++xcol) {
                                const float gv = gob[static_cast<std::size_t>(y) * W + xcol];
                                for (int ky = 0; ky < 3; ++ky) {
                                    const int sy = clamp_idx(y + ky - 1, H);
                                    for (int kx = 0; kx < 3; ++kx) {
                                        const int sx = clamp_idx(xcol + kx - 1, W);
                                        gip[static_cast<std::size_t>(sy) * W + sx] += k[ky * 3 + kx] * gv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            OpAccess::accumulate(x_t, gx);
        });
    }
    return out;
}

}  // namespace ops
}  // namespace lpnsr
