#pragma once

// Minimal fixed-operator NN kernels used by the convolutional energy
// predictor: same-padded conv2d, 2x2 pooling, bilinear upsampling and a
// per-pixel MLP, each with a hand-written reverse-mode pass. All math is
// double precision; loops are laid out so the innermost axis is contiguous.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace dsac::nn {

struct Tensor3 {
    int c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(int c_, int h_, int w_, double fill = 0.0)
        : c(c_), h(h_), w(w_), data(static_cast<size_t>(c_) * h_ * w_, fill) {}

    double* plane(int ci) { return data.data() + static_cast<size_t>(ci) * h * w; }
    const double* plane(int ci) const { return data.data() + static_cast<size_t>(ci) * h * w; }
    double at(int ci, int y, int x) const {
        return data[(static_cast<size_t>(ci) * h + y) * w + x];
    }
    double& at(int ci, int y, int x) { return data[(static_cast<size_t>(ci) * h + y) * w + x]; }
};

// Same-padded stride-1 convolution. weights layout: [co][ci][ky][kx],
// flattened row-major; bias one per output channel.
inline void conv2d_forward(const Tensor3& in, const std::vector<double>& weights,
                           const std::vector<double>& bias, int co, int k, Tensor3& out) {
    const int ci = in.c, H = in.h, W = in.w, P = k / 2;
    out = Tensor3(co, H, W);
    for (int oc = 0; oc < co; ++oc) {
        double* op = out.plane(oc);
        const double b = bias[static_cast<size_t>(oc)];
        for (int i = 0; i < H * W; ++i) op[i] = b;
        for (int ic = 0; ic < ci; ++ic) {
            const double* ip = in.plane(ic);
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const double wv =
                        weights[((static_cast<size_t>(oc) * ci + ic) * k + ky) * k + kx];
                    if (wv == 0.0) continue;
                    const int dy = ky - P, dx = kx - P;
                    const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    for (int y = y0; y < y1; ++y) {
                        double* orow = op + static_cast<size_t>(y) * W;
                        const double* irow = ip + static_cast<size_t>(y + dy) * W + dx;
                        for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
                    }
                }
            }
        }
    }
}

inline void conv2d_backward(const Tensor3& in, const std::vector<double>& weights, int co, int k,
                            const Tensor3& d_out, Tensor3& d_in, std::vector<double>& d_weights,
                            std::vector<double>& d_bias) {
    const int ci = in.c, H = in.h, W = in.w, P = k / 2;
    d_in = Tensor3(ci, H, W);
    d_weights.assign(static_cast<size_t>(co) * ci * k * k, 0.0);
    d_bias.assign(static_cast<size_t>(co), 0.0);
    for (int oc = 0; oc < co; ++oc) {
        const double* dop = d_out.plane(oc);
        double acc_b = 0.0;
        for (int i = 0; i < H * W; ++i) acc_b += dop[i];
        d_bias[static_cast<size_t>(oc)] = acc_b;
        for (int ic = 0; ic < ci; ++ic) {
            const double* ip = in.plane(ic);
            double* dip = d_in.plane(ic);
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const size_t widx = ((static_cast<size_t>(oc) * ci + ic) * k + ky) * k + kx;
                    const double wv = weights[widx];
                    const int dy = ky - P, dx = kx - P;
                    const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    double acc_w = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* dorow = dop + static_cast<size_t>(y) * W;
                        const double* irow = ip + static_cast<size_t>(y + dy) * W + dx;
                        double* dirow = dip + static_cast<size_t>(y + dy) * W + dx;
                        for (int x = x0; x < x1; ++x) {
                            acc_w += irow[x] * dorow[x];
                            dirow[x] += wv * dorow[x];
                        }
                    }
                    d_weights[widx] = acc_w;
                }
            }
        }
    }
}

inline void relu_forward(Tensor3& t) {
    for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

// d_pre = d_post where pre-activation > 0, else 0.
inline void relu_backward(const Tensor3& pre, Tensor3& d) {
    for (size_t i = 0; i < d.data.size(); ++i)
        if (pre.data[i] <= 0.0) d.data[i] = 0.0;
}

inline void avgpool2_forward(const Tensor3& in, Tensor3& out) {
    if (in.h % 2 != 0 || in.w % 2 != 0)
        throw std::invalid_argument("avgpool2: spatial size must be even");
    out = Tensor3(in.c, in.h / 2, in.w / 2);
    for (int c = 0; c < in.c; ++c)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x)
                out.at(c, y, x) = 0.25 * (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) +
                                          in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1));
}

inline void avgpool2_backward(const Tensor3& d_out, int H, int W, Tensor3& d_in) {
    d_in = Tensor3(d_out.c, H, W);
    for (int c = 0; c < d_out.c; ++c)
        for (int y = 0; y < d_out.h; ++y)
            for (int x = 0; x < d_out.w; ++x) {
                const double g = 0.25 * d_out.at(c, y, x);
                d_in.at(c, 2 * y, 2 * x) += g;
                d_in.at(c, 2 * y, 2 * x + 1) += g;
                d_in.at(c, 2 * y + 1, 2 * x) += g;
                d_in.at(c, 2 * y + 1, 2 * x + 1) += g;
            }
}

inline void maxpool2_forward(const Tensor3& in, Tensor3& out, std::vector<uint8_t>& argmax) {
    if (in.h % 2 != 0 || in.w % 2 != 0)
        throw std::invalid_argument("maxpool2: spatial size must be even");
    out = Tensor3(in.c, in.h / 2, in.w / 2);
    argmax.assign(out.data.size(), 0);
    size_t idx = 0;
    for (int c = 0; c < in.c; ++c)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x, ++idx) {
                const double v00 = in.at(c, 2 * y, 2 * x), v01 = in.at(c, 2 * y, 2 * x + 1);
                const double v10 = in.at(c, 2 * y + 1, 2 * x), v11 = in.at(c, 2 * y + 1, 2 * x + 1);
                double best = v00;
                uint8_t arg = 0;
                if (v01 > best) { best = v01; arg = 1; }
                if (v10 > best) { best = v10; arg = 2; }
                if (v11 > best) { best = v11; arg = 3; }
                out.data[idx] = best;
                argmax[idx] = arg;
            }
}

inline void maxpool2_backward(const Tensor3& d_out, const std::vector<uint8_t>& argmax, int H,
                              int W, Tensor3& d_in) {
    d_in = Tensor3(d_out.c, H, W);
    size_t idx = 0;
    for (int c = 0; c < d_out.c; ++c)
        for (int y = 0; y < d_out.h; ++y)
            for (int x = 0; x < d_out.w; ++x, ++idx) {
                const uint8_t a = argmax[idx];
                d_in.at(c, 2 * y + (a >> 1), 2 * x + (a & 1)) += d_out.data[idx];
            }
}

// Bilinear upsampling with half-pixel-center alignment. Writes channel c of
// the source into rows of a pixel-major destination buffer dst[pixel][ch]
// at the given channel offset; ch_stride is the full hypercolumn width.
inline void upsample_bilinear_into(const Tensor3& src, int H, int W, double* dst, int ch_stride,
                                   int ch_offset) {
    const double sy = static_cast<double>(src.h) / H;
    const double sx = static_cast<double>(src.w) / W;
    std::vector<int> x0s(static_cast<size_t>(W)), x1s(static_cast<size_t>(W));
    std::vector<double> fxs(static_cast<size_t>(W));
    for (int x = 0; x < W; ++x) {
        double fx = (x + 0.5) * sx - 0.5;
        fx = std::clamp(fx, 0.0, static_cast<double>(src.w - 1));
        const int x0 = std::min(static_cast<int>(std::floor(fx)), src.w - 2 >= 0 ? src.w - 2 : 0);
        x0s[static_cast<size_t>(x)] = x0;
        x1s[static_cast<size_t>(x)] = std::min(x0 + 1, src.w - 1);
        fxs[static_cast<size_t>(x)] = fx - x0;
    }
    for (int c = 0; c < src.c; ++c) {
        const double* sp = src.plane(c);
        for (int y = 0; y < H; ++y) {
            double fy = (y + 0.5) * sy - 0.5;
            fy = std::clamp(fy, 0.0, static_cast<double>(src.h - 1));
            const int y0 = std::min(static_cast<int>(std::floor(fy)), src.h - 2 >= 0 ? src.h - 2 : 0);
            const int y1 = std::min(y0 + 1, src.h - 1);
            const double b = fy - y0;
            const double* r0 = sp + static_cast<size_t>(y0) * src.w;
            const double* r1 = sp + static_cast<size_t>(y1) * src.w;
            double* drow = dst + (static_cast<size_t>(y) * W) * ch_stride + ch_offset + c;
            for (int x = 0; x < W; ++x) {
                const int x0 = x0s[static_cast<size_t>(x)], x1 = x1s[static_cast<size_t>(x)];
                const double a = fxs[static_cast<size_t>(x)];
                drow[static_cast<size_t>(x) * ch_stride] =
                    (1.0 - b) * ((1.0 - a) * r0[x0] + a * r0[x1]) +
                    b * ((1.0 - a) * r1[x0] + a * r1[x1]);
            }
        }
    }
}

// Adjoint of upsample_bilinear_into: scatter the pixel-major gradient rows
// back onto the low-resolution feature planes.
inline void upsample_bilinear_adjoint(const double* d_dst, int ch_stride, int ch_offset, int H,
                                      int W, Tensor3& d_src) {
    const double sy = static_cast<double>(d_src.h) / H;
    const double sx = static_cast<double>(d_src.w) / W;
    for (int c = 0; c < d_src.c; ++c) {
        double* sp = d_src.plane(c);
        for (int y = 0; y < H; ++y) {
            double fy = (y + 0.5) * sy - 0.5;
            fy = std::clamp(fy, 0.0, static_cast<double>(d_src.h - 1));
            const int y0 = std::min(static_cast<int>(std::floor(fy)),
                                    d_src.h - 2 >= 0 ? d_src.h - 2 : 0);
            const int y1 = std::min(y0 + 1, d_src.h - 1);
            const double b = fy - y0;
            for (int x = 0; x < W; ++x) {
                double fx = (x + 0.5) * sx - 0.5;
                fx = std::clamp(fx, 0.0, static_cast<double>(d_src.w - 1));
                const int x0 = std::min(static_cast<int>(std::floor(fx)),
                                        d_src.w - 2 >= 0 ? d_src.w - 2 : 0);
                const int x1 = std::min(x0 + 1, d_src.w - 1);
                const double a = fx - x0;
                const double g =
                    d_dst[(static_cast<size_t>(y) * W + x) * ch_stride + ch_offset + c];
                sp[static_cast<size_t>(y0) * d_src.w + x0] += (1.0 - b) * (1.0 - a) * g;
                sp[static_cast<size_t>(y0) * d_src.w + x1] += (1.0 - b) * a * g;
                sp[static_cast<size_t>(y1) * d_src.w + x0] += b * (1.0 - a) * g;
                sp[static_cast<size_t>(y1) * d_src.w + x1] += b * a * g;
            }
        }
    }
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace dsac::nn
