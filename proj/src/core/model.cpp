#include "core/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace seglab::model {

namespace {

// --- conv kernels, planar layout [ch][y][x] ---------------------------------

// out[o] += conv(in, w) for one 3x3 layer; out must be pre-filled with bias.
void conv3x3_accumulate(const double* in, int c_in, int h, int w_, const double* weights,
                        double* out, int c_out) {
    std::size_t plane = static_cast<std::size_t>(h) * w_;
    for (int o = 0; o < c_out; ++o) {
        double* outp = out + static_cast<std::size_t>(o) * plane;
        for (int i = 0; i < c_in; ++i) {
            const double* inp = in + static_cast<std::size_t>(i) * plane;
            const double* wk = weights + (static_cast<std::size_t>(o) * c_in + i) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                double w0 = wk[ky * 3 + 0], w1 = wk[ky * 3 + 1], w2 = wk[ky * 3 + 2];
                int y0 = std::max(0, 1 - ky);
                int y1 = std::min(h, h + 1 - ky);
                for (int y = y0; y < y1; ++y) {
                    const double* ir = inp + static_cast<std::size_t>(y + ky - 1) * w_;
                    double* orow = outp + static_cast<std::size_t>(y) * w_;
                    orow[0] += w1 * ir[0] + w2 * ir[1];
                    for (int x = 1; x < w_ - 1; ++x)
                        orow[x] += w0 * ir[x - 1] + w1 * ir[x] + w2 * ir[x + 1];
                    orow[w_ - 1] += w0 * ir[w_ - 2] + w1 * ir[w_ - 1];
                }
            }
        }
    }
}

// dIn += correlation of dOut with the flipped kernel.
void conv3x3_backward_input(const double* dout, int c_out, int h, int w_, const double* weights,
                            double* din, int c_in) {
    std::size_t plane = static_cast<std::size_t>(h) * w_;
    for (int o = 0; o < c_out; ++o) {
        const double* dop = dout + static_cast<std::size_t>(o) * plane;
        for (int i = 0; i < c_in; ++i) {
            double* dip = din + static_cast<std::size_t>(i) * plane;
            const double* wk = weights + (static_cast<std::size_t>(o) * c_in + i) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                // din[y+ky-1][x+kx-1] += w[ky][kx] * dout[y][x]
                //  => din row yy gathers dout[yy-ky+1] with flipped x taps.
                double w0 = wk[ky * 3 + 0], w1 = wk[ky * 3 + 1], w2 = wk[ky * 3 + 2];
                int yy0 = std::max(0, ky - 1);
                int yy1 = std::min(h, h + ky - 1);
                for (int yy = yy0; yy < yy1; ++yy) {
                    int y = yy - ky + 1;
                    const double* dr = dop + static_cast<std::size_t>(y) * w_;
                    double* dirow = dip + static_cast<std::size_t>(yy) * w_;
                    dirow[0] += w1 * dr[0] + w0 * dr[1];
                    for (int xx = 1; xx < w_ - 1; ++xx)
                        dirow[xx] += w2 * dr[xx - 1] + w1 * dr[xx] + w0 * dr[xx + 1];
                    dirow[w_ - 1] += w2 * dr[w_ - 2] + w1 * dr[w_ - 1];
                }
            }
        }
    }
}

// Accumulates dW and dB for one 3x3 layer. Uses fixed-lane partial sums so
// the reduction both vectorizes and stays order-deterministic.
void conv3x3_backward_params(const double* in, int c_in, const double* dout, int c_out, int h,
                             int w_, double* dweights, double* dbias) {
    std::size_t plane = static_cast<std::size_t>(h) * w_;
    constexpr int kLanes = 8;
    for (int o = 0; o < c_out; ++o) {
        const double* dop = dout + static_cast<std::size_t>(o) * plane;
        double bacc = 0.0;
        for (std::size_t j = 0; j < plane; ++j) bacc += dop[j];
        dbias[o] += bacc;
        for (int i = 0; i < c_in; ++i) {
            const double* inp = in + static_cast<std::size_t>(i) * plane;
            double* dwk = dweights + (static_cast<std::size_t>(o) * c_in + i) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                double l0[kLanes] = {0}, l1[kLanes] = {0}, l2[kLanes] = {0};
                double e0 = 0.0, e1 = 0.0, e2 = 0.0;
                int y0 = std::max(0, 1 - ky);
                int y1 = std::min(h, h + 1 - ky);
                for (int y = y0; y < y1; ++y) {
                    const double* ir = inp + static_cast<std::size_t>(y + ky - 1) * w_;
                    const double* dr = dop + static_cast<std::size_t>(y) * w_;
                    // x = 0 and x = W-1 fall outside some taps (zero padding).
                    e1 += dr[0] * ir[0];
                    e2 += dr[0] * ir[1];
                    e0 += dr[w_ - 1] * ir[w_ - 2];
                    e1 += dr[w_ - 1] * ir[w_ - 1];
                    int x = 1;
                    for (; x + kLanes <= w_ - 1; x += kLanes) {
                        for (int l = 0; l < kLanes; ++l) {
                            double d = dr[x + l];
                            l0[l] += d * ir[x + l - 1];
                            l1[l] += d * ir[x + l];
                            l2[l] += d * ir[x + l + 1];
                        }
                    }
                    for (; x < w_ - 1; ++x) {
                        double d = dr[x];
                        e0 += d * ir[x - 1];
                        e1 += d * ir[x];
                        e2 += d * ir[x + 1];
                    }
                }
                for (int l = 0; l < kLanes; ++l) {
                    e0 += l0[l];
                    e1 += l1[l];
                    e2 += l2[l];
                }
                dwk[ky * 3 + 0] += e0;
                dwk[ky * 3 + 1] += e1;
                dwk[ky * 3 + 2] += e2;
            }
        }
    }
}

void conv1x1_forward(const double* in, int c_in, std::size_t plane, const double* weights,
                     const double* bias, double* out, int c_out) {
    for (int o = 0; o < c_out; ++o) {
        double* outp = out + static_cast<std::size_t>(o) * plane;
        std::fill(outp, outp + plane, bias[o]);
        for (int i = 0; i < c_in; ++i) {
            const double* inp = in + static_cast<std::size_t>(i) * plane;
            double wv = weights[static_cast<std::size_t>(o) * c_in + i];
            for (std::size_t j = 0; j < plane; ++j) outp[j] += wv * inp[j];
        }
    }
}

void conv1x1_backward(const double* in, int c_in, const double* dout, int c_out,
                      std::size_t plane, const double* weights, double* din, double* dweights,
                      double* dbias) {
    for (int o = 0; o < c_out; ++o) {
        const double* dop = dout + static_cast<std::size_t>(o) * plane;
        double bacc = 0.0;
        for (std::size_t j = 0; j < plane; ++j) bacc += dop[j];
        dbias[o] += bacc;
        for (int i = 0; i < c_in; ++i) {
            const double* inp = in + static_cast<std::size_t>(i) * plane;
            double* dip = din + static_cast<std::size_t>(i) * plane;
            double wv = weights[static_cast<std::size_t>(o) * c_in + i];
            double wacc = 0.0;
            for (std::size_t j = 0; j < plane; ++j) {
                wacc += dop[j] * inp[j];
                dip[j] += wv * dop[j];
            }
            dweights[static_cast<std::size_t>(o) * c_in + i] += wacc;
        }
    }
}

void relu_inplace(double* a, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) a[j] = a[j] > 0.0 ? a[j] : 0.0;
}

// dz = da where z > 0, else 0.
void relu_backward(const double* z, const double* da, double* dz, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) dz[j] = z[j] > 0.0 ? da[j] : 0.0;
}

void maxpool2x2(const double* in, int ch, int h, int w_, double* out, std::uint8_t* argmax) {
    int oh = h / 2, ow = w_ / 2;
    for (int c = 0; c < ch; ++c) {
        const double* inp = in + static_cast<std::size_t>(c) * h * w_;
        double* outp = out + static_cast<std::size_t>(c) * oh * ow;
        std::uint8_t* am = argmax + static_cast<std::size_t>(c) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const double* p = inp + static_cast<std::size_t>(2 * y) * w_ + 2 * x;
                double v0 = p[0], v1 = p[1], v2 = p[w_], v3 = p[w_ + 1];
                int best = 0;
                double bv = v0;
                if (v1 > bv) { bv = v1; best = 1; }
                if (v2 > bv) { bv = v2; best = 2; }
                if (v3 > bv) { bv = v3; best = 3; }
                outp[static_cast<std::size_t>(y) * ow + x] = bv;
                am[static_cast<std::size_t>(y) * ow + x] = static_cast<std::uint8_t>(best);
            }
        }
    }
}

void maxpool2x2_backward(const double* dout, int ch, int oh, int ow, const std::uint8_t* argmax,
                         double* din, int h, int w_) {
    std::fill(din, din + static_cast<std::size_t>(ch) * h * w_, 0.0);
    for (int c = 0; c < ch; ++c) {
        const double* dop = dout + static_cast<std::size_t>(c) * oh * ow;
        const std::uint8_t* am = argmax + static_cast<std::size_t>(c) * oh * ow;
        double* dip = din + static_cast<std::size_t>(c) * h * w_;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                int best = am[static_cast<std::size_t>(y) * ow + x];
                int yy = 2 * y + (best >> 1), xx = 2 * x + (best & 1);
                dip[static_cast<std::size_t>(yy) * w_ + xx] = dop[static_cast<std::size_t>(y) * ow + x];
            }
        }
    }
}

void upsample2x(const double* in, int ch, int h, int w_, double* out) {
    int oh = 2 * h, ow = 2 * w_;
    for (int c = 0; c < ch; ++c) {
        const double* inp = in + static_cast<std::size_t>(c) * h * w_;
        double* outp = out + static_cast<std::size_t>(c) * oh * ow;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w_; ++x) {
                double v = inp[static_cast<std::size_t>(y) * w_ + x];
                double* q = outp + static_cast<std::size_t>(2 * y) * ow + 2 * x;
                q[0] = v;
                q[1] = v;
                q[ow] = v;
                q[ow + 1] = v;
            }
        }
    }
}

void upsample2x_backward(const double* dout, int ch, int h, int w_, double* din) {
    // h, w_ are the *input* (coarse) dimensions.
    int ow = 2 * w_;
    for (int c = 0; c < ch; ++c) {
        const double* dop = dout + static_cast<std::size_t>(c) * 4 * h * w_;
        double* dip = din + static_cast<std::size_t>(c) * h * w_;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w_; ++x) {
                const double* q = dop + static_cast<std::size_t>(2 * y) * ow + 2 * x;
                dip[static_cast<std::size_t>(y) * w_ + x] = q[0] + q[1] + q[ow] + q[ow + 1];
            }
        }
    }
}

} // namespace

NetPlan plan_net(const NetConfig& config) {
    if (config.in_channels != 1 && config.in_channels != 3)
        throw DomainError("net: in_channels must be 1 or 3");
    if (config.num_classes < 2) throw DomainError("net: num_classes must be >= 2");
    if (config.depth < 1 || config.depth > 6) throw DomainError("net: depth must be in [1,6]");
    if (config.base_channels < 1) throw DomainError("net: base_channels must be >= 1");

    NetPlan plan;
    std::size_t off = 0;
    auto push = [&](int in_ch, int out_ch, int ksize) {
        ConvShape cs;
        cs.in_ch = in_ch;
        cs.out_ch = out_ch;
        cs.ksize = ksize;
        cs.weight_offset = off;
        off += cs.weight_count();
        cs.bias_offset = off;
        off += static_cast<std::size_t>(out_ch);
        plan.convs.push_back(cs);
    };
    int b = config.base_channels;
    int in_ch = config.in_channels;
    for (int l = 0; l < config.depth; ++l) {
        push(in_ch, b << l, 3);
        in_ch = b << l;
    }
    push(in_ch, b << config.depth, 3); // bottleneck
    for (int l = config.depth - 1; l >= 0; --l)
        push((b << (l + 1)) + (b << l), b << l, 3);
    push(b, config.num_classes, 1);
    plan.param_count = off;
    return plan;
}

NetInstance init_net(const NetConfig& config, std::uint64_t seed) {
    NetPlan plan = plan_net(config);
    NetInstance net;
    net.config = config;
    net.init_seed = seed;
    net.params.assign(plan.param_count, 0.0);
    Rng rng(seed);
    for (const ConvShape& cs : plan.convs) {
        double fan_in = static_cast<double>(cs.in_ch) * cs.ksize * cs.ksize;
        double stddev = std::sqrt(2.0 / fan_in);
        for (std::size_t i = 0; i < cs.weight_count(); ++i)
            net.params[cs.weight_offset + i] = stddev * rng.normal();
        // biases stay zero
    }
    return net;
}

std::pair<NetInstance, NetInstance> init_pair(const NetConfig& config, std::uint64_t seed1,
                                              std::uint64_t seed2) {
    if (seed1 == seed2) throw DomainError("init_pair: seeds must differ");
    return {init_net(config, seed1), init_net(config, seed2)};
}

ProbMap forward(const NetInstance& net, const Image& img, ForwardCache* cache) {
    const NetConfig& cfg = net.config;
    if (img.channels != cfg.in_channels) throw DomainError("forward: channel mismatch");
    int h = img.height, w = img.width;
    int div = 1 << cfg.depth;
    if (h % div != 0 || w % div != 0)
        throw DomainError("forward: input size must be divisible by 2^depth");

    NetPlan plan = plan_net(cfg);
    ForwardCache local;
    ForwardCache& cc = cache ? *cache : local;
    cc = ForwardCache{};
    cc.height = h;
    cc.width = w;
    cc.conv_inputs.resize(plan.convs.size());
    cc.conv_outputs.resize(plan.convs.size());
    cc.pool_argmax.resize(cfg.depth);

    const double* theta = net.params.data();
    int d = cfg.depth, b = cfg.base_channels;

    std::vector<double> act(img.data);
    int cur_h = h, cur_w = w;

    // Encoder
    for (int l = 0; l < d; ++l) {
        const ConvShape& cs = plan.convs[l];
        std::size_t plane = static_cast<std::size_t>(cur_h) * cur_w;
        std::vector<double> z(static_cast<std::size_t>(cs.out_ch) * plane);
        for (int o = 0; o < cs.out_ch; ++o)
            std::fill(z.begin() + o * plane, z.begin() + (o + 1) * plane, theta[cs.bias_offset + o]);
        conv3x3_accumulate(act.data(), cs.in_ch, cur_h, cur_w, theta + cs.weight_offset, z.data(), cs.out_ch);
        cc.conv_inputs[l] = std::move(act);
        cc.conv_outputs[l] = z; // keep pre-rectifier copy
        relu_inplace(z.data(), z.size());
        // pool
        std::vector<double> pooled(static_cast<std::size_t>(cs.out_ch) * (cur_h / 2) * (cur_w / 2));
        cc.pool_argmax[l].resize(pooled.size());
        maxpool2x2(z.data(), cs.out_ch, cur_h, cur_w, pooled.data(), cc.pool_argmax[l].data());
        act = std::move(pooled);
        cur_h /= 2;
        cur_w /= 2;
    }

    // Bottleneck
    {
        const ConvShape& cs = plan.convs[d];
        std::size_t plane = static_cast<std::size_t>(cur_h) * cur_w;
        std::vector<double> z(static_cast<std::size_t>(cs.out_ch) * plane);
        for (int o = 0; o < cs.out_ch; ++o)
            std::fill(z.begin() + o * plane, z.begin() + (o + 1) * plane, theta[cs.bias_offset + o]);
        conv3x3_accumulate(act.data(), cs.in_ch, cur_h, cur_w, theta + cs.weight_offset, z.data(), cs.out_ch);
        cc.conv_inputs[d] = std::move(act);
        cc.conv_outputs[d] = z;
        relu_inplace(z.data(), z.size());
        act = std::move(z);
    }

    // Decoder
    for (int l = d - 1; l >= 0; --l) {
        int li = 2 * d - l;
        const ConvShape& cs = plan.convs[li];
        int up_ch = b << (l + 1), skip_ch = b << l;
        int uh = cur_h * 2, uw = cur_w * 2;
        std::size_t uplane = static_cast<std::size_t>(uh) * uw;
        std::vector<double> cat(static_cast<std::size_t>(up_ch + skip_ch) * uplane);
        upsample2x(act.data(), up_ch, cur_h, cur_w, cat.data());
        // skip = rectified encoder output at level l
        {
            const std::vector<double>& ez = cc.conv_outputs[l];
            double* dst = cat.data() + static_cast<std::size_t>(up_ch) * uplane;
            for (std::size_t j = 0; j < ez.size(); ++j) dst[j] = ez[j] > 0.0 ? ez[j] : 0.0;
        }
        std::vector<double> z(static_cast<std::size_t>(cs.out_ch) * uplane);
        for (int o = 0; o < cs.out_ch; ++o)
            std::fill(z.begin() + o * uplane, z.begin() + (o + 1) * uplane, theta[cs.bias_offset + o]);
        conv3x3_accumulate(cat.data(), cs.in_ch, uh, uw, theta + cs.weight_offset, z.data(), cs.out_ch);
        cc.conv_inputs[li] = std::move(cat);
        cc.conv_outputs[li] = z;
        relu_inplace(z.data(), z.size());
        act = std::move(z);
        cur_h = uh;
        cur_w = uw;
    }

    // Final 1x1 + softmax
    ProbMap probs = imaging::make_prob_map(cfg.num_classes, h, w);
    {
        const ConvShape& cs = plan.convs[2 * d + 1];
        std::size_t plane = static_cast<std::size_t>(h) * w;
        std::vector<double> logits(static_cast<std::size_t>(cs.out_ch) * plane);
        conv1x1_forward(act.data(), cs.in_ch, plane, theta + cs.weight_offset,
                        theta + cs.bias_offset, logits.data(), cs.out_ch);
        cc.conv_inputs[2 * d + 1] = std::move(act);
        cc.conv_outputs[2 * d + 1] = logits;
        int c_num = cfg.num_classes;
        for (std::size_t j = 0; j < plane; ++j) {
            double mx = logits[j];
            for (int c = 1; c < c_num; ++c) mx = std::max(mx, logits[c * plane + j]);
            double sum = 0.0;
            for (int c = 0; c < c_num; ++c) {
                double e = std::exp(logits[c * plane + j] - mx);
                probs.data[c * plane + j] = e;
                sum += e;
            }
            for (int c = 0; c < c_num; ++c) probs.data[c * plane + j] /= sum;
        }
    }
    cc.probs = probs.data;
    cc.valid = true;
    return probs;
}

std::vector<double> backward(const NetInstance& net, const ForwardCache& cache,
                             const std::vector<double>& loss_grad) {
    if (!cache.valid) throw StateError("backward: forward cache missing");
    const NetConfig& cfg = net.config;
    int h = cache.height, w = cache.width;
    std::size_t plane = static_cast<std::size_t>(h) * w;
    if (loss_grad.size() != static_cast<std::size_t>(cfg.num_classes) * plane)
        throw DomainError("backward: loss_grad size mismatch");

    NetPlan plan = plan_net(cfg);
    const double* theta = net.params.data();
    std::vector<double> grads(plan.param_count, 0.0);
    int d = cfg.depth, b = cfg.base_channels;

    // Softmax backward: dz_c = P_c * (g_c - sum_k g_k P_k)
    std::vector<double> dz(static_cast<std::size_t>(cfg.num_classes) * plane);
    for (std::size_t j = 0; j < plane; ++j) {
        double dot = 0.0;
        for (int c = 0; c < cfg.num_classes; ++c)
            dot += loss_grad[c * plane + j] * cache.probs[c * plane + j];
        for (int c = 0; c < cfg.num_classes; ++c)
            dz[c * plane + j] = cache.probs[c * plane + j] * (loss_grad[c * plane + j] - dot);
    }

    // Final 1x1
    std::vector<double> da;
    {
        const ConvShape& cs = plan.convs[2 * d + 1];
        da.assign(static_cast<std::size_t>(cs.in_ch) * plane, 0.0);
        conv1x1_backward(cache.conv_inputs[2 * d + 1].data(), cs.in_ch, dz.data(), cs.out_ch,
                         plane, theta + cs.weight_offset, da.data(),
                         grads.data() + cs.weight_offset, grads.data() + cs.bias_offset);
    }

    // Decoder convs, level 0 upward; collect skip gradients per encoder level.
    std::vector<std::vector<double>> dskip(d);
    int cur_h = h, cur_w = w;
    for (int l = 0; l < d; ++l) {
        int li = 2 * d - l;
        const ConvShape& cs = plan.convs[li];
        std::size_t lplane = static_cast<std::size_t>(cur_h) * cur_w;
        std::vector<double> dzl(static_cast<std::size_t>(cs.out_ch) * lplane);
        relu_backward(cache.conv_outputs[li].data(), da.data(), dzl.data(), dzl.size());
        std::vector<double> dcat(static_cast<std::size_t>(cs.in_ch) * lplane, 0.0);
        conv3x3_backward_params(cache.conv_inputs[li].data(), cs.in_ch, dzl.data(), cs.out_ch,
                                cur_h, cur_w, grads.data() + cs.weight_offset,
                                grads.data() + cs.bias_offset);
        conv3x3_backward_input(dzl.data(), cs.out_ch, cur_h, cur_w, theta + cs.weight_offset,
                               dcat.data(), cs.in_ch);
        int up_ch = b << (l + 1);
        int skip_ch = b << l;
        dskip[l].assign(dcat.begin() + static_cast<std::size_t>(up_ch) * lplane,
                        dcat.begin() + static_cast<std::size_t>(up_ch + skip_ch) * lplane);
        da.assign(static_cast<std::size_t>(up_ch) * (lplane / 4), 0.0);
        upsample2x_backward(dcat.data(), up_ch, cur_h / 2, cur_w / 2, da.data());
        cur_h /= 2;
        cur_w /= 2;
    }

    // Bottleneck (da is the gradient at its rectified output).
    {
        const ConvShape& cs = plan.convs[d];
        std::size_t lplane = static_cast<std::size_t>(cur_h) * cur_w;
        std::vector<double> dzl(static_cast<std::size_t>(cs.out_ch) * lplane);
        relu_backward(cache.conv_outputs[d].data(), da.data(), dzl.data(), dzl.size());
        std::vector<double> din(static_cast<std::size_t>(cs.in_ch) * lplane, 0.0);
        conv3x3_backward_params(cache.conv_inputs[d].data(), cs.in_ch, dzl.data(), cs.out_ch,
                                cur_h, cur_w, grads.data() + cs.weight_offset,
                                grads.data() + cs.bias_offset);
        conv3x3_backward_input(dzl.data(), cs.out_ch, cur_h, cur_w, theta + cs.weight_offset,
                               din.data(), cs.in_ch);
        da = std::move(din);
    }

    // Encoder convs, deepest first.
    for (int l = d - 1; l >= 0; --l) {
        const ConvShape& cs = plan.convs[l];
        int lh = cur_h * 2, lw = cur_w * 2;
        std::size_t lplane = static_cast<std::size_t>(lh) * lw;
        // Pool backward, then add the skip-path gradient.
        std::vector<double> dr(static_cast<std::size_t>(cs.out_ch) * lplane, 0.0);
        maxpool2x2_backward(da.data(), cs.out_ch, cur_h, cur_w, cache.pool_argmax[l].data(),
                            dr.data(), lh, lw);
        const std::vector<double>& ds = dskip[l];
        for (std::size_t j = 0; j < dr.size(); ++j) dr[j] += ds[j];
        std::vector<double> dzl(dr.size());
        relu_backward(cache.conv_outputs[l].data(), dr.data(), dzl.data(), dzl.size());
        conv3x3_backward_params(cache.conv_inputs[l].data(), cs.in_ch, dzl.data(), cs.out_ch, lh,
                                lw, grads.data() + cs.weight_offset, grads.data() + cs.bias_offset);
        if (l > 0) {
            std::vector<double> din(static_cast<std::size_t>(cs.in_ch) * lplane, 0.0);
            conv3x3_backward_input(dzl.data(), cs.out_ch, lh, lw, theta + cs.weight_offset,
                                   din.data(), cs.in_ch);
            da = std::move(din);
        }
        cur_h = lh;
        cur_w = lw;
    }

    return grads;
}

void sgd_step(NetInstance& net, const std::vector<double>& grads, SgdState& state) {
    if (grads.size() != net.params.size()) throw DomainError("sgd_step: gradient size mismatch");
    if (state.learning_rate <= 0.0) throw DomainError("sgd_step: learning rate must be > 0");
    for (double g : grads)
        if (!std::isfinite(g)) throw NumericError("sgd_step: non-finite gradient, step refused");
    if (state.momentum != 0.0) {
        if (state.velocity.size() != grads.size()) state.velocity.assign(grads.size(), 0.0);
        for (std::size_t i = 0; i < grads.size(); ++i) {
            state.velocity[i] = state.momentum * state.velocity[i] + grads[i];
            net.params[i] -= state.learning_rate * state.velocity[i];
        }
    } else {
        for (std::size_t i = 0; i < grads.size(); ++i)
            net.params[i] -= state.learning_rate * grads[i];
    }
}

namespace {

constexpr const char* kCheckpointMagic = "SEGLAB-NET-1";

void write_le_doubles(std::ostream& out, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
        if constexpr (std::endian::native == std::endian::big) {
            std::uint64_t s = 0;
            for (int i = 0; i < 8; ++i) s |= ((bits >> (8 * (7 - i))) & 0xff) << (8 * i);
            bits = s;
        }
        out.write(reinterpret_cast<const char*>(&bits), 8);
    }
}

std::vector<double> read_le_doubles(std::istream& in, std::size_t n, const std::string& path) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        in.read(reinterpret_cast<char*>(&bits), 8);
        if (!in) throw TruncationError(path + ": checkpoint payload truncated");
        if constexpr (std::endian::native == std::endian::big) {
            std::uint64_t s = 0;
            for (int b = 0; b < 8; ++b) s |= ((bits >> (8 * (7 - b))) & 0xff) << (8 * b);
            bits = s;
        }
        v[i] = std::bit_cast<double>(bits);
    }
    return v;
}

} // namespace

void save_checkpoint(const NetInstance& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << kCheckpointMagic << "\n";
    f << "in_channels=" << net.config.in_channels << " num_classes=" << net.config.num_classes
      << " depth=" << net.config.depth << " base_channels=" << net.config.base_channels
      << " init_seed=" << net.init_seed << " params=" << net.params.size() << "\n";
    write_le_doubles(f, net.params);
    if (!f) throw IoError("write failed: " + path);
}

NetInstance load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::string magic;
    std::getline(f, magic);
    if (magic != kCheckpointMagic) throw FormatError(path + ": not a seglab checkpoint");
    std::string header;
    std::getline(f, header);
    NetInstance net;
    std::size_t n_params = 0;
    std::istringstream hs(header);
    std::string tok;
    while (hs >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw FormatError(path + ": malformed checkpoint header");
        std::string key = tok.substr(0, eq);
        long long value = std::stoll(tok.substr(eq + 1));
        if (key == "in_channels") net.config.in_channels = static_cast<int>(value);
        else if (key == "num_classes") net.config.num_classes = static_cast<int>(value);
        else if (key == "depth") net.config.depth = static_cast<int>(value);
        else if (key == "base_channels") net.config.base_channels = static_cast<int>(value);
        else if (key == "init_seed") net.init_seed = static_cast<std::uint64_t>(value);
        else if (key == "params") n_params = static_cast<std::size_t>(value);
        else throw FormatError(path + ": unknown checkpoint field " + key);
    }
    NetPlan plan = plan_net(net.config);
    if (plan.param_count != n_params)
        throw FormatError(path + ": parameter count does not match architecture");
    net.params = read_le_doubles(f, n_params, path);
    return net;
}

imaging::LabelMap argmax_labels(const ProbMap& probs) {
    imaging::LabelMap lm = imaging::make_label_map(probs.height, probs.width, probs.num_classes);
    std::size_t plane = static_cast<std::size_t>(probs.pixels());
    for (std::size_t j = 0; j < plane; ++j) {
        int best = 0;
        double bv = probs.data[j];
        for (int c = 1; c < probs.num_classes; ++c) {
            double v = probs.data[c * plane + j];
            if (v > bv) {
                bv = v;
                best = c;
            }
        }
        lm.data[j] = best;
    }
    return lm;
}

} // namespace seglab::model
