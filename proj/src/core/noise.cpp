#include "core/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "core/errors.hpp"

namespace seglab::noise {

std::string pattern_name(Pattern p) {
    switch (p) {
        case Pattern::Dilate: return "dilate";
        case Pattern::Erode: return "erode";
        case Pattern::Affine: return "affine";
    }
    return "?";
}

Pattern pattern_from_name(const std::string& name) {
    if (name == "dilate") return Pattern::Dilate;
    if (name == "erode") return Pattern::Erode;
    if (name == "affine") return Pattern::Affine;
    throw DomainError("unknown noise pattern: " + name);
}

double object_scale(const LabelMap& mask, int cls) {
    long area = 0;
    for (std::int32_t v : mask.data) area += v == cls;
    if (area == 0) throw DomainError("object_scale: class absent from mask");
    return std::sqrt(static_cast<double>(area));
}

namespace {

int disk_radius(double r) {
    return std::max(1, static_cast<int>(std::lround(r)));
}

// Disk offsets (dy,dx) with dy^2+dx^2 <= ri^2.
std::vector<std::pair<int, int>> disk_offsets(int ri) {
    std::vector<std::pair<int, int>> offs;
    for (int dy = -ri; dy <= ri; ++dy)
        for (int dx = -ri; dx <= ri; ++dx)
            if (dy * dy + dx * dx <= ri * ri) offs.emplace_back(dy, dx);
    return offs;
}

} // namespace

LabelMap dilate_mask(const LabelMap& mask, int cls, double radius) {
    if (cls < 0 || cls >= mask.num_classes) throw DomainError("dilate_mask: class out of range");
    int ri = disk_radius(radius);
    auto offs = disk_offsets(ri);
    LabelMap out = mask;
    int h = mask.height, w = mask.width;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.at(y, x) != cls) continue;
            for (auto [dy, dx] : offs) {
                int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                out.at(yy, xx) = cls;
            }
        }
    }
    return out;
}

LabelMap erode_mask(const LabelMap& mask, int cls, double radius) {
    if (cls < 0 || cls >= mask.num_classes) throw DomainError("erode_mask: class out of range");
    int ri = disk_radius(radius);
    auto offs = disk_offsets(ri);
    LabelMap out = mask;
    int h = mask.height, w = mask.width;
    bool any_left = false;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.at(y, x) != cls) continue;
            bool keep = true;
            for (auto [dy, dx] : offs) {
                int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue; // frame clip
                if (mask.at(yy, xx) != cls) {
                    keep = false;
                    break;
                }
            }
            if (!keep)
                out.at(y, x) = 0;
            else
                any_left = true;
        }
    }
    if (any_left) return out;

    // The erosion emptied the mask: keep the single foreground pixel with
    // the largest Euclidean distance to the boundary (ties: lowest index).
    // The nearest non-class pixel to any foreground pixel always touches the
    // foreground, so scanning boundary pixels is exact.
    std::vector<long> boundary;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (mask.at(y, x) == cls) continue;
            bool touches = false;
            for (auto [dy, dx] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
                int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                if (mask.at(yy, xx) == cls) {
                    touches = true;
                    break;
                }
            }
            if (touches) boundary.push_back(static_cast<long>(y) * w + x);
        }
    long best_pixel = -1;
    double best_d2 = -1.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (mask.at(y, x) != cls) continue;
            double d2 = std::numeric_limits<double>::infinity();
            for (long b : boundary) {
                double dy = y - static_cast<double>(b / w);
                double dx = x - static_cast<double>(b % w);
                d2 = std::min(d2, dy * dy + dx * dx);
            }
            if (d2 > best_d2) {
                best_d2 = d2;
                best_pixel = static_cast<long>(y) * w + x;
            }
        }
    if (best_pixel < 0) throw DomainError("erode_mask: class absent from mask");
    out = mask;
    for (long j = 0; j < static_cast<long>(mask.data.size()); ++j)
        if (mask.data[j] == cls) out.data[j] = (j == best_pixel) ? cls : 0;
    return out;
}

LabelMap affine_mask(const LabelMap& mask, int cls, double angle_deg, double shift_x, double shift_y) {
    if (cls < 0 || cls >= mask.num_classes) throw DomainError("affine_mask: class out of range");
    int h = mask.height, w = mask.width;
    double cx = 0.0, cy = 0.0;
    long area = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask.at(y, x) == cls) {
                cx += x;
                cy += y;
                ++area;
            }
    if (area == 0) throw DomainError("affine_mask: class absent from mask");
    cx /= area;
    cy /= area;

    double rad = angle_deg * 3.14159265358979323846 / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    LabelMap out = mask;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Inverse map: undo shift, rotate back about the centroid.
            double ux = x - shift_x - cx;
            double uy = y - shift_y - cy;
            double sx = c * ux + s * uy + cx;
            double sy = -s * ux + c * uy + cy;
            long ix = std::lround(sx);
            long iy = std::lround(sy);
            bool fg = ix >= 0 && ix < w && iy >= 0 && iy < h && mask.at(static_cast<int>(iy), static_cast<int>(ix)) == cls;
            if (fg)
                out.at(y, x) = cls;
            else if (mask.at(y, x) == cls)
                out.at(y, x) = 0;
        }
    }
    return out;
}

Corruption draw_corruption(const NoiseSpec& spec, double scale, Rng& rng) {
    if (spec.patterns.empty()) throw DomainError("draw_corruption: empty pattern set");
    Pattern p = spec.patterns[rng.next_below(spec.patterns.size())];
    Corruption c;
    c.pattern = p;
    if (p == Pattern::Dilate || p == Pattern::Erode) {
        c.param1 = spec.radius_gain * spec.beta * scale;
    } else {
        double bound = spec.angle_gain * spec.beta;
        c.param1 = rng.uniform(-bound, bound);
        double sbound = spec.shift_gain * spec.beta * scale;
        c.shift_x = rng.uniform(-sbound, sbound);
        c.shift_y = rng.uniform(-sbound, sbound);
    }
    return c;
}

namespace {

LabelMap apply_corruption(const LabelMap& mask, int cls, const Corruption& c) {
    switch (c.pattern) {
        case Pattern::Dilate: return dilate_mask(mask, cls, c.param1);
        case Pattern::Erode: return erode_mask(mask, cls, c.param1);
        case Pattern::Affine: return affine_mask(mask, cls, c.param1, c.shift_x, c.shift_y);
    }
    throw DomainError("unreachable pattern");
}

} // namespace

CorruptionResult corrupt_dataset(const std::vector<LabelMap>& labels, const NoiseSpec& spec) {
    if (labels.empty()) throw DomainError("corrupt_dataset: empty dataset");
    if (spec.alpha < 0.0 || spec.alpha > 1.0) throw DomainError("corrupt_dataset: alpha must be in [0,1]");
    if (spec.beta < 0.0) throw DomainError("corrupt_dataset: beta must be >= 0");
    if (spec.patterns.empty()) throw DomainError("corrupt_dataset: empty pattern set");

    int n = static_cast<int>(labels.size());
    int n_corrupt = static_cast<int>(std::lround(spec.alpha * n));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng pick(mix64(spec.seed, 0));
    pick.shuffle(order);
    std::vector<int> chosen(order.begin(), order.begin() + n_corrupt);
    std::sort(chosen.begin(), chosen.end());

    CorruptionResult result;
    result.labels = labels;
    long changed = 0, total = 0;
    for (const LabelMap& lm : labels) total += lm.pixels();

    for (int idx : chosen) {
        const LabelMap& clean = labels[idx];
        Rng rng(mix64(spec.seed, static_cast<std::uint64_t>(idx) + 1));
        LabelMap noisy = clean;
        CorruptionRecord rec;
        rec.sample_index = idx;
        bool first = true;
        for (int cls = 1; cls < clean.num_classes; ++cls) {
            bool present = false;
            for (std::int32_t v : clean.data)
                if (v == cls) {
                    present = true;
                    break;
                }
            if (!present) continue;
            double scale = object_scale(clean, cls);
            Corruption c = draw_corruption(spec, scale, rng);
            noisy = apply_corruption(noisy, cls, c);
            if (first) {
                rec.pattern = c.pattern;
                rec.param1 = c.param1;
                rec.param2 = c.param2;
                rec.shift_x = c.shift_x;
                rec.shift_y = c.shift_y;
                rec.is_affine_shift = c.pattern == Pattern::Affine;
                first = false;
            }
        }
        auto fg = imaging::foreground_classes(clean.num_classes);
        rec.dice_vs_clean = imaging::mean_dice(noisy, clean, fg);
        result.labels[idx] = std::move(noisy);
        result.log.push_back(rec);
    }

    for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < labels[i].data.size(); ++j)
            changed += result.labels[i].data[j] != labels[i].data[j];
    result.pixel_noise_rate = total > 0 ? static_cast<double>(changed) / static_cast<double>(total) : 0.0;
    return result;
}

void write_corruption_log(const std::vector<CorruptionRecord>& log, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "sample_index,pattern,param1,param2,dice_vs_clean\n";
    char buf[160];
    for (const CorruptionRecord& r : log) {
        if (r.is_affine_shift) {
            std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f;%.6f,%.6f\n", r.sample_index,
                          pattern_name(r.pattern).c_str(), r.param1, r.shift_x, r.shift_y,
                          r.dice_vs_clean);
        } else {
            std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f,%.6f\n", r.sample_index,
                          pattern_name(r.pattern).c_str(), r.param1, r.param2, r.dice_vs_clean);
        }
        f << buf;
    }
    if (!f) throw IoError("write failed: " + path);
}

} // namespace seglab::noise
