#include "core/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "core/errors.hpp"

namespace seglab::superpixel {

namespace {

// Feature planes used for clustering, each roughly in [0,1].
std::vector<std::vector<double>> pixel_features(const Image& img) {
    std::vector<std::vector<double>> planes;
    std::size_t m = static_cast<std::size_t>(img.pixels());
    if (img.channels == 3) {
        Image lab = imaging::rgb_to_cielab(img);
        for (int c = 0; c < 3; ++c)
            planes.emplace_back(lab.data.begin() + c * m, lab.data.begin() + (c + 1) * m);
        return planes;
    }
    // Grayscale: intensity + 3x3 local mean and standard deviation.
    int h = img.height, w = img.width;
    planes.emplace_back(img.data.begin(), img.data.begin() + m);
    std::vector<double> mean(m), stddev(m);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sum = 0.0, sum2 = 0.0;
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                int yy = y + dy;
                if (yy < 0 || yy >= h) continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    int xx = x + dx;
                    if (xx < 0 || xx >= w) continue;
                    double v = img.data[static_cast<std::size_t>(yy) * w + xx];
                    sum += v;
                    sum2 += v * v;
                    ++n;
                }
            }
            double mu = sum / n;
            double var = std::max(0.0, sum2 / n - mu * mu);
            mean[static_cast<std::size_t>(y) * w + x] = mu;
            stddev[static_cast<std::size_t>(y) * w + x] = std::sqrt(var);
        }
    }
    planes.push_back(std::move(mean));
    planes.push_back(std::move(stddev));
    return planes;
}

struct Center {
    std::vector<double> feat;
    double x = 0.0, y = 0.0;
};

double gradient_at(const std::vector<std::vector<double>>& planes, int h, int w, int x, int y) {
    auto val = [&](int xx, int yy, const std::vector<double>& p) {
        xx = std::clamp(xx, 0, w - 1);
        yy = std::clamp(yy, 0, h - 1);
        return p[static_cast<std::size_t>(yy) * w + xx];
    };
    double g = 0.0;
    for (const auto& p : planes) {
        double dx = val(x + 1, y, p) - val(x - 1, y, p);
        double dy = val(x, y + 1, p) - val(x, y - 1, p);
        g += dx * dx + dy * dy;
    }
    return g;
}

// Merges fragments below min_size into the largest adjacent superpixel and
// renumbers ids consecutively from 1.
SuperpixelMap enforce_connectivity(const std::vector<int>& raw, int h, int w, int min_size) {
    const int dx4[4] = {-1, 0, 1, 0};
    const int dy4[4] = {0, -1, 0, 1};
    std::size_t m = static_cast<std::size_t>(h) * w;
    std::vector<int> fresh(m, 0); // 0 = unassigned
    std::vector<long> comp_sizes;  // per fresh id, 1-based
    comp_sizes.push_back(0);       // dummy for id 0
    std::vector<int> stack, comp_pixels;

    for (int y0 = 0; y0 < h; ++y0) {
        for (int x0 = 0; x0 < w; ++x0) {
            std::size_t start = static_cast<std::size_t>(y0) * w + x0;
            if (fresh[start] != 0) continue;
            int old_id = raw[start];

            comp_pixels.clear();
            stack.clear();
            stack.push_back(static_cast<int>(start));
            fresh[start] = -1; // visited mark for this component
            while (!stack.empty()) {
                int p = stack.back();
                stack.pop_back();
                comp_pixels.push_back(p);
                int py = p / w, px = p % w;
                for (int d = 0; d < 4; ++d) {
                    int nx = px + dx4[d], ny = py + dy4[d];
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    std::size_t q = static_cast<std::size_t>(ny) * w + nx;
                    if (fresh[q] == 0 && raw[q] == old_id) {
                        fresh[q] = -1;
                        stack.push_back(static_cast<int>(q));
                    }
                }
            }

            // Adjacent already-assigned ids, keyed for the largest-first rule.
            int merge_into = 0;
            long best_size = -1;
            for (int p : comp_pixels) {
                int py = p / w, px = p % w;
                for (int d = 0; d < 4; ++d) {
                    int nx = px + dx4[d], ny = py + dy4[d];
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    int nid = fresh[static_cast<std::size_t>(ny) * w + nx];
                    if (nid <= 0) continue;
                    long sz = comp_sizes[nid];
                    if (sz > best_size || (sz == best_size && nid < merge_into)) {
                        best_size = sz;
                        merge_into = nid;
                    }
                }
            }

            int target;
            if (static_cast<int>(comp_pixels.size()) < min_size && merge_into != 0) {
                target = merge_into;
            } else {
                comp_sizes.push_back(0);
                target = static_cast<int>(comp_sizes.size()) - 1;
            }
            for (int p : comp_pixels) fresh[p] = target;
            comp_sizes[target] += static_cast<long>(comp_pixels.size());
        }
    }

    SuperpixelMap out;
    out.height = h;
    out.width = w;
    out.num_superpixels = static_cast<int>(comp_sizes.size()) - 1;
    out.ids.assign(fresh.begin(), fresh.end());
    return out;
}

} // namespace

SuperpixelMap slic(const Image& img, int k_target, double compactness, int iterations) {
    int h = img.height, w = img.width;
    long m = static_cast<long>(h) * w;
    if (k_target < 1 || k_target > m) throw DomainError("slic: k_target must be in [1, pixel count]");
    if (iterations < 1) throw DomainError("slic: iterations must be >= 1");
    if (compactness < 0.0) throw DomainError("slic: compactness must be >= 0");

    auto planes = pixel_features(img);
    int nf = static_cast<int>(planes.size());
    double grid_step = std::sqrt(static_cast<double>(m) / k_target);

    // Regular grid of initial centers, snapped to the local gradient minimum.
    int nx = std::max(1, static_cast<int>(std::lround(w / grid_step)));
    int ny = std::max(1, static_cast<int>(std::lround(h / grid_step)));
    std::vector<Center> centers;
    centers.reserve(static_cast<std::size_t>(nx) * ny);
    for (int gy = 0; gy < ny; ++gy) {
        for (int gx = 0; gx < nx; ++gx) {
            int cx = static_cast<int>((gx + 0.5) * w / nx);
            int cy = static_cast<int>((gy + 0.5) * h / ny);
            cx = std::min(cx, w - 1);
            cy = std::min(cy, h - 1);
            if (grid_step >= 3.0) {
                double best = gradient_at(planes, h, w, cx, cy);
                int bx = cx, by = cy;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        int xx = cx + dx, yy = cy + dy;
                        if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
                        double g = gradient_at(planes, h, w, xx, yy);
                        if (g < best) {
                            best = g;
                            bx = xx;
                            by = yy;
                        }
                    }
                }
                cx = bx;
                cy = by;
            }
            Center c;
            c.x = cx;
            c.y = cy;
            c.feat.resize(nf);
            for (int f = 0; f < nf; ++f) c.feat[f] = planes[f][static_cast<std::size_t>(cy) * w + cx];
            centers.push_back(std::move(c));
        }
    }
    int k = static_cast<int>(centers.size());
    double spatial_w = compactness / grid_step;

    std::vector<int> labels(m, -1);
    std::vector<double> dist(m);
    std::vector<double> feat_sum(static_cast<std::size_t>(k) * nf);
    std::vector<double> x_sum(k), y_sum(k);
    std::vector<long> counts(k);

    for (int it = 0; it < iterations; ++it) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        std::fill(labels.begin(), labels.end(), -1);
        int win = std::max(1, static_cast<int>(std::ceil(2.0 * grid_step)));
        for (int c = 0; c < k; ++c) {
            const Center& ct = centers[c];
            int x0 = std::max(0, static_cast<int>(std::floor(ct.x)) - win);
            int x1 = std::min(w - 1, static_cast<int>(std::ceil(ct.x)) + win);
            int y0 = std::max(0, static_cast<int>(std::floor(ct.y)) - win);
            int y1 = std::min(h - 1, static_cast<int>(std::ceil(ct.y)) + win);
            for (int y = y0; y <= y1; ++y) {
                std::size_t row = static_cast<std::size_t>(y) * w;
                for (int x = x0; x <= x1; ++x) {
                    std::size_t j = row + x;
                    double df2 = 0.0;
                    for (int f = 0; f < nf; ++f) {
                        double d = planes[f][j] - ct.feat[f];
                        df2 += d * d;
                    }
                    double dxs = x - ct.x, dys = y - ct.y;
                    double d = std::sqrt(df2) + spatial_w * std::sqrt(dxs * dxs + dys * dys);
                    if (d < dist[j]) { // ties keep the earlier (lower) id
                        dist[j] = d;
                        labels[j] = c;
                    }
                }
            }
        }
        // Pixels outside every search window fall back to the nearest center.
        for (long j = 0; j < m; ++j) {
            if (labels[j] >= 0) continue;
            int x = static_cast<int>(j % w), y = static_cast<int>(j / w);
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (int c = 0; c < k; ++c) {
                double df2 = 0.0;
                for (int f = 0; f < nf; ++f) {
                    double d = planes[f][j] - centers[c].feat[f];
                    df2 += d * d;
                }
                double dxs = x - centers[c].x, dys = y - centers[c].y;
                double d = std::sqrt(df2) + spatial_w * std::sqrt(dxs * dxs + dys * dys);
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            labels[j] = best_c;
        }

        std::fill(feat_sum.begin(), feat_sum.end(), 0.0);
        std::fill(x_sum.begin(), x_sum.end(), 0.0);
        std::fill(y_sum.begin(), y_sum.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (long j = 0; j < m; ++j) {
            int c = labels[j];
            for (int f = 0; f < nf; ++f) feat_sum[static_cast<std::size_t>(c) * nf + f] += planes[f][j];
            x_sum[c] += static_cast<double>(j % w);
            y_sum[c] += static_cast<double>(j / w);
            counts[c] += 1;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue; // empty cluster keeps its position
            for (int f = 0; f < nf; ++f)
                centers[c].feat[f] = feat_sum[static_cast<std::size_t>(c) * nf + f] / counts[c];
            centers[c].x = x_sum[c] / counts[c];
            centers[c].y = y_sum[c] / counts[c];
        }
    }

    int min_size = std::max(1, static_cast<int>(grid_step * grid_step / 4.0));
    return enforce_connectivity(labels, h, w, min_size);
}

SuperpixelMap pixel_unit_map(int height, int width) {
    SuperpixelMap sp;
    sp.height = height;
    sp.width = width;
    sp.num_superpixels = height * width;
    sp.ids.resize(static_cast<std::size_t>(height) * width);
    for (std::size_t i = 0; i < sp.ids.size(); ++i) sp.ids[i] = static_cast<std::int32_t>(i) + 1;
    return sp;
}

double undersegmentation_error(const SuperpixelMap& sp, const LabelMap& gt) {
    if (sp.height != gt.height || sp.width != gt.width)
        throw DomainError("undersegmentation_error: shape mismatch");
    long m = sp.pixels();
    int k = sp.num_superpixels;
    std::vector<long> sp_size(k + 1, 0);
    for (std::int32_t id : sp.ids) sp_size[id] += 1;
    // Overlap counts per (superpixel, gt segment).
    std::map<std::pair<int, int>, long> overlap;
    for (long j = 0; j < m; ++j)
        overlap[{sp.ids[j], gt.data[j]}] += 1;
    double total = 0.0;
    for (const auto& [key, count] : overlap) {
        int id = key.first;
        if (static_cast<double>(count) > 0.05 * static_cast<double>(sp_size[id]))
            total += static_cast<double>(sp_size[id]);
    }
    return (total - static_cast<double>(m)) / static_cast<double>(m);
}

std::vector<int> superpixel_sizes(const SuperpixelMap& sp) {
    std::vector<int> sizes(sp.num_superpixels, 0);
    for (std::int32_t id : sp.ids) {
        if (id < 1 || id > sp.num_superpixels) throw DomainError("superpixel id out of range");
        sizes[id - 1] += 1;
    }
    return sizes;
}

SuperpixelTable pool_probabilities(const ProbMap& probs, const SuperpixelMap& sp) {
    if (probs.height != sp.height || probs.width != sp.width)
        throw DomainError("pool_probabilities: shape mismatch");
    SuperpixelTable t;
    t.num_classes = probs.num_classes;
    t.num_superpixels = sp.num_superpixels;
    t.sizes = superpixel_sizes(sp);
    t.values.assign(static_cast<std::size_t>(t.num_classes) * t.num_superpixels, 0.0);
    long m = sp.pixels();
    for (int c = 0; c < t.num_classes; ++c) {
        const double* row = probs.data.data() + static_cast<std::size_t>(c) * m;
        double* out = t.values.data() + static_cast<std::size_t>(c) * t.num_superpixels;
        for (long j = 0; j < m; ++j) out[sp.ids[j] - 1] += row[j];
    }
    for (int c = 0; c < t.num_classes; ++c)
        for (int s = 0; s < t.num_superpixels; ++s) t.at(c, s) /= t.sizes[s];
    return t;
}

SuperpixelTable pool_labels(const LabelMap& labels, const SuperpixelMap& sp) {
    if (labels.height != sp.height || labels.width != sp.width)
        throw DomainError("pool_labels: shape mismatch");
    SuperpixelTable t;
    t.num_classes = labels.num_classes;
    t.num_superpixels = sp.num_superpixels;
    t.sizes = superpixel_sizes(sp);
    t.values.assign(static_cast<std::size_t>(t.num_classes) * t.num_superpixels, 0.0);
    long m = sp.pixels();
    for (long j = 0; j < m; ++j) t.at(labels.data[j], sp.ids[j] - 1) += 1.0;
    for (int c = 0; c < t.num_classes; ++c)
        for (int s = 0; s < t.num_superpixels; ++s) t.at(c, s) /= t.sizes[s];
    return t;
}

} // namespace seglab::superpixel
