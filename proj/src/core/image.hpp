#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace seglab::imaging {

// Dense raster, planar channel layout: data[c*H*W + y*W + x], values in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 1; // 1 or 3
    std::vector<double> data;

    int pixels() const { return height * width; }
    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

Image make_image(int height, int width, int channels, double fill = 0.0);

// Per-pixel class indices in {0, ..., num_classes-1}, row-major.
struct LabelMap {
    int height = 0;
    int width = 0;
    int num_classes = 2;
    std::vector<std::int32_t> data;

    int pixels() const { return height * width; }
    std::int32_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::int32_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

LabelMap make_label_map(int height, int width, int num_classes, std::int32_t fill = 0);

// Per-pixel class distributions, data[c*M + j] with M = H*W pixels.
// Each pixel column sums to 1.
struct ProbMap {
    int num_classes = 2;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    int pixels() const { return height * width; }
    double& at(int c, int j) { return data[static_cast<std::size_t>(c) * pixels() + j]; }
    double at(int c, int j) const { return data[static_cast<std::size_t>(c) * pixels() + j]; }
};

ProbMap make_prob_map(int num_classes, int height, int width, double fill = 0.0);

// Superpixel partition, ids in {1, ..., num_superpixels}, row-major.
// Lives here rather than in the superpixel module so the PGM writer can
// serialize all raster types uniformly.
struct SuperpixelMap {
    int height = 0;
    int width = 0;
    int num_superpixels = 0;
    std::vector<std::int32_t> ids;

    int pixels() const { return height * width; }
    std::int32_t& at(int y, int x) { return ids[static_cast<std::size_t>(y) * width + x]; }
    std::int32_t at(int y, int x) const { return ids[static_cast<std::size_t>(y) * width + x]; }
};

// --- PGM file IO -----------------------------------------------------------
//
// Binary PGM (P5). Samples are 1 byte up to maxval 255 and 2 bytes
// big-endian above (Netpbm convention). Grayscale images are a single P5
// block; 3-channel images are stored as three stacked P5 planes preceded
// by a one-line "#seglab-pgm channels=3" header.

// Saves an image. Sample = round-half-up of value * 255.
void save_image_pgm(const Image& img, const std::string& path);
Image load_image_pgm(const std::string& path);

// Saves a label map with maxval = num_classes - 1.
void save_label_pgm(const LabelMap& labels, const std::string& path);
// Loads a label map; values must be < num_classes.
LabelMap load_label_pgm(const std::string& path, int num_classes);

// Saves a superpixel map with maxval = num_superpixels (ids start at 1).
void save_superpixel_pgm(const SuperpixelMap& sp, const std::string& path);
SuperpixelMap load_superpixel_pgm(const std::string& path);

// --- Color conversion ------------------------------------------------------

// sRGB (D65) -> CIE-lab, each channel rescaled into [0,1]:
//   L* in [0,100]   -> L*/100
//   a*,b* in ±110   -> (v+110)/220   (pure gray lands at 0.5)
Image rgb_to_cielab(const Image& img);

// --- Segmentation metrics ---------------------------------------------------

// Dice coefficient 2|A∩B| / (|A|+|B|) for class c; 1.0 when both sets empty.
double dice(const LabelMap& pred, const LabelMap& gt, int cls);

// Arithmetic mean of per-class dice over the given (nonempty) class list.
double mean_dice(const LabelMap& pred, const LabelMap& gt, const std::vector<int>& classes);

// Foreground classes 1..C-1 (class 0 is background everywhere).
std::vector<int> foreground_classes(int num_classes);

} // namespace seglab::imaging
