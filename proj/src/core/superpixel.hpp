#pragma once

#include <vector>

#include "core/image.hpp"

namespace seglab::superpixel {

using imaging::Image;
using imaging::LabelMap;
using imaging::ProbMap;
using imaging::SuperpixelMap;

// Per-superpixel class distributions: values[c*K + k]; every column sums
// to 1. sizes[k] is the pixel count N(k).
struct SuperpixelTable {
    int num_classes = 0;
    int num_superpixels = 0;
    std::vector<double> values;
    std::vector<int> sizes;

    double& at(int c, int k) { return values[static_cast<std::size_t>(c) * num_superpixels + k]; }
    double at(int c, int k) const { return values[static_cast<std::size_t>(c) * num_superpixels + k]; }
};

// SLIC superpixelization.
//
// Pixel features: rescaled CIE-lab channels for 3-channel images;
// intensity plus 3x3 local mean and standard deviation for grayscale.
// Assignment distance is
//     ||f - f_center|| + (compactness / grid_step) * ||xy - xy_center||
// with grid_step = sqrt(M / k_target). Cluster centers start on a regular
// grid, each moved to the lowest-gradient pixel in its 3x3 neighborhood;
// pixels are assigned within a 2*grid_step window around each center and
// exact distance ties go to the lower superpixel id. A connectivity pass
// merges orphan fragments into the largest adjacent superpixel, so the
// final count K may differ from k_target.
SuperpixelMap slic(const Image& img, int k_target, double compactness, int iterations);

// Identity partition: every pixel its own superpixel (the pixel-unit
// ablation).
SuperpixelMap pixel_unit_map(int height, int width);

// Undersegmentation error:
//   ( sum over gt segments g of sum over superpixels k with
//     |k ∩ g| > 0.05*|k| of |k|  -  M ) / M
// Zero when every superpixel lies inside one gt segment.
double undersegmentation_error(const SuperpixelMap& sp, const LabelMap& gt);

// Mean of per-pixel probabilities over each superpixel.
SuperpixelTable pool_probabilities(const ProbMap& probs, const SuperpixelMap& sp);

// Soft labels: per-superpixel class frequencies of a hard label map.
SuperpixelTable pool_labels(const LabelMap& labels, const SuperpixelMap& sp);

// Pixel counts per superpixel id (index 0 holds N(1)).
std::vector<int> superpixel_sizes(const SuperpixelMap& sp);

} // namespace seglab::superpixel
