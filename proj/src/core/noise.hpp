#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/image.hpp"
#include "core/rng.hpp"

namespace seglab::noise {

using imaging::LabelMap;

enum class Pattern { Dilate, Erode, Affine };

std::string pattern_name(Pattern p);
Pattern pattern_from_name(const std::string& name);

// Annotation-noise model: a fraction alpha of samples is corrupted, each by
// one pattern whose magnitude scales with beta relative to the object size.
struct NoiseSpec {
    double alpha = 0.5;
    double beta = 0.5;
    std::vector<Pattern> patterns = {Pattern::Dilate, Pattern::Erode, Pattern::Affine};
    std::uint64_t seed = 0;

    // Magnitude mapping, exposed for recalibration:
    //   morphology radius  = radius_gain * beta * scale
    //   rotation angle     ~ U(±angle_gain * beta) degrees
    //   shift per axis     ~ U(±shift_gain * beta * scale) px
    double radius_gain = 0.5;
    double angle_gain = 30.0;
    double shift_gain = 0.5;
};

// sqrt of the class-c pixel area; the object size the noise level is
// relative to.
double object_scale(const LabelMap& mask, int cls);

// Binary morphology on the class-c indicator with a disk structuring
// element of radius max(1, round(radius)). Pixels gained by dilation take
// class c; pixels lost revert to background (0).
LabelMap dilate_mask(const LabelMap& mask, int cls, double radius);

// Erosion is dual to dilation on the complement (the disk is clipped to the
// frame on both sides). An erosion that would empty the mask keeps the
// single pixel farthest from the boundary instead.
LabelMap erode_mask(const LabelMap& mask, int cls, double radius);

// Rotation about the class-c centroid plus translation, nearest-neighbor
// resampling; parts leaving the frame become background.
LabelMap affine_mask(const LabelMap& mask, int cls, double angle_deg, double shift_x, double shift_y);

struct Corruption {
    Pattern pattern;
    double param1 = 0.0; // radius (morphology) or angle in degrees (affine)
    double param2 = 0.0; // unused (morphology)
    double shift_x = 0.0;
    double shift_y = 0.0;
};

// Draws one corruption for an object of the given scale. Morphology radius
// and affine bounds follow the NoiseSpec mapping above.
Corruption draw_corruption(const NoiseSpec& spec, double scale, Rng& rng);

struct CorruptionRecord {
    int sample_index = 0;
    Pattern pattern;
    double param1 = 0.0;
    double param2 = 0.0;
    double shift_x = 0.0;
    double shift_y = 0.0;
    bool is_affine_shift = false;
    double dice_vs_clean = 1.0;
};

struct CorruptionResult {
    std::vector<LabelMap> labels;
    std::vector<CorruptionRecord> log;
    // Fraction of training pixels whose label changed; the known noise rate
    // consumed by the trainer's initial selection ratio.
    double pixel_noise_rate = 0.0;
};

// Corrupts exactly round(alpha*n) maps, chosen and parameterized
// deterministically from spec.seed (per-sample streams via mix64).
// Multi-class maps receive one pattern applied independently per foreground
// class in ascending order, so later classes win overlaps.
CorruptionResult corrupt_dataset(const std::vector<LabelMap>& labels, const NoiseSpec& spec);

// Writes the log as CSV: sample_index,pattern,param1,param2,dice_vs_clean.
// Affine rows pack the shift as "dx;dy" into param2.
void write_corruption_log(const std::vector<CorruptionRecord>& log, const std::string& path);

} // namespace seglab::noise
