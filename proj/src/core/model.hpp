#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/image.hpp"

namespace seglab::model {

using imaging::Image;
using imaging::ProbMap;

// Small U-Net: `depth` encoder levels (3x3 conv + rectifier, 2x max-pool),
// a 3x3 bottleneck, mirrored decoder levels (nearest-neighbor 2x upsample,
// skip concatenation, 3x3 conv + rectifier), then a 1x1 conv and per-pixel
// softmax. Channel width doubles per level from base_channels.
struct NetConfig {
    int in_channels = 1;
    int num_classes = 2;
    int depth = 2;
    int base_channels = 8;
};

struct ConvShape {
    int in_ch = 0;
    int out_ch = 0;
    int ksize = 3;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;

    std::size_t weight_count() const {
        return static_cast<std::size_t>(out_ch) * in_ch * ksize * ksize;
    }
};

// Conv layers in forward order: depth encoder convs, bottleneck,
// depth decoder convs, final 1x1.
struct NetPlan {
    std::vector<ConvShape> convs;
    std::size_t param_count = 0;
};

NetPlan plan_net(const NetConfig& config);

struct NetInstance {
    NetConfig config;
    std::uint64_t init_seed = 0;
    std::vector<double> params;
};

// He-style fan-in initialization, deterministic per seed.
NetInstance init_net(const NetConfig& config, std::uint64_t seed);

// Two instances of the same architecture with different initializations.
// Equal seeds are rejected.
std::pair<NetInstance, NetInstance> init_pair(const NetConfig& config, std::uint64_t seed1, std::uint64_t seed2);

// Activations retained for the backward pass.
struct ForwardCache {
    bool valid = false;
    int height = 0;
    int width = 0;
    std::vector<std::vector<double>> conv_inputs;  // per conv layer
    std::vector<std::vector<double>> conv_outputs; // pre-rectifier
    std::vector<std::vector<std::uint8_t>> pool_argmax;
    std::vector<double> probs; // softmax output, [c][y][x]
};

// Runs the network; spatial size is preserved. Input height and width must
// be divisible by 2^depth.
ProbMap forward(const NetInstance& net, const Image& img, ForwardCache* cache = nullptr);

// Gradient of a scalar loss with respect to the parameters, given
// loss_grad = dL/dP at the softmax output (same layout as ProbMap data).
std::vector<double> backward(const NetInstance& net, const ForwardCache& cache,
                             const std::vector<double>& loss_grad);

struct SgdState {
    double learning_rate = 0.005;
    double momentum = 0.0;
    std::vector<double> velocity; // allocated on first use when momentum > 0
};

// theta <- theta - lr * g (plus classical momentum when configured).
// Non-finite gradients are refused.
void sgd_step(NetInstance& net, const std::vector<double>& grads, SgdState& state);

// Checkpoint: magic line, config echo line, raw little-endian float64
// parameters. Round-trips bit-exactly.
void save_checkpoint(const NetInstance& net, const std::string& path);
NetInstance load_checkpoint(const std::string& path);

// Argmax labeling of the probability map (ties: lowest class).
imaging::LabelMap argmax_labels(const ProbMap& probs);

} // namespace seglab::model
