#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "adareg/data.hpp"
#include "adareg/metrics.hpp"
#include "adareg/net.hpp"
#include "adareg/prior.hpp"
#include "adareg/spectral.hpp"

namespace adareg {

struct BcdSchedule {
    int outer_loops = 2;
    int epochs_per_block = 50;  // 0 allowed: precisions are then updated on the initial weights
    Eigen::Index batch_size = 256;
    double learning_rate = 0.1;

    /// Throws InvalidArgument unless outer_loops, batch_size > 0,
    /// epochs_per_block >= 0 and learning_rate >= 0.
    void validate() const;
};

/// One weight matrix under a matrix-normal prior and its current precisions.
struct RegularizedLayer {
    std::size_t layer;
    PrecisionPair precisions;
};

/// Block coordinate descent state. With no regularized layers the state
/// describes a plain network and the loop degenerates to minibatch SGD.
struct AdaRegState {
    Network net;
    std::vector<RegularizedLayer> blocks;
    SpectralBounds bounds;
    double lambda = 0.0;
    int outer_iter = 0;

    /// Omega_r = I_p, Omega_c = I_d for every listed layer.
    static AdaRegState initial(Network net, const std::vector<std::size_t>& layers, SpectralBounds bounds,
                               double lambda);
    static AdaRegState unregularized(Network net);

    const PrecisionPair& precisions() const { return blocks.at(0).precisions; }
};

/// Options that apply on every SGD step regardless of the prior.
struct StepOptions {
    double weight_decay = 0.0;
    std::vector<std::size_t> decay_layers;  // empty: all layers
    double dropout_rate = 0.0;
};

/// Mean data loss plus the prior regularizer of every block.
double full_objective(const AdaRegState& state, const Dataset& dataset);

/// Omega_r <- InvThreshold(W Omega_c W^T, d), then
/// Omega_c <- InvThreshold(W^T Omega_r W, p) using the new Omega_r.
AdaRegState update_precisions(AdaRegState state);

using EpochCallback = std::function<void(const AdaRegState&, int epoch)>;

/// epochs_per_block epochs of minibatch SGD on the full objective with the
/// precisions frozen. Epoch e (global, 1-based, starting at first_epoch)
/// shuffles with derive_seed(seed, 1, e); dropout on step s uses
/// derive_seed(seed, 2, e, s). Throws Diverged on a non-finite loss or
/// parameter.
AdaRegState train_block(AdaRegState state, const BcdSchedule& schedule, const Dataset& train, std::uint64_t seed,
                        const StepOptions& options = {}, int first_epoch = 1, const EpochCallback& on_epoch = {});

struct TrainResult {
    AdaRegState state;
    MetricLog log;
};

/// Alternates train_block and update_precisions for schedule.outer_loops
/// iterations, logging one record per epoch. `test` may be null. Without
/// regularized blocks the same epochs run with no precision updates.
TrainResult run_training(AdaRegState initial, const BcdSchedule& schedule, const Dataset& train, const Dataset* test,
                         std::uint64_t seed, const StepOptions& options = {});

/// AdaReg on the last layer of `net`, starting from identity precisions.
TrainResult run_adareg(Network net, const BcdSchedule& schedule, const Dataset& train, const Dataset* test,
                       SpectralBounds bounds, double lambda, std::uint64_t seed);

}  // namespace adareg
