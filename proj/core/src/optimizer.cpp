#include "adareg/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <string>
#include <utility>

#include "adareg/diagnostics.hpp"
#include "adareg/errors.hpp"
#include "adareg/rng.hpp"

namespace adareg {

namespace {

double regularizer_total(const AdaRegState& state)
{
    double total = 0.0;
    for (const auto& block : state.blocks) {
        total += regularizer_value(state.net.layer(block.layer).weight, block.precisions, state.lambda);
    }
    return total;
}

}  // namespace

void BcdSchedule::validate() const
{
    if (outer_loops < 1) fail(ErrorCode::InvalidArgument, "outer_loops must be positive");
    if (epochs_per_block < 0) fail(ErrorCode::InvalidArgument, "epochs_per_block must be non-negative");
    if (batch_size < 1) fail(ErrorCode::InvalidArgument, "batch_size must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        fail(ErrorCode::InvalidArgument, "learning_rate must be finite and non-negative");
    }
}

AdaRegState AdaRegState::initial(Network net, const std::vector<std::size_t>& layers, SpectralBounds bounds,
                                 double lambda)
{
    if (!(lambda >= 0.0)) fail(ErrorCode::InvalidArgument, "lambda must be non-negative");
    std::vector<RegularizedLayer> blocks;
    for (std::size_t k : layers) {
        if (k >= net.num_layers()) {
            fail(ErrorCode::InvalidArgument, "regularized layer index " + std::to_string(k) + " out of range");
        }
        const auto& w = net.layer(k).weight;
        blocks.push_back({k, PrecisionPair::identity(w.rows(), w.cols(), bounds)});
    }
    return AdaRegState{std::move(net), std::move(blocks), bounds, lambda, 0};
}

AdaRegState AdaRegState::unregularized(Network net)
{
    return AdaRegState{std::move(net), {}, SpectralBounds::from_upper(1.0), 0.0, 0};
}

double full_objective(const AdaRegState& state, const Dataset& dataset)
{
    return loss_value(state.net, dataset) + regularizer_total(state);
}

AdaRegState update_precisions(AdaRegState state)
{
    for (auto& block : state.blocks) {
        const Eigen::MatrixXd& w = state.net.layer(block.layer).weight;
        const auto p = static_cast<int>(w.rows());
        const auto d = static_cast<int>(w.cols());
        const SymMatrix& omega_c = block.precisions.col();

        const Eigen::MatrixXd delta_r = w * omega_c.matrix() * w.transpose();
        if (!delta_r.allFinite()) fail(ErrorCode::Diverged, "weights too large for the precision update");
        SymMatrix omega_r = inv_threshold(SymMatrix(delta_r), d, state.bounds);
        const Eigen::MatrixXd delta_c = w.transpose() * omega_r.matrix() * w;
        if (!delta_c.allFinite()) fail(ErrorCode::Diverged, "weights too large for the precision update");
        SymMatrix new_c = inv_threshold(SymMatrix(delta_c), p, state.bounds);
        block.precisions = PrecisionPair(std::move(omega_r), std::move(new_c), state.bounds);
    }
    return state;
}

AdaRegState train_block(AdaRegState state, const BcdSchedule& schedule, const Dataset& train, std::uint64_t seed,
                        const StepOptions& options, int first_epoch, const EpochCallback& on_epoch)
{
    schedule.validate();
    const SgdOptions sgd{schedule.learning_rate, options.weight_decay, options.decay_layers};
    std::vector<ExtraGradient> extra;

    for (int e = 0; e < schedule.epochs_per_block; ++e) {
        const int epoch = first_epoch + e;
        const auto plan = batch_indices(train.size(), schedule.batch_size, derive_seed(seed, 1, epoch));
        for (std::size_t s = 0; s < plan.size(); ++s) {
            const Batch batch = train.gather(plan[s]);
            const ForwardCache cache =
                forward(state.net, batch.inputs, DropoutConfig{options.dropout_rate, derive_seed(seed, 2, epoch, s)});
            const double loss = loss_from_output(state.net.loss(), cache.output, batch);
            if (!std::isfinite(loss)) {
                fail(ErrorCode::Diverged, "non-finite training loss at epoch " + std::to_string(epoch));
            }
            const Gradients grads = backward(state.net, batch, cache);

            extra.clear();
            for (const auto& block : state.blocks) {
                extra.push_back({block.layer, regularizer_grad(state.net.layer(block.layer).weight, block.precisions,
                                                               state.lambda)});
            }
            sgd_step(state.net, grads, sgd, extra);
        }
        if (!state.net.all_finite()) {
            fail(ErrorCode::Diverged, "non-finite parameters after epoch " + std::to_string(epoch));
        }
        if (on_epoch) on_epoch(state, epoch);
    }
    return state;
}

TrainResult run_training(AdaRegState initial, const BcdSchedule& schedule, const Dataset& train, const Dataset* test,
                         std::uint64_t seed, const StepOptions& options)
{
    schedule.validate();
    const auto started = std::chrono::steady_clock::now();
    TrainResult result{std::move(initial), {}};
    MetricLog& log = result.log;

    int outer = 0;
    const EpochCallback record = [&](const AdaRegState& state, int epoch) {
        const Evaluation tr = evaluate(state.net, train);
        EpochRecord r;
        r.epoch = epoch;
        r.outer_iter = outer;
        r.train_loss = tr.loss;
        r.train_metric = tr.metric;
        r.objective = tr.loss + regularizer_total(state);
        if (test != nullptr) {
            const Evaluation te = evaluate(state.net, *test);
            r.test_loss = te.loss;
            r.test_metric = te.metric;
        }
        if (!std::isfinite(r.train_loss) || !std::isfinite(r.objective)) {
            fail(ErrorCode::Diverged, "non-finite loss at epoch " + std::to_string(epoch));
        }
        log.epochs.push_back(r);
    };

    AdaRegState& state = result.state;
    for (outer = 1; outer <= schedule.outer_loops; ++outer) {
        const int first_epoch = (outer - 1) * schedule.epochs_per_block + 1;
        state = train_block(std::move(state), schedule, train, seed, options, first_epoch, record);
        if (!state.blocks.empty()) state = update_precisions(std::move(state));
        state.outer_iter = outer;
    }

    for (const auto& layer : state.net.layers()) log.final_spectra.push_back(spectrum_report(layer.weight));
    const std::size_t corr_layer = state.blocks.empty() ? state.net.num_layers() - 1 : state.blocks.front().layer;
    try {
        log.final_correlation = correlation_matrix(state.net.layer(corr_layer).weight);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateRow) throw;
    }
    if (test != nullptr && test->kind == TaskKind::Regression) log.final_test_per_task = evaluate(state.net, *test).per_task;
    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

TrainResult run_adareg(Network net, const BcdSchedule& schedule, const Dataset& train, const Dataset* test,
                       SpectralBounds bounds, double lambda, std::uint64_t seed)
{
    const std::size_t last = net.num_layers() - 1;
    return run_training(AdaRegState::initial(std::move(net), {last}, bounds, lambda), schedule, train, test, seed);
}

}  // namespace adareg
