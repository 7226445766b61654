#include <cmath>
#include <cstring>
#include <vector>

#include <doctest.h>

#include "adareg/optimizer.hpp"
#include "adareg/rng.hpp"
#include "oracles.hpp"
#include "testing.hpp"

using namespace adareg;

namespace {

Dataset regression_set(Eigen::Index n, Eigen::Index in, Eigen::Index out, Rng& rng)
{
    Dataset ds;
    ds.kind = TaskKind::Regression;
    ds.inputs = oracle::gaussian(n, in, rng);
    const Eigen::MatrixXd truth = oracle::gaussian(out, in, rng);
    ds.targets = ds.inputs * truth.transpose() + 0.1 * oracle::gaussian(n, out, rng);
    return ds;
}

Dataset classification_set(Eigen::Index n, Eigen::Index in, int classes, Rng& rng)
{
    Dataset ds;
    ds.kind = TaskKind::Classification;
    ds.num_classes = classes;
    ds.inputs = oracle::gaussian(n, in, rng);
    for (Eigen::Index i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
    return ds;
}

Network mlp(std::vector<Eigen::Index> sizes, LossKind loss, std::uint64_t seed)
{
    return Network::mlp(sizes, Activation::ReLU, loss, seed);
}

bool same_bits(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_params(const Network& a, const Network& b)
{
    for (std::size_t k = 0; k < a.num_layers(); ++k) {
        if (!same_bits(a.layer(k).weight, b.layer(k).weight)) return false;
        if (!same_bits(a.layer(k).bias, b.layer(k).bias)) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("optimizer")
{
    TEST_CASE("schedule validation")
    {
        BcdSchedule s;
        CHECK_NOTHROW(s.validate());
        s.epochs_per_block = 0;
        CHECK_NOTHROW(s.validate());
        s.outer_loops = 0;
        CHECK_ERROR_CODE(s.validate(), ErrorCode::InvalidArgument);
        s = {};
        s.batch_size = 0;
        CHECK_ERROR_CODE(s.validate(), ErrorCode::InvalidArgument);
        s = {};
        s.learning_rate = -1.0;
        CHECK_ERROR_CODE(s.validate(), ErrorCode::InvalidArgument);
    }

    TEST_CASE("full_objective examples")
    {
        Rng rng(1);
        const Dataset ds = regression_set(30, 4, 3, rng);
        Network net = mlp({4, 5, 3}, LossKind::SquaredError, 2);
        const auto b = SpectralBounds::from_upper(10.0);

        Network zeroed = net;
        zeroed.layer(1).weight.setZero();
        const AdaRegState z = AdaRegState::initial(zeroed, {1}, b, 0.5);
        CHECK(full_objective(z, ds) == doctest::Approx(loss_value(zeroed, ds)));

        const AdaRegState no_lambda = AdaRegState::initial(net, {1}, b, 0.0);
        CHECK(full_objective(no_lambda, ds) == loss_value(net, ds));

        AdaRegState s = AdaRegState::initial(net, {1}, b, 0.25);
        s.blocks[0].precisions = PrecisionPair(SymMatrix(oracle::random_feasible(3, 0.1, 10.0, rng)),
                                               SymMatrix(oracle::random_feasible(5, 0.1, 10.0, rng)), b);
        CHECK(full_objective(s, ds) ==
              doctest::Approx(loss_value(net, ds) + regularizer_value(net.layer(1).weight, s.blocks[0].precisions, 0.25)));

        CHECK_ERROR_CODE(AdaRegState::initial(net, {2}, b, 0.1), ErrorCode::InvalidArgument);
        CHECK_ERROR_CODE(AdaRegState::initial(net, {1}, b, -0.1), ErrorCode::InvalidArgument);
    }

    TEST_CASE("update_precisions examples")
    {
        const auto b = SpectralBounds::from_upper(10.0);
        DenseLayer zero{Eigen::MatrixXd::Zero(3, 4), Eigen::VectorXd::Zero(3), Activation::Identity};
        const AdaRegState z = update_precisions(AdaRegState::initial(Network({zero}, LossKind::SquaredError), {0}, b, 0.1));
        CHECK(z.precisions().row().matrix() == Eigen::MatrixXd::Identity(3, 3) * 10.0);
        CHECK(z.precisions().col().matrix() == Eigen::MatrixXd::Identity(4, 4) * 10.0);

        DenseLayer eye{Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4), Activation::Identity};
        const auto narrow = SpectralBounds::from_upper(2.0);
        const AdaRegState e = update_precisions(AdaRegState::initial(Network({eye}, LossKind::SquaredError), {0}, narrow, 0.1));
        CHECK(e.precisions().row().matrix() == Eigen::MatrixXd::Identity(4, 4) * threshold(4.0, narrow));

        DenseLayer big{Eigen::MatrixXd::Identity(2, 2) * 10.0, Eigen::VectorXd::Zero(2), Activation::Identity};
        const AdaRegState g = update_precisions(AdaRegState::initial(Network({big}, LossKind::SquaredError), {0}, b, 0.1));
        CHECK(g.precisions().row().matrix().isApprox(Eigen::MatrixXd::Identity(2, 2) * 0.1));
        // Omega_c is computed against the updated Omega_r.
        const Eigen::MatrixXd delta_c = 100.0 * g.precisions().row().matrix();
        CHECK(g.precisions().col().matrix().isApprox(Eigen::MatrixXd::Identity(2, 2) * threshold(2.0 / delta_c(0, 0), b)));
    }

    TEST_CASE("precision updates never increase the objective and stay feasible")
    {
        Rng rng(314);
        for (int trial = 0; trial < 30; ++trial) {
            const auto b = SpectralBounds::from_upper(rng.bernoulli(0.5) ? 2.0 : 10.0);
            const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.below(6));
            const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(6));
            const Dataset ds = regression_set(12, d, p, rng);
            DenseLayer layer{oracle::gaussian(p, d, rng, rng.uniform(0.05, 3.0)), Eigen::VectorXd::Zero(p),
                             Activation::Identity};
            AdaRegState s = AdaRegState::initial(Network({layer}, LossKind::SquaredError), {0}, b, rng.uniform(0.01, 1.0));
            s.blocks[0].precisions = PrecisionPair(SymMatrix(oracle::random_feasible(p, b.lower(), b.upper(), rng)),
                                                   SymMatrix(oracle::random_feasible(d, b.lower(), b.upper(), rng)), b);
            for (int outer = 0; outer < 3; ++outer) {
                const double before = full_objective(s, ds);
                s = update_precisions(std::move(s));
                const double after = full_objective(s, ds);
                CHECK(after <= before + 1e-9 * std::abs(before));
                for (const Eigen::MatrixXd* m : {&s.precisions().row().matrix(), &s.precisions().col().matrix()}) {
                    const Eigen::VectorXd ev = oracle::eigenvalues(*m);
                    CHECK(ev.minCoeff() >= b.lower() - 1e-8);
                    CHECK(ev.maxCoeff() <= b.upper() + 1e-8);
                }
                s.net.layer(0).weight += oracle::gaussian(p, d, rng, 0.1);
            }
        }
    }

    TEST_CASE("train_block with no regularization matches plain SGD")
    {
        Rng rng(5);
        const Dataset ds = classification_set(50, 6, 3, rng);
        const Network net = mlp({6, 8, 3}, LossKind::SoftmaxCrossEntropy, 9);
        BcdSchedule sch;
        sch.epochs_per_block = 2;
        sch.batch_size = 16;
        sch.learning_rate = 0.2;

        const AdaRegState reg = train_block(AdaRegState::initial(net, {1}, SpectralBounds::from_upper(3.0), 0.0), sch, ds, 77);

        Network plain = net;
        for (int epoch = 1; epoch <= 2; ++epoch) {
            for (const auto& rows : batch_indices(ds.size(), 16, derive_seed(77, 1, epoch))) {
                const Batch batch = ds.gather(rows);
                sgd_step(plain, backward(plain, batch), {0.2, 0.0, {}});
            }
        }
        CHECK(same_params(reg.net, plain));

        sch.learning_rate = 0.0;
        const AdaRegState frozen = train_block(AdaRegState::initial(net, {1}, SpectralBounds::from_upper(3.0), 0.4), sch, ds, 1);
        CHECK(same_params(frozen.net, net));
    }

    TEST_CASE("train_block decreases a convex objective")
    {
        Rng rng(6);
        const Dataset ds = regression_set(80, 5, 3, rng);
        DenseLayer lin{oracle::gaussian(3, 5, rng), Eigen::VectorXd::Zero(3), Activation::Identity};
        AdaRegState s = AdaRegState::initial(Network({lin}, LossKind::SquaredError), {0}, SpectralBounds::from_upper(10.0), 0.05);
        s.blocks[0].precisions = PrecisionPair(SymMatrix(oracle::random_feasible(3, 0.1, 10.0, rng)),
                                               SymMatrix(oracle::random_feasible(5, 0.1, 10.0, rng)), s.bounds);
        BcdSchedule sch;
        sch.epochs_per_block = 10;
        sch.batch_size = 80;
        sch.learning_rate = 0.05;
        std::vector<double> objective{full_objective(s, ds)};
        s = train_block(std::move(s), sch, ds, 3, {}, 1,
                        [&](const AdaRegState& st, int) { objective.push_back(full_objective(st, ds)); });
        for (std::size_t i = 1; i < objective.size(); ++i) CHECK(objective[i] < objective[i - 1]);
    }

    TEST_CASE("regularized objective gradient matches central differences")
    {
        Rng rng(19);
        for (int trial = 0; trial < 8; ++trial) {
            const Dataset ds = regression_set(7, 4, 3, rng);
            const Network net = Network::mlp(std::vector<Eigen::Index>{4, 6, 3}, Activation::Identity, LossKind::SquaredError, rng.bits());
            AdaRegState s = AdaRegState::initial(net, {1}, SpectralBounds::from_upper(10.0), rng.uniform(0.05, 1.0));
            s.blocks[0].precisions = PrecisionPair(SymMatrix(oracle::random_feasible(3, 0.1, 10.0, rng)),
                                                   SymMatrix(oracle::random_feasible(6, 0.1, 10.0, rng)), s.bounds);
            const Eigen::MatrixXd analytic =
                backward(net, ds)[1].weight + regularizer_grad(net.layer(1).weight, s.blocks[0].precisions, s.lambda);
            const auto f = [&](const Eigen::MatrixXd& w) {
                AdaRegState probe = s;
                probe.net.layer(1).weight = w;
                return full_objective(probe, ds);
            };
            CHECK(oracle::relative_error(analytic, oracle::finite_difference(f, net.layer(1).weight)) < 1e-4);
        }
    }

    TEST_CASE("run_adareg with an empty block updates the precisions once")
    {
        Rng rng(7);
        const Dataset ds = classification_set(40, 5, 4, rng);
        const Network net = mlp({5, 6, 4}, LossKind::SoftmaxCrossEntropy, 3);
        BcdSchedule sch;
        sch.outer_loops = 1;
        sch.epochs_per_block = 0;
        const auto b = SpectralBounds::from_upper(10.0);
        const TrainResult r = run_adareg(net, sch, ds, nullptr, b, 0.1, 1);
        CHECK(same_params(r.state.net, net));
        CHECK(r.log.epochs.empty());
        CHECK(r.state.outer_iter == 1);
        const AdaRegState once = update_precisions(AdaRegState::initial(net, {1}, b, 0.1));
        CHECK(r.state.precisions().row().matrix() == once.precisions().row().matrix());
        CHECK(r.state.precisions().col().matrix() == once.precisions().col().matrix());
    }

    TEST_CASE("run_training logs per epoch and is deterministic")
    {
        Rng rng(8);
        const Dataset train = classification_set(60, 5, 3, rng);
        const Dataset test = classification_set(30, 5, 3, rng);
        const Network net = mlp({5, 7, 3}, LossKind::SoftmaxCrossEntropy, 4);
        BcdSchedule sch;
        sch.outer_loops = 3;
        sch.epochs_per_block = 2;
        sch.batch_size = 16;
        sch.learning_rate = 0.1;
        const auto b = SpectralBounds::from_upper(10.0);
        const TrainResult r1 = run_adareg(net, sch, train, &test, b, 0.01, 42);
        const TrainResult r2 = run_adareg(net, sch, train, &test, b, 0.01, 42);
        REQUIRE(r1.log.epochs.size() == 6);
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(r1.log.epochs[i].epoch == static_cast<int>(i) + 1);
            CHECK(r1.log.epochs[i].outer_iter == static_cast<int>(i) / 2 + 1);
            CHECK(r1.log.epochs[i].train_loss == r2.log.epochs[i].train_loss);
            CHECK(r1.log.epochs[i].test_metric == r2.log.epochs[i].test_metric);
            CHECK(r1.log.epochs[i].objective == r2.log.epochs[i].objective);
        }
        CHECK(same_params(r1.state.net, r2.state.net));
        CHECK(r1.log.final_spectra.size() == 2);
        CHECK(r1.log.final_correlation.rows() == 3);
        const TrainResult r3 = run_adareg(net, sch, train, &test, b, 0.01, 43);
        CHECK_FALSE(same_params(r1.state.net, r3.state.net));
    }

    TEST_CASE("unit bounds reduce AdaReg to weight decay bit for bit")
    {
        Rng rng(9);
        const Dataset ds = classification_set(64, 6, 3, rng);
        const Network net = mlp({6, 5, 3}, LossKind::SoftmaxCrossEntropy, 10);
        const double lambda = 0.05;
        BcdSchedule sch;
        sch.outer_loops = 3;
        sch.epochs_per_block = 1;
        sch.batch_size = 10;
        sch.learning_rate = 0.3;
        const TrainResult ada = run_training(AdaRegState::initial(net, {1}, SpectralBounds::from_upper(1.0), lambda), sch,
                                             ds, nullptr, 5);
        StepOptions wd;
        wd.weight_decay = 2.0 * lambda;
        wd.decay_layers = {1};
        const TrainResult sgd = run_training(AdaRegState::unregularized(net), sch, ds, nullptr, 5, wd);
        CHECK(same_params(ada.state.net, sgd.state.net));
        CHECK_FALSE(same_params(ada.state.net, net));
    }

    TEST_CASE("a runaway learning rate is reported as divergence")
    {
        Rng rng(10);
        const Dataset ds = regression_set(40, 4, 2, rng);
        DenseLayer lin{oracle::gaussian(2, 4, rng), Eigen::VectorXd::Zero(2), Activation::Identity};
        BcdSchedule sch;
        sch.epochs_per_block = 200;
        sch.batch_size = 40;
        sch.learning_rate = 50.0;
        CHECK_ERROR_CODE(train_block(AdaRegState::unregularized(Network({lin}, LossKind::SquaredError)), sch, ds, 1),
                         ErrorCode::Diverged);
    }

    TEST_CASE("dropout and weight decay options change the trajectory deterministically")
    {
        Rng rng(11);
        const Dataset ds = classification_set(40, 5, 3, rng);
        const Network net = mlp({5, 20, 3}, LossKind::SoftmaxCrossEntropy, 6);
        BcdSchedule sch;
        sch.epochs_per_block = 2;
        sch.batch_size = 8;
        StepOptions drop;
        drop.dropout_rate = 0.5;
        const AdaRegState a = train_block(AdaRegState::unregularized(net), sch, ds, 3, drop);
        const AdaRegState b = train_block(AdaRegState::unregularized(net), sch, ds, 3, drop);
        const AdaRegState c = train_block(AdaRegState::unregularized(net), sch, ds, 3);
        CHECK(same_params(a.net, b.net));
        CHECK_FALSE(same_params(a.net, c.net));
    }
}
