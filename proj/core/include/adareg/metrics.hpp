#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "adareg/data.hpp"
#include "adareg/diagnostics.hpp"
#include "adareg/net.hpp"

namespace adareg {

struct EpochRecord {
    int epoch = 0;       // 1-based, global across outer iterations
    int outer_iter = 0;  // 1-based outer iteration the epoch belongs to
    double train_loss = 0.0;
    double test_loss = 0.0;
    double train_metric = 0.0;  // accuracy or mean explained variance
    double test_metric = 0.0;
    double objective = 0.0;     // train loss plus the prior regularizer, if any
};

struct MetricLog {
    std::vector<EpochRecord> epochs;
    std::vector<SpectrumReport> final_spectra;  // one per layer
    Eigen::MatrixXd final_correlation;          // rows of the regularized (or last) layer
    Eigen::VectorXd final_test_per_task;        // per-task explained variance (regression only)
    double wall_seconds = 0.0;                  // console only; never written to metric files
};

struct Evaluation {
    double loss = 0.0;
    double metric = 0.0;
    Eigen::VectorXd per_task;  // regression only
};

Evaluation evaluate(const Network& net, const Dataset& ds);

/// Shortest round-trip decimal form of a double (std::to_chars).
std::string format_double(double x);

/// Per-epoch series as CSV with a fixed header.
std::string epochs_to_csv(const std::vector<EpochRecord>& epochs);

/// Matrix as CSV; optional header labels for the columns.
std::string matrix_to_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header = {});

}  // namespace adareg
