#include "adareg/metrics.hpp"

#include <charconv>
#include <cmath>

#include "adareg/errors.hpp"

namespace adareg {

Evaluation evaluate(const Network& net, const Dataset& ds)
{
    const Eigen::MatrixXd out = predict(net, ds.inputs);
    Evaluation e;
    e.loss = loss_from_output(net.loss(), out, ds);
    if (ds.kind == TaskKind::Classification) {
        e.metric = accuracy(out, ds.labels);
    } else {
        e.per_task = explained_variance(out, ds.targets);
        e.metric = e.per_task.mean();
    }
    return e;
}

std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc()) fail(ErrorCode::IoError, "failed to format a double");
    return std::string(buf, ptr);
}

std::string epochs_to_csv(const std::vector<EpochRecord>& epochs)
{
    std::string out = "epoch,outer_iter,train_loss,test_loss,train_metric,test_metric,objective\n";
    for (const auto& r : epochs) {
        out += std::to_string(r.epoch) + "," + std::to_string(r.outer_iter) + "," + format_double(r.train_loss) + "," +
               format_double(r.test_loss) + "," + format_double(r.train_metric) + "," +
               format_double(r.test_metric) + "," + format_double(r.objective) + "\n";
    }
    return out;
}

std::string matrix_to_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header)
{
    std::string out;
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
        out += "\n";
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out += (j ? "," : "") + format_double(m(i, j));
        out += "\n";
    }
    return out;
}

}  // namespace adareg
