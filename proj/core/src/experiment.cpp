#include "adareg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "adareg/diagnostics.hpp"
#include "adareg/errors.hpp"
#include "adareg/metrics.hpp"
#include "adareg/optimizer.hpp"
#include "adareg/prior.hpp"
#include "adareg/rng.hpp"

namespace adareg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kCellSchema = "adareg.cell/1";

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                fail(ErrorCode::ParseError, path.string() + ": cannot parse '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) fail(ErrorCode::RaggedRows, path.string());
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return m;
}

fs::path find_mnist_dir(const DatasetConfig& d)
{
    fs::path base;
    if (!d.path.empty()) {
        base = resolve_data_path(d.path);
    } else if (const char* root = std::getenv("ADAREG_DATA_DIR"); root != nullptr && *root != '\0') {
        base = root;
    } else {
        fail(ErrorCode::ConfigError, "mnist dataset needs dataset.path or ADAREG_DATA_DIR");
    }
    for (const fs::path& candidate : {base, base / "mnist"}) {
        if (fs::exists(candidate / "train-images-idx3-ubyte")) return candidate;
    }
    fail(ErrorCode::IoError, "no train-images-idx3-ubyte under " + base.string());
}

struct Cell {
    Method method;
    Eigen::Index size;
    std::uint64_t seed;

    std::string name() const
    {
        return std::string(to_string(method)) + "_n" + std::to_string(size) + "_s" + std::to_string(seed);
    }
};

std::size_t resolve_layer(int k, std::size_t num_layers)
{
    const auto n = static_cast<int>(num_layers);
    const int r = k < 0 ? n + k : k;
    if (r < 0 || r >= n) fail(ErrorCode::InvalidArgument, "layer index " + std::to_string(k) + " out of range");
    return static_cast<std::size_t>(r);
}

json spectrum_json(std::size_t layer, const SpectrumReport& r)
{
    return json{{"layer", layer},
                {"stable_rank", r.stable_rank},
                {"spectral_norm", r.spectral_norm},
                {"frobenius_norm", r.frobenius_norm}};
}

struct CellOutcome {
    std::string runs_row;
};

CellOutcome run_cell(const ExperimentConfig& config, const PreparedData& data, const Cell& cell, const fs::path& dir)
{
    const Dataset train = subsample(data.train_pool, cell.size, derive_seed(cell.seed, 11, cell.size), config.stratified);

    std::vector<Eigen::Index> sizes{train.input_dim()};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(data.train_pool.output_dim());
    const LossKind loss =
        train.kind == TaskKind::Classification ? LossKind::SoftmaxCrossEntropy : LossKind::SquaredError;
    Network net = Network::mlp(sizes, config.activation, loss, derive_seed(cell.seed, 12));

    std::vector<std::size_t> reg_layers;
    for (int k : config.regularized_layers) reg_layers.push_back(resolve_layer(k, net.num_layers()));
    const SpectralBounds bounds = SpectralBounds::from_upper(config.bounds_v);

    double lambda = 0.0;
    AdaRegState state = AdaRegState::unregularized(net);
    if (uses_adareg(cell.method)) {
        const auto& w = net.layer(reg_layers.front()).weight;
        lambda = config.lambda.value_or(default_lambda(w.rows(), w.cols()));
        state = AdaRegState::initial(std::move(net), reg_layers, bounds, lambda);
    }

    StepOptions step;
    if (uses_weight_decay(cell.method)) step.weight_decay = config.weight_decay;
    if (uses_dropout(cell.method)) step.dropout_rate = config.dropout_rate;

    TrainResult result = run_training(std::move(state), config.schedule, train, &data.test, derive_seed(cell.seed, 13), step);
    const Network& trained = result.state.net;
    const MetricLog& log = result.log;

    fs::create_directories(dir);
    write_text(dir / "metrics.csv", epochs_to_csv(log.epochs));
    for (std::size_t k = 0; k < trained.num_layers(); ++k) {
        write_text(dir / ("weights_layer" + std::to_string(k) + ".csv"), matrix_to_csv(trained.layer(k).weight));
        write_text(dir / ("bias_layer" + std::to_string(k) + ".csv"), matrix_to_csv(trained.layer(k).bias.transpose()));
    }
    for (const auto& block : result.state.blocks) {
        const std::string k = std::to_string(block.layer);
        write_text(dir / ("omega_r_layer" + k + ".csv"), matrix_to_csv(block.precisions.row().matrix()));
        write_text(dir / ("omega_c_layer" + k + ".csv"), matrix_to_csv(block.precisions.col().matrix()));
    }

    const Evaluation tr = evaluate(trained, train);
    const Evaluation te = evaluate(trained, data.test);
    double objective = tr.loss;
    for (const auto& block : result.state.blocks) {
        objective += regularizer_value(trained.layer(block.layer).weight, block.precisions, result.state.lambda);
    }

    json summary;
    summary["schema"] = kCellSchema;
    summary["experiment"] = config.name;
    summary["method"] = std::string(to_string(cell.method));
    summary["training_size"] = cell.size;
    summary["seed"] = cell.seed;
    summary["task"] = train.kind == TaskKind::Classification ? "classification" : "regression";
    summary["num_outputs"] = trained.output_dim();
    summary["num_layers"] = trained.num_layers();
    summary["epochs"] = log.epochs.size();
    summary["regularized_layers"] = json::array();
    for (const auto& block : result.state.blocks) summary["regularized_layers"].push_back(block.layer);
    if (uses_adareg(cell.method)) {
        summary["lambda"] = lambda;
        summary["bounds"] = json{{"u", bounds.lower()}, {"v", bounds.upper()}};
    } else {
        summary["lambda"] = nullptr;
        summary["bounds"] = nullptr;
    }
    summary["final"] = json{{"train_loss", tr.loss},
                            {"test_loss", te.loss},
                            {"train_metric", tr.metric},
                            {"test_metric", te.metric},
                            {"objective", objective}};
    if (train.kind == TaskKind::Regression) {
        summary["test_explained_variance"] = std::vector<double>(te.per_task.data(), te.per_task.data() + te.per_task.size());
    }
    summary["spectra"] = json::array();
    for (std::size_t k = 0; k < log.final_spectra.size(); ++k) summary["spectra"].push_back(spectrum_json(k, log.final_spectra[k]));
    try {
        summary["generalization_proxy"] = generalization_proxy(trained, train.size());
    } catch (const Error&) {
        summary["generalization_proxy"] = nullptr;
    }
    write_text(dir / "summary.json", summary.dump(2) + "\n");

    const SpectrumReport& last = log.final_spectra.back();
    std::string row = std::string(to_string(cell.method)) + "," + std::to_string(cell.size) + "," +
                      std::to_string(cell.seed) + "," + format_double(tr.loss) + "," + format_double(te.loss) + "," +
                      format_double(tr.metric) + "," + format_double(te.metric) + "," +
                      format_double(last.stable_rank) + "," + format_double(last.spectral_norm);
    for (Eigen::Index j = 0; j < te.per_task.size(); ++j) row += "," + format_double(te.per_task[j]);
    return {row + "\n"};
}

struct Stats {
    double mean = 0.0;
    double std = 0.0;
};

Stats stats_of(const std::vector<double>& xs)
{
    Stats s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return s;
}

std::vector<fs::path> cell_dirs(const fs::path& dir)
{
    std::vector<fs::path> out;
    if (fs::exists(dir / "summary.json")) return {dir};
    const fs::path cells = dir / "cells";
    if (fs::is_directory(cells)) {
        for (const auto& entry : fs::directory_iterator(cells)) {
            if (entry.is_directory() && fs::exists(entry.path() / "summary.json")) out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config)
{
    const DatasetConfig& d = config.dataset;
    PreparedData out;
    switch (d.kind) {
    case DatasetKind::Mnist: {
        const fs::path dir = find_mnist_dir(d);
        out.train_pool = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
        out.test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
        const int classes = std::max(out.train_pool.num_classes, out.test.num_classes);
        out.train_pool.num_classes = classes;
        out.test.num_classes = classes;
        break;
    }
    case DatasetKind::Csv:
        out.train_pool = load_csv_regression(resolve_data_path(d.train_path), d.num_targets);
        out.test = load_csv_regression(resolve_data_path(d.test_path), d.num_targets);
        break;
    case DatasetKind::Synthetic: {
        auto [train, test] = synth_multitask(d.synthetic);
        out.train_pool = std::move(train);
        out.test = std::move(test);
        break;
    }
    }
    if (out.train_pool.kind == TaskKind::Regression && d.standardize) {
        const Standardizer s = Standardizer::fit(out.train_pool.inputs);
        s.apply(out.train_pool);
        s.apply(out.test);
    }
    if (d.test_size && *d.test_size < out.test.size()) {
        out.test = subsample(out.test, *d.test_size, 0, config.stratified);
    }
    out.train_pool.validate();
    out.test.validate();
    if (out.train_pool.input_dim() != out.test.input_dim() || out.train_pool.output_dim() != out.test.output_dim()) {
        fail(ErrorCode::DimensionMismatch, "train and test sets have different shapes");
    }
    return out;
}

RunReport run_experiment(const ExperimentConfig& config_in, const RunOptions& options)
{
    ExperimentConfig config = config_in;
    if (options.seed_override) config.seeds = {*options.seed_override};
    if (options.output_dir) config.output_dir = options.output_dir->string();
    config.validate();

    const PreparedData data = prepare_data(config);
    std::vector<Eigen::Index> sizes = config.training_sizes;
    if (sizes.empty()) sizes.push_back(data.train_pool.size());
    for (auto n : sizes) {
        if (n > data.train_pool.size()) {
            fail(ErrorCode::SizeTooLarge, "training size " + std::to_string(n) + " exceeds the pool of " +
                                              std::to_string(data.train_pool.size()));
        }
    }

    std::vector<Cell> cells;
    for (auto n : sizes) {
        for (auto seed : config.seeds) {
            for (Method m : config.methods) cells.push_back({m, n, seed});
        }
    }

    const fs::path out_dir = config.output_dir;
    fs::create_directories(out_dir / "cells");

    std::vector<CellOutcome> outcomes(cells.size());
    std::vector<std::exception_ptr> errors(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                const auto started = std::chrono::steady_clock::now();
                outcomes[i] = run_cell(config, data, cells[i], out_dir / "cells" / cells[i].name());
                if (options.progress != nullptr) {
                    const double secs =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
                    std::lock_guard lock(progress_mutex);
                    *options.progress << "[" << (i + 1) << "/" << cells.size() << "] " << cells[i].name() << " ("
                                       << secs << " s)\n";
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(cells.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::string runs = "method,training_size,seed,train_loss,test_loss,train_metric,test_metric,stable_rank,spectral_norm";
    if (data.test.kind == TaskKind::Regression) {
        for (Eigen::Index j = 0; j < data.test.output_dim(); ++j) runs += ",ev_task_" + std::to_string(j + 1);
    }
    runs += "\n";
    for (const auto& o : outcomes) runs += o.runs_row;
    write_text(out_dir / "runs.csv", runs);

    RunReport report;
    report.output_dir = out_dir;
    for (const auto& c : cells) report.cells.push_back(c.name());
    return report;
}

fs::path summarize(const fs::path& run_dir)
{
    const auto dirs = cell_dirs(run_dir);
    if (dirs.empty()) fail(ErrorCode::EmptyDirectory, "no cell summaries under " + run_dir.string());

    struct Group {
        std::vector<double> metric, loss, srank, snorm;
        std::vector<std::vector<double>> per_task;
    };
    std::map<std::tuple<int, long long, std::string>, Group> groups;

    std::string task;
    long long outputs = -1;
    for (const auto& dir : dirs) {
        json s;
        try {
            s = json::parse(read_text(dir / "summary.json"));
        } catch (const json::exception& e) {
            fail(ErrorCode::SchemaMismatch, (dir / "summary.json").string() + ": " + e.what());
        }
        try {
            if (s.at("schema").get<std::string>() != kCellSchema) {
                fail(ErrorCode::SchemaMismatch, dir.string() + ": unexpected schema " + s.at("schema").dump());
            }
            const auto this_task = s.at("task").get<std::string>();
            const auto this_outputs = s.at("num_outputs").get<long long>();
            if (task.empty()) {
                task = this_task;
                outputs = this_outputs;
            } else if (task != this_task || outputs != this_outputs) {
                fail(ErrorCode::SchemaMismatch, dir.string() + ": mixes " + this_task + "/" +
                                                    std::to_string(this_outputs) + " with " + task + "/" +
                                                    std::to_string(outputs));
            }
            const auto method_name = s.at("method").get<std::string>();
            const auto method = parse_method(method_name);
            const int order = method ? static_cast<int>(*method) : 1000;
            auto& g = groups[{order, s.at("training_size").get<long long>(), method_name}];
            g.metric.push_back(s.at("final").at("test_metric").get<double>());
            g.loss.push_back(s.at("final").at("test_loss").get<double>());
            const json& last = s.at("spectra").back();
            g.srank.push_back(last.at("stable_rank").get<double>());
            g.snorm.push_back(last.at("spectral_norm").get<double>());
            if (task == "regression") {
                const auto ev = s.at("test_explained_variance").get<std::vector<double>>();
                if (static_cast<long long>(ev.size()) != outputs) fail(ErrorCode::SchemaMismatch, dir.string());
                g.per_task.push_back(ev);
            }
        } catch (const json::exception& e) {
            fail(ErrorCode::SchemaMismatch, dir.string() + ": " + e.what());
        }
    }

    std::string out =
        "method,training_size,runs,test_metric_mean,test_metric_std,test_loss_mean,test_loss_std,"
        "stable_rank_mean,stable_rank_std,spectral_norm_mean,spectral_norm_std";
    if (task == "regression") {
        for (long long j = 1; j <= outputs; ++j) {
            out += ",ev_task_" + std::to_string(j) + "_mean,ev_task_" + std::to_string(j) + "_std";
        }
    }
    out += "\n";
    for (const auto& [key, g] : groups) {
        const auto& [order, size, name] = key;
        out += name + "," + std::to_string(size) + "," + std::to_string(g.metric.size());
        for (const auto* xs : {&g.metric, &g.loss, &g.srank, &g.snorm}) {
            const Stats st = stats_of(*xs);
            out += "," + format_double(st.mean) + "," + format_double(st.std);
        }
        for (long long j = 0; task == "regression" && j < outputs; ++j) {
            std::vector<double> col;
            for (const auto& r : g.per_task) col.push_back(r[static_cast<std::size_t>(j)]);
            const Stats st = stats_of(col);
            out += "," + format_double(st.mean) + "," + format_double(st.std);
        }
        out += "\n";
    }
    const fs::path target = run_dir / "summary.csv";
    write_text(target, out);
    return target;
}

std::vector<fs::path> export_correlation(const fs::path& dir, int layer)
{
    const auto dirs = cell_dirs(dir);
    if (dirs.empty()) fail(ErrorCode::EmptyDirectory, "no runs under " + dir.string());
    std::vector<fs::path> written;
    for (const auto& cell : dirs) {
        const json s = json::parse(read_text(cell / "summary.json"));
        const auto num_layers = s.at("num_layers").get<std::size_t>();
        const std::size_t k = resolve_layer(layer, num_layers);
        const fs::path weights = cell / ("weights_layer" + std::to_string(k) + ".csv");
        if (!fs::exists(weights)) fail(ErrorCode::MissingWeights, weights.string() + " not found");

        const Eigen::MatrixXd corr = correlation_matrix(read_matrix_csv(weights));
        std::vector<std::string> labels;
        const bool output_layer = k + 1 == num_layers;
        const bool regression = s.at("task").get<std::string>() == "regression";
        for (Eigen::Index i = 0; i < corr.rows(); ++i) {
            if (output_layer && regression) {
                labels.push_back("task_" + std::to_string(i + 1));
            } else if (output_layer) {
                labels.push_back("class_" + std::to_string(i));
            } else {
                labels.push_back("unit_" + std::to_string(i));
            }
        }
        std::string text = "label";
        for (const auto& l : labels) text += "," + l;
        text += "\n";
        for (Eigen::Index i = 0; i < corr.rows(); ++i) {
            text += labels[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < corr.cols(); ++j) text += "," + format_double(corr(i, j));
            text += "\n";
        }
        const fs::path target = cell / ("correlation_layer" + std::to_string(k) + ".csv");
        write_text(target, text);
        written.push_back(target);
    }
    return written;
}

}  // namespace adareg
