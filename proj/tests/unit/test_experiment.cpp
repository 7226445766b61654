#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "adareg/config.hpp"
#include "adareg/experiment.hpp"
#include "adareg/rng.hpp"
#include "testing.hpp"

using namespace adareg;
namespace fs = std::filesystem;

namespace {

// Ten "digit" prototypes plus pixel noise, quantized to bytes.
void write_digit_fixture(const fs::path& dir, int n_train, int n_test)
{
    fs::create_directories(dir);
    Rng proto_rng(1);
    Eigen::MatrixXd protos(10, 16);
    for (Eigen::Index i = 0; i < protos.size(); ++i) protos(i) = proto_rng.uniform();
    auto make = [&](int n, std::uint64_t seed) {
        Rng rng(seed);
        Dataset ds;
        ds.kind = TaskKind::Classification;
        ds.num_classes = 10;
        ds.inputs.resize(n, 16);
        for (int i = 0; i < n; ++i) {
            const int y = i % 10;
            ds.labels.push_back(y);
            for (Eigen::Index j = 0; j < 16; ++j) {
                const double v = std::clamp(protos(y, j) + 0.3 * rng.normal(), 0.0, 1.0);
                ds.inputs(i, j) = std::round(v * 255.0) / 255.0;
            }
        }
        return ds;
    };
    write_idx(make(n_train, 2), 4, 4, dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
    write_idx(make(n_test, 3), 4, 4, dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
}

std::string mnist_config(const fs::path& data, const fs::path& out, const std::string& extra)
{
    return R"({
      "name": "fixture",
      "dataset": {"kind": "mnist", "path": ")" + data.string() + R"("},
      "architecture": {"hidden": [12]},
      "schedule": {"outer_loops": 2, "epochs_per_block": 2, "batch_size": 16, "learning_rate": 0.1},
      "output_dir": ")" + out.string() + "\"" + extra + "}";
}

std::string synthetic_config(const fs::path& out, const std::string& extra)
{
    return R"({
      "name": "multitask",
      "dataset": {"kind": "synthetic", "n_train": 120, "n_test": 60, "seed": 4},
      "architecture": {"hidden": [10]},
      "schedule": {"outer_loops": 2, "epochs_per_block": 2, "batch_size": 32, "learning_rate": 0.05},
      "output_dir": ")" + out.string() + "\"" + extra + "}";
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p)
{
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

std::map<std::string, std::string> all_files(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testing::slurp(e.path());
    }
    return out;
}

class ScopedEnv {
public:
    ScopedEnv(const char* name, const std::string& value) : name_(name)
    {
        if (const char* old = std::getenv(name)) old_ = old;
        ::setenv(name, value.c_str(), 1);
    }
    ~ScopedEnv()
    {
        if (old_) {
            ::setenv(name_, old_->c_str(), 1);
        } else {
            ::unsetenv(name_);
        }
    }

private:
    const char* name_;
    std::optional<std::string> old_;
};

}  // namespace

TEST_SUITE("cli")
{
    TEST_CASE("config defaults and parsing")
    {
        const auto c = parse_config(R"({"dataset": {"kind": "synthetic"}})");
        CHECK(c.name == "experiment");
        CHECK(c.hidden == std::vector<Eigen::Index>{50});
        CHECK(c.methods == std::vector<Method>{Method::None, Method::AdaReg});
        CHECK(c.schedule.outer_loops == 2);
        CHECK(c.schedule.epochs_per_block == 50);
        CHECK(c.schedule.batch_size == 256);
        CHECK(c.bounds_v == 10.0);
        CHECK_FALSE(c.lambda.has_value());
        CHECK(c.regularized_layers == std::vector<int>{-1});
        CHECK(c.dataset.synthetic.input_dim == 21);
        CHECK(c.dataset.synthetic.num_tasks == 7);

        const auto d = parse_config(R"({
          "dataset": {"kind": "csv", "train": "a.csv", "test": "b.csv", "num_targets": 3},
          "method": "adareg+dropout", "lambda": 0.01, "bounds_v": 4,
          "regularized_layer_index": [0, -1], "training_sizes": [10, 20], "seeds": [3, 4, 5],
          "architecture": {"hidden": [8, 4], "activation": "identity"}})");
        CHECK(d.methods == std::vector<Method>{Method::AdaRegDropout});
        CHECK(*d.lambda == 0.01);
        CHECK(d.regularized_layers == std::vector<int>{0, -1});
        CHECK(d.activation == Activation::Identity);
        CHECK(d.dataset.num_targets == 3);
        CHECK(d.seeds.size() == 3);
    }

    TEST_CASE("config errors")
    {
        const auto bad = [](const char* text) { CHECK_ERROR_CODE(parse_config(text), ErrorCode::ConfigError); };
        bad("{");
        bad("[]");
        bad(R"({})");
        bad(R"({"dataset": {"kind": "synthetic"}, "typo": 1})");
        bad(R"({"dataset": {"kind": "synthetic", "colour": 1}})");
        bad(R"({"dataset": {"kind": "parquet"}})");
        bad(R"({"dataset": {"kind": "synthetic"}, "method": "l1"})");
        bad(R"({"dataset": {"kind": "synthetic"}, "method": "none", "methods": ["none"]})");
        bad(R"({"dataset": {"kind": "synthetic"}, "bounds_v": 0.5})");
        bad(R"({"dataset": {"kind": "synthetic"}, "dropout_rate": 1.0})");
        bad(R"({"dataset": {"kind": "synthetic"}, "regularized_layer_index": 2})");
        bad(R"({"dataset": {"kind": "synthetic"}, "schedule": {"batch_size": 0}})");
        bad(R"({"dataset": {"kind": "synthetic"}, "seeds": []})");
        bad(R"({"dataset": {"kind": "synthetic"}, "seeds": "one"})");
        bad(R"({"dataset": {"kind": "synthetic", "n_train": 10}, "training_sizes": [20]})");
        bad(R"({"dataset": {"kind": "csv", "train": "a.csv"}})");
        CHECK_ERROR_CODE(load_config("/nonexistent/config.json"), ErrorCode::IoError);
    }

    TEST_CASE("method names round trip")
    {
        for (Method m : {Method::None, Method::WeightDecay, Method::Dropout, Method::AdaReg, Method::AdaRegWeightDecay,
                         Method::AdaRegDropout}) {
            CHECK(parse_method(to_string(m)) == m);
        }
        CHECK_FALSE(parse_method("sgd").has_value());
        CHECK(uses_adareg(Method::AdaRegWeightDecay));
        CHECK(uses_weight_decay(Method::AdaRegWeightDecay));
        CHECK_FALSE(uses_dropout(Method::AdaReg));
    }

    TEST_CASE("data paths resolve against ADAREG_DATA_DIR")
    {
        const ScopedEnv env("ADAREG_DATA_DIR", "/data/root");
        CHECK(resolve_data_path("mnist") == fs::path("/data/root/mnist"));
        CHECK(resolve_data_path("/abs/path") == fs::path("/abs/path"));
    }

    TEST_CASE("smoke run: one cell, one epoch")
    {
        testing::TempDir tmp;
        write_digit_fixture(tmp / "digits", 200, 50);
        const auto config = parse_config(R"({
          "dataset": {"kind": "mnist", "path": ")" + (tmp / "digits").string() + R"("},
          "architecture": {"hidden": [8]}, "method": "none", "training_sizes": [60],
          "schedule": {"outer_loops": 1, "epochs_per_block": 1, "batch_size": 16},
          "output_dir": ")" + (tmp / "out").string() + "\"}");
        const RunReport report = run_experiment(config);
        REQUIRE(report.cells == std::vector<std::string>{"none_n60_s1"});
        const auto runs = read_csv(tmp / "out" / "runs.csv");
        CHECK(runs.size() == 2);
        const auto log = read_csv(tmp / "out" / "cells" / "none_n60_s1" / "metrics.csv");
        CHECK(log.size() == 2);
        CHECK(log[0][0] == "epoch");
        CHECK(fs::exists(tmp / "out" / "cells" / "none_n60_s1" / "weights_layer1.csv"));
        CHECK_FALSE(fs::exists(tmp / "out" / "cells" / "none_n60_s1" / "omega_r_layer1.csv"));
    }

    TEST_CASE("the data root comes from ADAREG_DATA_DIR when no path is given")
    {
        testing::TempDir tmp;
        write_digit_fixture(tmp / "mnist", 40, 20);
        const ScopedEnv env("ADAREG_DATA_DIR", tmp.path().string());
        const auto config = parse_config(R"({"dataset": {"kind": "mnist", "test_size": 10}, "method": "none",
          "architecture": {"hidden": [4]}, "schedule": {"outer_loops": 1, "epochs_per_block": 1}})");
        const PreparedData data = prepare_data(config);
        CHECK(data.train_pool.size() == 40);
        CHECK(data.test.size() == 10);
    }

    TEST_CASE("runs are byte-for-byte reproducible, with and without parallel cells")
    {
        testing::TempDir tmp;
        write_digit_fixture(tmp / "digits", 300, 80);
        const auto extra = R"(, "methods": ["none", "weight_decay", "dropout", "adareg", "adareg+weight_decay", "adareg+dropout"],
                               "training_sizes": [50, 120], "seeds": [1, 2])";
        const auto a = parse_config(mnist_config(tmp / "digits", tmp / "a", extra));
        const auto b = parse_config(mnist_config(tmp / "digits", tmp / "b", extra));
        run_experiment(a);
        RunOptions parallel;
        parallel.jobs = 3;
        run_experiment(b, parallel);
        const auto fa = all_files(tmp / "a");
        const auto fb = all_files(tmp / "b");
        CHECK(fa.size() == fb.size());
        CHECK(fa.size() > 24 * 4);
        for (const auto& [name, bytes] : fa) {
            REQUIRE(fb.count(name) == 1);
            CHECK_MESSAGE(bytes == fb.at(name), name);
        }
    }

    TEST_CASE("seed override and output override")
    {
        testing::TempDir tmp;
        const auto config = parse_config(synthetic_config(tmp / "ignored", R"(, "seeds": [1, 2, 3], "method": "adareg")"));
        RunOptions opt;
        opt.seed_override = 9;
        opt.output_dir = tmp / "elsewhere";
        const RunReport r = run_experiment(config, opt);
        CHECK(r.cells == std::vector<std::string>{"adareg_n120_s9"});
        CHECK(fs::exists(tmp / "elsewhere" / "runs.csv"));
        CHECK_FALSE(fs::exists(tmp / "ignored"));
    }

    TEST_CASE("summaries aggregate five seeds exactly")
    {
        testing::TempDir tmp;
        const auto config = parse_config(synthetic_config(
            tmp / "run", R"(, "methods": ["none", "adareg"], "training_sizes": [60, 120], "seeds": [1, 2, 3, 4, 5])"));
        run_experiment(config);
        const fs::path table = summarize(tmp / "run");
        const auto rows = read_csv(table);
        REQUIRE(rows.size() == 5);
        const auto& header = rows[0];
        CHECK(header.size() == 11 + 14);
        CHECK(rows[1][0] == "none");
        CHECK(rows[1][1] == "60");
        CHECK(rows[4][0] == "adareg");
        CHECK(rows[4][1] == "120");

        for (std::size_t r = 1; r < rows.size(); ++r) {
            CHECK(rows[r][2] == "5");
            std::vector<double> metric;
            std::vector<std::vector<double>> ev;
            for (int seed = 1; seed <= 5; ++seed) {
                const auto s = nlohmann::json::parse(testing::slurp(tmp / "run" / "cells" /
                    (rows[r][0] + "_n" + rows[r][1] + "_s" + std::to_string(seed)) / "summary.json"));
                metric.push_back(s["final"]["test_metric"].get<double>());
                ev.push_back(s["test_explained_variance"].get<std::vector<double>>());
            }
            double mean = 0.0;
            for (double x : metric) mean += x / 5.0;
            double ss = 0.0;
            for (double x : metric) ss += (x - mean) * (x - mean);
            const double sd = std::sqrt(ss / 4.0);
            CHECK(std::abs(std::stod(rows[r][3]) - mean) <= 1e-12);
            CHECK(std::abs(std::stod(rows[r][4]) - sd) <= 1e-12);
            for (std::size_t t = 0; t < 7; ++t) {
                double m = 0.0;
                for (const auto& e : ev) m += e[t] / 5.0;
                CHECK(std::abs(std::stod(rows[r][11 + 2 * t]) - m) <= 1e-12);
            }
        }
    }

    TEST_CASE("summarize: two logs of one cell, schema checks, empty directories")
    {
        testing::TempDir tmp;
        write_digit_fixture(tmp / "digits", 200, 40);
        run_experiment(parse_config(mnist_config(tmp / "digits", tmp / "run", R"(, "method": "adareg", "training_sizes": [100], "seeds": [1, 2])")));
        const auto rows = read_csv(summarize(tmp / "run"));
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].size() == 11);
        CHECK(rows[1][2] == "2");

        CHECK_ERROR_CODE(summarize(tmp / "digits"), ErrorCode::EmptyDirectory);
        fs::create_directories(tmp / "blank");
        CHECK_ERROR_CODE(summarize(tmp / "blank"), ErrorCode::EmptyDirectory);

        const fs::path s2 = tmp / "run" / "cells" / "adareg_n100_s2" / "summary.json";
        auto j = nlohmann::json::parse(testing::slurp(s2));
        j["task"] = "regression";
        testing::spit(s2, j.dump());
        CHECK_ERROR_CODE(summarize(tmp / "run"), ErrorCode::SchemaMismatch);
        j["task"] = "classification";
        j["schema"] = "something/else";
        testing::spit(s2, j.dump());
        CHECK_ERROR_CODE(summarize(tmp / "run"), ErrorCode::SchemaMismatch);
        testing::spit(s2, "{\"schema\": 3");
        CHECK_ERROR_CODE(summarize(tmp / "run"), ErrorCode::SchemaMismatch);
    }

    TEST_CASE("a sweep yields one summary row per method and size")
    {
        testing::TempDir tmp;
        write_digit_fixture(tmp / "digits", 300, 60);
        run_experiment(parse_config(mnist_config(tmp / "digits", tmp / "run",
            R"(, "methods": ["none", "weight_decay", "adareg"], "training_sizes": [60, 240])")));
        const auto rows = read_csv(summarize(tmp / "run"));
        REQUIRE(rows.size() == 7);
        CHECK(rows[1][0] == "none");
        CHECK(rows[3][0] == "weight_decay");
        CHECK(rows[5][0] == "adareg");
        CHECK(rows[6][1] == "240");
    }

    TEST_CASE("export_correlation")
    {
        testing::TempDir tmp;
        write_digit_fixture(tmp / "digits", 200, 40);
        run_experiment(parse_config(mnist_config(tmp / "digits", tmp / "mnist", R"(, "method": "adareg")")));
        const auto files = export_correlation(tmp / "mnist", -1);
        REQUIRE(files.size() == 1);
        const auto rows = read_csv(files[0]);
        REQUIRE(rows.size() == 11);
        CHECK(rows[0][0] == "label");
        CHECK(rows[0][1] == "class_0");
        CHECK(rows[10][0] == "class_9");
        for (std::size_t i = 1; i <= 10; ++i) {
            REQUIRE(rows[i].size() == 11);
            CHECK(std::stod(rows[i][i]) == doctest::Approx(1.0).epsilon(1e-12));
        }
        const auto first = testing::slurp(files[0]);
        CHECK(testing::slurp(export_correlation(tmp / "mnist" / "cells" / "adareg_n200_s1", 1).at(0)) == first);

        const auto hidden = export_correlation(tmp / "mnist", 0);
        CHECK(read_csv(hidden.at(0))[0][1] == "unit_0");
        CHECK(read_csv(hidden.at(0)).size() == 13);

        run_experiment(parse_config(synthetic_config(tmp / "mt", R"(, "method": "none")")));
        const auto mt = read_csv(export_correlation(tmp / "mt", -1).at(0));
        CHECK(mt.size() == 8);
        CHECK(mt[0][7] == "task_7");

        run_experiment(parse_config(mnist_config(tmp / "digits", tmp / "mnist2", R"(, "method": "adareg")")));
        CHECK(testing::slurp(export_correlation(tmp / "mnist2", -1).at(0)) == first);

        fs::remove(tmp / "mnist" / "cells" / "adareg_n200_s1" / "weights_layer1.csv");
        CHECK_ERROR_CODE(export_correlation(tmp / "mnist", -1), ErrorCode::MissingWeights);
        CHECK_ERROR_CODE(export_correlation(tmp / "mnist", 5), ErrorCode::InvalidArgument);
        CHECK_ERROR_CODE(export_correlation(tmp / "digits", -1), ErrorCode::EmptyDirectory);
    }

    TEST_CASE("run errors surface as library errors")
    {
        testing::TempDir tmp;
        write_digit_fixture(tmp / "digits", 50, 20);
        CHECK_ERROR_CODE(run_experiment(parse_config(mnist_config(tmp / "digits", tmp / "o", R"(, "training_sizes": [51])"))),
                         ErrorCode::SizeTooLarge);
        CHECK_ERROR_CODE(run_experiment(parse_config(mnist_config(tmp / "nowhere", tmp / "o", ""))), ErrorCode::IoError);
        for (const char* method : {"none", "adareg"}) {
            CHECK_ERROR_CODE(run_experiment(parse_config(synthetic_config(tmp / "o", std::string(R"(, "method": ")") + method +
                R"(", "schedule": {"outer_loops": 2, "epochs_per_block": 20, "batch_size": 8, "learning_rate": 10})"))),
                             ErrorCode::Diverged);
        }
    }

    TEST_CASE("csv datasets are standardized on the training split")
    {
        testing::TempDir tmp;
        std::string train = "a,b,y1,y2\n";
        std::string test = train;
        Rng rng(3);
        for (int i = 0; i < 40; ++i) {
            const double a = 100.0 + 10.0 * rng.normal();
            const double b = rng.normal();
            train += std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(0.1 * a + b) + "," +
                     std::to_string(b) + "\n";
            if (i < 10) test += std::to_string(a) + "," + std::to_string(b) + ",1,2\n";
        }
        testing::spit(tmp / "train.csv", train);
        testing::spit(tmp / "test.csv", test);
        const ScopedEnv env("ADAREG_DATA_DIR", tmp.path().string());
        const auto config = parse_config(R"({"dataset": {"kind": "csv", "train": "train.csv", "test": "test.csv", "num_targets": 2}})");
        const PreparedData d = prepare_data(config);
        CHECK(d.train_pool.input_dim() == 2);
        CHECK(d.train_pool.output_dim() == 2);
        CHECK(std::abs(d.train_pool.inputs.col(0).mean()) < 1e-12);
        CHECK(d.test.size() == 10);
    }
}
