#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "adareg/config.hpp"
#include "adareg/errors.hpp"
#include "adareg/experiment.hpp"

namespace {

int run_command(const std::string& config_path, const std::optional<std::uint64_t>& seed_override, int jobs,
                const std::string& output)
{
    const adareg::ExperimentConfig config = adareg::load_config(config_path);
    adareg::RunOptions options;
    options.seed_override = seed_override;
    options.jobs = jobs;
    options.progress = &std::cerr;
    if (!output.empty()) options.output_dir = output;
    const adareg::RunReport report = adareg::run_experiment(config, options);
    std::cout << "wrote " << report.cells.size() << " cells to " << report.output_dir.string() << "\n";
    return 0;
}

int validate_command(const std::string& config_path)
{
    const adareg::ExperimentConfig config = adareg::load_config(config_path);
    const std::size_t sizes = config.training_sizes.empty() ? 1 : config.training_sizes.size();
    std::cout << config_path << ": ok (" << sizes * config.seeds.size() * config.methods.size() << " cells)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Empirical-Bayes adaptive regularization for dense networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    int jobs = 1;
    std::string output;
    auto* run = app.add_subcommand("run", "Train every cell of an experiment config");
    run->add_option("config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--seed-override", seed_override, "Replace the config's seeds with this one");
    run->add_option("--jobs,-j", jobs, "Cells trained in parallel")->check(CLI::PositiveNumber);
    run->add_option("--output,-o", output, "Output directory (overrides output_dir)");

    std::string run_dir;
    auto* summarize = app.add_subcommand("summarize", "Aggregate cell summaries into summary.csv");
    summarize->add_option("dir", run_dir, "Run directory")->required();

    int layer = -1;
    auto* corr = app.add_subcommand("export-correlation", "Write weight-row correlation matrices");
    corr->add_option("dir", run_dir, "Run or cell directory")->required();
    corr->add_option("--layer", layer, "Layer index, negative counts from the end")->required();

    auto* validate = app.add_subcommand("validate", "Check a config without running it");
    validate->add_option("config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_command(config_path, seed_override, jobs, output);
        if (validate->parsed()) return validate_command(config_path);
        if (summarize->parsed()) {
            std::cout << adareg::summarize(run_dir).string() << "\n";
            return 0;
        }
        if (corr->parsed()) {
            for (const auto& path : adareg::export_correlation(run_dir, layer)) std::cout << path.string() << "\n";
            return 0;
        }
    } catch (const adareg::Error& e) {
        std::cerr << "adareg: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "adareg: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
