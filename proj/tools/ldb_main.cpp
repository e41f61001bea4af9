#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ldb/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ldb: training with layer-dropping backpropagation"};
    app.require_subcommand(1);

    std::string config_path;
    ldb::CliOverrides overrides;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--out", overrides.out_dir, "output directory");
        sub->add_option("--epochs", overrides.epochs, "number of training epochs");
        sub->add_option("--preset", overrides.preset, "network preset name");
        sub->add_option("--seed-data", overrides.seed_data, "dataset seed");
        sub->add_option("--seed-init", overrides.seed_init, "weight init seed");
        sub->add_option("--seed-select", overrides.seed_select, "layer selection seed");
    };

    auto* train = app.add_subcommand("train", "train with layer-dropping backpropagation");
    bool baseline = false;
    add_common(train);
    train->add_flag("--baseline", baseline, "also train a standard-SGD comparison arm");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string gc_preset = "all";
    std::uint64_t gc_seed = 1;
    bool gc_corrupt = false;
    gradcheck->add_option("--preset", gc_preset, "mlp-8, cnn-small, resnet-toy or all");
    gradcheck->add_option("--seed", gc_seed, "workload seed");
    gradcheck->add_flag("--corrupt", gc_corrupt, "negative control: corrupt a dense gradient")
        ->group(""); // test hook, hidden from help

    auto* sweep = app.add_subcommand("sweep", "train one arm per axis value plus a baseline");
    std::string axis;
    std::vector<double> values;
    sweep->add_option("--axis", axis, "p or s")->required();
    sweep->add_option("--values", values, "comma-separated axis values")
        ->required()
        ->delimiter(',');
    add_common(sweep);

    auto* bench = app.add_subcommand("bench", "measure per-phase wall-clock shares");
    int bench_steps = 35;
    bench->add_option("--steps", bench_steps, "timed steps (5 warmup steps are added)");
    add_common(bench);

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) return ldb::cmd_train(config_path, overrides, baseline);
    if (gradcheck->parsed()) return ldb::cmd_gradcheck(gc_preset, gc_seed, gc_corrupt);
    if (sweep->parsed()) return ldb::cmd_sweep(axis, values, config_path, overrides);
    if (bench->parsed()) return ldb::cmd_bench(config_path, overrides, bench_steps);
    return ldb::kExitConfig;
}
