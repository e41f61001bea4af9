#include "ldb/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "ldb/bench.hpp"
#include "ldb/config.hpp"
#include "ldb/error.hpp"
#include "ldb/gradcheck.hpp"
#include "ldb/trainer.hpp"

namespace ldb {

namespace fs = std::filesystem;

namespace {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DivergedError*>(&e)) return kExitDiverged;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
        dynamic_cast<const DataError*>(&e)) {
        return kExitIo;
    }
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e)) {
        return kExitConfig;
    }
    return kExitInternal;
}

int report_error(const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
}

RunConfig load_effective_config(const std::string& config_path, const CliOverrides& overrides) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (overrides.epochs) cfg.epochs = *overrides.epochs;
    if (overrides.preset) cfg.preset = *overrides.preset;
    if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
    if (overrides.seed_data) cfg.seed_data = *overrides.seed_data;
    if (overrides.seed_init) cfg.seed_init = *overrides.seed_init;
    if (overrides.seed_select) cfg.seed_select = *overrides.seed_select;
    cfg.validate();
    return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string());
    }
    return dir;
}

TrainOptions make_train_options(const RunConfig& cfg, const fs::path& out_dir) {
    TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.schedule = schedule_from_string(cfg.schedule);
    opts.momentum = cfg.momentum;
    opts.prefetch = prefetch_threads_from_env() >= 2;
    opts.checkpoint_every = cfg.checkpoint_every;
    opts.checkpoint_dir = out_dir;
    opts.on_epoch_line = [&cfg](const EpochRecord& r) {
        std::printf("epoch %3d/%d  mode=%-8s lr=%-9.5f batch=%-4d loss=%.5f val_acc=%.4f\n",
                    r.epoch, cfg.epochs, mode_name(r.mode), r.lr, r.batch, r.train_loss,
                    r.val_accuracy);
    };
    return opts;
}

} // namespace

int cmd_train(const std::string& config_path, const CliOverrides& overrides, bool baseline) {
    try {
        const RunConfig cfg = load_effective_config(config_path, overrides);
        const fs::path out_dir = prepare_out_dir(cfg);
        cfg.save(out_dir / "config_effective.json");

        const Dataset ds = cfg.make_dataset();
        Network net = cfg.make_network(ds);
        const TrainOptions opts = make_train_options(cfg, out_dir);

        std::printf("ldb arm: preset=%s dataset=%s epochs=%d p=%g s=%d kappa=%g\n",
                    cfg.preset.c_str(), cfg.dataset.c_str(), cfg.epochs, cfg.p, cfg.s, cfg.kappa);
        const TrainReport report = train(net, ds, cfg.ldb(), opts);
        emit_train_csv(report, out_dir / "report.csv");

        if (baseline) {
            std::printf("baseline arm: standard SGD, lr=%g batch=%d\n", cfg.base_lr, cfg.base_batch);
            Network base_net = cfg.make_network(ds);
            TrainOptions base_opts = opts;
            base_opts.checkpoint_every = 0;
            const TrainReport base_report =
                train_baseline(base_net, ds, cfg.base_lr, cfg.base_batch, base_opts);
            emit_train_csv(base_report, out_dir / "baseline_report.csv");
            emit_loss_curve_csv(report, &base_report, out_dir / "loss_curve.csv");
            emit_train_summary_json(report, &base_report, out_dir / "summary.json");
            std::printf("final: ldb val_acc=%.4f baseline val_acc=%.4f speedup=%.4f\n",
                        report.final_val_accuracy, base_report.final_val_accuracy,
                        1.0 - report.total_wall_ms / base_report.total_wall_ms);
        } else {
            emit_loss_curve_csv(report, nullptr, out_dir / "loss_curve.csv");
            emit_train_summary_json(report, nullptr, out_dir / "summary.json");
            std::printf("final: val_acc=%.4f best=%.4f train_wall_ms=%.1f\n",
                        report.final_val_accuracy, report.best_val_accuracy, report.total_wall_ms);
        }
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

int cmd_gradcheck(const std::string& preset, std::uint64_t seed, bool corrupt) {
    try {
        GradcheckOptions opts;
        opts.corrupt_dense = corrupt;
        const std::vector<std::string> presets =
            preset == "all" ? std::vector<std::string>{"mlp-8", "cnn-small", "resnet-toy"}
                            : std::vector<std::string>{preset};
        bool ok = true;
        for (const auto& name : presets) {
            const GradcheckResult result = gradcheck_preset(name, seed, opts);
            std::printf("%-11s %-4s max_rel_err=%.3e entries=%d\n", name.c_str(),
                        result.pass ? "ok" : "FAIL", result.max_rel_err, result.entries_checked);
            if (!result.worst.empty()) std::printf("  worst: %s\n", result.worst.c_str());
            ok = ok && result.pass;
        }
        return ok ? kExitOk : kExitInternal;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

int cmd_sweep(const std::string& axis, const std::vector<double>& values,
              const std::string& config_path, const CliOverrides& overrides) {
    try {
        const RunConfig cfg = load_effective_config(config_path, overrides);
        const fs::path out_dir = prepare_out_dir(cfg);
        cfg.save(out_dir / "config_effective.json");

        SweepResult result;
        if (axis == "p") {
            result = sweep_drop_rate(values, cfg);
        } else if (axis == "s") {
            std::vector<int> ints;
            for (double v : values) {
                if (v != std::floor(v)) throw ConfigError("axis s takes integer values");
                ints.push_back(static_cast<int>(v));
            }
            result = sweep_sampling_rate(ints, cfg);
        } else {
            throw ConfigError("axis must be p or s, got \"" + axis + "\"");
        }

        emit_sweep_csv(result, out_dir / "sweep.csv");
        emit_sweep_json(result, out_dir / "sweep.json");
        std::printf("baseline: val_acc=%.4f wall_ms=%.1f\n", result.baseline_accuracy,
                    result.baseline_wall_ms);
        for (const auto& arm : result.arms) {
            std::printf("%s=%-6g val_acc=%.4f speedup=%+.4f%s%s\n", result.axis.c_str(), arm.value,
                        arm.val_accuracy, arm.speedup, arm.diverged ? " DIVERGED" : "",
                        arm.equivalence ? " (equivalence arm)" : "");
        }
        return result.any_diverged() ? kExitDiverged : kExitOk;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

int cmd_bench(const std::string& config_path, const CliOverrides& overrides, int steps) {
    try {
        const RunConfig cfg = load_effective_config(config_path, overrides);
        const fs::path out_dir = prepare_out_dir(cfg);

        const Dataset ds = cfg.make_dataset();
        Network net = cfg.make_network(ds);
        const PhaseShares shares = measure_phase_split(net, ds, steps, cfg.base_batch);
        std::printf("phase shares over %d steps (batch %d):\n", steps, cfg.base_batch);
        std::printf("  forward      %.4f\n", shares.forward);
        std::printf("  backward_dx  %.4f\n", shares.backward_dx);
        std::printf("  backward_dw  %.4f\n", shares.backward_dw);
        std::printf("  update       %.4f\n", shares.update);
        std::printf("  backward total %.4f\n", shares.backward());

        nlohmann::json j;
        j["schema_version"] = kReportSchemaVersion;
        j["steps"] = steps;
        j["batch"] = cfg.base_batch;
        j["forward"] = shares.forward;
        j["backward_dx"] = shares.backward_dx;
        j["backward_dw"] = shares.backward_dw;
        j["update"] = shares.update;
        std::ofstream out(out_dir / "bench.json", std::ios::trunc);
        if (!out || !(out << j.dump(2) << '\n')) {
            throw IoError("cannot write " + (out_dir / "bench.json").string());
        }
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

} // namespace ldb
