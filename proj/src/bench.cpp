#include "ldb/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ldb/error.hpp"
#include "ldb/timer.hpp"

namespace ldb {

using nlohmann::json;

namespace {

constexpr int kWarmupSteps = 5;

/// One training step against a cycling batch supply; shared by the two
/// measurement entry points so they time identical work.
class StepRunner {
public:
    StepRunner(Network& net, const Dataset& ds, int batch, std::vector<int> selected)
        : net_(net), ds_(ds), batch_(batch), selected_(std::move(selected)),
          opt_(OptimizerState::create(net)) {
        if (selected_.empty()) selected_ = net.param_layer_ids();
        plan_.mode = Mode::Drop;
        plan_.lr = 0.01;
        plan_.batch = batch_;
        plan_.selected = selected_;
    }

    void step(PhaseTimer& timer) {
        if (!stream_ || cursor_ >= stream_->batch_count()) {
            ++epoch_;
            stream_.emplace(ds_, Split::Train, batch_, epoch_, /*prefetch=*/false);
            cursor_ = 0;
        }
        auto batch = stream_->next();
        ++cursor_;
        double loss = 0.0;
        Tensor loss_grad;
        {
            auto scope = timer.measure(Phase::Forward);
            Tensor logits = net_.forward(batch->features);
            std::tie(loss, loss_grad) = cross_entropy_loss(logits, batch->labels);
        }
        if (!std::isfinite(loss)) {
            throw DivergedError("measurement workload diverged", epoch_, static_cast<int>(cursor_));
        }
        {
            auto scope = timer.measure(Phase::BackwardDx);
            net_.backward_activations(loss_grad);
        }
        {
            auto scope = timer.measure(Phase::BackwardDw);
            net_.backward_weights(plan_.selected);
        }
        {
            auto scope = timer.measure(Phase::Update);
            apply_update(net_, plan_, opt_);
        }
    }

private:
    Network& net_;
    const Dataset& ds_;
    int batch_;
    std::vector<int> selected_;
    OptimizerState opt_;
    EpochPlan plan_;
    std::optional<BatchStream> stream_;
    std::size_t cursor_ = 0;
    int epoch_ = 0;
};

} // namespace

PhaseShares measure_phase_split(Network& net, const Dataset& ds, int steps, int batch,
                                const std::vector<int>& selected) {
    if (steps < 30) throw ConfigError("measure_phase_split needs steps >= 30");
    StepRunner runner(net, ds, batch, selected);
    PhaseTimer warmup;
    for (int i = 0; i < kWarmupSteps; ++i) runner.step(warmup);
    PhaseTimer timer;
    for (int i = 0; i < steps; ++i) runner.step(timer);
    const double total = static_cast<double>(timer.train_nanos());
    if (total <= 0.0) throw MeasurementError("zero accumulated phase time");
    PhaseShares shares;
    shares.forward = static_cast<double>(timer.nanos(Phase::Forward)) / total;
    shares.backward_dx = static_cast<double>(timer.nanos(Phase::BackwardDx)) / total;
    shares.backward_dw = static_cast<double>(timer.nanos(Phase::BackwardDw)) / total;
    shares.update = static_cast<double>(timer.nanos(Phase::Update)) / total;
    shares.total_ms = total / 1e6;
    return shares;
}

std::vector<double> measure_step_times(Network& net, const Dataset& ds, int steps, int batch,
                                       const std::vector<int>& selected) {
    if (steps < 1) throw ConfigError("measure_step_times needs steps >= 1");
    StepRunner runner(net, ds, batch, selected);
    PhaseTimer warmup;
    for (int i = 0; i < kWarmupSteps; ++i) runner.step(warmup);
    std::vector<double> step_ms;
    step_ms.reserve(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        PhaseTimer timer;
        const auto start = std::chrono::steady_clock::now();
        runner.step(timer);
        const auto end = std::chrono::steady_clock::now();
        if (end < start) throw MeasurementError("monotonic clock went backwards");
        step_ms.push_back(std::chrono::duration<double, std::milli>(end - start).count());
    }
    return step_ms;
}

std::pair<std::vector<double>, std::vector<double>> measure_dw_interleaved(
    Network& net_a, const std::vector<int>& selected_a, Network& net_b,
    const std::vector<int>& selected_b, const Dataset& ds, int steps, int batch) {
    if (steps < 1) throw ConfigError("measure_dw_interleaved needs steps >= 1");
    StepRunner runner_a(net_a, ds, batch, selected_a);
    StepRunner runner_b(net_b, ds, batch, selected_b);
    PhaseTimer warmup;
    for (int i = 0; i < kWarmupSteps; ++i) {
        runner_a.step(warmup);
        runner_b.step(warmup);
    }
    PhaseTimer timer_a, timer_b;
    std::vector<double> dw_a, dw_b;
    dw_a.reserve(static_cast<std::size_t>(steps));
    dw_b.reserve(static_cast<std::size_t>(steps));
    std::int64_t prev_a = 0, prev_b = 0;
    for (int i = 0; i < steps; ++i) {
        runner_a.step(timer_a);
        runner_b.step(timer_b);
        dw_a.push_back(static_cast<double>(timer_a.nanos(Phase::BackwardDw) - prev_a) / 1e6);
        dw_b.push_back(static_cast<double>(timer_b.nanos(Phase::BackwardDw) - prev_b) / 1e6);
        prev_a = timer_a.nanos(Phase::BackwardDw);
        prev_b = timer_b.nanos(Phase::BackwardDw);
    }
    return {std::move(dw_a), std::move(dw_b)};
}

double median(std::vector<double> values) {
    if (values.empty()) throw ConfigError("median of empty list");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

// --- sweeps -----------------------------------------------------------------

bool SweepResult::any_diverged() const {
    for (const auto& arm : arms) {
        if (arm.diverged) return true;
    }
    return false;
}

namespace {

struct SweepArmRun {
    RunConfig cfg;
    double axis_value = 0.0;
    bool equivalence = false;
    bool is_baseline = false;
    Network net;
    std::optional<TrainerSession> session;
    bool diverged = false;
};

TrainOptions sweep_options(const RunConfig& cfg) {
    TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.schedule = schedule_from_string(cfg.schedule);
    opts.momentum = cfg.momentum;
    return opts;
}

/// Trains the baseline plus one session per arm, all advancing in epoch
/// lockstep. Arms still execute serially (no parallelism, so no timing
/// interference), but machine-speed drift over the sweep hits every arm's
/// accumulators about equally instead of penalizing whichever arm runs
/// last.
SweepResult run_sweep(const std::string& axis, const RunConfig& base,
                      std::vector<SweepArmRun>& arms) {
    const Dataset ds = base.make_dataset();
    {
        // Unrecorded warmup: cold caches and allocator growth otherwise
        // inflate the earliest timed epochs.
        Network warm_net = base.make_network(ds);
        TrainOptions warm_opts = sweep_options(base);
        warm_opts.epochs = std::min(2, base.epochs);
        train_baseline(warm_net, ds, base.base_lr, base.base_batch, warm_opts);
    }

    SweepArmRun baseline;
    baseline.cfg = base;
    baseline.is_baseline = true;
    baseline.net = base.make_network(ds);

    std::vector<SweepArmRun*> order;
    LdbConfig baseline_ldb = base.ldb();
    baseline_ldb.p = 1.0;
    baseline_ldb.kappa = 1.0;
    baseline.session.emplace(baseline.net, ds, baseline_ldb, sweep_options(base),
                             /*force_standard=*/true);
    order.push_back(&baseline);
    for (auto& arm : arms) {
        arm.net = arm.cfg.make_network(ds);
        arm.session.emplace(arm.net, ds, arm.cfg.ldb(), sweep_options(arm.cfg),
                            /*force_standard=*/false);
        order.push_back(&arm);
    }

    for (int epoch = 1; epoch <= base.epochs; ++epoch) {
        for (auto* run : order) {
            if (run->diverged || run->session->done()) continue;
            try {
                run->session->step_epoch();
            } catch (const DivergedError&) {
                run->diverged = true;
            }
        }
    }

    SweepResult result;
    result.axis = axis;
    if (baseline.diverged) {
        throw DivergedError("baseline sweep arm diverged", 0, 0);
    }
    const TrainReport baseline_report = baseline.session->report();
    result.baseline_accuracy = baseline_report.final_val_accuracy;
    result.baseline_wall_ms = baseline_report.total_wall_ms;
    for (auto& arm : arms) {
        SweepArm out;
        out.value = arm.axis_value;
        out.equivalence = arm.equivalence;
        out.diverged = arm.diverged;
        if (!arm.diverged) {
            const TrainReport report = arm.session->report();
            out.val_accuracy = report.final_val_accuracy;
            out.wall_ms = report.total_wall_ms;
            out.speedup = 1.0 - out.wall_ms / result.baseline_wall_ms;
        }
        result.arms.push_back(out);
    }
    return result;
}

} // namespace

SweepResult sweep_drop_rate(const std::vector<double>& values, const RunConfig& base) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    for (double v : values) {
        if (!(v > 0.0 && v <= 1.0)) throw ConfigError("p must be in (0,1]");
    }
    base.validate();
    std::vector<SweepArmRun> arms(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        arms[i].cfg = base;
        arms[i].cfg.p = values[i];
        arms[i].axis_value = values[i];
        arms[i].equivalence = values[i] == 1.0 && base.kappa == 1.0;
    }
    return run_sweep("p", base, arms);
}

SweepResult sweep_sampling_rate(const std::vector<int>& values, const RunConfig& base) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    for (int v : values) {
        if (v < 1) throw ConfigError("s must be >= 1");
    }
    base.validate();
    std::vector<SweepArmRun> arms(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        arms[i].cfg = base;
        arms[i].cfg.s = values[i];
        arms[i].axis_value = static_cast<double>(values[i]);
        // s beyond the horizon never fires a drop epoch.
        arms[i].equivalence =
            values[i] > base.epochs || (base.p == 1.0 && base.kappa == 1.0);
    }
    return run_sweep("s", base, arms);
}

// --- emission ---------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

double parse_num(const std::string& field, const std::filesystem::path& path) {
    double v = 0.0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw FormatError(path.string() + ": bad number \"" + field + "\"");
    }
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

} // namespace

void emit_train_csv(const TrainReport& report, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << kTrainCsvHeader << '\n';
    for (const auto& r : report.epochs) {
        out << r.epoch << ',' << mode_name(r.mode) << ',' << fmt(r.lr) << ',' << r.batch << ','
            << fmt(r.train_loss) << ',' << fmt(r.val_accuracy) << ',' << fmt(r.ms_forward) << ','
            << fmt(r.ms_backward_dx) << ',' << fmt(r.ms_backward_dw) << ',' << fmt(r.ms_update)
            << '\n';
    }
    if (!out) throw IoError("cannot write " + path.string());
}

std::vector<EpochRecord> parse_train_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kTrainCsvHeader) {
        throw FormatError(path.string() + ": unexpected CSV header");
    }
    std::vector<EpochRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream is(line);
        std::string field;
        while (std::getline(is, field, ',')) fields.push_back(field);
        if (fields.size() != 10) {
            throw FormatError(path.string() + ": expected 10 fields, got " +
                              std::to_string(fields.size()));
        }
        EpochRecord r;
        r.epoch = static_cast<int>(parse_num(fields[0], path));
        if (fields[1] == "drop") {
            r.mode = Mode::Drop;
        } else if (fields[1] == "standard") {
            r.mode = Mode::StandardSGD;
        } else {
            throw FormatError(path.string() + ": bad mode \"" + fields[1] + "\"");
        }
        r.lr = parse_num(fields[2], path);
        r.batch = static_cast<int>(parse_num(fields[3], path));
        r.train_loss = parse_num(fields[4], path);
        r.val_accuracy = parse_num(fields[5], path);
        r.ms_forward = parse_num(fields[6], path);
        r.ms_backward_dx = parse_num(fields[7], path);
        r.ms_backward_dw = parse_num(fields[8], path);
        r.ms_update = parse_num(fields[9], path);
        records.push_back(std::move(r));
    }
    return records;
}

void emit_loss_curve_csv(const TrainReport& report, const TrainReport* baseline,
                         const std::filesystem::path& path) {
    auto out = open_out(path);
    out << (baseline ? "epoch,train_loss,baseline_loss" : "epoch,train_loss") << '\n';
    for (std::size_t i = 0; i < report.epochs.size(); ++i) {
        out << report.epochs[i].epoch << ',' << fmt(report.epochs[i].train_loss);
        if (baseline) {
            out << ',';
            if (i < baseline->epochs.size()) out << fmt(baseline->epochs[i].train_loss);
        }
        out << '\n';
    }
    if (!out) throw IoError("cannot write " + path.string());
}

namespace {

json report_json(const TrainReport& report) {
    json j;
    j["epochs"] = report.epochs.size();
    j["best_val_accuracy"] = report.best_val_accuracy;
    j["final_val_accuracy"] = report.final_val_accuracy;
    j["total_wall_ms"] = report.total_wall_ms;
    j["total_eval_ms"] = report.total_eval_ms;
    j["ms_forward"] = report.ms_forward;
    j["ms_backward_dx"] = report.ms_backward_dx;
    j["ms_backward_dw"] = report.ms_backward_dw;
    j["ms_update"] = report.ms_update;
    return j;
}

} // namespace

void emit_train_summary_json(const TrainReport& report, const TrainReport* baseline,
                             const std::filesystem::path& path) {
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["ldb"] = report_json(report);
    if (baseline) {
        j["baseline"] = report_json(*baseline);
        j["speedup"] = 1.0 - report.total_wall_ms / baseline->total_wall_ms;
    }
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + path.string());
}

void emit_sweep_csv(const SweepResult& result, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "axis,value,val_acc,wall_ms,speedup,diverged,equivalence\n";
    out << result.axis << ",baseline," << fmt(result.baseline_accuracy) << ','
        << fmt(result.baseline_wall_ms) << ",0,0,0\n";
    for (const auto& arm : result.arms) {
        out << result.axis << ',' << fmt(arm.value) << ',' << fmt(arm.val_accuracy) << ','
            << fmt(arm.wall_ms) << ',' << fmt(arm.speedup) << ',' << (arm.diverged ? 1 : 0) << ','
            << (arm.equivalence ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("cannot write " + path.string());
}

void emit_sweep_json(const SweepResult& result, const std::filesystem::path& path) {
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["axis"] = result.axis;
    j["baseline"] = {{"val_accuracy", result.baseline_accuracy},
                     {"wall_ms", result.baseline_wall_ms}};
    j["arms"] = json::array();
    for (const auto& arm : result.arms) {
        j["arms"].push_back({{"value", arm.value},
                             {"val_accuracy", arm.val_accuracy},
                             {"wall_ms", arm.wall_ms},
                             {"speedup", arm.speedup},
                             {"diverged", arm.diverged},
                             {"equivalence", arm.equivalence}});
    }
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + path.string());
}

SweepResult parse_sweep_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": invalid JSON: " + std::string(e.what()));
    }
    SweepResult result;
    try {
        result.axis = j.at("axis").get<std::string>();
        result.baseline_accuracy = j.at("baseline").at("val_accuracy").get<double>();
        result.baseline_wall_ms = j.at("baseline").at("wall_ms").get<double>();
        for (const auto& a : j.at("arms")) {
            SweepArm arm;
            arm.value = a.at("value").get<double>();
            arm.val_accuracy = a.at("val_accuracy").get<double>();
            arm.wall_ms = a.at("wall_ms").get<double>();
            arm.speedup = a.at("speedup").get<double>();
            arm.diverged = a.at("diverged").get<bool>();
            arm.equivalence = a.at("equivalence").get<bool>();
            result.arms.push_back(arm);
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": bad sweep schema: " + std::string(e.what()));
    }
    return result;
}

} // namespace ldb
