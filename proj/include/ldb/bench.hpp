#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ldb/config.hpp"
#include "ldb/data.hpp"
#include "ldb/network.hpp"
#include "ldb/trainer.hpp"

namespace ldb {

/// Each phase's share of forward + backward_dx + backward_dw + update,
/// plus the accumulated total so callers can recover absolute phase times.
struct PhaseShares {
    double forward = 0.0;
    double backward_dx = 0.0;
    double backward_dw = 0.0;
    double update = 0.0;
    double total_ms = 0.0;

    double backward() const { return backward_dx + backward_dw; }
    double total() const { return forward + backward_dx + backward_dw + update; }
};

/// Runs training steps against the train split and attributes wall time to
/// phases. The first 5 warmup steps are excluded; steps must be >= 30.
/// An empty selected set means all parameterized layers.
PhaseShares measure_phase_split(Network& net, const Dataset& ds, int steps, int batch,
                                const std::vector<int>& selected = {});

/// Per-step wall times (ms) for the same workload; used for median step
/// comparisons between full and selective backward.
std::vector<double> measure_step_times(Network& net, const Dataset& ds, int steps, int batch,
                                       const std::vector<int>& selected = {});

/// Per-step backward_dw times (ms) for two workloads differing only in
/// their selected sets, interleaved step by step so both see the same
/// machine conditions. Returns (first's dw times, second's dw times).
std::pair<std::vector<double>, std::vector<double>> measure_dw_interleaved(
    Network& net_a, const std::vector<int>& selected_a, Network& net_b,
    const std::vector<int>& selected_b, const Dataset& ds, int steps, int batch);

double median(std::vector<double> values);

struct SweepArm {
    double value = 0.0; // p, or s as a double
    bool diverged = false;
    bool equivalence = false; // arm provably degenerates to the baseline
    double val_accuracy = 0.0;
    double wall_ms = 0.0;
    double speedup = 0.0; // 1 - wall/baseline_wall
};

struct SweepResult {
    std::string axis; // "p" or "s"
    double baseline_accuracy = 0.0;
    double baseline_wall_ms = 0.0;
    std::vector<SweepArm> arms;

    bool any_diverged() const;
};

/// One trained run per p value plus the baseline arm, identical seeds
/// throughout; wall time counts the four training phases, validation
/// excluded.
SweepResult sweep_drop_rate(const std::vector<double>& values, const RunConfig& base);

/// Same, sweeping the epoch sampling rate s.
SweepResult sweep_sampling_rate(const std::vector<int>& values, const RunConfig& base);

// --- report emission --------------------------------------------------------

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kTrainCsvHeader =
    "epoch,mode,lr,batch,train_loss,val_acc,ms_fwd,ms_bwd_dx,ms_bwd_dw,ms_upd";

void emit_train_csv(const TrainReport& report, const std::filesystem::path& path);
std::vector<EpochRecord> parse_train_csv(const std::filesystem::path& path);

/// epoch,train_loss[,baseline_loss], ready for plotting.
void emit_loss_curve_csv(const TrainReport& report, const TrainReport* baseline,
                         const std::filesystem::path& path);

/// Summary JSON for a run; with a baseline report present it carries both
/// arms' raw totals and the speedup recomputed from them.
void emit_train_summary_json(const TrainReport& report, const TrainReport* baseline,
                             const std::filesystem::path& path);

void emit_sweep_csv(const SweepResult& result, const std::filesystem::path& path);
void emit_sweep_json(const SweepResult& result, const std::filesystem::path& path);
SweepResult parse_sweep_json(const std::filesystem::path& path);

} // namespace ldb
