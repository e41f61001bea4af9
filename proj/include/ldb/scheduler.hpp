#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ldb/rng.hpp"

namespace ldb {

enum class Mode { StandardSGD, Drop };

const char* mode_name(Mode mode);

enum class Schedule { Constant, Cosine };

Schedule schedule_from_string(const std::string& name);

/// Hyperparameters of the method.
///
/// Selection draws one uniform per droppable layer and keeps the layer
/// when the draw falls below p, so p is the probability a layer IS
/// selected for updates on a drop epoch; the colloquial name "drop rate"
/// sticks to this knob anyway.
struct LdbConfig {
    double p = 0.3;
    int s = 2;               // every s-th epoch is a drop epoch
    double kappa = 2.0;      // batch multiplier on drop epochs
    double base_lr = 0.1;
    int base_batch = 128;
    int keep_head = 4;       // leading parameterized layers always selected
    int keep_tail = 1;       // trailing parameterized layers always selected
    std::uint64_t selection_seed = 0;
    double weight_decay = 0.0;          // decoupled, selected layers only
    bool per_iteration_selection = false; // reselect per mini-batch instead of per epoch

    void validate() const; // throws ConfigError naming the field
};

/// The resolved decision for one epoch.
struct EpochPlan {
    int epoch = 0;
    Mode mode = Mode::StandardSGD;
    double lr = 0.0;
    int batch = 0;
    std::vector<int> selected; // parameterized layer ids, ascending
    bool exclusions_cover_all = false;
};

/// Drop iff e mod s == 0 and e > 0.
Mode mode_for_epoch(int epoch, int s);

/// Random layer subset for a drop epoch. The first keep_head and last
/// keep_tail ids are always included; every other id draws one uniform in
/// forward order and is included iff the draw is below p. Never returns an
/// empty set.
std::vector<int> select_layers(const std::vector<int>& param_ids, const LdbConfig& cfg,
                               RngStream& rng);

/// (lr', batch'): drop epochs scale the scheduled rate by 1/p and the batch
/// by kappa (rounded half up); standard epochs pass through.
std::pair<double, int> adjust_hyperparams(Mode mode, double scheduled_lr, const LdbConfig& cfg);

/// Scheduled learning rate for a 1-based epoch out of total_epochs.
double schedule_lr(Schedule schedule, double base_lr, int epoch, int total_epochs);

/// Mode, adjusted hyperparameters and selection for one epoch. Selection
/// draws come from rng; pass a stream derived from (selection_seed, epoch)
/// to make plans independent of each other.
EpochPlan plan_epoch(int epoch, const std::vector<int>& param_ids, const LdbConfig& cfg,
                     double scheduled_lr, RngStream& rng);

/// Stream feeding the selection draws of one epoch.
RngStream selection_stream(std::uint64_t selection_seed, int epoch);

} // namespace ldb
