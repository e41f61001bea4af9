#include "ldb/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include "ldb/error.hpp"

namespace ldb {

const char* mode_name(Mode mode) {
    return mode == Mode::Drop ? "drop" : "standard";
}

Schedule schedule_from_string(const std::string& name) {
    if (name == "constant") return Schedule::Constant;
    if (name == "cosine") return Schedule::Cosine;
    throw ConfigError("schedule must be \"constant\" or \"cosine\", got \"" + name + "\"");
}

void LdbConfig::validate() const {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p must be in (0,1]");
    if (s < 1) throw ConfigError("s must be >= 1");
    if (kappa < 1.0) throw ConfigError("kappa must be >= 1");
    if (!(base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
    if (base_batch < 1) throw ConfigError("base_batch must be >= 1");
    if (keep_head < 0) throw ConfigError("keep_head must be >= 0");
    if (keep_tail < 0) throw ConfigError("keep_tail must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

Mode mode_for_epoch(int epoch, int s) {
    if (epoch < 0) throw ConfigError("epoch must be >= 0");
    if (s < 1) throw ConfigError("s must be >= 1");
    return (epoch > 0 && epoch % s == 0) ? Mode::Drop : Mode::StandardSGD;
}

std::vector<int> select_layers(const std::vector<int>& param_ids, const LdbConfig& cfg,
                               RngStream& rng) {
    if (param_ids.empty()) throw ConfigError("select_layers needs a nonempty layer list");
    const int n = static_cast<int>(param_ids.size());
    const int head = std::min(cfg.keep_head, n);
    const int tail = std::min(cfg.keep_tail, n - head);
    std::vector<int> selected;
    selected.reserve(param_ids.size());
    for (int i = 0; i < n; ++i) {
        const bool excluded = i < head || i >= n - tail;
        if (excluded) {
            selected.push_back(param_ids[static_cast<std::size_t>(i)]);
        } else if (rng.uniform() < cfg.p) {
            selected.push_back(param_ids[static_cast<std::size_t>(i)]);
        }
    }
    if (selected.empty()) {
        // Only reachable with keep_head == keep_tail == 0 and an unlucky
        // draw; one extra draw picks a single layer so the result is never
        // empty.
        selected.push_back(param_ids[rng.below(static_cast<std::uint64_t>(n))]);
    }
    return selected;
}

std::pair<double, int> adjust_hyperparams(Mode mode, double scheduled_lr, const LdbConfig& cfg) {
    if (!(scheduled_lr > 0.0)) throw ConfigError("scheduled_lr must be > 0");
    if (mode == Mode::Drop) {
        const int batch = static_cast<int>(std::llround(cfg.kappa * cfg.base_batch));
        return {scheduled_lr / cfg.p, batch};
    }
    return {scheduled_lr, cfg.base_batch};
}

double schedule_lr(Schedule schedule, double base_lr, int epoch, int total_epochs) {
    if (schedule == Schedule::Constant) return base_lr;
    // Cosine annealing toward zero over the run; epoch is 1-based so the
    // first epoch trains at the base rate.
    const double t = static_cast<double>(epoch - 1) / static_cast<double>(total_epochs);
    return 0.5 * base_lr * (1.0 + std::cos(M_PI * t));
}

EpochPlan plan_epoch(int epoch, const std::vector<int>& param_ids, const LdbConfig& cfg,
                     double scheduled_lr, RngStream& rng) {
    cfg.validate();
    EpochPlan plan;
    plan.epoch = epoch;
    plan.mode = mode_for_epoch(epoch, cfg.s);
    auto [lr, batch] = adjust_hyperparams(plan.mode, scheduled_lr, cfg);
    plan.lr = lr;
    plan.batch = batch;
    if (plan.mode == Mode::Drop) {
        plan.selected = select_layers(param_ids, cfg, rng);
        plan.exclusions_cover_all =
            cfg.keep_head + cfg.keep_tail >= static_cast<int>(param_ids.size());
    } else {
        plan.selected = param_ids;
    }
    return plan;
}

RngStream selection_stream(std::uint64_t selection_seed, int epoch) {
    return RngStream(selection_seed).derive(static_cast<std::uint64_t>(epoch));
}

} // namespace ldb
