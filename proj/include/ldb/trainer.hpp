#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "ldb/data.hpp"
#include "ldb/network.hpp"
#include "ldb/scheduler.hpp"
#include "ldb/tensor.hpp"
#include "ldb/timer.hpp"

namespace ldb {

/// Momentum buffers, one (weights, bias) pair per parameterized layer.
struct OptimizerState {
    struct LayerVelocity {
        int layer_id = -1;
        Tensor weights;
        Tensor bias;
    };

    double momentum = 0.9;
    std::vector<LayerVelocity> velocity;

    static OptimizerState create(const Network& net, double momentum = 0.9);
    LayerVelocity& for_layer(int layer_id);
};

struct EpochRecord {
    int epoch = 0;
    Mode mode = Mode::StandardSGD;
    double lr = 0.0;
    int batch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double ms_forward = 0.0;
    double ms_backward_dx = 0.0;
    double ms_backward_dw = 0.0;
    double ms_update = 0.0;
    double ms_eval = 0.0;
    std::vector<int> selected; // parameterized layer ids updated this epoch
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    double best_val_accuracy = 0.0;
    double final_val_accuracy = 0.0;
    double total_wall_ms = 0.0;  // forward + backward_dx + backward_dw + update
    double total_eval_ms = 0.0;  // validation, kept out of the wall total
    double ms_forward = 0.0;
    double ms_backward_dx = 0.0;
    double ms_backward_dw = 0.0;
    double ms_update = 0.0;
};

struct TrainOptions {
    int epochs = 30;
    Schedule schedule = Schedule::Cosine;
    double momentum = 0.9;
    bool prefetch = false;
    int checkpoint_every = 0; // 0 disables periodic checkpoints
    std::filesystem::path checkpoint_dir;
    /// Called after each epoch's validation, before the next epoch starts.
    std::function<void(const Network&, const EpochRecord&)> on_epoch;
    /// One human-readable line per epoch when set.
    std::function<void(const EpochRecord&)> on_epoch_line;
};

/// Momentum step for the selected layers only: v <- mu v - lr' g,
/// w <- w + v. Parameters and velocity of unselected layers are untouched.
void apply_update(Network& net, const EpochPlan& plan, OptimizerState& opt,
                  double weight_decay = 0.0);

/// One training run driven epoch by epoch. train()/train_baseline() wrap
/// this; sweeps drive several sessions in lockstep so that machine-speed
/// drift hits all arms alike.
class TrainerSession {
public:
    TrainerSession(Network& net, const Dataset& ds, const LdbConfig& cfg, const TrainOptions& opts,
                   bool force_standard);

    /// Runs the next epoch (1-based). Returns the epoch's record.
    const EpochRecord& step_epoch();

    bool done() const { return epoch_ >= opts_.epochs; }
    int epochs_completed() const { return epoch_; }
    const OptimizerState& optimizer() const { return opt_; }

    /// Final report; valid once done().
    TrainReport report() const;

private:
    Network& net_;
    const Dataset& ds_;
    LdbConfig cfg_;
    TrainOptions opts_;
    bool force_standard_;
    OptimizerState opt_;
    PhaseTimer timer_;
    std::vector<EpochRecord> records_;
    int epoch_ = 0;
    double eval_ms_total_ = 0.0;
    bool warned_exclusions_ = false;
};

/// The full training loop: per epoch, plan (mode/lr/batch/selection), run
/// mini-batches with the selective backward, update, then validate.
TrainReport train(Network& net, const Dataset& ds, const LdbConfig& cfg, const TrainOptions& opts);

/// Comparison arm: every epoch standard SGD at the base hyperparameters.
TrainReport train_baseline(Network& net, const Dataset& ds, double base_lr, int batch,
                           const TrainOptions& opts);

/// Fraction of argmax(logits) == label over a split. Does not modify
/// parameters; results do not depend on training mode or history.
double evaluate(Network& net, const Dataset& ds, Split split);

} // namespace ldb
