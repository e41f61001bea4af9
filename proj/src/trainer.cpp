#include "ldb/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ldb/error.hpp"

namespace ldb {

OptimizerState OptimizerState::create(const Network& net, double momentum) {
    OptimizerState opt;
    opt.momentum = momentum;
    for (int id : net.param_layer_ids()) {
        const LayerNode& node = net.layer(id);
        LayerVelocity v;
        v.layer_id = id;
        v.weights = Tensor(node.weights.shape());
        v.bias = Tensor(node.bias.shape());
        opt.velocity.push_back(std::move(v));
    }
    return opt;
}

OptimizerState::LayerVelocity& OptimizerState::for_layer(int layer_id) {
    for (auto& v : velocity) {
        if (v.layer_id == layer_id) return v;
    }
    throw InternalError("no velocity buffer for layer " + std::to_string(layer_id));
}

void apply_update(Network& net, const EpochPlan& plan, OptimizerState& opt, double weight_decay) {
    for (int id : plan.selected) {
        LayerNode& node = net.layer(id);
        auto& vel = opt.for_layer(id);
        if (!node.weight_grad.same_shape(node.weights) || !vel.weights.same_shape(node.weights)) {
            throw InternalError("layer " + std::to_string(id) + ": gradient/velocity shape drift");
        }
        if (weight_decay > 0.0) {
            // Decoupled decay, masked like the gradient step.
            for (std::size_t i = 0; i < node.weights.size(); ++i) {
                node.weights[i] -= plan.lr * weight_decay * node.weights[i];
            }
        }
        for (std::size_t i = 0; i < node.weights.size(); ++i) {
            vel.weights[i] = opt.momentum * vel.weights[i] - plan.lr * node.weight_grad[i];
            node.weights[i] += vel.weights[i];
        }
        for (std::size_t i = 0; i < node.bias.size(); ++i) {
            vel.bias[i] = opt.momentum * vel.bias[i] - plan.lr * node.bias_grad[i];
            node.bias[i] += vel.bias[i];
        }
    }
}

double evaluate(Network& net, const Dataset& ds, Split split) {
    const auto& indices = ds.split_indices(split);
    if (indices.empty()) throw DataError("evaluate: split is empty");
    constexpr int kEvalBatch = 256;
    std::size_t correct = 0;
    std::size_t seen = 0;
    const auto shape = ds.feature_shape();
    std::size_t per_sample = 1;
    for (int d : shape) per_sample *= static_cast<std::size_t>(d);
    while (seen < indices.size()) {
        const std::size_t count = std::min<std::size_t>(kEvalBatch, indices.size() - seen);
        std::vector<int> batch_shape{static_cast<int>(count)};
        batch_shape.insert(batch_shape.end(), shape.begin(), shape.end());
        Tensor x(std::move(batch_shape));
        for (std::size_t k = 0; k < count; ++k) {
            std::copy_n(ds.features.data() + indices[seen + k] * per_sample, per_sample,
                        x.data() + k * per_sample);
        }
        Tensor logits = net.forward(x);
        for (std::size_t k = 0; k < count; ++k) {
            if (argmax_row(logits, static_cast<int>(k)) == ds.labels[indices[seen + k]]) ++correct;
        }
        seen += count;
    }
    net.clear_step_cache();
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

namespace {

EpochPlan standard_plan(int epoch, const std::vector<int>& param_ids, double lr, int batch) {
    EpochPlan plan;
    plan.epoch = epoch;
    plan.mode = Mode::StandardSGD;
    plan.lr = lr;
    plan.batch = batch;
    plan.selected = param_ids;
    return plan;
}

} // namespace

TrainerSession::TrainerSession(Network& net, const Dataset& ds, const LdbConfig& cfg,
                               const TrainOptions& opts, bool force_standard)
    : net_(net), ds_(ds), cfg_(cfg), opts_(opts), force_standard_(force_standard),
      opt_(OptimizerState::create(net, opts.momentum)) {
    cfg_.validate();
    if (opts_.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (ds_.size() == 0) throw DataError("dataset is empty");
    if (net_.output_shape().size() != 1 || net_.output_shape()[0] != ds.num_classes) {
        throw ConfigError("network yields " + shape_to_string(net_.output_shape()) +
                          " but dataset has " + std::to_string(ds.num_classes) + " classes");
    }
    records_.reserve(static_cast<std::size_t>(opts_.epochs));
}

const EpochRecord& TrainerSession::step_epoch() {
    if (done()) throw InternalError("step_epoch called after the final epoch");
    // Epochs are 1-based: epoch 1 is the warm standard-SGD epoch of the
    // alternation rule, and a run of E epochs sees floor(E/s) drop epochs.
    const int epoch = ++epoch_;
    const double scheduled = schedule_lr(opts_.schedule, cfg_.base_lr, epoch, opts_.epochs);
    RngStream sel_rng = selection_stream(cfg_.selection_seed, epoch);
    EpochPlan plan = force_standard_
                         ? standard_plan(epoch, net_.param_layer_ids(), scheduled, cfg_.base_batch)
                         : plan_epoch(epoch, net_.param_layer_ids(), cfg_, scheduled, sel_rng);
    if (plan.exclusions_cover_all && !warned_exclusions_) {
        warned_exclusions_ = true;
        std::fprintf(stderr,
                     "warning: keep_head + keep_tail cover all %zu parameterized layers; "
                     "drop epochs select every layer\n",
                     net_.param_layer_ids().size());
    }

    const std::int64_t fwd0 = timer_.nanos(Phase::Forward);
    const std::int64_t dx0 = timer_.nanos(Phase::BackwardDx);
    const std::int64_t dw0 = timer_.nanos(Phase::BackwardDw);
    const std::int64_t upd0 = timer_.nanos(Phase::Update);

    double loss_sum = 0.0;
    int steps = 0;
    BatchStream stream(ds_, Split::Train, plan.batch, epoch, opts_.prefetch);
    while (auto batch = stream.next()) {
        if (!force_standard_ && cfg_.per_iteration_selection && plan.mode == Mode::Drop) {
            RngStream step_rng = sel_rng.derive(static_cast<std::uint64_t>(steps + 1));
            plan.selected = select_layers(net_.param_layer_ids(), cfg_, step_rng);
        }
        double loss = 0.0;
        Tensor loss_grad;
        {
            auto scope = timer_.measure(Phase::Forward);
            Tensor logits = net_.forward(batch->features);
            std::tie(loss, loss_grad) = cross_entropy_loss(logits, batch->labels);
        }
        if (!std::isfinite(loss)) {
            throw DivergedError("training diverged: non-finite loss at epoch " +
                                    std::to_string(epoch) + ", step " + std::to_string(steps),
                                epoch, steps);
        }
        {
            auto scope = timer_.measure(Phase::BackwardDx);
            net_.backward_activations(loss_grad);
        }
        {
            auto scope = timer_.measure(Phase::BackwardDw);
            net_.backward_weights(plan.selected);
        }
        {
            auto scope = timer_.measure(Phase::Update);
            apply_update(net_, plan, opt_, cfg_.weight_decay);
        }
        loss_sum += loss;
        ++steps;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mode = plan.mode;
    record.lr = plan.lr;
    record.batch = plan.batch;
    record.train_loss = loss_sum / std::max(steps, 1);
    record.selected = plan.selected;
    {
        auto scope = timer_.measure(Phase::Eval);
        record.val_accuracy = evaluate(net_, ds_, Split::Val);
    }
    record.ms_forward = static_cast<double>(timer_.nanos(Phase::Forward) - fwd0) / 1e6;
    record.ms_backward_dx = static_cast<double>(timer_.nanos(Phase::BackwardDx) - dx0) / 1e6;
    record.ms_backward_dw = static_cast<double>(timer_.nanos(Phase::BackwardDw) - dw0) / 1e6;
    record.ms_update = static_cast<double>(timer_.nanos(Phase::Update) - upd0) / 1e6;
    record.ms_eval = timer_.millis(Phase::Eval) - eval_ms_total_;
    eval_ms_total_ = timer_.millis(Phase::Eval);

    if (opts_.checkpoint_every > 0 && epoch % opts_.checkpoint_every == 0) {
        net_.save_checkpoint(opts_.checkpoint_dir / ("epoch-" + std::to_string(epoch) + ".ckpt"));
    }
    if (opts_.on_epoch_line) opts_.on_epoch_line(record);
    records_.push_back(std::move(record));
    if (opts_.on_epoch) opts_.on_epoch(net_, records_.back());
    return records_.back();
}

TrainReport TrainerSession::report() const {
    if (!done()) throw InternalError("report requested before the final epoch");
    TrainReport report;
    report.epochs = records_;
    report.total_eval_ms = eval_ms_total_;
    report.ms_forward = timer_.millis(Phase::Forward);
    report.ms_backward_dx = timer_.millis(Phase::BackwardDx);
    report.ms_backward_dw = timer_.millis(Phase::BackwardDw);
    report.ms_update = timer_.millis(Phase::Update);
    report.total_wall_ms = static_cast<double>(timer_.train_nanos()) / 1e6;
    for (const auto& rec : report.epochs) {
        report.best_val_accuracy = std::max(report.best_val_accuracy, rec.val_accuracy);
    }
    report.final_val_accuracy = report.epochs.back().val_accuracy;
    return report;
}

TrainReport train(Network& net, const Dataset& ds, const LdbConfig& cfg, const TrainOptions& opts) {
    TrainerSession session(net, ds, cfg, opts, /*force_standard=*/false);
    while (!session.done()) session.step_epoch();
    return session.report();
}

TrainReport train_baseline(Network& net, const Dataset& ds, double base_lr, int batch,
                           const TrainOptions& opts) {
    LdbConfig cfg;
    cfg.p = 1.0;
    cfg.kappa = 1.0;
    cfg.base_lr = base_lr;
    cfg.base_batch = batch;
    TrainerSession session(net, ds, cfg, opts, /*force_standard=*/true);
    while (!session.done()) session.step_epoch();
    return session.report();
}

} // namespace ldb
