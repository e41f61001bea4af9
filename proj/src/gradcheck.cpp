#include "ldb/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "ldb/error.hpp"
#include "ldb/rng.hpp"

namespace ldb {

namespace {

struct Workload {
    Network net;
    Tensor input;
    std::vector<int> labels;
};

Workload make_workload(const std::string& preset, std::uint64_t seed) {
    Workload w;
    const int classes = 3;
    if (preset == "mlp-8") {
        w.net = build_preset(preset, {6}, classes, /*width=*/10);
        w.input = Tensor({4, 6});
    } else if (preset == "cnn-small") {
        w.net = build_preset(preset, {1, 5, 5}, classes, /*width=*/12);
        w.input = Tensor({3, 1, 5, 5});
    } else if (preset == "resnet-toy") {
        w.net = build_preset(preset, {1, 5, 5}, classes, /*width=*/6);
        w.input = Tensor({3, 1, 5, 5});
    } else {
        throw ConfigError("unknown preset \"" + preset + "\" (expected mlp-8, cnn-small or resnet-toy)");
    }
    RngStream rng(seed);
    w.net.init_weights(rng.derive(1));
    RngStream data_rng = rng.derive(2);
    for (std::size_t i = 0; i < w.input.size(); ++i) w.input[i] = data_rng.normal();
    w.labels.resize(static_cast<std::size_t>(w.input.dim(0)));
    for (std::size_t i = 0; i < w.labels.size(); ++i) w.labels[i] = static_cast<int>(i) % classes;
    return w;
}

double loss_of(Workload& w) {
    Tensor logits = w.net.forward(w.input);
    auto [loss, grad] = cross_entropy_loss(logits, w.labels);
    w.net.clear_step_cache();
    return loss;
}

std::vector<int> random_subset(const std::vector<int>& ids, RngStream& rng) {
    std::vector<int> subset;
    for (int id : ids) {
        if (rng.uniform() < 0.5) subset.push_back(id);
    }
    if (subset.empty()) subset.push_back(ids[rng.below(ids.size())]);
    return subset;
}

double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
    return std::abs(analytic - numeric) / denom;
}

} // namespace

GradcheckResult gradcheck_preset(const std::string& preset, std::uint64_t seed,
                                 const GradcheckOptions& opts) {
    Workload w = make_workload(preset, seed);
    RngStream subset_rng = RngStream(seed).derive(3);
    GradcheckResult result;

    for (int set = 0; set < opts.selected_sets; ++set) {
        // First set is the full selection (plain backprop); the rest are random.
        std::vector<int> selected =
            set == 0 ? w.net.param_layer_ids() : random_subset(w.net.param_layer_ids(), subset_rng);

        Tensor logits = w.net.forward(w.input);
        auto [loss, loss_grad] = cross_entropy_loss(logits, w.labels);
        w.net.backward_selective(loss_grad, selected);

        std::vector<Tensor> analytic_w, analytic_b;
        for (int id : w.net.param_layer_ids()) {
            analytic_w.push_back(w.net.layer(id).weight_grad);
            analytic_b.push_back(w.net.layer(id).bias_grad);
        }
        if (opts.corrupt_dense) {
            // Scale the first selected dense layer's weight gradient; a
            // broken backward must be caught by the finite differences.
            for (std::size_t k = 0; k < w.net.param_layer_ids().size(); ++k) {
                const int id = w.net.param_layer_ids()[k];
                const bool in_set =
                    std::find(selected.begin(), selected.end(), id) != selected.end();
                if (in_set && w.net.layer(id).kind == LayerKind::Dense) {
                    analytic_w[k] = scale(analytic_w[k], 1.01);
                    break;
                }
            }
        }

        for (std::size_t k = 0; k < w.net.param_layer_ids().size(); ++k) {
            const int id = w.net.param_layer_ids()[k];
            const bool in_set = std::find(selected.begin(), selected.end(), id) != selected.end();
            LayerNode& node = w.net.layer(id);
            if (!in_set) {
                // Unselected layers must come out of the backward untouched.
                if (max_abs(analytic_w[k]) != 0.0 || max_abs(analytic_b[k]) != 0.0) {
                    result.max_rel_err = 1.0;
                    result.worst = preset + " layer " + std::to_string(id) +
                                   ": unselected layer has nonzero gradient";
                    result.pass = false;
                    return result;
                }
                continue;
            }
            auto probe = [&](Tensor& param, const Tensor& analytic, const char* what) {
                for (std::size_t i = 0; i < param.size(); ++i) {
                    const double saved = param[i];
                    param[i] = saved + opts.step;
                    const double plus = loss_of(w);
                    param[i] = saved - opts.step;
                    const double minus = loss_of(w);
                    param[i] = saved;
                    const double numeric = (plus - minus) / (2.0 * opts.step);
                    const double err = rel_err(analytic[i], numeric);
                    ++result.entries_checked;
                    if (err > result.max_rel_err) {
                        result.max_rel_err = err;
                        std::ostringstream os;
                        os << preset << " layer " << id << " (" << layer_kind_name(node.kind) << ") "
                           << what << '[' << i << "]: analytic=" << analytic[i]
                           << " numeric=" << numeric << " rel_err=" << err;
                        result.worst = os.str();
                    }
                }
            };
            probe(node.weights, analytic_w[k], "weights");
            probe(node.bias, analytic_b[k], "bias");
        }
    }
    result.pass = result.max_rel_err <= opts.tolerance;
    return result;
}

} // namespace ldb
