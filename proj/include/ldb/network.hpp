#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ldb/rng.hpp"
#include "ldb/tensor.hpp"

namespace ldb {

enum class LayerKind { Dense, Conv2d, Relu, Flatten, ResidualAdd };

const char* layer_kind_name(LayerKind kind);

/// One node of the feed-forward graph. Parameterized kinds (dense, conv2d)
/// carry weights/bias and matching gradient tensors; the others only route
/// activations.
struct LayerNode {
    int id = -1;
    LayerKind kind = LayerKind::Relu;
    Tensor weights;
    Tensor bias;
    Tensor weight_grad;
    Tensor bias_grad;
    Tensor cached_input; // forward input, kept for one step
    int pad = 0;              // conv2d
    int residual_source = -1; // residual-add: id of the layer whose output is added
    std::vector<int> input_shape;  // per-sample, without batch dimension
    std::vector<int> output_shape;

    bool parameterized() const {
        return kind == LayerKind::Dense || kind == LayerKind::Conv2d;
    }
};

/// Feed-forward layer graph with the backward pass split in two:
/// backward_activations propagates loss gradients through every layer
/// (always needed so that earlier layers still receive signal), while
/// backward_weights computes weight/bias gradients only for the layers it
/// is asked for. Skipping a layer there skips the work entirely.
class Network {
public:
    void set_input_shape(std::vector<int> per_sample_shape);

    int add_dense(int in_features, int out_features);
    int add_conv2d(int out_channels, int kernel, int pad);
    int add_relu();
    int add_flatten();
    /// source_layer_id names the layer whose output joins the main path.
    int add_residual_add(int source_layer_id);

    /// He-initialized weights, zero biases; draw order is layer order.
    void init_weights(RngStream rng);

    /// Batched forward pass; x is (batch, per-sample shape...). Populates
    /// each layer's cached_input. Output and caches do not depend on any
    /// selection state.
    Tensor forward(const Tensor& x);

    /// Activation-gradient sweep over all layers, back to the input.
    /// Requires a preceding forward on this step. Returns the gradient
    /// w.r.t. the network input.
    Tensor backward_activations(const Tensor& loss_grad);

    /// Weight-gradient sweep for the given parameterized layer ids only.
    /// Gradients of all other parameterized layers are left at zero.
    /// Clears the step caches when done.
    void backward_weights(const std::vector<int>& selected);

    /// backward_activations followed by backward_weights.
    void backward_selective(const Tensor& loss_grad, const std::vector<int>& selected);

    void clear_step_cache();

    const std::vector<int>& param_layer_ids() const { return param_layer_ids_; }
    int layer_count() const { return static_cast<int>(layers_.size()); }
    LayerNode& layer(int id) { return layers_[static_cast<std::size_t>(id)]; }
    const LayerNode& layer(int id) const { return layers_[static_cast<std::size_t>(id)]; }
    const std::vector<int>& input_shape() const { return input_shape_; }
    const std::vector<int>& output_shape() const;

    void save_checkpoint(const std::filesystem::path& path) const;
    /// Loads weights saved by save_checkpoint into a structurally identical
    /// network.
    void load_checkpoint(const std::filesystem::path& path);

private:
    int push_layer(LayerNode node);
    std::vector<int> batched(const std::vector<int>& per_sample, int batch) const;

    std::vector<LayerNode> layers_;
    std::vector<int> param_layer_ids_;
    std::vector<int> input_shape_;
    std::vector<Tensor> outputs_;     // per-layer forward outputs for one step
    std::vector<Tensor> grad_output_; // per-layer output gradients for one step
    bool forward_done_ = false;
    bool dx_done_ = false;
};

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the
/// logits.
std::pair<double, Tensor> cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels);

/// Desk-scale architectures: "mlp-8" (8 dense layers), "cnn-small"
/// (conv/conv/dense/dense) and "resnet-toy" (conv stem, one residual block,
/// dense head). width = 0 picks the per-preset default (mlp hidden width,
/// cnn hidden features, resnet channels).
Network build_preset(const std::string& name, const std::vector<int>& input_shape, int classes,
                     int width = 0);

} // namespace ldb
