#include "ldb/network.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ldb/error.hpp"

namespace ldb {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::ResidualAdd: return "residual-add";
    }
    return "?";
}

namespace {

std::size_t numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::string layer_label(const LayerNode& node) {
    return "layer " + std::to_string(node.id) + " (" + layer_kind_name(node.kind) + ")";
}

} // namespace

void Network::set_input_shape(std::vector<int> per_sample_shape) {
    if (!layers_.empty()) {
        throw ConfigError("set_input_shape must precede layer construction");
    }
    if (per_sample_shape.empty()) {
        throw ConfigError("input shape must have at least one dimension");
    }
    input_shape_ = std::move(per_sample_shape);
}

int Network::push_layer(LayerNode node) {
    node.id = static_cast<int>(layers_.size());
    if (node.parameterized()) {
        param_layer_ids_.push_back(node.id);
    }
    layers_.push_back(std::move(node));
    return layers_.back().id;
}

std::vector<int> Network::batched(const std::vector<int>& per_sample, int batch) const {
    std::vector<int> s;
    s.reserve(per_sample.size() + 1);
    s.push_back(batch);
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    return s;
}

int Network::add_dense(int in_features, int out_features) {
    if (input_shape_.empty()) throw ConfigError("set_input_shape before adding layers");
    const std::vector<int>& prev = layers_.empty() ? input_shape_ : layers_.back().output_shape;
    if (prev.size() != 1 || prev[0] != in_features) {
        throw ShapeError("dense layer " + std::to_string(layers_.size()) + ": expects input (" +
                         std::to_string(in_features) + "), previous layer yields " +
                         shape_to_string(prev));
    }
    LayerNode node;
    node.kind = LayerKind::Dense;
    node.weights = Tensor({in_features, out_features});
    node.bias = Tensor({out_features});
    node.weight_grad = Tensor({in_features, out_features});
    node.bias_grad = Tensor({out_features});
    node.input_shape = prev;
    node.output_shape = {out_features};
    return push_layer(std::move(node));
}

int Network::add_conv2d(int out_channels, int kernel, int pad) {
    if (input_shape_.empty()) throw ConfigError("set_input_shape before adding layers");
    const std::vector<int>& prev = layers_.empty() ? input_shape_ : layers_.back().output_shape;
    if (prev.size() != 3) {
        throw ShapeError("conv2d layer " + std::to_string(layers_.size()) +
                         ": expects (c, h, w) input, previous layer yields " + shape_to_string(prev));
    }
    const int cin = prev[0], h = prev[1], w = prev[2];
    const int ho = h + 2 * pad - kernel + 1;
    const int wo = w + 2 * pad - kernel + 1;
    if (ho <= 0 || wo <= 0) {
        throw ShapeError("conv2d layer " + std::to_string(layers_.size()) + ": kernel " +
                         std::to_string(kernel) + " with pad " + std::to_string(pad) +
                         " does not fit input " + shape_to_string(prev));
    }
    LayerNode node;
    node.kind = LayerKind::Conv2d;
    node.pad = pad;
    node.weights = Tensor({out_channels, cin, kernel, kernel});
    node.bias = Tensor({out_channels});
    node.weight_grad = Tensor({out_channels, cin, kernel, kernel});
    node.bias_grad = Tensor({out_channels});
    node.input_shape = prev;
    node.output_shape = {out_channels, ho, wo};
    return push_layer(std::move(node));
}

int Network::add_relu() {
    if (input_shape_.empty()) throw ConfigError("set_input_shape before adding layers");
    LayerNode node;
    node.kind = LayerKind::Relu;
    node.input_shape = layers_.empty() ? input_shape_ : layers_.back().output_shape;
    node.output_shape = node.input_shape;
    return push_layer(std::move(node));
}

int Network::add_flatten() {
    if (input_shape_.empty()) throw ConfigError("set_input_shape before adding layers");
    LayerNode node;
    node.kind = LayerKind::Flatten;
    node.input_shape = layers_.empty() ? input_shape_ : layers_.back().output_shape;
    node.output_shape = {static_cast<int>(numel(node.input_shape))};
    return push_layer(std::move(node));
}

int Network::add_residual_add(int source_layer_id) {
    if (input_shape_.empty()) throw ConfigError("set_input_shape before adding layers");
    if (layers_.empty()) throw ConfigError("residual-add cannot be the first layer");
    if (source_layer_id < 0 || source_layer_id >= static_cast<int>(layers_.size()) - 1) {
        throw ConfigError("residual-add source " + std::to_string(source_layer_id) +
                          " must name an earlier layer");
    }
    LayerNode node;
    node.kind = LayerKind::ResidualAdd;
    node.residual_source = source_layer_id;
    node.input_shape = layers_.back().output_shape;
    node.output_shape = node.input_shape;
    const auto& src_shape = layers_[static_cast<std::size_t>(source_layer_id)].output_shape;
    if (src_shape != node.input_shape) {
        throw ShapeError("residual-add layer " + std::to_string(layers_.size()) + ": source yields " +
                         shape_to_string(src_shape) + ", main path yields " +
                         shape_to_string(node.input_shape));
    }
    return push_layer(std::move(node));
}

void Network::init_weights(RngStream rng) {
    for (int id : param_layer_ids_) {
        LayerNode& node = layers_[static_cast<std::size_t>(id)];
        std::size_t fan_in = numel(node.input_shape);
        if (node.kind == LayerKind::Conv2d) {
            fan_in = static_cast<std::size_t>(node.weights.dim(1)) * node.weights.dim(2) *
                     node.weights.dim(3);
        }
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < node.weights.size(); ++i) {
            node.weights[i] = rng.normal() * std_dev;
        }
        node.bias.fill(0.0);
    }
}

const std::vector<int>& Network::output_shape() const {
    if (layers_.empty()) throw ConfigError("network has no layers");
    return layers_.back().output_shape;
}

Tensor Network::forward(const Tensor& x) {
    if (layers_.empty()) throw ConfigError("network has no layers");
    if (x.rank() < 2) {
        throw ShapeError("forward expects a batched input, got " + shape_to_string(x.shape()));
    }
    const int batch = x.dim(0);
    {
        std::vector<int> per_sample(x.shape().begin() + 1, x.shape().end());
        if (per_sample != input_shape_) {
            throw ShapeError("forward: input " + shape_to_string(x.shape()) +
                             " does not match network input " + shape_to_string(input_shape_));
        }
    }
    outputs_.assign(layers_.size(), Tensor{});
    const Tensor* current = &x;
    for (LayerNode& node : layers_) {
        {
            std::vector<int> per_sample(current->shape().begin() + 1, current->shape().end());
            if (per_sample != node.input_shape) {
                throw ShapeError(layer_label(node) + ": expected input " +
                                 shape_to_string(node.input_shape) + ", got " +
                                 shape_to_string(per_sample));
            }
        }
        node.cached_input = *current;
        Tensor out;
        switch (node.kind) {
            case LayerKind::Dense: {
                out = matmul(*current, node.weights);
                const int cols = out.dim(1);
                for (int r = 0; r < out.dim(0); ++r)
                    for (int c = 0; c < cols; ++c) out.at2(r, c) += node.bias[static_cast<std::size_t>(c)];
                break;
            }
            case LayerKind::Conv2d:
                out = conv2d(*current, node.weights, node.bias, node.pad);
                break;
            case LayerKind::Relu: {
                out = *current;
                for (std::size_t i = 0; i < out.size(); ++i)
                    if (out[i] < 0.0) out[i] = 0.0;
                break;
            }
            case LayerKind::Flatten:
                out = current->reshaped(batched(node.output_shape, batch));
                break;
            case LayerKind::ResidualAdd:
                out = add(*current, outputs_[static_cast<std::size_t>(node.residual_source)]);
                break;
        }
        outputs_[static_cast<std::size_t>(node.id)] = std::move(out);
        current = &outputs_[static_cast<std::size_t>(node.id)];
    }
    forward_done_ = true;
    dx_done_ = false;
    return *current;
}

Tensor Network::backward_activations(const Tensor& loss_grad) {
    if (!forward_done_) {
        throw ConfigError("backward_activations requires a preceding forward on this step");
    }
    if (!loss_grad.same_shape(outputs_.back())) {
        throw ShapeError("loss gradient " + shape_to_string(loss_grad.shape()) +
                         " does not match network output " +
                         shape_to_string(outputs_.back().shape()));
    }
    grad_output_.assign(layers_.size(), Tensor{});
    grad_output_.back() = loss_grad;
    Tensor input_grad;
    auto deposit = [](Tensor& slot, const Tensor& g) {
        if (slot.empty()) {
            slot = g;
        } else {
            add_inplace(slot, g);
        }
    };
    for (int id = static_cast<int>(layers_.size()) - 1; id >= 0; --id) {
        LayerNode& node = layers_[static_cast<std::size_t>(id)];
        const Tensor& gout = grad_output_[static_cast<std::size_t>(id)];
        Tensor gin;
        switch (node.kind) {
            case LayerKind::Dense:
                gin = matmul_nt(gout, node.weights);
                break;
            case LayerKind::Conv2d:
                gin = conv2d_grad_input(gout, node.weights, node.cached_input.shape(), node.pad);
                break;
            case LayerKind::Relu: {
                gin = gout;
                const Tensor& xin = node.cached_input;
                for (std::size_t i = 0; i < gin.size(); ++i)
                    if (xin[i] <= 0.0) gin[i] = 0.0;
                break;
            }
            case LayerKind::Flatten:
                gin = gout.reshaped(node.cached_input.shape());
                break;
            case LayerKind::ResidualAdd:
                gin = gout;
                deposit(grad_output_[static_cast<std::size_t>(node.residual_source)], gout);
                break;
        }
        if (id == 0) {
            input_grad = std::move(gin);
        } else {
            deposit(grad_output_[static_cast<std::size_t>(id - 1)], gin);
        }
    }
    dx_done_ = true;
    return input_grad;
}

void Network::backward_weights(const std::vector<int>& selected) {
    if (!dx_done_) {
        throw ConfigError("backward_weights requires backward_activations on this step");
    }
    for (int id : selected) {
        if (id < 0 || id >= static_cast<int>(layers_.size()) ||
            !layers_[static_cast<std::size_t>(id)].parameterized()) {
            throw ConfigError("selected set contains id " + std::to_string(id) +
                              ", which is not a parameterized layer");
        }
    }
    for (int id : param_layer_ids_) {
        layers_[static_cast<std::size_t>(id)].weight_grad.fill(0.0);
        layers_[static_cast<std::size_t>(id)].bias_grad.fill(0.0);
    }
    for (int id : selected) {
        LayerNode& node = layers_[static_cast<std::size_t>(id)];
        const Tensor& gout = grad_output_[static_cast<std::size_t>(id)];
        if (node.kind == LayerKind::Dense) {
            node.weight_grad = matmul_tn(node.cached_input, gout);
            node.bias_grad.fill(0.0);
            const int rows = gout.dim(0), cols = gout.dim(1);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) node.bias_grad[static_cast<std::size_t>(c)] += gout.at2(r, c);
        } else {
            conv2d_grad_params(node.cached_input, gout, node.pad, node.weight_grad, node.bias_grad);
        }
    }
    clear_step_cache();
}

void Network::backward_selective(const Tensor& loss_grad, const std::vector<int>& selected) {
    backward_activations(loss_grad);
    backward_weights(selected);
}

void Network::clear_step_cache() {
    for (LayerNode& node : layers_) node.cached_input = Tensor{};
    outputs_.clear();
    grad_output_.clear();
    forward_done_ = false;
    dx_done_ = false;
}

std::pair<double, Tensor> cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("cross_entropy_loss expects rank-2 logits, got " +
                         shape_to_string(logits.shape()));
    }
    const int batch = logits.dim(0), classes = logits.dim(1);
    if (static_cast<std::size_t>(batch) != labels.size()) {
        throw DataError("cross_entropy_loss: " + std::to_string(batch) + " logit rows vs " +
                        std::to_string(labels.size()) + " labels");
    }
    Tensor grad({batch, classes});
    double loss = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (int r = 0; r < batch; ++r) {
        const int label = labels[static_cast<std::size_t>(r)];
        if (label < 0 || label >= classes) {
            throw DataError("label " + std::to_string(label) + " out of range for " +
                            std::to_string(classes) + " classes (row " + std::to_string(r) + ")");
        }
        double rmax = logits.at2(r, 0);
        for (int c = 1; c < classes; ++c) rmax = std::max(rmax, logits.at2(r, c));
        double denom = 0.0;
        for (int c = 0; c < classes; ++c) denom += std::exp(logits.at2(r, c) - rmax);
        const double log_denom = std::log(denom);
        loss += (log_denom - (logits.at2(r, label) - rmax)) * inv_batch;
        for (int c = 0; c < classes; ++c) {
            double p = std::exp(logits.at2(r, c) - rmax) / denom;
            grad.at2(r, c) = (p - (c == label ? 1.0 : 0.0)) * inv_batch;
        }
    }
    return {loss, std::move(grad)};
}

Network build_preset(const std::string& name, const std::vector<int>& input_shape, int classes,
                     int width) {
    if (classes < 2) throw ConfigError("preset needs at least 2 classes");
    Network net;
    net.set_input_shape(input_shape);
    if (name == "mlp-8") {
        const int hidden = width > 0 ? width : 128;
        int in = static_cast<int>(
            std::accumulate(input_shape.begin(), input_shape.end(), 1, std::multiplies<int>()));
        if (input_shape.size() > 1) net.add_flatten();
        for (int i = 0; i < 7; ++i) {
            net.add_dense(i == 0 ? in : hidden, hidden);
            net.add_relu();
        }
        net.add_dense(hidden, classes);
        return net;
    }
    if (name == "cnn-small") {
        if (input_shape.size() != 3) {
            throw ConfigError("cnn-small needs a (c, h, w) input shape, got " +
                              shape_to_string(input_shape));
        }
        const int hidden = width > 0 ? width : 32;
        const int channels = 8;
        net.add_conv2d(channels, 3, 1);
        net.add_relu();
        net.add_conv2d(channels, 3, 1);
        net.add_relu();
        net.add_flatten();
        net.add_dense(channels * input_shape[1] * input_shape[2], hidden);
        net.add_relu();
        net.add_dense(hidden, classes);
        return net;
    }
    if (name == "resnet-toy") {
        if (input_shape.size() != 3) {
            throw ConfigError("resnet-toy needs a (c, h, w) input shape, got " +
                              shape_to_string(input_shape));
        }
        const int channels = width > 0 ? width : 8;
        net.add_conv2d(channels, 3, 1);
        const int trunk = net.add_relu();
        net.add_conv2d(channels, 3, 1);
        net.add_relu();
        net.add_conv2d(channels, 3, 1);
        net.add_residual_add(trunk);
        net.add_relu();
        net.add_flatten();
        net.add_dense(channels * input_shape[1] * input_shape[2], classes);
        return net;
    }
    throw ConfigError("unknown preset \"" + name + "\" (expected mlp-8, cnn-small or resnet-toy)");
}

// --- checkpoint I/O -------------------------------------------------------
//
// Flat binary file: magic "LDBCKPT1", then u32 parameterized-layer count,
// then per parameterized layer: u32 id, u32 weight rank, u32 dims...,
// f64 weight data..., u32 bias rank, u32 dims..., f64 bias data....
// All integers and floats little-endian.

namespace {

constexpr char kMagic[8] = {'L', 'D', 'B', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void require(std::size_t n) const {
        if (pos + n > buf.size()) {
            throw FormatError("checkpoint truncated at byte offset " + std::to_string(pos) +
                              " (need " + std::to_string(n) + " more bytes)");
        }
    }
    std::uint32_t u32() {
        require(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        require(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(v);
    }
};

void put_tensor(std::string& out, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) put_u32(out, static_cast<std::uint32_t>(t.dim(i)));
    for (std::size_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
}

void read_tensor_into(ByteReader& r, Tensor& t, int layer_id, const char* what) {
    const std::uint32_t rank = r.u32();
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.u32());
    if (shape != t.shape()) {
        throw FormatError("checkpoint layer " + std::to_string(layer_id) + ": " + what + " shape " +
                          shape_to_string(shape) + " does not match network " +
                          shape_to_string(t.shape()));
    }
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.f64();
}

} // namespace

void Network::save_checkpoint(const std::filesystem::path& path) const {
    std::string buf;
    buf.append(kMagic, sizeof(kMagic));
    put_u32(buf, static_cast<std::uint32_t>(param_layer_ids_.size()));
    for (int id : param_layer_ids_) {
        const LayerNode& node = layers_[static_cast<std::size_t>(id)];
        put_u32(buf, static_cast<std::uint32_t>(id));
        put_tensor(buf, node.weights);
        put_tensor(buf, node.bias);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(buf.data(), static_cast<std::streamsize>(buf.size()))) {
        throw IoError("cannot write checkpoint " + path.string());
    }
}

void Network::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ByteReader r{buf};
    r.require(sizeof(kMagic));
    if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("bad checkpoint magic at byte offset 0 in " + path.string());
    }
    r.pos = sizeof(kMagic);
    const std::uint32_t count = r.u32();
    if (count != param_layer_ids_.size()) {
        throw FormatError("checkpoint has " + std::to_string(count) +
                          " parameterized layers, network has " +
                          std::to_string(param_layer_ids_.size()));
    }
    for (int id : param_layer_ids_) {
        const std::uint32_t file_id = r.u32();
        if (file_id != static_cast<std::uint32_t>(id)) {
            throw FormatError("checkpoint layer id " + std::to_string(file_id) +
                              " does not match network layer " + std::to_string(id));
        }
        LayerNode& node = layers_[static_cast<std::size_t>(id)];
        read_tensor_into(r, node.weights, id, "weight");
        read_tensor_into(r, node.bias, id, "bias");
    }
    if (r.pos != buf.size()) {
        throw FormatError("checkpoint has " + std::to_string(buf.size() - r.pos) +
                          " trailing bytes at offset " + std::to_string(r.pos));
    }
}

} // namespace ldb
