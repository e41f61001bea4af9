#include "ldb/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "ldb/error.hpp"
#include "ldb/rng.hpp"

namespace ldb {

namespace {

// Child-stream tags for the per-dataset seed.
constexpr std::uint64_t kTagCenters = 1;
constexpr std::uint64_t kTagNoise = 2;
constexpr std::uint64_t kTagSplit = 3;
constexpr std::uint64_t kTagShuffle = 4;

std::vector<std::uint32_t> permutation(std::size_t n, RngStream rng) {
    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(order[i], order[j]);
    }
    return order;
}

void assign_split(Dataset& ds, double val_fraction, RngStream rng) {
    const std::size_t n = ds.size();
    auto order = permutation(n, rng);
    const std::size_t val_count = static_cast<std::size_t>(std::llround(val_fraction * n));
    ds.val_indices.assign(order.begin(), order.begin() + val_count);
    ds.train_indices.assign(order.begin() + val_count, order.end());
    std::sort(ds.val_indices.begin(), ds.val_indices.end());
    std::sort(ds.train_indices.begin(), ds.train_indices.end());
}

} // namespace

std::vector<int> Dataset::feature_shape() const {
    return {features.shape().begin() + 1, features.shape().end()};
}

Dataset synth_blobs(int n, int classes, int dim, double noise_sigma, std::uint64_t seed) {
    if (classes < 2) throw ConfigError("synth_blobs needs at least 2 classes");
    if (n < classes) throw ConfigError("synth_blobs needs n >= classes");
    if (dim < 1) throw ConfigError("synth_blobs needs dim >= 1");
    if (noise_sigma < 0.0) throw ConfigError("synth_blobs needs noise_sigma >= 0");

    RngStream root(seed);

    // Cluster centers on coordinate axes, magnitudes staggered so classes
    // sharing an axis stay apart, plus a small seeded jitter.
    RngStream center_rng = root.derive(kTagCenters);
    Tensor centers({classes, dim});
    for (int c = 0; c < classes; ++c) {
        const int axis = c % dim;
        const double sign = ((c / dim) % 2 == 0) ? 1.0 : -1.0;
        const double magnitude = 4.0 * (1.0 + static_cast<double>(c / (2 * dim)));
        centers.at2(c, axis) = sign * magnitude;
        for (int j = 0; j < dim; ++j) centers.at2(c, j) += 0.25 * center_rng.normal();
    }

    RngStream noise_rng = root.derive(kTagNoise);
    Tensor features({n, dim});
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int label = i % classes;
        labels[static_cast<std::size_t>(i)] = label;
        for (int j = 0; j < dim; ++j) {
            features[static_cast<std::size_t>(i) * dim + j] =
                centers.at2(label, j) + noise_sigma * noise_rng.normal();
        }
    }

    Dataset ds;
    ds.features = std::move(features);
    ds.labels = std::move(labels);
    ds.num_classes = classes;
    ds.shuffle_seed = root.derive(kTagShuffle).seed();
    assign_split(ds, 0.2, root.derive(kTagSplit));
    return ds;
}

// --- IDX ------------------------------------------------------------------

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803; // ubyte, 3 dimensions
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801; // ubyte, 1 dimension

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t idx_u32(const std::string& buf, std::size_t offset, const std::filesystem::path& path) {
    if (offset + 4 > buf.size()) {
        throw FormatError(path.string() + ": truncated at byte offset " + std::to_string(offset));
    }
    // IDX headers are big-endian.
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + 3]));
}

} // namespace

Dataset load_idx_images(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
    const std::string img = read_file(images_path);
    const std::string lab = read_file(labels_path);

    if (idx_u32(img, 0, images_path) != kIdxImagesMagic) {
        throw FormatError(images_path.string() + ": bad IDX image magic at byte offset 0");
    }
    const std::uint32_t count = idx_u32(img, 4, images_path);
    const std::uint32_t rows = idx_u32(img, 8, images_path);
    const std::uint32_t cols = idx_u32(img, 12, images_path);
    const std::size_t pixels = static_cast<std::size_t>(count) * rows * cols;
    if (img.size() != 16 + pixels) {
        throw FormatError(images_path.string() + ": expected " + std::to_string(16 + pixels) +
                          " bytes, got " + std::to_string(img.size()) +
                          " (truncated at byte offset " + std::to_string(img.size()) + ")");
    }

    if (idx_u32(lab, 0, labels_path) != kIdxLabelsMagic) {
        throw FormatError(labels_path.string() + ": bad IDX label magic at byte offset 0");
    }
    const std::uint32_t label_count = idx_u32(lab, 4, labels_path);
    if (lab.size() != 8 + label_count) {
        throw FormatError(labels_path.string() + ": expected " + std::to_string(8 + label_count) +
                          " bytes, got " + std::to_string(lab.size()) +
                          " (truncated at byte offset " + std::to_string(lab.size()) + ")");
    }
    if (label_count != count) {
        throw DataError("label count " + std::to_string(label_count) + " does not match image count " +
                        std::to_string(count));
    }

    Dataset ds;
    ds.features = Tensor({static_cast<int>(count), 1, static_cast<int>(rows), static_cast<int>(cols)});
    ds.labels.resize(count);
    int max_label = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const int label = static_cast<unsigned char>(lab[8 + i]);
        ds.labels[i] = label;
        max_label = std::max(max_label, label);
    }
    ds.num_classes = max_label + 1;
    for (std::size_t i = 0; i < pixels; ++i) {
        ds.features[i] = static_cast<unsigned char>(img[16 + i]) / 255.0;
    }
    ds.shuffle_seed = 0;
    assign_split(ds, 0.2, RngStream(0).derive(kTagSplit));
    return ds;
}

// --- CSV ------------------------------------------------------------------

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

double parse_double(const std::string& field, std::size_t line_no, const std::filesystem::path& path) {
    double v = 0.0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number \"" + field +
                          "\"");
    }
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

} // namespace

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header row");
    const auto header = split_csv_line(line);
    int label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "label") label_col = static_cast<int>(i);
    }
    if (label_col < 0) throw FormatError(path.string() + ": no column named \"label\"");
    const int dim = static_cast<int>(header.size()) - 1;
    if (dim < 1) throw FormatError(path.string() + ": no feature columns");

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        }
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (static_cast<int>(i) == label_col) {
                labels.push_back(static_cast<int>(parse_double(fields[i], line_no, path)));
            } else {
                values.push_back(parse_double(fields[i], line_no, path));
            }
        }
    }
    if (labels.empty()) throw FormatError(path.string() + ": no data rows");

    Dataset ds;
    ds.features = Tensor({static_cast<int>(labels.size()), dim}, std::move(values));
    ds.num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
    for (int label : labels) {
        if (label < 0) throw DataError(path.string() + ": negative label " + std::to_string(label));
    }
    ds.labels = std::move(labels);
    ds.shuffle_seed = 0;
    assign_split(ds, 0.2, RngStream(0).derive(kTagSplit));
    return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    const auto shape = ds.feature_shape();
    std::size_t dim = 1;
    for (int d : shape) dim *= static_cast<std::size_t>(d);
    for (std::size_t j = 0; j < dim; ++j) out << 'f' << j << ',';
    out << "label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            out << format_double(ds.features[i * dim + j]) << ',';
        }
        out << ds.labels[i] << '\n';
    }
    if (!out) throw IoError("cannot write " + path.string());
}

void standardize(Dataset& ds, const std::vector<double>& mean, const std::vector<double>& stddev) {
    const auto shape = ds.feature_shape();
    const std::size_t channels = mean.size();
    if (channels == 0 || stddev.size() != channels) {
        throw ConfigError("standardize needs matching nonempty mean/std lists");
    }
    for (double s : stddev) {
        if (!(s > 0.0)) throw ConfigError("standardize needs positive std values");
    }
    // Channel = leading per-sample dimension; flat features are one channel.
    const std::size_t declared = shape.size() >= 2 ? static_cast<std::size_t>(shape[0]) : 1;
    if (declared != channels) {
        throw ConfigError("standardize got " + std::to_string(channels) + " channels, data has " +
                          std::to_string(declared));
    }
    std::size_t per_sample = 1;
    for (int d : shape) per_sample *= static_cast<std::size_t>(d);
    const std::size_t per_channel = per_sample / channels;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
            double* p = ds.features.data() + i * per_sample + c * per_channel;
            for (std::size_t k = 0; k < per_channel; ++k) p[k] = (p[k] - mean[c]) / stddev[c];
        }
    }
}

// --- batching ---------------------------------------------------------------

Batcher::Batcher(const Dataset& ds, Split split, int batch_size, int epoch)
    : ds_(ds), batch_size_(batch_size) {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    const auto& indices = ds.split_indices(split);
    if (indices.empty()) throw DataError("requested split is empty");
    // The permutation depends on (shuffle_seed, epoch) only, so changing
    // the batch size changes chunking but never the underlying order.
    RngStream rng = RngStream(ds.shuffle_seed).derive(kTagShuffle).derive(static_cast<std::uint64_t>(epoch));
    const auto perm = permutation(indices.size(), rng);
    order_.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) order_[i] = indices[perm[i]];
}

std::size_t Batcher::batch_count() const {
    return (order_.size() + static_cast<std::size_t>(batch_size_) - 1) /
           static_cast<std::size_t>(batch_size_);
}

Batch Batcher::get(std::size_t i) const {
    const std::size_t begin = i * static_cast<std::size_t>(batch_size_);
    if (begin >= order_.size()) throw InternalError("batch index out of range");
    const std::size_t end = std::min(order_.size(), begin + static_cast<std::size_t>(batch_size_));
    const std::size_t count = end - begin;
    const auto shape = ds_.feature_shape();
    std::size_t per_sample = 1;
    for (int d : shape) per_sample *= static_cast<std::size_t>(d);
    std::vector<int> batch_shape;
    batch_shape.push_back(static_cast<int>(count));
    batch_shape.insert(batch_shape.end(), shape.begin(), shape.end());
    Batch batch;
    batch.features = Tensor(std::move(batch_shape));
    batch.labels.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t row = order_[begin + k];
        std::copy_n(ds_.features.data() + row * per_sample, per_sample,
                    batch.features.data() + k * per_sample);
        batch.labels[k] = ds_.labels[row];
    }
    return batch;
}

BatchStream::BatchStream(const Dataset& ds, Split split, int batch_size, int epoch, bool prefetch)
    : batcher_(ds, split, batch_size, epoch), prefetch_(prefetch) {
    if (!prefetch_) return;
    worker_ = std::thread([this] {
        for (std::size_t i = 0; i < batcher_.batch_count(); ++i) {
            Batch b = batcher_.get(i);
            std::unique_lock lock(mutex_);
            slot_cv_.wait(lock, [this] { return !slot_.has_value() || stop_; });
            if (stop_) return;
            slot_ = std::move(b);
            ++produced_;
            ready_cv_.notify_one();
        }
    });
}

BatchStream::~BatchStream() {
    if (prefetch_) {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        slot_cv_.notify_one();
        worker_.join();
    }
}

std::optional<Batch> BatchStream::next() {
    if (cursor_ >= batcher_.batch_count()) return std::nullopt;
    ++cursor_;
    if (!prefetch_) {
        return batcher_.get(cursor_ - 1);
    }
    std::unique_lock lock(mutex_);
    ready_cv_.wait(lock, [this] { return slot_.has_value(); });
    std::optional<Batch> out = std::move(slot_);
    slot_.reset();
    slot_cv_.notify_one();
    return out;
}

int prefetch_threads_from_env() {
    const char* value = std::getenv("LDB_THREADS");
    if (value == nullptr || *value == '\0') return 1;
    char* end = nullptr;
    const long parsed = std::strtol(value, &end, 10);
    if (end == value || *end != '\0' || parsed < 0) {
        throw ConfigError("LDB_THREADS must be a nonnegative integer, got \"" + std::string(value) +
                          "\"");
    }
    return static_cast<int>(parsed);
}

} // namespace ldb
