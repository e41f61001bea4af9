#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "ldb/tensor.hpp"

namespace ldb {

enum class Split { Train, Val };

struct Batch {
    Tensor features; // (batch, per-sample shape...)
    std::vector<int> labels;
};

/// Immutable labeled dataset with a deterministic train/val assignment.
struct Dataset {
    Tensor features; // (n, per-sample shape...)
    std::vector<int> labels;
    int num_classes = 0;
    std::vector<std::uint32_t> train_indices;
    std::vector<std::uint32_t> val_indices;
    std::uint64_t shuffle_seed = 0;

    std::size_t size() const { return labels.size(); }
    const std::vector<std::uint32_t>& split_indices(Split split) const {
        return split == Split::Train ? train_indices : val_indices;
    }
    std::vector<int> feature_shape() const; // per-sample
};

/// Gaussian clusters, one per class, deterministic from seed; 80/20
/// train/val split.
Dataset synth_blobs(int n, int classes, int dim, double noise_sigma, std::uint64_t seed);

/// IDX image/label file pair (the MNIST container format). Pixels are
/// scaled to [0,1]; features come out as (n, 1, rows, cols).
Dataset load_idx_images(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

/// CSV with a header row; the label column is named "label", every other
/// column is a feature. Doubles are parsed/printed in shortest round-trip
/// form, so save followed by load is element-exact.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& ds, const std::filesystem::path& path);

/// In-place per-channel standardization with user-supplied constants.
void standardize(Dataset& ds, const std::vector<double>& mean, const std::vector<double>& stddev);

/// Deterministic permutation of a split chunked into batches. The
/// permutation depends only on (shuffle_seed, epoch), never on the batch
/// size, and the final short batch is kept.
class Batcher {
public:
    Batcher(const Dataset& ds, Split split, int batch_size, int epoch);

    std::size_t batch_count() const;
    Batch get(std::size_t i) const;
    const std::vector<std::uint32_t>& order() const { return order_; }

private:
    const Dataset& ds_;
    std::vector<std::uint32_t> order_;
    int batch_size_;
};

/// Sequential view over a Batcher. With prefetch enabled one background
/// thread prepares the next batch while the current one is consumed; batch
/// order and contents are identical either way.
class BatchStream {
public:
    BatchStream(const Dataset& ds, Split split, int batch_size, int epoch, bool prefetch);
    ~BatchStream();

    BatchStream(const BatchStream&) = delete;
    BatchStream& operator=(const BatchStream&) = delete;

    std::size_t batch_count() const { return batcher_.batch_count(); }
    /// Next batch, or nullopt when the epoch is exhausted.
    std::optional<Batch> next();

private:
    Batcher batcher_;
    std::size_t cursor_ = 0;
    bool prefetch_;
    std::thread worker_;
    std::mutex mutex_;
    std::condition_variable ready_cv_;
    std::condition_variable slot_cv_;
    std::optional<Batch> slot_;
    std::size_t produced_ = 0;
    bool stop_ = false;
};

/// Number of prefetch workers allowed by the LDB_THREADS environment
/// variable (0 or 1 means synchronous batching).
int prefetch_threads_from_env();

} // namespace ldb
