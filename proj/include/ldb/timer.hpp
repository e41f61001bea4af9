#pragma once

#include <array>
#include <chrono>
#include <cstdint>

#include "ldb/error.hpp"

namespace ldb {

enum class Phase { Forward = 0, BackwardDx, BackwardDw, Update, Eval };

constexpr std::size_t kPhaseCount = 5;

/// Wall-clock accumulators for the training phases, fed by RAII scopes
/// around the trainer call sites. Phases never overlap within one step;
/// glue between them is deliberately untimed.
class PhaseTimer {
public:
    class Scope {
    public:
        Scope(PhaseTimer& timer, Phase phase)
            : timer_(timer), phase_(phase), start_(std::chrono::steady_clock::now()) {}
        ~Scope() noexcept(false) {
            const auto end = std::chrono::steady_clock::now();
            if (end < start_) {
                throw MeasurementError("monotonic clock went backwards");
            }
            timer_.add(phase_, std::chrono::duration_cast<std::chrono::nanoseconds>(end - start_).count());
        }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        PhaseTimer& timer_;
        Phase phase_;
        std::chrono::steady_clock::time_point start_;
    };

    Scope measure(Phase phase) { return Scope(*this, phase); }

    void add(Phase phase, std::int64_t ns) {
        auto& bucket = buckets_[static_cast<std::size_t>(phase)];
        bucket.ns += ns;
        bucket.count += 1;
    }

    std::int64_t nanos(Phase phase) const {
        return buckets_[static_cast<std::size_t>(phase)].ns;
    }
    std::int64_t count(Phase phase) const {
        return buckets_[static_cast<std::size_t>(phase)].count;
    }
    double millis(Phase phase) const { return static_cast<double>(nanos(phase)) / 1e6; }

    /// forward + backward_dx + backward_dw + update; evaluation excluded.
    std::int64_t train_nanos() const {
        return nanos(Phase::Forward) + nanos(Phase::BackwardDx) + nanos(Phase::BackwardDw) +
               nanos(Phase::Update);
    }

    void reset() { buckets_ = {}; }

private:
    struct Bucket {
        std::int64_t ns = 0;
        std::int64_t count = 0;
    };
    std::array<Bucket, kPhaseCount> buckets_{};
};

} // namespace ldb
