#ifndef CASCADE_REPLAY_BUFFER_HPP
#define CASCADE_REPLAY_BUFFER_HPP

#include <cstddef>
#include <cstdint>
#include <deque>
#include <numeric>
#include <vector>

#include "cascade/errors.hpp"
#include "cascade/random.hpp"

namespace cascade {

/// FIFO cache of expert-labelled items. A minibatch becomes due once
/// batch_size items arrived since the last consume().
template <typename T>
class ReplayCache {
public:
    ReplayCache(std::size_t capacity, std::size_t batch_size) : capacity_(capacity), batch_size_(batch_size)
    {
        require(batch_size >= 1, "batch size must be >= 1");
        require(capacity >= batch_size, "cache size must be >= batch size");
    }

    void push(T item)
    {
        if (items_.size() == capacity_) items_.pop_front();
        items_.push_back(std::move(item));
        ++fresh_;
        ++total_;
    }

    bool ready() const { return fresh_ >= batch_size_; }

    /// batch_size distinct entries, uniformly chosen.
    std::vector<T> sample(Rng& rng) const
    {
        require(items_.size() >= batch_size_, "not enough cached items for a minibatch");
        std::vector<std::size_t> idx(items_.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::vector<T> batch;
        batch.reserve(batch_size_);
        for (std::size_t k = 0; k < batch_size_; ++k) {
            const auto j = k + static_cast<std::size_t>(uniform_index(rng, idx.size() - k));
            std::swap(idx[k], idx[j]);
            batch.push_back(items_[idx[k]]);
        }
        return batch;
    }

    void consume() { fresh_ = 0; }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::size_t batch_size() const { return batch_size_; }
    std::uint64_t total_pushed() const { return total_; }
    const std::deque<T>& items() const { return items_; }

private:
    std::size_t capacity_;
    std::size_t batch_size_;
    std::deque<T> items_;
    std::size_t fresh_ = 0;
    std::uint64_t total_ = 0;
};

} // namespace cascade

#endif // CASCADE_REPLAY_BUFFER_HPP
