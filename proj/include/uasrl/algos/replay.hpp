#pragma once

#include <vector>

#include "uasrl/envs/episode.hpp"
#include "uasrl/grad/random.hpp"

namespace uasrl::algos {

/// Ring buffer of complete episodes; batches sample uniformly without
/// replacement within one draw.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void add(envs::EpisodeBatch episode);

    std::size_t size() const { return episodes_.size(); }
    std::size_t capacity() const { return capacity_; }

    std::vector<const envs::EpisodeBatch*> sample(std::size_t batch_size, grad::Rng& rng) const;

    const envs::EpisodeBatch& at(std::size_t i) const { return episodes_[i]; }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<envs::EpisodeBatch> episodes_;
};

} // namespace uasrl::algos
