#include "uasrl/algos/replay.hpp"

namespace uasrl::algos {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractError("ReplayBuffer: capacity must be >= 1");
    episodes_.reserve(capacity);
}

void ReplayBuffer::add(envs::EpisodeBatch episode) {
    episode.validate(); // only complete episodes are stored
    if (episodes_.size() < capacity_) {
        episodes_.push_back(std::move(episode));
    } else {
        episodes_[next_] = std::move(episode);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<const envs::EpisodeBatch*> ReplayBuffer::sample(std::size_t batch_size,
                                                            grad::Rng& rng) const {
    if (batch_size > episodes_.size()) {
        throw ContractError("ReplayBuffer::sample: batch larger than stored episodes");
    }
    // partial Fisher-Yates over an index array: uniform without replacement
    std::vector<std::size_t> idx(episodes_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<const envs::EpisodeBatch*> out;
    out.reserve(batch_size);
    for (std::size_t k = 0; k < batch_size; ++k) {
        const std::size_t j = k + rng.uniform_index(idx.size() - k);
        std::swap(idx[k], idx[j]);
        out.push_back(&episodes_[idx[k]]);
    }
    return out;
}

} // namespace uasrl::algos
