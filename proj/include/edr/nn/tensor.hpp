#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace edr::nn {

/// Dense (batch, channels, length) array, length-major within a channel.
template <typename T>
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t batch, std::size_t channels, std::size_t length, T fill = T(0))
        : batch_(batch), channels_(channels), length_(length), data_(batch * channels * length, fill) {
        if (length == 0) throw std::invalid_argument("Tensor3 length must be positive");
    }
    Tensor3(std::size_t batch, std::size_t channels, std::size_t length, std::vector<T> values)
        : batch_(batch), channels_(channels), length_(length), data_(std::move(values)) {
        if (length == 0) throw std::invalid_argument("Tensor3 length must be positive");
        if (data_.size() != batch * channels * length) throw std::invalid_argument("Tensor3 buffer size mismatch");
    }

    /// Reshape, keeping capacity; contents are unspecified afterwards.
    void resize(std::size_t batch, std::size_t channels, std::size_t length) {
        if (length == 0) throw std::invalid_argument("Tensor3 length must be positive");
        batch_ = batch;
        channels_ = channels;
        length_ = length;
        data_.resize(batch * channels * length);
    }
    void zero() { std::fill(data_.begin(), data_.end(), T(0)); }

    std::size_t batch() const { return batch_; }
    std::size_t channels() const { return channels_; }
    std::size_t length() const { return length_; }
    std::size_t size() const { return data_.size(); }

    T& operator()(std::size_t b, std::size_t c, std::size_t l) { return data_[(b * channels_ + c) * length_ + l]; }
    T operator()(std::size_t b, std::size_t c, std::size_t l) const { return data_[(b * channels_ + c) * length_ + l]; }

    std::span<T> row(std::size_t b, std::size_t c) { return {data_.data() + (b * channels_ + c) * length_, length_}; }
    std::span<const T> row(std::size_t b, std::size_t c) const {
        return {data_.data() + (b * channels_ + c) * length_, length_};
    }
    /// All channels of one example.
    std::span<T> example(std::size_t b) { return {data_.data() + b * channels_ * length_, channels_ * length_}; }
    std::span<const T> example(std::size_t b) const {
        return {data_.data() + b * channels_ * length_, channels_ * length_};
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    bool same_shape(const Tensor3& o) const {
        return batch_ == o.batch_ && channels_ == o.channels_ && length_ == o.length_;
    }

private:
    std::size_t batch_ = 0;
    std::size_t channels_ = 0;
    std::size_t length_ = 0;
    std::vector<T> data_;
};

}  // namespace edr::nn
