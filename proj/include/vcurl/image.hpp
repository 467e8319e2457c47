#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vcurl {

/// Dense row-major single-channel image.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& at(int r, int c) noexcept { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& at(int r, int c) const noexcept {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  std::span<T> row(int r) noexcept {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<const T> row(int r) const noexcept {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  bool same_shape(const Image& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
  template <typename U>
  bool same_shape(const Image<U>& o) const noexcept {
    return rows_ == o.rows() && cols_ == o.cols();
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using GrayFrame = Image<std::uint8_t>;
using FloatImage = Image<float>;

/// Interleaved 8-bit RGB image (3 bytes per pixel).
struct RgbImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> data;
};

}  // namespace vcurl
