#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "vcurl/error.hpp"
#include "vcurl/image.hpp"
#include "vcurl/kernels.hpp"
#include "vcurl/random.hpp"
#include "vcurl/visual.hpp"

namespace vcurl::testing {

namespace fs = std::filesystem;

/// Code of the vcurl::Error thrown by fn, or nullopt when none is thrown.
template <class Fn>
std::optional<Errc> error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Smooth random texture: white noise blurred with a Gaussian, stretched to 0..255.
inline FloatImage random_texture(int rows, int cols, std::uint64_t seed, double sigma = 1.5) {
  Rng rng = derive_rng(seed, 0x7e);
  FloatImage noise(rows, cols);
  for (auto& p : noise.pixels()) p = static_cast<float>(uniform01(rng));
  const auto taps = kernels::gaussian_kernel(sigma);
  auto smooth = kernels::separable_filter(noise, taps, ExecPolicy::serial);
  const auto [lo, hi] = std::minmax_element(smooth.pixels().begin(), smooth.pixels().end());
  const float a = *lo, b = *hi;
  for (auto& p : smooth.pixels()) p = 255.0f * (p - a) / (b - a);
  return smooth;
}

/// Crop of `src` starting at (r0, c0).
inline GrayFrame crop(const FloatImage& src, int r0, int c0, int rows, int cols) {
  GrayFrame out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out.at(r, c) = static_cast<std::uint8_t>(std::lround(std::clamp(src.at(r0 + r, c0 + c), 0.0f, 255.0f)));
    }
  }
  return out;
}

/// Two size x size frames where the second shows the scene moved `shift`
/// pixels to the right.
inline std::pair<GrayFrame, GrayFrame> shifted_pair(int size, int shift, std::uint64_t seed) {
  const int pad = 8;
  const auto tex = random_texture(size + 2 * pad, size + 2 * pad, seed);
  return {crop(tex, pad, pad, size, size), crop(tex, pad, pad - shift, size, size)};
}

/// Mean flow magnitude over pixels at least `margin` from the border.
inline double interior_magnitude(const FlowField& f, int margin) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int r = margin; r < f.rows() - margin; ++r) {
    for (int c = margin; c < f.cols() - margin; ++c) {
      sum += std::hypot(f.u.at(r, c), f.v.at(r, c));
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("vcurl_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

}  // namespace vcurl::testing
