#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "vcurl/image.hpp"

namespace vcurl {

enum class ExecPolicy { serial, parallel };

using Histogram256 = std::array<std::uint64_t, 256>;

namespace kernels {

// Every reduction below sums each image row left to right in double, then
// adds the row partials top to bottom. Both variants follow that order, so
// serial and OpenMP results are bit-identical for any thread count.

namespace serial {
GrayFrame abs_diff(const GrayFrame& a, const GrayFrame& b);
Histogram256 histogram(const GrayFrame& img);
double mean_magnitude(const FloatImage& u, const FloatImage& v);
}  // namespace serial

namespace omp {
GrayFrame abs_diff(const GrayFrame& a, const GrayFrame& b);
Histogram256 histogram(const GrayFrame& img);
double mean_magnitude(const FloatImage& u, const FloatImage& v);
}  // namespace omp

inline GrayFrame abs_diff(const GrayFrame& a, const GrayFrame& b, ExecPolicy p) {
  return p == ExecPolicy::parallel ? omp::abs_diff(a, b) : serial::abs_diff(a, b);
}
inline Histogram256 histogram(const GrayFrame& img, ExecPolicy p) {
  return p == ExecPolicy::parallel ? omp::histogram(img) : serial::histogram(img);
}
inline double mean_magnitude(const FloatImage& u, const FloatImage& v, ExecPolicy p) {
  return p == ExecPolicy::parallel ? omp::mean_magnitude(u, v) : serial::mean_magnitude(u, v);
}

// Image-processing helpers used by the flow estimators. Per-pixel outputs
// are independent, so the policy only toggles the row loop's OpenMP pragma.

FloatImage to_float(const GrayFrame& img);

/// Correlates rows then columns with a symmetric odd-length kernel,
/// replicating border pixels.
FloatImage separable_filter(const FloatImage& src, std::span<const float> kernel, ExecPolicy p);

/// Normalized Gaussian taps with radius ceil(3 sigma) (at least 1).
std::vector<float> gaussian_kernel(double sigma);

/// Box average over a (2r+1)^2 window with replicated borders.
FloatImage box_filter(const FloatImage& src, int radius, ExecPolicy p);

/// Bilinear resampling to (rows, cols), pixel-center aligned.
FloatImage resize_bilinear(const FloatImage& src, int rows, int cols, ExecPolicy p);

/// Area-averaging downscale to (rows, cols); each output pixel is the
/// overlap-weighted mean of the source pixels it covers.
FloatImage resize_area(const FloatImage& src, int rows, int cols, ExecPolicy p);

/// Bilinear sample with coordinates clamped to the image.
float sample_bilinear(const FloatImage& img, float y, float x);

}  // namespace kernels
}  // namespace vcurl
