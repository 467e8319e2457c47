#include "vcurl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <omp.h>

#include "vcurl/error.hpp"

namespace vcurl::kernels {

namespace {

void require_same_shape(const GrayFrame& a, const GrayFrame& b) {
  if (!a.same_shape(b)) throw Error(Errc::shape_mismatch, "frame shapes differ");
}

void require_same_shape(const FloatImage& a, const FloatImage& b) {
  if (!a.same_shape(b)) throw Error(Errc::shape_mismatch, "flow component shapes differ");
}

double row_magnitude_sum(const FloatImage& u, const FloatImage& v, int r) {
  const auto ur = u.row(r);
  const auto vr = v.row(r);
  double s = 0.0;
  for (std::size_t c = 0; c < ur.size(); ++c) {
    const double a = ur[c], b = vr[c];
    s += std::sqrt(a * a + b * b);
  }
  return s;
}

struct AreaTap {
  int index;
  float weight;
};

// For each destination index, the source indices it covers and their
// overlap weights (summing to 1).
std::vector<std::vector<AreaTap>> area_taps(int src_len, int dst_len) {
  std::vector<std::vector<AreaTap>> taps(dst_len);
  const double scale = static_cast<double>(src_len) / dst_len;
  for (int d = 0; d < dst_len; ++d) {
    const double lo = d * scale;
    const double hi = (d + 1) * scale;
    for (int s = static_cast<int>(std::floor(lo)); s < static_cast<int>(std::ceil(hi)); ++s) {
      if (s < 0 || s >= src_len) continue;
      const double overlap = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
      if (overlap > 0) taps[d].push_back({s, static_cast<float>(overlap / scale)});
    }
  }
  return taps;
}

}  // namespace

namespace serial {

GrayFrame abs_diff(const GrayFrame& a, const GrayFrame& b) {
  require_same_shape(a, b);
  GrayFrame out(a.rows(), a.cols());
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  auto po = out.pixels();
  for (std::size_t i = 0; i < po.size(); ++i) {
    po[i] = static_cast<std::uint8_t>(pa[i] > pb[i] ? pa[i] - pb[i] : pb[i] - pa[i]);
  }
  return out;
}

Histogram256 histogram(const GrayFrame& img) {
  Histogram256 h{};
  for (auto v : img.pixels()) ++h[v];
  return h;
}

double mean_magnitude(const FloatImage& u, const FloatImage& v) {
  require_same_shape(u, v);
  if (u.empty()) return 0.0;
  double total = 0.0;
  for (int r = 0; r < u.rows(); ++r) total += row_magnitude_sum(u, v, r);
  return total / static_cast<double>(u.size());
}

}  // namespace serial

namespace omp {

GrayFrame abs_diff(const GrayFrame& a, const GrayFrame& b) {
  require_same_shape(a, b);
  GrayFrame out(a.rows(), a.cols());
  const int rows = a.rows();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const auto ra = a.row(r);
    const auto rb = b.row(r);
    auto ro = out.row(r);
    for (std::size_t c = 0; c < ro.size(); ++c) {
      ro[c] = static_cast<std::uint8_t>(ra[c] > rb[c] ? ra[c] - rb[c] : rb[c] - ra[c]);
    }
  }
  return out;
}

Histogram256 histogram(const GrayFrame& img) {
  Histogram256 total{};
  const int rows = img.rows();
#pragma omp parallel
  {
    Histogram256 local{};
#pragma omp for schedule(static) nowait
    for (int r = 0; r < rows; ++r) {
      for (auto v : img.row(r)) ++local[v];
    }
#pragma omp critical(vcurl_histogram_merge)
    for (std::size_t k = 0; k < local.size(); ++k) total[k] += local[k];
  }
  return total;
}

double mean_magnitude(const FloatImage& u, const FloatImage& v) {
  require_same_shape(u, v);
  if (u.empty()) return 0.0;
  std::vector<double> partial(u.rows());
  const int rows = u.rows();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) partial[r] = row_magnitude_sum(u, v, r);
  double total = 0.0;
  for (double s : partial) total += s;
  return total / static_cast<double>(u.size());
}

}  // namespace omp

FloatImage to_float(const GrayFrame& img) {
  FloatImage out(img.rows(), img.cols());
  std::transform(img.pixels().begin(), img.pixels().end(), out.pixels().begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return out;
}

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  std::vector<double> tmp(k.size());
  for (int i = -radius; i <= radius; ++i) {
    tmp[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += tmp[i + radius];
  }
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<float>(tmp[i] / sum);
  return k;
}

FloatImage separable_filter(const FloatImage& src, std::span<const float> kernel, ExecPolicy p) {
  const int radius = static_cast<int>(kernel.size() / 2);
  const int rows = src.rows(), cols = src.cols();
  FloatImage tmp(rows, cols), out(rows, cols);
  const bool par = p == ExecPolicy::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < rows; ++r) {
    const auto in = src.row(r);
    auto o = tmp.row(r);
    for (int c = 0; c < cols; ++c) {
      float s = 0.f;
      for (int k = -radius; k <= radius; ++k) {
        s += kernel[k + radius] * in[std::clamp(c + k, 0, cols - 1)];
      }
      o[c] = s;
    }
  }
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < rows; ++r) {
    auto o = out.row(r);
    for (int c = 0; c < cols; ++c) {
      float s = 0.f;
      for (int k = -radius; k <= radius; ++k) {
        s += kernel[k + radius] * tmp.at(std::clamp(r + k, 0, rows - 1), c);
      }
      o[c] = s;
    }
  }
  return out;
}

FloatImage box_filter(const FloatImage& src, int radius, ExecPolicy p) {
  std::vector<float> k(2 * radius + 1, 1.0f / static_cast<float>(2 * radius + 1));
  return separable_filter(src, k, p);
}

float sample_bilinear(const FloatImage& img, float y, float x) {
  const float maxy = static_cast<float>(img.rows() - 1);
  const float maxx = static_cast<float>(img.cols() - 1);
  y = std::clamp(y, 0.f, maxy);
  x = std::clamp(x, 0.f, maxx);
  const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
  const int y1 = std::min(y0 + 1, img.rows() - 1), x1 = std::min(x0 + 1, img.cols() - 1);
  const float fy = y - static_cast<float>(y0), fx = x - static_cast<float>(x0);
  const float top = img.at(y0, x0) + fx * (img.at(y0, x1) - img.at(y0, x0));
  const float bot = img.at(y1, x0) + fx * (img.at(y1, x1) - img.at(y1, x0));
  return top + fy * (bot - top);
}

FloatImage resize_bilinear(const FloatImage& src, int rows, int cols, ExecPolicy p) {
  FloatImage out(rows, cols);
  const float sy = static_cast<float>(src.rows()) / static_cast<float>(rows);
  const float sx = static_cast<float>(src.cols()) / static_cast<float>(cols);
  const bool par = p == ExecPolicy::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out.at(r, c) = sample_bilinear(src, (static_cast<float>(r) + 0.5f) * sy - 0.5f,
                                     (static_cast<float>(c) + 0.5f) * sx - 0.5f);
    }
  }
  return out;
}

FloatImage resize_area(const FloatImage& src, int rows, int cols, ExecPolicy p) {
  const auto ty = area_taps(src.rows(), rows);
  const auto tx = area_taps(src.cols(), cols);
  FloatImage tmp(src.rows(), cols), out(rows, cols);
  const bool par = p == ExecPolicy::parallel;
  const int src_rows = src.rows();
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < src_rows; ++r) {
    const auto in = src.row(r);
    for (int c = 0; c < cols; ++c) {
      float s = 0.f;
      for (const auto& t : tx[c]) s += t.weight * in[t.index];
      tmp.at(r, c) = s;
    }
  }
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      float s = 0.f;
      for (const auto& t : ty[r]) s += t.weight * tmp.at(t.index, c);
      out.at(r, c) = s;
    }
  }
  return out;
}

}  // namespace vcurl::kernels
