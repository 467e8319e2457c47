#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "vcurl/error.hpp"
#include "vcurl/visual.hpp"

namespace vcurl::flow_detail {

namespace {

using Mat6 = std::array<std::array<double, 6>, 6>;

// Gauss-Jordan with partial pivoting; the moment matrix is SPD so this
// never meets a zero pivot for sigma > 0.
Mat6 invert6(Mat6 m) {
  Mat6 inv{};
  for (int i = 0; i < 6; ++i) inv[i][i] = 1.0;
  for (int col = 0; col < 6; ++col) {
    int piv = col;
    for (int r = col + 1; r < 6; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    std::swap(m[col], m[piv]);
    std::swap(inv[col], inv[piv]);
    const double d = m[col][col];
    for (int c = 0; c < 6; ++c) {
      m[col][c] /= d;
      inv[col][c] /= d;
    }
    for (int r = 0; r < 6; ++r) {
      if (r == col) continue;
      const double f = m[r][col];
      if (f == 0.0) continue;
      for (int c = 0; c < 6; ++c) {
        m[r][c] -= f * m[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }
  return inv;
}

struct Level {
  FloatImage a, b;
  double scale;
};

// Coarse-to-fine pyramid; levels whose short side would drop below 32 px are
// dropped.
std::vector<Level> build_pyramid(const FloatImage& a, const FloatImage& b, const FlowConfig& cfg,
                                 ExecPolicy policy) {
  constexpr int kMinSize = 32;
  int levels = 0;
  double scale = 1.0;
  for (int k = 1; k < cfg.levels; ++k) {
    scale *= cfg.pyramid_scale;
    if (a.cols() * scale < kMinSize || a.rows() * scale < kMinSize) break;
    levels = k;
  }
  std::vector<Level> out;
  for (int k = levels; k >= 0; --k) {
    const double s = std::pow(cfg.pyramid_scale, k);
    if (k == 0) {
      out.push_back({a, b, 1.0});
      continue;
    }
    const double sigma = (1.0 / s - 1.0) * 0.5;
    const auto kernel = kernels::gaussian_kernel(sigma);
    const int rows = static_cast<int>(std::lround(a.rows() * s));
    const int cols = static_cast<int>(std::lround(a.cols() * s));
    out.push_back({kernels::resize_bilinear(kernels::separable_filter(a, kernel, policy), rows,
                                            cols, policy),
                   kernels::resize_bilinear(kernels::separable_filter(b, kernel, policy), rows,
                                            cols, policy),
                   s});
  }
  return out;
}

FlowField upscale_flow(const FlowField& f, int rows, int cols, double pyr_scale,
                       ExecPolicy policy) {
  FlowField out{kernels::resize_bilinear(f.u, rows, cols, policy),
                kernels::resize_bilinear(f.v, rows, cols, policy)};
  const float k = static_cast<float>(1.0 / pyr_scale);
  for (auto& x : out.u.pixels()) x *= k;
  for (auto& x : out.v.pixels()) x *= k;
  return out;
}

// Per-pixel normal-equation terms of the displacement least squares:
// G = sum A^T A, h = sum A^T db (A symmetric 2x2).
struct UpdateTerms {
  FloatImage g11, g12, g22, h1, h2;
};

UpdateTerms update_terms(const PolyCoeffs& r0, const PolyCoeffs& r1, const FlowField& flow,
                         ExecPolicy policy) {
  const int rows = flow.rows(), cols = flow.cols();
  UpdateTerms t{FloatImage(rows, cols), FloatImage(rows, cols), FloatImage(rows, cols),
                FloatImage(rows, cols), FloatImage(rows, cols)};
  const bool par = policy == ExecPolicy::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const float dx = flow.u.at(y, x), dy = flow.v.at(y, x);
      const float fx = static_cast<float>(x) + dx, fy = static_cast<float>(y) + dy;
      if (fx < 0.f || fy < 0.f || fx > static_cast<float>(cols - 1) ||
          fy > static_cast<float>(rows - 1)) {
        continue;  // displaced outside the next frame: no constraint
      }
      const float bx2 = kernels::sample_bilinear(r1.bx, fy, fx);
      const float by2 = kernels::sample_bilinear(r1.by, fy, fx);
      const float axx2 = kernels::sample_bilinear(r1.axx, fy, fx);
      const float ayy2 = kernels::sample_bilinear(r1.ayy, fy, fx);
      const float axy2 = kernels::sample_bilinear(r1.axy, fy, fx);

      const float a11 = 0.5f * (r0.axx.at(y, x) + axx2);
      const float a22 = 0.5f * (r0.ayy.at(y, x) + ayy2);
      const float a12 = 0.25f * (r0.axy.at(y, x) + axy2);
      const float db1 = -0.5f * (bx2 - r0.bx.at(y, x)) + a11 * dx + a12 * dy;
      const float db2 = -0.5f * (by2 - r0.by.at(y, x)) + a12 * dx + a22 * dy;

      t.g11.at(y, x) = a11 * a11 + a12 * a12;
      t.g12.at(y, x) = a12 * (a11 + a22);
      t.g22.at(y, x) = a12 * a12 + a22 * a22;
      t.h1.at(y, x) = a11 * db1 + a12 * db2;
      t.h2.at(y, x) = a12 * db1 + a22 * db2;
    }
  }
  return t;
}

FloatImage gradient_x(const FloatImage& img) {
  FloatImage g(img.rows(), img.cols());
  for (int y = 0; y < img.rows(); ++y) {
    for (int x = 0; x < img.cols(); ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, img.cols() - 1);
      g.at(y, x) = (img.at(y, xr) - img.at(y, xl)) / static_cast<float>(std::max(xr - xl, 1));
    }
  }
  return g;
}

FloatImage gradient_y(const FloatImage& img) {
  FloatImage g(img.rows(), img.cols());
  for (int y = 0; y < img.rows(); ++y) {
    const int yu = std::max(y - 1, 0), yd = std::min(y + 1, img.rows() - 1);
    for (int x = 0; x < img.cols(); ++x) {
      g.at(y, x) = (img.at(yd, x) - img.at(yu, x)) / static_cast<float>(std::max(yd - yu, 1));
    }
  }
  return g;
}

FloatImage warp(const FloatImage& img, const FlowField& flow, ExecPolicy policy) {
  FloatImage out(img.rows(), img.cols());
  const bool par = policy == ExecPolicy::parallel;
  const int rows = img.rows();
#pragma omp parallel for schedule(static) if (par)
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < img.cols(); ++x) {
      out.at(y, x) = kernels::sample_bilinear(img, static_cast<float>(y) + flow.v.at(y, x),
                                              static_cast<float>(x) + flow.u.at(y, x));
    }
  }
  return out;
}

// Weighted 8-neighbour average used by Horn-Schunck (1/6 edge, 1/12 corner).
FloatImage neighbour_mean(const FloatImage& f, ExecPolicy policy) {
  FloatImage out(f.rows(), f.cols());
  const int rows = f.rows(), cols = f.cols();
  const bool par = policy == ExecPolicy::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int y = 0; y < rows; ++y) {
    const int yu = std::max(y - 1, 0), yd = std::min(y + 1, rows - 1);
    for (int x = 0; x < cols; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, cols - 1);
      const float edge = f.at(yu, x) + f.at(yd, x) + f.at(y, xl) + f.at(y, xr);
      const float corner = f.at(yu, xl) + f.at(yu, xr) + f.at(yd, xl) + f.at(yd, xr);
      out.at(y, x) = edge / 6.f + corner / 12.f;
    }
  }
  return out;
}

}  // namespace

PolyCoeffs poly_expand(const FloatImage& img, int n, double sigma, ExecPolicy policy) {
  // Basis order: 1, x, y, x^2, y^2, xy (x horizontal offset, y vertical).
  std::vector<double> g(2 * n + 1);
  double gsum = 0.0;
  for (int k = -n; k <= n; ++k) {
    g[k + n] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    gsum += g[k + n];
  }
  for (auto& w : g) w /= gsum;

  Mat6 moments{};
  for (int y = -n; y <= n; ++y) {
    for (int x = -n; x <= n; ++x) {
      const double w = g[y + n] * g[x + n];
      const std::array<double, 6> phi{1.0, double(x), double(y), double(x * x), double(y * y),
                                      double(x * y)};
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) moments[i][j] += w * phi[i] * phi[j];
      }
    }
  }
  const Mat6 inv = invert6(moments);

  const int rows = img.rows(), cols = img.cols();
  // Vertical pass: weighted sums with 1, y, y^2.
  FloatImage v0(rows, cols), v1(rows, cols), v2(rows, cols);
  const bool par = policy == ExecPolicy::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double s0 = 0, s1 = 0, s2 = 0;
      for (int k = -n; k <= n; ++k) {
        const double f = img.at(std::clamp(r + k, 0, rows - 1), c) * g[k + n];
        s0 += f;
        s1 += k * f;
        s2 += k * k * f;
      }
      v0.at(r, c) = static_cast<float>(s0);
      v1.at(r, c) = static_cast<float>(s1);
      v2.at(r, c) = static_cast<float>(s2);
    }
  }

  PolyCoeffs out{FloatImage(rows, cols), FloatImage(rows, cols), FloatImage(rows, cols),
                 FloatImage(rows, cols), FloatImage(rows, cols)};
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      std::array<double, 6> m{};
      for (int k = -n; k <= n; ++k) {
        const int cc = std::clamp(c + k, 0, cols - 1);
        const double w = g[k + n];
        const double a0 = v0.at(r, cc) * w, a1 = v1.at(r, cc) * w, a2 = v2.at(r, cc) * w;
        m[0] += a0;
        m[1] += k * a0;
        m[2] += a1;
        m[3] += k * k * a0;
        m[4] += a2;
        m[5] += k * a1;
      }
      std::array<double, 6> coef{};
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) coef[i] += inv[i][j] * m[j];
      }
      out.bx.at(r, c) = static_cast<float>(coef[1]);
      out.by.at(r, c) = static_cast<float>(coef[2]);
      out.axx.at(r, c) = static_cast<float>(coef[3]);
      out.ayy.at(r, c) = static_cast<float>(coef[4]);
      out.axy.at(r, c) = static_cast<float>(coef[5]);
    }
  }
  return out;
}

FlowField farneback(const FloatImage& a, const FloatImage& b, const FlowConfig& cfg,
                    ExecPolicy policy) {
  const auto pyramid = build_pyramid(a, b, cfg, policy);
  const int radius = cfg.window_size / 2;
  FlowField flow;
  for (std::size_t li = 0; li < pyramid.size(); ++li) {
    const auto& level = pyramid[li];
    const int rows = level.a.rows(), cols = level.a.cols();
    if (li == 0) {
      flow = {FloatImage(rows, cols), FloatImage(rows, cols)};
    } else {
      flow = upscale_flow(flow, rows, cols, cfg.pyramid_scale, policy);
    }
    const auto r0 = poly_expand(level.a, cfg.poly_n, cfg.poly_sigma, policy);
    const auto r1 = poly_expand(level.b, cfg.poly_n, cfg.poly_sigma, policy);
    for (int it = 0; it < cfg.iterations; ++it) {
      auto t = update_terms(r0, r1, flow, policy);
      const auto g11 = kernels::box_filter(t.g11, radius, policy);
      const auto g12 = kernels::box_filter(t.g12, radius, policy);
      const auto g22 = kernels::box_filter(t.g22, radius, policy);
      const auto h1 = kernels::box_filter(t.h1, radius, policy);
      const auto h2 = kernels::box_filter(t.h2, radius, policy);
      const bool par = policy == ExecPolicy::parallel;
#pragma omp parallel for schedule(static) if (par)
      for (int y = 0; y < rows; ++y) {
        for (int x = 0; x < cols; ++x) {
          const double G11 = g11.at(y, x), G12 = g12.at(y, x), G22 = g22.at(y, x);
          const double H1 = h1.at(y, x), H2 = h2.at(y, x);
          const double idet = 1.0 / (G11 * G22 - G12 * G12 + 1e-3);
          flow.u.at(y, x) = static_cast<float>((G22 * H1 - G12 * H2) * idet);
          flow.v.at(y, x) = static_cast<float>((G11 * H2 - G12 * H1) * idet);
        }
      }
    }
  }
  return flow;
}

FlowField horn_schunck(const FloatImage& a, const FloatImage& b, const FlowConfig& cfg,
                       ExecPolicy policy) {
  FloatImage an = a, bn = b;
  for (auto& x : an.pixels()) x /= 255.f;
  for (auto& x : bn.pixels()) x /= 255.f;
  const auto pyramid = build_pyramid(an, bn, cfg, policy);
  const float alpha2 = static_cast<float>(cfg.hs_smoothness * cfg.hs_smoothness);
  const int warps = std::max(1, cfg.iterations);
  FlowField flow;
  for (std::size_t li = 0; li < pyramid.size(); ++li) {
    const auto& level = pyramid[li];
    const int rows = level.a.rows(), cols = level.a.cols();
    if (li == 0) {
      flow = {FloatImage(rows, cols), FloatImage(rows, cols)};
    } else {
      flow = upscale_flow(flow, rows, cols, cfg.pyramid_scale, policy);
    }
    const auto ax = gradient_x(level.a), ay = gradient_y(level.a);
    for (int w = 0; w < warps; ++w) {
      const auto bw = warp(level.b, flow, policy);
      const auto bx = gradient_x(bw), by = gradient_y(bw);
      FloatImage ix(rows, cols), iy(rows, cols), it(rows, cols);
      for (std::size_t i = 0; i < ix.size(); ++i) {
        ix.pixels()[i] = 0.5f * (ax.pixels()[i] + bx.pixels()[i]);
        iy.pixels()[i] = 0.5f * (ay.pixels()[i] + by.pixels()[i]);
        it.pixels()[i] = bw.pixels()[i] - level.a.pixels()[i];
      }
      // Increment (du, dv) around the current estimate, linearized at the warp.
      FlowField inc{FloatImage(rows, cols), FloatImage(rows, cols)};
      for (int k = 0; k < cfg.hs_iterations; ++k) {
        FlowField total{FloatImage(rows, cols), FloatImage(rows, cols)};
        for (std::size_t i = 0; i < total.u.size(); ++i) {
          total.u.pixels()[i] = flow.u.pixels()[i] + inc.u.pixels()[i];
          total.v.pixels()[i] = flow.v.pixels()[i] + inc.v.pixels()[i];
        }
        const auto ubar = neighbour_mean(total.u, policy);
        const auto vbar = neighbour_mean(total.v, policy);
        for (std::size_t i = 0; i < ubar.size(); ++i) {
          const float gx = ix.pixels()[i], gy = iy.pixels()[i];
          // Residual at the smoothed total flow, expressed via the increment.
          const float du_bar = ubar.pixels()[i] - flow.u.pixels()[i];
          const float dv_bar = vbar.pixels()[i] - flow.v.pixels()[i];
          const float num = gx * du_bar + gy * dv_bar + it.pixels()[i];
          const float den = alpha2 + gx * gx + gy * gy;
          inc.u.pixels()[i] = du_bar - gx * num / den;
          inc.v.pixels()[i] = dv_bar - gy * num / den;
        }
      }
      for (std::size_t i = 0; i < flow.u.size(); ++i) {
        flow.u.pixels()[i] += inc.u.pixels()[i];
        flow.v.pixels()[i] += inc.v.pixels()[i];
      }
    }
  }
  return flow;
}

}  // namespace vcurl::flow_detail
