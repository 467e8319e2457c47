#pragma once

#include <array>
#include <string>
#include <vector>

#include "vcurl/image.hpp"
#include "vcurl/ingest.hpp"
#include "vcurl/kernels.hpp"

namespace vcurl {

enum class FlowBackend { farneback, horn_schunck };

std::string to_string(FlowBackend b);
FlowBackend parse_flow_backend(const std::string& name);

struct FlowConfig {
  double pyramid_scale = 0.5;
  int levels = 3;
  int window_size = 15;  // odd; Farneback averaging window
  int iterations = 3;    // Farneback refinement passes per level
  FlowBackend backend = FlowBackend::farneback;

  // Polynomial expansion neighbourhood (radius, Gaussian sigma).
  int poly_n = 5;
  double poly_sigma = 1.1;

  // Horn-Schunck fallback.
  int hs_iterations = 100;
  double hs_smoothness = 0.1;  // on intensities scaled to [0, 1]

  // Frames whose long side exceeds this are area-downscaled before flow.
  int max_flow_side = 512;

  /// Throws ConfigInvalid.
  void validate() const;
};

/// Per-pixel displacement from frame a to frame b, in pixels/frame.
struct FlowField {
  FloatImage u;  // horizontal
  FloatImage v;  // vertical

  int rows() const { return u.rows(); }
  int cols() const { return u.cols(); }
};

/// Normalized 256-bin histogram of a difference map.
struct DiffDistribution {
  std::array<double, 256> p{};
};

struct VisualProxies {
  double phi_flow = 0.0;  // mean displacement magnitude
  double phi_ent = 0.0;   // mean difference entropy, bits
  std::vector<double> per_frame_motion;
  std::vector<double> per_frame_entropy;
};

/// Raw per-sample visual scores as exchanged in score files.
struct VisualScore {
  std::string id;
  double phi_flow = 0.0;
  double phi_ent = 0.0;
};

inline constexpr double kEntropyEpsilon = 1e-12;

/// Dense flow a -> b. Deterministic for fixed inputs and config; the
/// policy only changes how rows are scheduled.
FlowField estimate_flow(const GrayFrame& a, const GrayFrame& b, const FlowConfig& cfg,
                        ExecPolicy policy = ExecPolicy::parallel);

/// Spatial mean of |(u, v)|.
double frame_motion_score(const FlowField& flow, ExecPolicy policy = ExecPolicy::parallel);

struct TemporalScore {
  double value = 0.0;
  std::vector<double> per_frame;
};

TemporalScore motion_intensity(const FrameSequence& seq, const FlowConfig& cfg,
                               ExecPolicy policy = ExecPolicy::parallel);

/// Temporal mean of precomputed per-pair scores; throws TooFewFrames when empty.
double temporal_mean(const std::vector<double>& per_frame);

GrayFrame frame_diff(const GrayFrame& a, const GrayFrame& b,
                     ExecPolicy policy = ExecPolicy::parallel);

DiffDistribution diff_distribution(const GrayFrame& diff, ExecPolicy policy = ExecPolicy::parallel);

/// -sum p log2(p + eps) over nonzero bins, clamped below at 0.
double diff_entropy(const DiffDistribution& d);

TemporalScore info_density(const FrameSequence& seq, ExecPolicy policy = ExecPolicy::parallel);

/// alpha * q_flow + (1 - alpha) * q_ent; all inputs must lie in [0, 1].
double fuse_visual(double q_flow, double q_ent, double alpha);

/// Both proxies for one sample; entropy at native resolution.
VisualProxies score_visual(const FrameSequence& seq, const FlowConfig& cfg,
                           ExecPolicy policy = ExecPolicy::parallel);

namespace flow_detail {
/// Farneback polynomial expansion coefficients for one image:
/// f(p + d) ~ d^T A d + b^T d + c with A = [[axx, axy/2], [axy/2, ayy]].
struct PolyCoeffs {
  FloatImage bx, by, axx, ayy, axy;
};
PolyCoeffs poly_expand(const FloatImage& img, int n, double sigma, ExecPolicy policy);

FlowField farneback(const FloatImage& a, const FloatImage& b, const FlowConfig& cfg,
                    ExecPolicy policy);
FlowField horn_schunck(const FloatImage& a, const FloatImage& b, const FlowConfig& cfg,
                       ExecPolicy policy);
}  // namespace flow_detail

}  // namespace vcurl
