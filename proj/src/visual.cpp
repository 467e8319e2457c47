#include "vcurl/visual.hpp"

#include <algorithm>
#include <cmath>

#include "vcurl/error.hpp"

namespace vcurl {

std::string to_string(FlowBackend b) {
  return b == FlowBackend::farneback ? "farneback" : "horn_schunck";
}

FlowBackend parse_flow_backend(const std::string& name) {
  if (name == "farneback") return FlowBackend::farneback;
  if (name == "horn_schunck" || name == "horn-schunck") return FlowBackend::horn_schunck;
  throw Error(Errc::config_invalid, "unknown flow backend '" + name + "'");
}

void FlowConfig::validate() const {
  if (!(pyramid_scale > 0.0 && pyramid_scale < 1.0)) {
    throw Error(Errc::config_invalid, "pyramid_scale must lie in (0, 1)");
  }
  if (levels < 1) throw Error(Errc::config_invalid, "levels must be >= 1");
  if (window_size < 3 || window_size % 2 == 0) {
    throw Error(Errc::config_invalid, "window_size must be odd and >= 3");
  }
  if (iterations < 1) throw Error(Errc::config_invalid, "iterations must be >= 1");
  if (poly_n < 1 || poly_sigma <= 0.0) throw Error(Errc::config_invalid, "bad poly expansion");
  if (hs_iterations < 1 || hs_smoothness <= 0.0) {
    throw Error(Errc::config_invalid, "bad Horn-Schunck parameters");
  }
  if (max_flow_side < 16) throw Error(Errc::config_invalid, "max_flow_side must be >= 16");
}

FlowField estimate_flow(const GrayFrame& a, const GrayFrame& b, const FlowConfig& cfg,
                        ExecPolicy policy) {
  cfg.validate();
  if (!a.same_shape(b)) throw Error(Errc::shape_mismatch, "frame shapes differ");
  if (cfg.window_size >= std::min(a.rows(), a.cols())) {
    throw Error(Errc::config_invalid, "window_size must be smaller than the frame");
  }
  const auto fa = kernels::to_float(a);
  const auto fb = kernels::to_float(b);
  return cfg.backend == FlowBackend::farneback ? flow_detail::farneback(fa, fb, cfg, policy)
                                               : flow_detail::horn_schunck(fa, fb, cfg, policy);
}

double frame_motion_score(const FlowField& flow, ExecPolicy policy) {
  return kernels::mean_magnitude(flow.u, flow.v, policy);
}

double temporal_mean(const std::vector<double>& per_frame) {
  if (per_frame.empty()) throw Error(Errc::too_few_frames, "no frame pairs");
  double s = 0.0;
  for (double x : per_frame) s += x;
  return s / static_cast<double>(per_frame.size());
}

namespace {

void require_pairs(const FrameSequence& seq) {
  if (seq.count() < 2) {
    throw Error(Errc::too_few_frames, seq.id + " has " + std::to_string(seq.count()) + " frame(s)");
  }
}

// Long side capped at max_side by area averaging; smaller frames pass through.
FloatImage flow_input(const GrayFrame& frame, int max_side, ExecPolicy policy) {
  auto f = kernels::to_float(frame);
  const int long_side = std::max(frame.rows(), frame.cols());
  if (long_side <= max_side) return f;
  const double s = static_cast<double>(max_side) / long_side;
  const int rows = std::max(1, static_cast<int>(std::lround(frame.rows() * s)));
  const int cols = std::max(1, static_cast<int>(std::lround(frame.cols() * s)));
  return kernels::resize_area(f, rows, cols, policy);
}

}  // namespace

TemporalScore motion_intensity(const FrameSequence& seq, const FlowConfig& cfg,
                               ExecPolicy policy) {
  require_pairs(seq);
  cfg.validate();
  TemporalScore out;
  out.per_frame.reserve(seq.count() - 1);
  auto prev = flow_input(seq.frames[0], cfg.max_flow_side, policy);
  if (cfg.window_size >= std::min(prev.rows(), prev.cols())) {
    throw Error(Errc::config_invalid, "window_size must be smaller than the frame");
  }
  for (std::size_t t = 1; t < seq.count(); ++t) {
    auto next = flow_input(seq.frames[t], cfg.max_flow_side, policy);
    const FlowField flow = cfg.backend == FlowBackend::farneback
                               ? flow_detail::farneback(prev, next, cfg, policy)
                               : flow_detail::horn_schunck(prev, next, cfg, policy);
    out.per_frame.push_back(frame_motion_score(flow, policy));
    prev = std::move(next);
  }
  out.value = temporal_mean(out.per_frame);
  return out;
}

GrayFrame frame_diff(const GrayFrame& a, const GrayFrame& b, ExecPolicy policy) {
  return kernels::abs_diff(a, b, policy);
}

DiffDistribution diff_distribution(const GrayFrame& diff, ExecPolicy policy) {
  DiffDistribution d;
  if (diff.empty()) return d;
  const auto h = kernels::histogram(diff, policy);
  const double n = static_cast<double>(diff.size());
  for (std::size_t k = 0; k < h.size(); ++k) d.p[k] = static_cast<double>(h[k]) / n;
  return d;
}

double diff_entropy(const DiffDistribution& d) {
  double e = 0.0;
  for (double p : d.p) {
    if (p > 0.0) e -= p * std::log2(p + kEntropyEpsilon);
  }
  // A single occupied bin gives -log2(1 + eps) ~ -1.4e-12; report exact zero.
  return std::max(e, 0.0);
}

TemporalScore info_density(const FrameSequence& seq, ExecPolicy policy) {
  require_pairs(seq);
  TemporalScore out;
  out.per_frame.reserve(seq.count() - 1);
  for (std::size_t t = 1; t < seq.count(); ++t) {
    const auto diff = frame_diff(seq.frames[t - 1], seq.frames[t], policy);
    out.per_frame.push_back(diff_entropy(diff_distribution(diff, policy)));
  }
  out.value = temporal_mean(out.per_frame);
  return out;
}

double fuse_visual(double q_flow, double q_ent, double alpha) {
  const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(q_flow) || !in_unit(q_ent) || !in_unit(alpha)) {
    throw Error(Errc::out_of_range, "fuse_visual inputs must lie in [0, 1]");
  }
  return alpha * q_flow + (1.0 - alpha) * q_ent;
}

VisualProxies score_visual(const FrameSequence& seq, const FlowConfig& cfg, ExecPolicy policy) {
  auto motion = motion_intensity(seq, cfg, policy);
  auto density = info_density(seq, policy);
  return {motion.value, density.value, std::move(motion.per_frame), std::move(density.per_frame)};
}

}  // namespace vcurl
