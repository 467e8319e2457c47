#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vcurl/cognitive.hpp"
#include "vcurl/visual.hpp"

namespace vcurl {

/// Average rank / N. Ties share the mean of their rank range, so distinct
/// inputs map onto {1/N, ..., 1}. Throws NonFiniteInput.
std::vector<double> quantile_normalize(std::span<const double> scores);

struct BucketIndex {
  int i = 0;  // visual level
  int j = 0;  // cognitive level

  friend bool operator==(const BucketIndex&, const BucketIndex&) = default;
  friend auto operator<=>(const BucketIndex&, const BucketIndex&) = default;
};

/// Level l holds d in (l/K, (l+1)/K], with d = 0 in level 0, so the N
/// quantile values {1/N, ..., 1} split evenly. Throws OutOfRange.
BucketIndex assign_bucket(double d_visual, double d_text, int k);

struct ScoredSample {
  std::string id;
  double phi_flow = 0.0;
  double phi_ent = 0.0;
  double s_cog = 0.0;
  double d_visual = 0.0;
  double d_text = 0.0;
  BucketIndex bucket;
};

/// K x K partition of a scored corpus. Samples are sorted by id and bucket
/// members are indices into `samples`, in id order.
class CurriculumGrid {
 public:
  CurriculumGrid() = default;
  CurriculumGrid(int k, double alpha, std::vector<ScoredSample> samples);

  int k() const noexcept { return k_; }
  double alpha() const noexcept { return alpha_; }
  const std::vector<ScoredSample>& samples() const noexcept { return samples_; }
  const std::vector<std::size_t>& bucket(BucketIndex b) const { return buckets_.at(flat(b)); }
  std::size_t population(BucketIndex b) const { return bucket(b).size(); }
  bool contains(BucketIndex b) const noexcept { return b.i >= 0 && b.j >= 0 && b.i < k_ && b.j < k_; }
  std::size_t flat(BucketIndex b) const noexcept { return static_cast<std::size_t>(b.i * k_ + b.j); }

 private:
  int k_ = 0;
  double alpha_ = 0.5;
  std::vector<ScoredSample> samples_;
  std::vector<std::vector<std::size_t>> buckets_;
};

inline constexpr int kMaxGridSide = 8;

/// Quantile-normalizes phi_flow and phi_ent separately, fuses them with
/// alpha, quantile-normalizes s_cog and bins. Both lists must cover the same
/// id set (IdMismatch otherwise); k in [1, 8] (ConfigInvalid).
CurriculumGrid build_grid(std::span<const VisualScore> visual, std::span<const TextScore> text,
                          int k, double alpha = 0.5);

/// {K, alpha, buckets: [[ids]...] row-major, samples: [...]}.
void write_grid(std::ostream& out, const CurriculumGrid& grid);
CurriculumGrid read_grid(std::istream& in);
CurriculumGrid load_grid(const fs::path& path);

}  // namespace vcurl
