#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vcurl/image.hpp"

namespace vcurl {

namespace fs = std::filesystem;

/// One (video, question, answer) triple from a manifest.
struct SampleManifestEntry {
  std::string id;
  fs::path frames_dir;
  std::string question;
  std::string answer;

  friend bool operator==(const SampleManifestEntry&, const SampleManifestEntry&) = default;
};

/// Ordered grayscale frames of one sample. Invariants (enforced by
/// load_frames): at least two frames, all with identical shape.
struct FrameSequence {
  std::string id;
  std::vector<GrayFrame> frames;

  int rows() const { return frames.empty() ? 0 : frames.front().rows(); }
  int cols() const { return frames.empty() ? 0 : frames.front().cols(); }
  std::size_t count() const { return frames.size(); }
};

/// Manifest: one JSON object per line with keys id, frames_dir, question,
/// answer. Blank lines are skipped. frames_dir is kept exactly as written
/// so a parse/write round trip is lossless; see resolve_frames_dir.
std::vector<SampleManifestEntry> parse_manifest(std::istream& in);
std::vector<SampleManifestEntry> load_manifest(const fs::path& path);
void write_manifest(std::ostream& out, std::span<const SampleManifestEntry> entries);

/// Relative frames_dir entries are interpreted against the manifest's directory.
fs::path resolve_frames_dir(const fs::path& manifest_path, const SampleManifestEntry& entry);

/// Reads all *.pgm / *.ppm files of a directory in byte-wise filename order.
FrameSequence load_frames(const fs::path& frames_dir, std::string id = {});

/// Binary P5 (gray) or P6 (converted with to_grayscale), maxval 255.
GrayFrame read_pnm(const fs::path& path);
void write_pgm(const fs::path& path, const GrayFrame& frame);
void write_ppm(const fs::path& path, const RgbImage& image);

/// BT.601 luma, rounded half-up: (299 R + 587 G + 114 B + 500) / 1000.
GrayFrame to_grayscale(const RgbImage& rgb);

}  // namespace vcurl
