#include "vcurl/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "vcurl/error.hpp"

namespace vcurl {

namespace {

using json = nlohmann::json;

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(Errc::missing_field,
                std::string(key) + " (line " + std::to_string(line_no) + ")");
  }
  if (!it->is_string()) {
    throw Error(Errc::malformed_record, "line " + std::to_string(line_no) + ": field " + key +
                                            " is not a string");
  }
  return it->get<std::string>();
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Reads one whitespace-delimited header token, skipping '#' comments.
bool next_header_token(std::istream& in, std::string& token) {
  token.clear();
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) return true;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return !token.empty();
}

int parse_dim(const std::string& token, const fs::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size() || v <= 0) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::unsupported_format, path.string() + ": bad header value '" + token + "'");
  }
}

bool has_frame_extension(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".pgm" || ext == ".ppm";
}

}  // namespace

std::vector<SampleManifestEntry> parse_manifest(std::istream& in) {
  std::vector<SampleManifestEntry> entries;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error&) {
      throw Error(Errc::malformed_record, "line " + std::to_string(line_no));
    }
    if (!obj.is_object()) {
      throw Error(Errc::malformed_record, "line " + std::to_string(line_no) + ": not an object");
    }
    SampleManifestEntry e;
    e.id = require_string(obj, "id", line_no);
    e.frames_dir = require_string(obj, "frames_dir", line_no);
    e.question = require_string(obj, "question", line_no);
    e.answer = require_string(obj, "answer", line_no);
    if (e.id.empty()) {
      throw Error(Errc::malformed_record, "line " + std::to_string(line_no) + ": empty id");
    }
    if (!seen.insert(e.id).second) throw Error(Errc::duplicate_id, e.id);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<SampleManifestEntry> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open manifest " + path.string());
  return parse_manifest(in);
}

void write_manifest(std::ostream& out, std::span<const SampleManifestEntry> entries) {
  for (const auto& e : entries) {
    json obj = {{"id", e.id},
                {"frames_dir", e.frames_dir.string()},
                {"question", e.question},
                {"answer", e.answer}};
    out << obj.dump() << '\n';
  }
}

fs::path resolve_frames_dir(const fs::path& manifest_path, const SampleManifestEntry& entry) {
  if (entry.frames_dir.is_absolute()) return entry.frames_dir;
  return manifest_path.parent_path() / entry.frames_dir;
}

GrayFrame to_grayscale(const RgbImage& rgb) {
  const std::size_t n = static_cast<std::size_t>(rgb.rows) * rgb.cols;
  if (rgb.rows <= 0 || rgb.cols <= 0 || rgb.data.size() != 3 * n) {
    throw Error(Errc::shape_mismatch, "RGB buffer does not match its dimensions");
  }
  GrayFrame out(rgb.rows, rgb.cols);
  auto px = out.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned r = rgb.data[3 * i], g = rgb.data[3 * i + 1], b = rgb.data[3 * i + 2];
    const unsigned y = (299 * r + 587 * g + 114 * b + 500) / 1000;
    px[i] = static_cast<std::uint8_t>(std::min(y, 255u));
  }
  return out;
}

GrayFrame read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::string magic, w, h, maxval;
  if (!next_header_token(in, magic) || (magic != "P5" && magic != "P6")) {
    throw Error(Errc::unsupported_format, path.string() + ": expected binary P5 or P6");
  }
  if (!next_header_token(in, w) || !next_header_token(in, h) || !next_header_token(in, maxval)) {
    throw Error(Errc::unsupported_format, path.string() + ": truncated header");
  }
  const int cols = parse_dim(w, path);
  const int rows = parse_dim(h, path);
  if (maxval != "255") {
    throw Error(Errc::unsupported_format, path.string() + ": maxval must be 255");
  }
  const std::size_t channels = magic == "P5" ? 1 : 3;
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(rows) * cols * channels);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    throw Error(Errc::unsupported_format, path.string() + ": truncated pixel data");
  }
  if (channels == 3) return to_grayscale(RgbImage{rows, cols, std::move(buf)});
  GrayFrame frame(rows, cols);
  std::copy(buf.begin(), buf.end(), frame.pixels().begin());
  return frame;
}

void write_pgm(const fs::path& path, const GrayFrame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "P5\n" << frame.cols() << ' ' << frame.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
}

void write_ppm(const fs::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "P6\n" << image.cols << ' ' << image.rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
}

FrameSequence load_frames(const fs::path& frames_dir, std::string id) {
  std::error_code ec;
  if (!fs::is_directory(frames_dir, ec)) {
    throw Error(Errc::io, "not a directory: " + frames_dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(frames_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (!name.empty() && name.front() == '.') continue;
    if (!has_frame_extension(entry.path())) {
      throw Error(Errc::unsupported_format, entry.path().string());
    }
    files.push_back(entry.path());
  }
  // Byte-wise filename order; directory enumeration order is irrelevant.
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  if (files.size() < 2) {
    throw Error(Errc::too_few_frames,
                frames_dir.string() + " has " + std::to_string(files.size()) + " frame(s)");
  }

  FrameSequence seq;
  seq.id = id.empty() ? frames_dir.filename().string() : std::move(id);
  seq.frames.reserve(files.size());
  for (const auto& f : files) {
    GrayFrame frame = read_pnm(f);
    if (!seq.frames.empty() && !frame.same_shape(seq.frames.front())) {
      throw Error(Errc::dimension_mismatch, f.string());
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace vcurl
