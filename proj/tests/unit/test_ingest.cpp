#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "vcurl/error.hpp"
#include "vcurl/ingest.hpp"

using namespace vcurl;
using vcurl::testing::TempDir;
using vcurl::testing::error_code_of;

namespace {

GrayFrame ramp(int rows, int cols, int offset) {
  GrayFrame f(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) f.at(r, c) = static_cast<std::uint8_t>((r * 7 + c * 3 + offset) % 256);
  }
  return f;
}

}  // namespace

TEST(Manifest, ParsesAndRoundTrips) {
  std::istringstream in(
      "{\"id\":\"b\",\"frames_dir\":\"clips/b\",\"question\":\"what?\",\"answer\":\"this\"}\n"
      "\n"
      "{\"id\":\"a\",\"frames_dir\":\"/abs/a\",\"question\":\"q\",\"answer\":\"x y\"}\n");
  const auto entries = parse_manifest(in);
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].id, "b");
  EXPECT_EQ(entries[1].frames_dir, fs::path("/abs/a"));

  std::ostringstream out;
  write_manifest(out, entries);
  std::istringstream again(out.str());
  EXPECT_EQ(parse_manifest(again), entries);
}

TEST(Manifest, Errors) {
  EXPECT_EQ(error_code_of([] {
              std::istringstream in("{\"id\":\"a\",\"frames_dir\":\"x\",\"question\":\"q\"}\n");
              parse_manifest(in);
            }),
            Errc::missing_field);
  EXPECT_EQ(error_code_of([] {
              std::istringstream in("not json\n");
              parse_manifest(in);
            }),
            Errc::malformed_record);
  EXPECT_EQ(error_code_of([] {
              std::istringstream in(
                  "{\"id\":\"a\",\"frames_dir\":\"x\",\"question\":\"q\",\"answer\":\"a\"}\n"
                  "{\"id\":\"a\",\"frames_dir\":\"y\",\"question\":\"q\",\"answer\":\"a\"}\n");
              parse_manifest(in);
            }),
            Errc::duplicate_id);
  EXPECT_EQ(error_code_of([] { load_manifest("/nonexistent/manifest.jsonl"); }), Errc::io);
}

TEST(Manifest, RelativeFramesDirResolvesAgainstManifest) {
  SampleManifestEntry e{"a", "clips/a", "q", "a"};
  EXPECT_EQ(resolve_frames_dir("/data/set/manifest.jsonl", e), fs::path("/data/set/clips/a"));
  e.frames_dir = "/elsewhere/a";
  EXPECT_EQ(resolve_frames_dir("/data/set/manifest.jsonl", e), fs::path("/elsewhere/a"));
}

TEST(Grayscale, MatchesIntegerLuma) {
  // Hand-computed (299 R + 587 G + 114 B + 500) / 1000.
  RgbImage img{1, 4, {255, 255, 255, 0, 0, 0, 255, 0, 0, 10, 20, 30}};
  const auto g = to_grayscale(img);
  EXPECT_EQ(g.at(0, 0), 255);
  EXPECT_EQ(g.at(0, 1), 0);
  EXPECT_EQ(g.at(0, 2), 76);   // 76245 + 500 -> 76
  EXPECT_EQ(g.at(0, 3), 18);  // 18150 + 500 -> 18
}

TEST(Grayscale, RejectsBadBuffer) {
  EXPECT_EQ(error_code_of([] { to_grayscale(RgbImage{2, 2, std::vector<std::uint8_t>(5)}); }), Errc::shape_mismatch);
}

TEST(Pnm, PgmAndPpmRoundTrip) {
  TempDir dir("pnm");
  const auto frame = ramp(5, 7, 3);
  write_pgm(dir / "f.pgm", frame);
  EXPECT_EQ(read_pnm(dir / "f.pgm"), frame);

  RgbImage rgb{2, 3, {}};
  for (int i = 0; i < 18; ++i) rgb.data.push_back(static_cast<std::uint8_t>(i * 13));
  write_ppm(dir / "f.ppm", rgb);
  EXPECT_EQ(read_pnm(dir / "f.ppm"), to_grayscale(rgb));
}

TEST(Pnm, RejectsUnsupported) {
  TempDir dir("pnm_bad");
  {
    std::ofstream(dir / "a.pgm") << "P2\n2 2\n255\n0 0 0 0\n";
  }
  EXPECT_EQ(error_code_of([&] { read_pnm(dir / "a.pgm"); }), Errc::unsupported_format);
  {
    std::ofstream(dir / "b.pgm", std::ios::binary) << "P5\n4 4\n255\nabc";
  }
  EXPECT_EQ(error_code_of([&] { read_pnm(dir / "b.pgm"); }), Errc::unsupported_format);
  {
    std::ofstream(dir / "c.pgm", std::ios::binary) << "P5\n2 2\n65535\n";
  }
  EXPECT_EQ(error_code_of([&] { read_pnm(dir / "c.pgm"); }), Errc::unsupported_format);
}

TEST(Frames, LoadsInFilenameOrder) {
  TempDir dir("frames");
  write_pgm(dir / "frame_10.pgm", ramp(4, 4, 2));
  write_pgm(dir / "frame_02.pgm", ramp(4, 4, 1));
  write_pgm(dir / "frame_01.pgm", ramp(4, 4, 0));
  const auto seq = load_frames(dir.path(), "clip");
  ASSERT_EQ(seq.count(), 3u);
  EXPECT_EQ(seq.id, "clip");
  EXPECT_EQ(seq.frames[0], ramp(4, 4, 0));
  EXPECT_EQ(seq.frames[1], ramp(4, 4, 1));
  EXPECT_EQ(seq.frames[2], ramp(4, 4, 2));
}

TEST(Frames, Errors) {
  TempDir dir("frames_err");
  EXPECT_EQ(error_code_of([&] { load_frames(dir / "missing"); }), Errc::io);
  write_pgm(dir / "a.pgm", ramp(4, 4, 0));
  EXPECT_EQ(error_code_of([&] { load_frames(dir.path()); }), Errc::too_few_frames);
  write_pgm(dir / "b.pgm", ramp(5, 4, 0));
  EXPECT_EQ(error_code_of([&] { load_frames(dir.path()); }), Errc::dimension_mismatch);
  fs::remove(dir / "b.pgm");
  std::ofstream(dir / "notes.txt") << "x";
  EXPECT_EQ(error_code_of([&] { load_frames(dir.path()); }), Errc::unsupported_format);
}
