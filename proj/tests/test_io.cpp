#include "doctest.h"

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "pccforge/io.hpp"

using namespace pccforge;
using testutil::TempDir;
using testutil::random_cloud;
using testutil::slurp;
using testutil::spit;

TEST_CASE("label words pack semantic low, instance high") {
  CHECK(io::pack_label(2, 7) == 0x00070002u);
  CHECK(io::unpack_label(0x00070002u) == std::pair<std::uint16_t, std::uint16_t>{2, 7});
  CHECK(io::pack_label(0xFFFF, 0xFFFF) == 0xFFFFFFFFu);
  for (std::uint32_t w : {0u, 1u, 0x12345678u, 0xFFFFFFFFu}) {
    const auto [s, i] = io::unpack_label(w);
    CHECK(io::pack_label(s, i) == w);
  }
}

TEST_CASE("scan and label files use little-endian fixed-width records") {
  TempDir tmp;
  LabeledCloud cloud;
  cloud.push_back({1.0f, -2.0f, 0.5f, 0.25f}, 5, 0);
  io::write_skitti_scan(cloud, tmp / "s.bin", tmp / "s.label");

  const std::string scan = slurp(tmp / "s.bin");
  const std::string label = slurp(tmp / "s.label");
  REQUIRE(scan.size() == 16);
  REQUIRE(label.size() == 4);
  // 1.0f = 00 00 80 3F little-endian
  CHECK(static_cast<unsigned char>(scan[0]) == 0x00);
  CHECK(static_cast<unsigned char>(scan[1]) == 0x00);
  CHECK(static_cast<unsigned char>(scan[2]) == 0x80);
  CHECK(static_cast<unsigned char>(scan[3]) == 0x3F);
  // -2.0f = 00 00 00 C0
  CHECK(static_cast<unsigned char>(scan[7]) == 0xC0);
  // label word 5 = 05 00 00 00
  CHECK(static_cast<unsigned char>(label[0]) == 0x05);
  CHECK(static_cast<unsigned char>(label[1]) == 0x00);
  CHECK(static_cast<unsigned char>(label[2]) == 0x00);
  CHECK(static_cast<unsigned char>(label[3]) == 0x00);
}

TEST_CASE("file sizes are 16N and 4N for all N") {
  TempDir tmp;
  for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{7},
                        std::size_t{100}}) {
    const auto cloud = random_cloud(n, 100 + n);
    io::write_skitti_scan(cloud, tmp / "n.bin", tmp / "n.label");
    CHECK(std::filesystem::file_size(tmp / "n.bin") == 16 * n);
    CHECK(std::filesystem::file_size(tmp / "n.label") == 4 * n);
  }
}

TEST_CASE("write then read is bit-exact and order-preserving") {
  TempDir tmp;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto cloud = random_cloud(seed % 7 == 0 ? 0 : 1 + seed * 13, seed);
    io::write_skitti_scan(cloud, tmp / "r.bin", tmp / "r.label");
    const auto back = io::read_skitti_scan(tmp / "r.bin", tmp / "r.label");
    REQUIRE(back.cloud.size() == cloud.size());
    CHECK(back.out_of_schema == 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& a = cloud.points()[i];
      const auto& b = back.cloud.points()[i];
      CHECK(std::bit_cast<std::uint32_t>(a.x) == std::bit_cast<std::uint32_t>(b.x));
      CHECK(std::bit_cast<std::uint32_t>(a.y) == std::bit_cast<std::uint32_t>(b.y));
      CHECK(std::bit_cast<std::uint32_t>(a.z) == std::bit_cast<std::uint32_t>(b.z));
      CHECK(std::bit_cast<std::uint32_t>(a.remission) ==
            std::bit_cast<std::uint32_t>(b.remission));
      CHECK(cloud.labels()[i] == back.cloud.labels()[i]);
      CHECK(cloud.instance_ids()[i] == back.cloud.instance_ids()[i]);
    }
  }
}

TEST_CASE("truncated or mismatched pairs are rejected") {
  TempDir tmp;
  spit(tmp / "bad.bin", std::string(10, '\0'));
  spit(tmp / "bad.label", std::string(4, '\0'));
  CHECK_THROWS_AS(io::read_skitti_scan(tmp / "bad.bin", tmp / "bad.label"),
                  Error);

  spit(tmp / "two.bin", std::string(32, '\0'));
  spit(tmp / "one.label", std::string(4, '\0'));
  try {
    io::read_skitti_scan(tmp / "two.bin", tmp / "one.label");
    FAIL("expected a size mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SizeMismatch);
  }

  spit(tmp / "odd.label", std::string(6, '\0'));
  spit(tmp / "ok.bin", std::string(16, '\0'));
  try {
    io::read_skitti_scan(tmp / "ok.bin", tmp / "odd.label");
    FAIL("expected a truncation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TruncatedFile);
  }

  CHECK_THROWS_AS(io::read_skitti_scan(tmp / "none.bin", tmp / "none.label"),
                  Error);
}

TEST_CASE("out-of-schema semantics: strict rejects, permissive counts") {
  TempDir tmp;
  LabeledCloud cloud;
  cloud.push_back({0, 0, 0, 0}, 0, 0);
  cloud.push_back({1, 0, 0, 0}, 0, 0);
  io::write_skitti_scan(cloud, tmp / "x.bin", tmp / "x.label");
  // overwrite second word with semantic 20
  std::string words = slurp(tmp / "x.label");
  words[4] = 20;
  spit(tmp / "x.label", words);

  try {
    io::read_skitti_scan(tmp / "x.bin", tmp / "x.label",
                         io::LabelPolicy::Strict);
    FAIL("expected unknown class error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownClassId);
  }

  const auto lax = io::read_skitti_scan(tmp / "x.bin", tmp / "x.label",
                                        io::LabelPolicy::Permissive);
  CHECK(lax.out_of_schema == 1);
  CHECK(lax.cloud.labels()[1] == 20);
}

TEST_CASE("frame names are six zero-padded digits") {
  CHECK(io::frame_name(0) == "000000");
  CHECK(io::frame_name(42) == "000042");
  CHECK(io::frame_name(999999) == "999999");
  CHECK_THROWS_AS(io::frame_name(1000000), Error);
}

TEST_CASE("raw label word files round-trip") {
  TempDir tmp;
  const std::vector<std::uint32_t> words{0, 1, 0x00070002u, 0xFFFFFFFFu};
  io::write_labels(tmp / "w.label", words);
  CHECK(io::read_labels(tmp / "w.label") == words);
  spit(tmp / "bad.label", "abc");
  CHECK_THROWS_AS(io::read_labels(tmp / "bad.label"), Error);
}

TEST_CASE("xyzl text parsing keeps labels verbatim and applies QC") {
  TempDir tmp;
  spit(tmp / "scan.txt",
       "# a comment\n"
       "0 0 0 wall\n"
       "1.5 -2 0.25 Door 0.5\n"
       "\n"
       "nan 0 0 wall\n"
       "2 2 2 exit_sign 2.0\n");
  const auto parsed =
      io::parse_source(tmp / "scan.txt", io::SourceFormat::XyzLabelText);
  CHECK(parsed.qc.total_points == 4);
  CHECK(parsed.qc.dropped_nonfinite == 1);
  CHECK(parsed.qc.remission_out_of_range == 1);
  CHECK_FALSE(parsed.qc.label_count_mismatch);
  REQUIRE(parsed.cloud.size() == 3);
  CHECK(parsed.raw_labels ==
        std::vector<std::string>{"wall", "Door", "exit_sign"});
  CHECK(parsed.cloud.points()[1].x == 1.5f);
  CHECK(parsed.cloud.points()[1].remission == 0.5f);
  CHECK(parsed.cloud.labels() == std::vector<ClassId>{0, 0, 0});
}

TEST_CASE("xyzl rejects malformed rows with the line number") {
  TempDir tmp;
  spit(tmp / "bad.txt", "0 0 0 wall\n1 2\n");
  try {
    io::parse_source(tmp / "bad.txt", io::SourceFormat::XyzLabelText);
    FAIL("expected malformed record");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedRecord);
    CHECK(std::string(e.what()).find("bad.txt:2") != std::string::npos);
  }

  spit(tmp / "nonnum.txt", "0 zero 0 wall\n");
  CHECK_THROWS_AS(
      io::parse_source(tmp / "nonnum.txt", io::SourceFormat::XyzLabelText),
      Error);
}

TEST_CASE("xyzl with zero surviving points is an empty-cloud error") {
  TempDir tmp;
  spit(tmp / "empty.txt", "# nothing\n");
  try {
    io::parse_source(tmp / "empty.txt", io::SourceFormat::XyzLabelText);
    FAIL("expected empty cloud");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyCloud);
  }

  spit(tmp / "allnan.txt", "nan 0 0 a\ninf 0 0 b\n");
  CHECK_THROWS_AS(
      io::parse_source(tmp / "allnan.txt", io::SourceFormat::XyzLabelText),
      Error);
}

namespace {

std::string small_ply() {
  return "ply\n"
         "format ascii 1.0\n"
         "comment made by hand\n"
         "element vertex 3\n"
         "property float x\n"
         "property float y\n"
         "property float z\n"
         "property float intensity\n"
         "property uchar label\n"
         "end_header\n"
         "0 0 0 0.5 7\n"
         "1 0 0.25 0.1 2\n"
         "0 1 0 0.9 7\n";
}

}  // namespace

TEST_CASE("ascii ply parsing reads coordinates and the label property") {
  TempDir tmp;
  spit(tmp / "a.ply", small_ply());
  const auto parsed = io::parse_source(tmp / "a.ply", io::SourceFormat::AsciiPly);
  CHECK(parsed.qc.total_points == 3);
  CHECK(parsed.qc.dropped_nonfinite == 0);
  REQUIRE(parsed.cloud.size() == 3);
  CHECK(parsed.cloud.points()[1].z == 0.25f);
  CHECK(parsed.raw_labels == std::vector<std::string>{"7", "2", "7"});
  CHECK_FALSE(parsed.qc.label_count_mismatch);
}

TEST_CASE("ascii ply with a custom label field name") {
  TempDir tmp;
  std::string body = small_ply();
  const auto pos = body.find("property uchar label");
  body.replace(pos, std::string("property uchar label").size(),
               "property uchar class");
  spit(tmp / "c.ply", body);
  const auto parsed =
      io::parse_source(tmp / "c.ply", io::SourceFormat::AsciiPly, "class");
  CHECK(parsed.raw_labels == std::vector<std::string>{"7", "2", "7"});
}

TEST_CASE("ascii ply without the label field flags the mismatch") {
  TempDir tmp;
  spit(tmp / "n.ply",
       "ply\nformat ascii 1.0\nelement vertex 1\n"
       "property float x\nproperty float y\nproperty float z\n"
       "end_header\n1 2 3\n");
  const auto parsed = io::parse_source(tmp / "n.ply", io::SourceFormat::AsciiPly);
  CHECK(parsed.qc.label_count_mismatch);
  CHECK(parsed.raw_labels == std::vector<std::string>{""});
}

TEST_CASE("ascii ply header validation") {
  TempDir tmp;
  spit(tmp / "notply.ply", "plyx\nformat ascii 1.0\nend_header\n");
  CHECK_THROWS_AS(io::parse_source(tmp / "notply.ply", io::SourceFormat::AsciiPly),
                  Error);

  spit(tmp / "bin.ply",
       "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
       "property float x\nproperty float y\nproperty float z\nend_header\n");
  try {
    io::parse_source(tmp / "bin.ply", io::SourceFormat::AsciiPly);
    FAIL("expected malformed header");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedHeader);
  }

  spit(tmp / "novertex.ply",
       "ply\nformat ascii 1.0\nelement face 1\nproperty int a\nend_header\n1\n");
  CHECK_THROWS_AS(
      io::parse_source(tmp / "novertex.ply", io::SourceFormat::AsciiPly), Error);

  spit(tmp / "truncated.ply",
       "ply\nformat ascii 1.0\nelement vertex 2\n"
       "property float x\nproperty float y\nproperty float z\n"
       "end_header\n1 2 3\n");
  CHECK_THROWS_AS(
      io::parse_source(tmp / "truncated.ply", io::SourceFormat::AsciiPly),
      Error);
}

TEST_CASE("ascii ply skips non-vertex elements and list properties") {
  TempDir tmp;
  spit(tmp / "faces.ply",
       "ply\nformat ascii 1.0\n"
       "element vertex 2\n"
       "property float x\nproperty float y\nproperty float z\n"
       "property uchar label\n"
       "element face 1\n"
       "property list uchar int vertex_indices\n"
       "end_header\n"
       "0 0 0 3\n"
       "1 1 1 4\n"
       "3 0 1 0\n");
  const auto parsed =
      io::parse_source(tmp / "faces.ply", io::SourceFormat::AsciiPly);
  REQUIRE(parsed.cloud.size() == 2);
  CHECK(parsed.raw_labels == std::vector<std::string>{"3", "4"});
}
