#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pccforge/core.hpp"

namespace pccforge::io {

enum class SourceFormat {
  AsciiPly,      // ascii-1.0 PLY with a "vertex" element carrying x, y, z
  XyzLabelText,  // whitespace-separated `x y z label [remission]` lines
};

/// Quality-control tally for one parsed source file.
/// total_points == kept points + dropped_nonfinite.
struct QcReport {
  std::size_t total_points = 0;
  std::size_t dropped_nonfinite = 0;
  std::size_t remission_out_of_range = 0;  // kept but flagged
  bool label_count_mismatch = false;       // source had no per-point label
};

struct ParsedSource {
  LabeledCloud cloud;                   // labels all 0 until remapped
  std::vector<std::string> raw_labels;  // verbatim source tokens, one per kept point
  QcReport qc;
};

/// Reads a source file, drops non-finite points, and returns the kept points
/// in file order together with their raw label strings. For AsciiPly the
/// label comes from the scalar vertex property named `label_field`; when that
/// property is absent every raw label is "" and the QC report flags the
/// mismatch.
ParsedSource parse_source(const std::filesystem::path& path,
                          SourceFormat format,
                          const std::string& label_field = "label");

// ---------------------------------------------------------------------------
// SemanticKITTI binary pair

/// Label word layout: semantic class in bits 0..15, instance id in 16..31.
constexpr std::uint32_t pack_label(std::uint16_t semantic,
                                   std::uint16_t instance) noexcept {
  return static_cast<std::uint32_t>(semantic) |
         (static_cast<std::uint32_t>(instance) << 16);
}

constexpr std::pair<std::uint16_t, std::uint16_t> unpack_label(
    std::uint32_t word) noexcept {
  return {static_cast<std::uint16_t>(word & 0xFFFFu),
          static_cast<std::uint16_t>(word >> 16)};
}

/// 6-digit zero-padded frame stem, e.g. 0 -> "000000".
std::string frame_name(unsigned frame);

/// Writes the scan as N records of 4 little-endian f32 (x, y, z, remission)
/// and the labels as N little-endian u32 words. File sizes are exactly 16*N
/// and 4*N bytes.
void write_skitti_scan(const LabeledCloud& cloud,
                       const std::filesystem::path& scan_path,
                       const std::filesystem::path& label_path);

enum class LabelPolicy {
  Strict,      // semantic >= 20 is an UnknownClassId error
  Permissive,  // kept verbatim, counted in SkittiScan::out_of_schema
};

struct SkittiScan {
  LabeledCloud cloud;
  std::size_t out_of_schema = 0;
};

SkittiScan read_skitti_scan(const std::filesystem::path& scan_path,
                            const std::filesystem::path& label_path,
                            LabelPolicy policy = LabelPolicy::Strict);

/// Raw label words of one .label file (size must be a multiple of 4).
std::vector<std::uint32_t> read_labels(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path,
                  std::span<const std::uint32_t> words);

}  // namespace pccforge::io
