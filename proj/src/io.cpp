#include "pccforge/io.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

namespace pccforge::io {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) {
    throw Error(ErrorKind::IoFailure, "cannot read " + path.string());
  }
  return std::move(ss).str();
}

std::vector<unsigned char> read_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  }
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<unsigned char> bytes(size);
  in.seekg(0);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()),
                           static_cast<std::streamsize>(size))) {
    throw Error(ErrorKind::IoFailure, "cannot read " + path.string());
  }
  return bytes;
}

void write_binary(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path.string() +
                                          " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  }
}

void append_u32_le(std::vector<unsigned char>& buf, std::uint32_t v) {
  buf.push_back(static_cast<unsigned char>(v & 0xFF));
  buf.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
  buf.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
  buf.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

void append_f32_le(std::vector<unsigned char>& buf, float f) {
  append_u32_le(buf, std::bit_cast<std::uint32_t>(f));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32_le(const unsigned char* p) {
  return std::bit_cast<float>(get_u32_le(p));
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
         c == '\f';
}

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) tokens.emplace_back(line.substr(start, i - start));
  }
  return tokens;
}

std::optional<float> parse_float(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  float value = 0.0f;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

float parse_float_or_throw(std::string_view token, const fs::path& path,
                           std::size_t line) {
  auto v = parse_float(token);
  if (!v) {
    throw Error(ErrorKind::MalformedRecord,
                path.string() + ":" + std::to_string(line) +
                    ": cannot parse '" + std::string(token) + "' as a number");
  }
  return *v;
}

void qc_keep_point(ParsedSource& out, const Point3& p, std::string raw_label) {
  ++out.qc.total_points;
  if (!is_finite(p)) {
    ++out.qc.dropped_nonfinite;
    return;
  }
  if (p.remission < 0.0f || p.remission > 1.0f) {
    ++out.qc.remission_out_of_range;
  }
  out.cloud.push_back(p);
  out.raw_labels.push_back(std::move(raw_label));
}

// --- xyz-label text ---------------------------------------------------------

ParsedSource parse_xyz_label(const std::string& text, const fs::path& path) {
  ParsedSource out;
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 4 && tokens.size() != 5) {
      throw Error(ErrorKind::MalformedRecord,
                  path.string() + ":" + std::to_string(line_no) +
                      ": expected 4 or 5 columns, got " +
                      std::to_string(tokens.size()));
    }
    Point3 p;
    p.x = parse_float_or_throw(tokens[0], path, line_no);
    p.y = parse_float_or_throw(tokens[1], path, line_no);
    p.z = parse_float_or_throw(tokens[2], path, line_no);
    if (tokens.size() == 5) {
      p.remission = parse_float_or_throw(tokens[4], path, line_no);
    }
    qc_keep_point(out, p, std::move(tokens[3]));
  }
  if (out.cloud.empty()) {
    throw Error(ErrorKind::EmptyCloud, path.string() + ": no points after QC");
  }
  return out;
}

// --- ascii PLY ---------------------------------------------------------------

struct PlyProperty {
  std::string name;
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

struct TokenStream {
  std::string_view text;
  std::size_t pos;
  std::size_t line;

  std::optional<std::string_view> next() {
    while (pos < text.size() && is_space(text[pos])) {
      if (text[pos] == '\n') ++line;
      ++pos;
    }
    if (pos >= text.size()) return std::nullopt;
    std::size_t start = pos;
    while (pos < text.size() && !is_space(text[pos])) ++pos;
    return text.substr(start, pos - start);
  }
};

[[noreturn]] void header_error(const fs::path& path, std::size_t line,
                               const std::string& what) {
  throw Error(ErrorKind::MalformedHeader,
              path.string() + ":" + std::to_string(line) + ": " + what);
}

ParsedSource parse_ascii_ply(const std::string& text, const fs::path& path,
                             const std::string& label_field) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    if (pos >= text.size()) return std::nullopt;
    std::size_t start = pos;
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) {
      pos = text.size();
    } else {
      pos = end + 1;
    }
    std::string_view line = std::string_view(text).substr(
        start, (end == std::string::npos ? text.size() : end) - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    return line;
  };

  auto magic = next_line();
  if (!magic || *magic != "ply") {
    header_error(path, 1, "missing 'ply' magic");
  }

  bool saw_format = false;
  std::vector<PlyElement> elements;
  for (;;) {
    auto line = next_line();
    if (!line) header_error(path, line_no, "missing end_header");
    auto tokens = split_tokens(*line);
    if (tokens.empty()) continue;
    const std::string& kw = tokens[0];
    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      if (tokens.size() < 3 || tokens[1] != "ascii") {
        header_error(path, line_no, "only 'format ascii 1.0' is supported");
      }
      saw_format = true;
    } else if (kw == "element") {
      if (tokens.size() != 3) header_error(path, line_no, "bad element line");
      PlyElement el;
      el.name = tokens[1];
      std::size_t count = 0;
      auto [ptr, ec] = std::from_chars(
          tokens[2].data(), tokens[2].data() + tokens[2].size(), count);
      if (ec != std::errc() || ptr != tokens[2].data() + tokens[2].size()) {
        header_error(path, line_no, "bad element count '" + tokens[2] + "'");
      }
      el.count = count;
      elements.push_back(std::move(el));
    } else if (kw == "property") {
      if (elements.empty()) {
        header_error(path, line_no, "property before any element");
      }
      PlyProperty prop;
      if (tokens.size() == 5 && tokens[1] == "list") {
        prop.name = tokens[4];
        prop.is_list = true;
      } else if (tokens.size() == 3) {
        prop.name = tokens[2];
      } else {
        header_error(path, line_no, "bad property line");
      }
      elements.back().props.push_back(std::move(prop));
    } else if (kw == "end_header") {
      break;
    } else {
      header_error(path, line_no, "unrecognized header keyword '" + kw + "'");
    }
  }
  if (!saw_format) header_error(path, line_no, "missing format line");

  const PlyElement* vertex = nullptr;
  for (const auto& el : elements) {
    if (el.name == "vertex") {
      vertex = &el;
      break;
    }
  }
  if (!vertex) header_error(path, line_no, "no vertex element");

  auto scalar_index = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < vertex->props.size(); ++i) {
      if (vertex->props[i].name == name) {
        if (vertex->props[i].is_list) {
          header_error(path, line_no,
                       "vertex property '" + name + "' must be scalar");
        }
        return i;
      }
    }
    return std::nullopt;
  };
  auto ix = scalar_index("x");
  auto iy = scalar_index("y");
  auto iz = scalar_index("z");
  if (!ix || !iy || !iz) {
    header_error(path, line_no, "vertex element lacks x/y/z properties");
  }
  auto ilabel = scalar_index(label_field);

  ParsedSource out;
  out.qc.label_count_mismatch = !ilabel.has_value();

  TokenStream ts{text, pos, line_no + 1};
  auto next_token = [&](const PlyElement& el,
                        std::size_t record) -> std::string_view {
    auto tok = ts.next();
    if (!tok) {
      throw Error(ErrorKind::MalformedRecord,
                  path.string() + ": unexpected end of file in element '" +
                      el.name + "' (record " + std::to_string(record) + ")");
    }
    return *tok;
  };

  for (const auto& el : elements) {
    for (std::size_t rec = 0; rec < el.count; ++rec) {
      std::string vx, vy, vz, vlabel;
      for (std::size_t pi = 0; pi < el.props.size(); ++pi) {
        const auto& prop = el.props[pi];
        if (prop.is_list) {
          auto count_tok = next_token(el, rec);
          std::size_t n = 0;
          auto [ptr, ec] = std::from_chars(
              count_tok.data(), count_tok.data() + count_tok.size(), n);
          if (ec != std::errc() || ptr != count_tok.data() + count_tok.size()) {
            throw Error(ErrorKind::MalformedRecord,
                        path.string() + ":" + std::to_string(ts.line) +
                            ": bad list count '" + std::string(count_tok) +
                            "'");
          }
          for (std::size_t j = 0; j < n; ++j) next_token(el, rec);
          continue;
        }
        auto tok = next_token(el, rec);
        if (&el == vertex) {
          if (pi == *ix) vx = tok;
          else if (pi == *iy) vy = tok;
          else if (pi == *iz) vz = tok;
          else if (ilabel && pi == *ilabel) vlabel = tok;
        }
      }
      if (&el == vertex) {
        Point3 p;
        p.x = parse_float_or_throw(vx, path, ts.line);
        p.y = parse_float_or_throw(vy, path, ts.line);
        p.z = parse_float_or_throw(vz, path, ts.line);
        qc_keep_point(out, p, std::move(vlabel));
      }
    }
    if (&el == vertex) break;  // trailing elements carry nothing we need
  }

  if (out.cloud.empty()) {
    throw Error(ErrorKind::EmptyCloud, path.string() + ": no points after QC");
  }
  return out;
}

}  // namespace

ParsedSource parse_source(const fs::path& path, SourceFormat format,
                          const std::string& label_field) {
  const std::string text = read_file(path);
  switch (format) {
    case SourceFormat::XyzLabelText:
      return parse_xyz_label(text, path);
    case SourceFormat::AsciiPly:
      return parse_ascii_ply(text, path, label_field);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown source format");
}

std::string frame_name(unsigned frame) {
  if (frame > 999999u) {
    throw Error(ErrorKind::InvalidArgument,
                "frame index " + std::to_string(frame) +
                    " does not fit a six-digit name");
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06u", frame);
  return buf;
}

void write_skitti_scan(const LabeledCloud& cloud, const fs::path& scan_path,
                       const fs::path& label_path) {
  std::vector<unsigned char> scan;
  scan.reserve(cloud.size() * 16);
  for (const auto& p : cloud.points()) {
    append_f32_le(scan, p.x);
    append_f32_le(scan, p.y);
    append_f32_le(scan, p.z);
    append_f32_le(scan, p.remission);
  }
  std::vector<unsigned char> labels;
  labels.reserve(cloud.size() * 4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    append_u32_le(labels, pack_label(cloud.labels()[i], cloud.instance_ids()[i]));
  }
  write_binary(scan_path, scan);
  write_binary(label_path, labels);
}

SkittiScan read_skitti_scan(const fs::path& scan_path,
                            const fs::path& label_path, LabelPolicy policy) {
  const auto scan_bytes = read_binary(scan_path);
  if (scan_bytes.size() % 16 != 0) {
    throw Error(ErrorKind::TruncatedFile,
                scan_path.string() + ": size " +
                    std::to_string(scan_bytes.size()) +
                    " is not a multiple of 16");
  }
  const auto label_bytes = read_binary(label_path);
  if (label_bytes.size() % 4 != 0) {
    throw Error(ErrorKind::TruncatedFile,
                label_path.string() + ": size " +
                    std::to_string(label_bytes.size()) +
                    " is not a multiple of 4");
  }
  const std::size_t n_points = scan_bytes.size() / 16;
  const std::size_t n_labels = label_bytes.size() / 4;
  if (n_points != n_labels) {
    throw Error(ErrorKind::SizeMismatch,
                scan_path.string() + " has " + std::to_string(n_points) +
                    " points but " + label_path.string() + " has " +
                    std::to_string(n_labels) + " labels");
  }

  SkittiScan result;
  result.cloud.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const unsigned char* rec = scan_bytes.data() + i * 16;
    Point3 p;
    p.x = get_f32_le(rec);
    p.y = get_f32_le(rec + 4);
    p.z = get_f32_le(rec + 8);
    p.remission = get_f32_le(rec + 12);
    const auto [semantic, instance] = unpack_label(get_u32_le(label_bytes.data() + i * 4));
    if (semantic >= kClassCount) {
      if (policy == LabelPolicy::Strict) {
        throw Error(ErrorKind::UnknownClassId,
                    label_path.string() + ": word " + std::to_string(i) +
                        " has semantic id " + std::to_string(semantic));
      }
      ++result.out_of_schema;
    }
    result.cloud.push_back(p, semantic, instance);
  }
  return result;
}

std::vector<std::uint32_t> read_labels(const fs::path& path) {
  const auto bytes = read_binary(path);
  if (bytes.size() % 4 != 0) {
    throw Error(ErrorKind::TruncatedFile,
                path.string() + ": size " + std::to_string(bytes.size()) +
                    " is not a multiple of 4");
  }
  std::vector<std::uint32_t> words(bytes.size() / 4);
  for (std::size_t i = 0; i < words.size(); ++i) {
    words[i] = get_u32_le(bytes.data() + i * 4);
  }
  return words;
}

void write_labels(const fs::path& path, std::span<const std::uint32_t> words) {
  std::vector<unsigned char> bytes;
  bytes.reserve(words.size() * 4);
  for (auto w : words) append_u32_le(bytes, w);
  write_binary(path, bytes);
}

}  // namespace pccforge::io
