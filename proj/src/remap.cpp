#include "pccforge/remap.hpp"

#include <cctype>
#include <charconv>
#include <fstream>

namespace pccforge::remap {

namespace fs = std::filesystem;

std::string normalize_key(std::string_view key) {
  std::size_t begin = 0;
  std::size_t end = key.size();
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (begin < end && is_space(static_cast<unsigned char>(key[begin]))) ++begin;
  while (end > begin && is_space(static_cast<unsigned char>(key[end - 1]))) --end;
  std::string out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back(static_cast<char>(
        std::tolower(static_cast<unsigned char>(key[i]))));
  }
  return out;
}

ClassId RemapTable::resolve(std::string_view raw_key) const {
  auto it = rules.find(normalize_key(raw_key));
  return it == rules.end() ? kDefaultTarget : it->second;
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void csv_error(const fs::path& path, std::size_t line,
                            const std::string& what) {
  throw Error(ErrorKind::MalformedCsv,
              path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

RemapTable load_remap_csv(const fs::path& path, const LabelSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  }

  RemapTable table;
  std::unordered_map<std::string, std::size_t> first_seen_line;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_row(line);
    if (!saw_header) {
      if (fields.size() != 3 || normalize_key(fields[0]) != "source_dataset" ||
          normalize_key(fields[1]) != "source_key" ||
          normalize_key(fields[2]) != "target_id") {
        csv_error(path, line_no,
                  "expected header 'source_dataset,source_key,target_id'");
      }
      saw_header = true;
      continue;
    }
    if (fields.size() != 3) {
      csv_error(path, line_no,
                "expected 3 fields, got " + std::to_string(fields.size()));
    }

    const std::string source = normalize_key(fields[0]);
    if (source.empty()) csv_error(path, line_no, "empty source_dataset");
    if (table.source_name.empty()) {
      table.source_name = source;
    } else if (table.source_name != source) {
      csv_error(path, line_no,
                "file mixes source datasets '" + table.source_name +
                    "' and '" + source + "'; one table per file");
    }

    const std::string key = normalize_key(fields[1]);
    if (key.empty()) csv_error(path, line_no, "empty source_key");

    const std::string& target_text = fields[2];
    unsigned target = 0;
    auto [ptr, ec] = std::from_chars(
        target_text.data(), target_text.data() + target_text.size(), target);
    if (ec != std::errc() || ptr != target_text.data() + target_text.size()) {
      csv_error(path, line_no, "bad target_id '" + target_text + "'");
    }
    if (target >= schema.size()) {
      throw Error(ErrorKind::InvalidTargetId,
                  path.string() + ":" + std::to_string(line_no) +
                      ": target_id " + std::to_string(target) +
                      " not in 0.." + std::to_string(schema.size() - 1));
    }

    auto [it, inserted] =
        table.rules.emplace(key, static_cast<ClassId>(target));
    if (inserted) {
      first_seen_line.emplace(key, line_no);
    } else if (it->second != static_cast<ClassId>(target)) {
      throw Error(ErrorKind::ConflictingRule,
                  path.string() + ": key '" + key + "' maps to " +
                      std::to_string(it->second) + " (line " +
                      std::to_string(first_seen_line[key]) + ") and " +
                      std::to_string(target) + " (line " +
                      std::to_string(line_no) + ")");
    }
  }
  if (in.bad()) {
    throw Error(ErrorKind::IoFailure, "cannot read " + path.string());
  }
  if (!saw_header) {
    csv_error(path, line_no == 0 ? 1 : line_no, "missing header row");
  }
  return table;
}

RemapResult apply_remap(std::span<const std::string> raw_labels,
                        const RemapTable& table, int threads) {
  RemapResult out;
  out.labels.resize(raw_labels.size());
  const auto n = static_cast<std::ptrdiff_t>(raw_labels.size());
  std::size_t unmapped = 0;
  const int budget = resolve_threads(threads);

#pragma omp parallel for num_threads(budget) schedule(static) \
    reduction(+ : unmapped)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::string key = normalize_key(raw_labels[i]);
    auto it = table.rules.find(key);
    if (it == table.rules.end()) {
      out.labels[i] = RemapTable::kDefaultTarget;
      ++unmapped;
    } else {
      out.labels[i] = it->second;
    }
  }
  out.unmapped = unmapped;
  return out;
}

}  // namespace pccforge::remap
