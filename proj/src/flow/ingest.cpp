#include "flowvgae/flow/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "flowvgae/io/binary.hpp"

namespace flowvgae::flow {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

bool parse_number(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) {
    out = kMissing;
    return true;
  }
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec == std::errc::result_out_of_range) {
    out = text.front() == '-' ? -std::numeric_limits<double>::infinity()
                              : std::numeric_limits<double>::infinity();
    return true;
  }
  return ec == std::errc() && ptr == end;
}

void append_number(std::string& out, double v) {
  if (std::isnan(v)) return;  // missing cell
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

SchemaError::SchemaError(std::vector<std::string> missing)
    : std::runtime_error("flow file header is missing column(s): " + join(missing)),
      missing_(std::move(missing)) {}

RowError::RowError(std::size_t line, const std::string& detail)
    : std::runtime_error("flow file line " + std::to_string(line) + ": " + detail),
      line_(line) {}

std::vector<FlowRecord> parse_flows(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError({kColumnNames.begin(), kColumnNames.end()});
  const auto header = split_csv(line);
  std::map<std::string, std::size_t, std::less<>> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    position.emplace(std::string(trim(header[i])), i);
  }
  std::array<std::size_t, kColumnCount> cell_of{};
  std::vector<std::string> missing;
  for (std::size_t c = 0; c < kColumnCount; ++c) {
    auto it = position.find(kColumnNames[c]);
    if (it == position.end()) {
      missing.emplace_back(kColumnNames[c]);
    } else {
      cell_of[c] = it->second;
    }
  }
  if (!missing.empty()) throw SchemaError(std::move(missing));

  std::vector<FlowRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw RowError(line_no, "expected " + std::to_string(header.size()) + " cells, found " +
                                  std::to_string(cells.size()));
    }
    FlowRecord rec;
    for (std::size_t c = 0; c < kColumnCount; ++c) {
      const auto col = static_cast<Column>(c);
      const std::string& cell = cells[cell_of[c]];
      if (col == kSrcIp) {
        rec.src_ip = std::string(trim(cell));
      } else if (col == kDstIp) {
        rec.dst_ip = std::string(trim(cell));
      } else if (col == kCategory) {
        rec.category = std::string(trim(cell));
      } else if (!parse_number(cell, rec.numeric[c])) {
        throw RowError(line_no, "column '" + std::string(kColumnNames[c]) +
                                    "' is not numeric: '" + cell + "'");
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<FlowRecord> parse_flows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open flow file " + path.string());
  return parse_flows(in);
}

void write_flows(std::ostream& out, const std::vector<FlowRecord>& records) {
  std::string line;
  for (std::size_t c = 0; c < kColumnCount; ++c) {
    if (c) line += ',';
    line += kColumnNames[c];
  }
  out << line << '\n';
  for (const auto& rec : records) {
    line.clear();
    for (std::size_t c = 0; c < kColumnCount; ++c) {
      if (c) line += ',';
      const auto col = static_cast<Column>(c);
      if (col == kSrcIp) {
        line += quote_if_needed(rec.src_ip);
      } else if (col == kDstIp) {
        line += quote_if_needed(rec.dst_ip);
      } else if (col == kCategory) {
        line += quote_if_needed(rec.category);
      } else {
        append_number(line, rec.numeric[c]);
      }
    }
    out << line << '\n';
  }
}

void write_flows(const std::filesystem::path& path, const std::vector<FlowRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write flow file " + path.string());
  write_flows(out, records);
}

CleanResult clean(std::vector<FlowRecord> records) {
  CleanResult result;
  result.records.reserve(records.size());
  for (auto& rec : records) {
    bool ok = !rec.src_ip.empty() && !rec.dst_ip.empty();
    for (std::size_t c = 0; ok && c < kColumnCount; ++c) {
      if (is_text_column(static_cast<Column>(c))) continue;
      ok = std::isfinite(rec.numeric[c]);
    }
    if (ok) {
      result.records.push_back(std::move(rec));
    } else {
      ++result.dropped;
    }
  }
  return result;
}

const std::vector<Column>& default_continuous_columns() {
  static const std::vector<Column> cols = [] {
    std::vector<Column> v;
    for (auto [first, last] : {std::pair{kBiDurationMs, kBiCumulativeFlags},
                               std::pair{kS2dDurationMs, kS2dCumulativeFlags},
                               std::pair{kD2sDurationMs, kD2sCumulativeFlags}}) {
      for (std::size_t c = first; c <= last; ++c) v.push_back(static_cast<Column>(c));
    }
    return v;
  }();
  return cols;
}

EncoderSpec fit_encoder(const std::vector<FlowRecord>& records) {
  if (records.empty()) throw std::invalid_argument("fit_encoder: no records");
  std::map<int, std::size_t> protocol_counts;
  std::map<int, std::size_t> version_counts;
  for (const auto& r : records) {
    ++protocol_counts[static_cast<int>(r[kProtocol])];
    ++version_counts[static_cast<int>(r[kIpVersion])];
  }
  std::vector<std::pair<int, std::size_t>> ranked(protocol_counts.begin(), protocol_counts.end());
  // map iteration is ascending by value, so a stable sort keeps smaller values first on ties
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  EncoderSpec spec;
  for (std::size_t i = 0; i < ranked.size() && i < 2; ++i) {
    spec.protocol_keep.push_back(ranked[i].first);
  }
  for (const auto& [v, n] : version_counts) spec.ip_versions.push_back(v);
  spec.continuous = default_continuous_columns();
  return spec;
}

std::vector<double> encode(const FlowRecord& record, const EncoderSpec& spec) {
  std::vector<double> out(spec.width(), 0.0);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < spec.continuous.size(); ++i) {
    out[i] = record[spec.continuous[i]];
    norm2 += out[i] * out[i];
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t i = 0; i < spec.continuous.size(); ++i) out[i] *= inv;
  }
  std::size_t base = spec.continuous.size();
  const int proto = static_cast<int>(record[kProtocol]);
  std::size_t slot = EncoderSpec::kProtocolSlots - 1;
  for (std::size_t i = 0; i < spec.protocol_keep.size(); ++i) {
    if (spec.protocol_keep[i] == proto) slot = i;
  }
  out[base + slot] = 1.0;
  base += EncoderSpec::kProtocolSlots;
  const int version = static_cast<int>(record[kIpVersion]);
  const auto it = std::find(spec.ip_versions.begin(), spec.ip_versions.end(), version);
  out[base + static_cast<std::size_t>(it - spec.ip_versions.begin())] = 1.0;
  return out;
}

numerics::Tensor encode_all(const std::vector<FlowRecord>& records, const EncoderSpec& spec) {
  const std::size_t width = spec.width();
  numerics::Tensor m(numerics::Shape{records.size(), width});
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto row = encode(records[r], spec);
    std::copy(row.begin(), row.end(), m.values().begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  return m;
}

std::string EncoderSpec::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "flowvgae.encoder_spec";
  j["version"] = kVersion;
  j["protocol_keep"] = protocol_keep;
  j["ip_versions"] = ip_versions;
  std::vector<std::string> names;
  for (auto c : continuous) names.emplace_back(kColumnNames[c]);
  j["continuous_columns"] = names;
  j["width"] = width();
  return j.dump(2) + "\n";
}

EncoderSpec EncoderSpec::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "flowvgae.encoder_spec") {
    throw io::FormatError("not an encoder spec");
  }
  if (j.at("version").get<int>() != kVersion) {
    throw io::FormatError("unsupported encoder spec version " + j.at("version").dump());
  }
  EncoderSpec spec;
  spec.protocol_keep = j.at("protocol_keep").get<std::vector<int>>();
  spec.ip_versions = j.at("ip_versions").get<std::vector<int>>();
  for (const auto& name : j.at("continuous_columns").get<std::vector<std::string>>()) {
    const auto it = std::find(kColumnNames.begin(), kColumnNames.end(), name);
    if (it == kColumnNames.end()) throw io::FormatError("unknown column in spec: " + name);
    spec.continuous.push_back(static_cast<Column>(it - kColumnNames.begin()));
  }
  if (spec.protocol_keep.size() > 2) throw io::FormatError("protocol keep-set larger than 2");
  return spec;
}

namespace {
constexpr std::string_view kMatrixMagic = "FVGMATRX";
constexpr std::uint32_t kMatrixVersion = 1;
}  // namespace

void write_feature_matrix(const std::filesystem::path& path, const numerics::Tensor& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  io::BinaryWriter w(out);
  w.put_magic(kMatrixMagic);
  w.put(kMatrixVersion);
  w.put<std::uint64_t>(m.rows());
  w.put<std::uint64_t>(m.cols());
  w.put_array<double>(m.values());
}

numerics::Tensor read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  io::BinaryReader r(in);
  r.expect_magic(kMatrixMagic);
  if (r.get<std::uint32_t>() != kMatrixVersion) {
    throw io::FormatError("unsupported feature matrix version");
  }
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  auto values = r.get_array<double>();
  return numerics::Tensor(numerics::Shape{rows, cols}, std::move(values));
}

}  // namespace flowvgae::flow
