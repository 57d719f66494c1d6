#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowvgae/flow/flow_record.hpp"
#include "flowvgae/numerics/tensor.hpp"

namespace flowvgae::flow {

/// Header is missing required columns; what() lists all of them.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::vector<std::string> missing);
  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  std::vector<std::string> missing_;
};

/// A data row could not be parsed.
class RowError : public std::runtime_error {
 public:
  RowError(std::size_t line, const std::string& detail);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Reads a comma-separated flow export. The header must contain every
/// column in kColumnNames (any order). Empty numeric cells are read as
/// missing (NaN); "inf"/"nan" spellings are accepted and left for clean().
std::vector<FlowRecord> parse_flows(std::istream& in);
std::vector<FlowRecord> parse_flows(const std::filesystem::path& path);

/// Writes records with the canonical header. Numbers use the shortest
/// round-trip representation, so parse(write(x)) == x for finite values.
void write_flows(std::ostream& out, const std::vector<FlowRecord>& records);
void write_flows(const std::filesystem::path& path, const std::vector<FlowRecord>& records);

struct CleanResult {
  std::vector<FlowRecord> records;
  std::size_t dropped = 0;
};

/// Drops records with any missing or non-finite numeric field, or with an
/// empty address. Relative order of survivors is preserved.
CleanResult clean(std::vector<FlowRecord> records);

/// Continuous columns fed to the model: durations, packet/byte counts,
/// packet-size stats, mean inter-arrival and cumulative flags for each of
/// the three directions. Identifiers, ports, absolute timestamps and labels
/// are excluded.
const std::vector<Column>& default_continuous_columns();

/// Frozen preprocessing layout. Feature vector = L2-normalised continuous
/// block, then protocol one-hot [keep..., rare], then ip_version one-hot
/// [seen versions..., other].
struct EncoderSpec {
  static constexpr int kVersion = 1;
  std::vector<int> protocol_keep;  // up to two values, most frequent first
  std::vector<int> ip_versions;    // ascending
  std::vector<Column> continuous;

  static constexpr std::size_t kProtocolSlots = 3;
  std::size_t ip_version_slots() const { return ip_versions.size() + 1; }
  std::size_t width() const {
    return continuous.size() + kProtocolSlots + ip_version_slots();
  }

  std::string to_json() const;
  static EncoderSpec from_json(const std::string& text);
  bool operator==(const EncoderSpec&) const = default;
};

/// Keep-set = two most frequent protocols, ties to the smaller number.
EncoderSpec fit_encoder(const std::vector<FlowRecord>& records);

std::vector<double> encode(const FlowRecord& record, const EncoderSpec& spec);

/// Row i encodes records[i]; shape [records.size() x spec.width()].
numerics::Tensor encode_all(const std::vector<FlowRecord>& records, const EncoderSpec& spec);

/// Versioned little-endian matrix container.
void write_feature_matrix(const std::filesystem::path& path, const numerics::Tensor& m);
numerics::Tensor read_feature_matrix(const std::filesystem::path& path);

}  // namespace flowvgae::flow
