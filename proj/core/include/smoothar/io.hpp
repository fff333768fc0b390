#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "smoothar/made.hpp"
#include "smoothar/tensor.hpp"
#include "smoothar/training.hpp"

namespace smoothar {

std::string artifact_version();

// 16 hex digits of 64-bit FNV-1a.
std::string config_hash(const std::string& canonical_config);

struct ArtifactMeta {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string artifact_version = smoothar::artifact_version();

  std::string to_json() const;
};

// CSV layout: an optional "# {json}" metadata line, a header row, then one
// numeric row per point. Numbers are written with 17 significant digits.
struct CsvTable {
  std::vector<std::string> header;
  Tensor data;  // [rows, header.size()]
  std::string meta_json;  // empty when the file has none
};

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Tensor& data, const ArtifactMeta* meta);
CsvTable read_csv(std::istream& in, const std::string& source);
CsvTable read_csv_file(const std::string& path);
void write_csv_file(const std::string& path, const std::vector<std::string>& header, const Tensor& data,
                    const ArtifactMeta* meta);
// x1, ..., xD
std::vector<std::string> coordinate_header(std::size_t dim, const std::string& prefix = "x");

struct TrainingLog {
  std::map<std::string, double> numbers;
  std::map<std::string, std::string> strings;
};

struct Checkpoint {
  std::variant<MadeModel, TwoStageModel> model;
  ArtifactMeta meta;
  TrainingLog training_log;

  bool is_two_stage() const { return std::holds_alternative<TwoStageModel>(model); }
  std::size_t dim() const;
};

// Shortest round-trip decimals for every parameter; reloading reproduces the
// model bit for bit.
std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text, const std::string& source);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

struct ResultRecord {
  std::string task;
  std::string model_kind;  // made | two_stage
  std::optional<double> sigma;
  std::string family;      // empty for baselines
  std::size_t mc_samples = 0;
  double nll_or_elbo = 0.0;
  std::string estimate;    // exact_nll | negative_elbo_upper_bound
  ArtifactMeta meta;

  std::string to_json() const;
};

// Scatter of the first two columns (a 1-d input is drawn on y = 0) in a
// 600x600 view box scaled to the data bounding box plus 5%.
std::string scatter_svg(const Tensor& points, const ArtifactMeta& meta);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace smoothar
