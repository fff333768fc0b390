#include "smoothar/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "smoothar/error.hpp"

namespace smoothar {

using nlohmann::json;

std::string artifact_version() { return SMOOTHAR_VERSION; }

std::string config_hash(const std::string& canonical_config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : canonical_config) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json meta_json(const ArtifactMeta& meta) {
  return {{"seed", meta.seed}, {"config_hash", meta.config_hash}, {"artifact_version", meta.artifact_version}};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, std::size_t field, const std::string& what) {
  std::ostringstream os;
  os << source << ":" << line;
  if (field > 0) os << ": field " << field;
  os << ": " << what;
  throw ParseError(os.str());
}

double parse_number(const std::string& text, const std::string& source, std::size_t line, std::size_t field) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last) parse_fail(source, line, field, "not a number: '" + text + "'");
  return v;
}

// JSON access with a path-addressed ParseError on any mismatch.
class Reader {
 public:
  Reader(const json& node, std::string path, const std::string& source) : node_(node), path_(std::move(path)), source_(source) {}

  Reader operator[](const std::string& key) const {
    if (!node_.is_object()) fail("expected an object");
    const auto it = node_.find(key);
    if (it == node_.end()) throw ParseError(source_ + ": missing field " + join(key));
    return Reader(*it, join(key), source_);
  }
  Reader operator[](std::size_t i) const {
    if (!node_.is_array() || i >= node_.size()) fail("expected an array with index " + std::to_string(i));
    return Reader(node_[i], path_ + "[" + std::to_string(i) + "]", source_);
  }
  bool has(const std::string& key) const { return node_.is_object() && node_.contains(key); }
  std::size_t size() const {
    if (!node_.is_array()) fail("expected an array");
    return node_.size();
  }
  double number() const {
    if (!node_.is_number()) fail("expected a number");
    return node_.get<double>();
  }
  std::size_t count() const {
    if (!node_.is_number_unsigned() && !(node_.is_number_integer() && node_.get<long long>() >= 0)) {
      fail("expected a non-negative integer");
    }
    return node_.get<std::size_t>();
  }
  std::uint64_t u64() const {
    if (!node_.is_number_unsigned() && !(node_.is_number_integer() && node_.get<long long>() >= 0)) {
      fail("expected a non-negative integer");
    }
    return node_.get<std::uint64_t>();
  }
  std::string string() const {
    if (!node_.is_string()) fail("expected a string");
    return node_.get<std::string>();
  }
  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].count());
    return out;
  }
  Tensor vector() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].number());
    const std::size_t n = out.size();
    return Tensor(Shape{n}, std::move(out));
  }
  Tensor matrix() const {
    const std::size_t rows = size();
    std::vector<double> out;
    std::size_t cols = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      const Reader row = (*this)[r];
      if (r == 0) cols = row.size();
      if (row.size() != cols) row.fail("ragged matrix row");
      for (std::size_t c = 0; c < cols; ++c) out.push_back(row[c].number());
    }
    return Tensor(Shape{rows, cols}, std::move(out));
  }
  const json& raw() const { return node_; }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_ + ": field " + path_ + ": " + what); }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& node_;
  std::string path_;
  const std::string& source_;
};

json matrix_json(const Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) rows.push_back(std::vector<double>(t.row(r).begin(), t.row(r).end()));
  return rows;
}

json made_json(const MadeModel& model) {
  const MadeConfig& cfg = model.config();
  json layers = json::array();
  for (const MadeLayer& layer : model.layers()) {
    layers.push_back({{"w", matrix_json(layer.weight)}, {"b", layer.bias.values()}, {"mask", matrix_json(layer.mask)}});
  }
  return {{"config",
           {{"input_dim", cfg.input_dim},
            {"cond_dim", cfg.cond_dim},
            {"hidden_sizes", cfg.hidden_sizes},
            {"num_components", cfg.num_components},
            {"activation", to_string(cfg.activation)}}},
          {"ordering", cfg.resolved_ordering()},
          {"layers", layers}};
}

MadeModel made_from_json(const Reader& r) {
  const Reader c = r["config"];
  MadeConfig cfg;
  cfg.input_dim = c["input_dim"].count();
  cfg.cond_dim = c["cond_dim"].count();
  cfg.hidden_sizes = c["hidden_sizes"].counts();
  cfg.num_components = c["num_components"].count();
  try {
    cfg.activation = activation_from_string(c["activation"].string());
  } catch (const ConfigError& e) {
    c["activation"].fail(e.what());
  }
  cfg.ordering = r["ordering"].counts();
  const Reader layers = r["layers"];
  std::vector<MadeLayer> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.push_back({layers[i]["w"].matrix(), layers[i]["b"].vector(), layers[i]["mask"].matrix()});
  }
  return MadeModel(std::move(cfg), std::move(out));
}

}  // namespace

std::string ArtifactMeta::to_json() const { return meta_json(*this).dump(); }

std::vector<std::string> coordinate_header(std::size_t dim, const std::string& prefix) {
  std::vector<std::string> h;
  for (std::size_t i = 1; i <= dim; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Tensor& data, const ArtifactMeta* meta) {
  const std::size_t cols = data.rank() == 2 ? data.cols() : (data.numel() == 0 ? header.size() : 1);
  if (header.size() != cols) {
    throw DimensionError("CSV header has " + std::to_string(header.size()) + " columns, data has " + std::to_string(cols));
  }
  if (meta) out << "# " << meta->to_json() << "\n";
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  const std::size_t rows = cols == 0 ? 0 : data.numel() / cols;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out << (c ? "," : "") << format_double(data[r * cols + c]);
    out << "\n";
  }
}

CsvTable read_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line.front() == '#') {
      if (!have_header && table.meta_json.empty()) {
        table.meta_json = trim(line.substr(1));
        if (!json::accept(table.meta_json)) parse_fail(source, line_no, 0, "metadata line is not valid JSON");
      }
      continue;
    }
    std::vector<std::string> fields = split_commas(line);
    if (!have_header) {
      table.header = std::move(fields);
      for (std::size_t f = 0; f < table.header.size(); ++f)
        if (table.header[f].empty()) parse_fail(source, line_no, f + 1, "empty column name");
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      parse_fail(source, line_no, 0,
                 "expected " + std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t f = 0; f < fields.size(); ++f) values.push_back(parse_number(fields[f], source, line_no, f + 1));
    ++rows;
  }
  if (!have_header) throw ParseError(source + ": missing header row");
  table.data = Tensor(Shape{rows, table.header.size()}, std::move(values));
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  return read_csv(in, path);
}

void write_csv_file(const std::string& path, const std::vector<std::string>& header, const Tensor& data,
                    const ArtifactMeta* meta) {
  std::ostringstream os;
  write_csv(os, header, data, meta);
  write_text_file(path, os.str());
}

std::size_t Checkpoint::dim() const {
  if (const auto* ts = std::get_if<TwoStageModel>(&model)) return ts->dim();
  return std::get<MadeModel>(model).input_dim();
}

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
  json doc;
  doc["format_version"] = 1;
  if (const auto* ts = std::get_if<TwoStageModel>(&checkpoint.model)) {
    doc["model_type"] = "two_stage";
    doc["prior"] = made_json(ts->prior);
    doc["denoiser"] = made_json(ts->denoiser);
    doc["kernel"] = {{"family", to_string(ts->kernel.family())}, {"sigma", ts->kernel.scale()}, {"dim", ts->kernel.dim()}};
  } else {
    const json m = made_json(std::get<MadeModel>(checkpoint.model));
    doc["model_type"] = "made";
    for (const auto& [k, v] : m.items()) doc[k] = v;
  }
  doc["meta"] = meta_json(checkpoint.meta);
  json log = json::object();
  for (const auto& [k, v] : checkpoint.training_log.numbers) log[k] = v;
  for (const auto& [k, v] : checkpoint.training_log.strings) log[k] = v;
  doc["training_log"] = log;
  return doc.dump();
}

Checkpoint checkpoint_from_json(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number.
    const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
    const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
    throw ParseError(source + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
  }
  const Reader root(doc, "", source);
  if (root["format_version"].count() != 1) root["format_version"].fail("unsupported format version");
  const std::string type = root["model_type"].string();
  Checkpoint ck{MadeModel(), {}, {}};
  if (type == "made") {
    ck.model = made_from_json(root);
  } else if (type == "two_stage") {
    const Reader k = root["kernel"];
    KernelFamily family;
    try {
      family = kernel_family_from_string(k["family"].string());
    } catch (const ConfigError& e) {
      k["family"].fail(e.what());
    }
    TwoStageModel ts{made_from_json(root["prior"]), made_from_json(root["denoiser"]),
                     SmoothingKernel(family, k["sigma"].number(), k["dim"].count())};
    ts.validate();
    ck.model = std::move(ts);
  } else {
    root["model_type"].fail("unknown model type '" + type + "'");
  }
  if (root.has("meta")) {
    const Reader m = root["meta"];
    ck.meta.seed = m["seed"].u64();
    ck.meta.config_hash = m["config_hash"].string();
    ck.meta.artifact_version = m["artifact_version"].string();
  }
  if (root.has("training_log")) {
    for (const auto& [k, v] : root["training_log"].raw().items()) {
      if (v.is_number()) {
        ck.training_log.numbers[k] = v.get<double>();
      } else if (v.is_string()) {
        ck.training_log.strings[k] = v.get<std::string>();
      }
    }
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) { write_text_file(path, checkpoint_to_json(checkpoint)); }

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(read_text_file(path), path); }

std::string ResultRecord::to_json() const {
  json j = {{"task", task},
            {"model_kind", model_kind},
            {"sigma", sigma ? json(*sigma) : json(nullptr)},
            {"family", family.empty() ? json(nullptr) : json(family)},
            {"M", mc_samples},
            {"nll_or_elbo", nll_or_elbo},
            {"estimate", estimate},
            {"seed", meta.seed},
            {"config_hash", meta.config_hash},
            {"artifact_version", meta.artifact_version}};
  return j.dump(2);
}

std::string scatter_svg(const Tensor& points, const ArtifactMeta& meta) {
  if (points.rank() != 2 || points.cols() == 0) throw DimensionError("scatter expects [N, D] points");
  const std::size_t n = points.rows();
  const bool two_d = points.cols() >= 2;
  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double x = points.at(r, 0);
    const double y = two_d ? points.at(r, 1) : 0.0;
    if (r == 0) {
      x_lo = x_hi = x;
      y_lo = y_hi = y;
    }
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
    y_lo = std::min(y_lo, y);
    y_hi = std::max(y_hi, y);
  }
  // Degenerate extents get a unit box so the mapping stays finite.
  const auto pad = [](double& lo, double& hi) {
    double span = hi - lo;
    if (span <= 0.0) {
      lo -= 0.5;
      hi += 0.5;
      span = 1.0;
    }
    lo -= 0.05 * span;
    hi += 0.05 * span;
  };
  pad(x_lo, x_hi);
  pad(y_lo, y_hi);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 600 600\" width=\"600\" height=\"600\">\n";
  os << "<metadata>" << meta.to_json() << "</metadata>\n";
  os << "<rect width=\"600\" height=\"600\" fill=\"white\"/>\n";
  os << std::setprecision(6) << std::fixed;
  for (std::size_t r = 0; r < n; ++r) {
    const double y = two_d ? points.at(r, 1) : 0.0;
    const double px = (points.at(r, 0) - x_lo) / (x_hi - x_lo) * 600.0;
    const double py = 600.0 - (y - y_lo) / (y_hi - y_lo) * 600.0;
    os << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"1.5\" fill=\"#1f4e79\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError(path + ": cannot open file for writing");
  out << text;
  if (!out) throw ContractError(path + ": write failed");
}

}  // namespace smoothar
