#include "stlf/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace stlf::io {

namespace {

void require_stream(const std::ios& s, const std::filesystem::path& path, const char* verb) {
  if (!s) throw FormatError(std::string("cannot ") + verb + " file: " + path.string());
}

}  // namespace

void write_csv(const std::filesystem::path& path, const Mat& m, int decimals) {
  std::ofstream f(path);
  require_stream(f, path, "write");
  f.setf(std::ios::fixed);
  f.precision(decimals);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) f << ',';
      f << m(i, j);
    }
    f << '\n';
  }
}

Mat read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  require_stream(f, path, "read");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError("bad CSV cell '" + cell + "' in " + path.string());
      }
    }
    if (!rows.empty() && rows.front().size() != row.size())
      throw FormatError("ragged CSV rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("empty CSV: " + path.string());
  Mat m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path);
  require_stream(f, path, "write");
  f << text;
}

namespace {

void put_u32_le(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::ifstream& f, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("truncated hypothesis file: " + path.string());
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

}  // namespace

void write_hypothesis(const std::filesystem::path& path, const Hypothesis& h) {
  std::ofstream f(path, std::ios::binary);
  require_stream(f, path, "write");
  put_u32_le(f, static_cast<std::uint32_t>(h.arch.input_dim));
  put_u32_le(f, static_cast<std::uint32_t>(h.arch.hidden_dim));
  put_u32_le(f, static_cast<std::uint32_t>(h.arch.output_dim));
  for (Eigen::Index i = 0; i < h.params.size(); ++i) {
    std::uint64_t bits;
    const double v = h.params[i];
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    f.write(reinterpret_cast<const char*>(b), 8);
  }
}

Hypothesis read_hypothesis(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require_stream(f, path, "read");
  Arch arch;
  arch.input_dim = static_cast<int>(get_u32_le(f, path));
  arch.hidden_dim = static_cast<int>(get_u32_le(f, path));
  arch.output_dim = static_cast<int>(get_u32_le(f, path));
  Hypothesis h = Hypothesis::zeros(arch);
  for (Eigen::Index i = 0; i < h.params.size(); ++i) {
    unsigned char b[8];
    if (!f.read(reinterpret_cast<char*>(b), 8))
      throw FormatError("truncated hypothesis params: " + path.string());
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= std::uint64_t(b[k]) << (8 * k);
    double v;
    std::memcpy(&v, &bits, 8);
    h.params[i] = v;
  }
  return h;
}

void validate_schema(const json& schema, const json& value, const std::string& where) {
  if (schema.contains("type")) {
    const std::string type = schema["type"];
    const bool ok = (type == "object" && value.is_object()) ||
                    (type == "array" && value.is_array()) ||
                    (type == "string" && value.is_string()) ||
                    (type == "number" && value.is_number()) ||
                    (type == "integer" && value.is_number_integer()) ||
                    (type == "boolean" && value.is_boolean());
    if (!ok) throw FormatError("schema: " + where + " is not of type " + type);
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& v : schema["enum"]) found = found || v == value;
    if (!found) throw FormatError("schema: " + where + " not in enum");
  }
  if (schema.contains("required"))
    for (const auto& key : schema["required"])
      if (!value.contains(key.get<std::string>()))
        throw FormatError("schema: " + where + " missing required key '" +
                          key.get<std::string>() + "'");
  if (schema.contains("properties") && value.is_object())
    for (const auto& [key, sub] : schema["properties"].items())
      if (value.contains(key)) validate_schema(sub, value.at(key), where + "." + key);
  if (schema.contains("items") && value.is_array())
    for (std::size_t i = 0; i < value.size(); ++i)
      validate_schema(schema["items"], value[i], where + "[" + std::to_string(i) + "]");
}

json results_schema() {
  static const char* kSchema = R"({
    "type": "object",
    "required": ["seed", "num_devices", "stlf", "divergence", "bounds", "baselines"],
    "properties": {
      "seed": {"type": "integer"},
      "num_devices": {"type": "integer"},
      "divergence": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
      "bounds": {
        "type": "object",
        "required": ["S", "T_hat"],
        "properties": {
          "S": {"type": "array", "items": {"type": "number"}},
          "T_hat": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
        }
      },
      "stlf": {
        "type": "object",
        "required": ["psi", "alpha", "avg_target_accuracy", "per_target_accuracy",
                     "total_energy_joules", "normalized_energy", "saved_transmissions",
                     "active_link_count", "objective_trace"],
        "properties": {
          "psi": {"type": "array", "items": {"type": "integer"}},
          "alpha": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
          "avg_target_accuracy": {"type": "number"},
          "per_target_accuracy": {"type": "array", "items": {"type": "number"}},
          "total_energy_joules": {"type": "number"},
          "normalized_energy": {"type": "number"},
          "saved_transmissions": {"type": "integer"},
          "active_link_count": {"type": "integer"},
          "objective_trace": {"type": "array", "items": {"type": "number"}}
        }
      },
      "baselines": {"type": "object"}
    }
  })";
  return json::parse(kSchema);
}

}  // namespace stlf::io
