#pragma once

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <string>

#include "stlf/common.hpp"
#include "stlf/hypothesis.hpp"

namespace stlf::io {

using json = nlohmann::json;

// Matrix CSV with fixed 6-decimal formatting (divergence/alpha dumps).
void write_csv(const std::filesystem::path& path, const Mat& m, int decimals = 6);
Mat read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

// Flat little-endian doubles prefixed by the arch descriptor
// (three little-endian uint32: input_dim, hidden_dim, output_dim).
void write_hypothesis(const std::filesystem::path& path, const Hypothesis& h);
Hypothesis read_hypothesis(const std::filesystem::path& path);

// Minimal structural JSON-schema checker: supports type, properties,
// required, items, enum. Throws FormatError on violation.
void validate_schema(const json& schema, const json& value, const std::string& where = "$");

// The schema results.json files are validated against.
json results_schema();

}  // namespace stlf::io
