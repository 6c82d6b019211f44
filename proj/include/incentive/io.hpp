#pragma once

#include "incentive/common.hpp"
#include "incentive/dataset.hpp"
#include "incentive/simgen.hpp"
#include "incentive/sire.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace incentive::io {

// Malformed input text (config or data file).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Nine significant digits ("%.9g"); NaN is written as an empty field.
std::string format_real(double value);

// RFC 4180 quoting when the field contains a comma, quote or newline.
std::string csv_escape(std::string_view field);
std::vector<std::string> split_csv_line(std::string_view line);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Columns: x1..xd, action, reward, [p1..pK], split.
void write_dataset_csv(std::ostream& out, const BanditDataset& data);
BanditDataset read_dataset_csv(std::istream& in);

nlohmann::json ground_truth_to_json(const simgen::GroundTruth& gt);
simgen::GroundTruth ground_truth_from_json(const nlohmann::json& j);

// Plain numeric matrix with an optional header line.
void write_matrix_csv(std::ostream& out, const Matrix& M, const std::vector<std::string>& header);
Matrix read_matrix_csv(std::istream& in, bool has_header = true);

void write_training_log(std::ostream& out, const std::vector<sire::EpochRecord>& log);

}  // namespace incentive::io
