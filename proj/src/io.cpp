#include "incentive/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>

#include <unistd.h>

namespace incentive::io {
namespace {

double parse_real(std::string_view text, std::size_t line_no) {
  const std::string s(text);
  if (s.empty()) return std::nan("");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw ParseError("line " + std::to_string(line_no) + ": '" + s + "' is not a number");
  }
  return v;
}

long parse_integer(std::string_view text, std::size_t line_no) {
  const std::string s(text);
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ParseError("line " + std::to_string(line_no) + ": '" + s + "' is not an integer");
  }
  return v;
}

bool starts_with_digits(std::string_view name, char prefix) {
  if (name.size() < 2 || name[0] != prefix) return false;
  for (std::size_t i = 1; i < name.size(); ++i) {
    if (name[i] < '0' || name[i] > '9') return false;
  }
  return true;
}

std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json matrix_rows(const Matrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(M.cols()));
    for (Eigen::Index c = 0; c < M.cols(); ++c) row[static_cast<std::size_t>(c)] = M(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_rows(const nlohmann::json& j, const std::string& key) {
  const auto rows = j.at(key).get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Matrix(0, 0);
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require_dims(rows[r].size() == rows[0].size(), "ragged matrix '" + key + "'");
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return M;
}

}  // namespace

std::string format_real(double value) {
  if (std::isnan(value)) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (quoted) throw ParseError("unterminated quoted CSV field");
  out.push_back(std::move(field));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::filesystem::create_directories(dir);
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

void write_dataset_csv(std::ostream& out, const BanditDataset& data) {
  data.validate();
  const auto d = static_cast<Eigen::Index>(data.feature_dim());
  for (Eigen::Index j = 0; j < d; ++j) out << 'x' << (j + 1) << ',';
  out << "action,reward,";
  if (data.propensities) {
    for (int k = 1; k <= data.n_actions; ++k) out << 'p' << k << ',';
  }
  out << "split\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < d; ++j) out << format_real(data.features(r, j)) << ',';
    out << data.actions[i] << ',' << format_real(data.rewards(r)) << ',';
    if (data.propensities) {
      for (int k = 0; k < data.n_actions; ++k) out << format_real((*data.propensities)(r, k)) << ',';
    }
    out << to_string(data.splits[i]) << '\n';
  }
}

BanditDataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset file is empty");
  const auto header = split_csv_line(line);
  std::size_t d = 0, K = 0;
  std::ptrdiff_t action_col = -1, reward_col = -1, split_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& name = header[c];
    if (starts_with_digits(name, 'x')) {
      if (std::stoul(name.substr(1)) != d + 1 || c != d) {
        throw ParseError("feature columns must come first as x1..xd");
      }
      ++d;
    } else if (starts_with_digits(name, 'p')) {
      ++K;
    } else if (name == "action") {
      action_col = static_cast<std::ptrdiff_t>(c);
    } else if (name == "reward") {
      reward_col = static_cast<std::ptrdiff_t>(c);
    } else if (name == "split") {
      split_col = static_cast<std::ptrdiff_t>(c);
    } else {
      throw ParseError("unknown dataset column '" + name + "'");
    }
  }
  if (action_col < 0 || reward_col < 0 || split_col < 0 || d == 0) {
    throw ParseError("dataset header needs x1..xd, action, reward and split columns");
  }
  const auto p_start = static_cast<std::size_t>(reward_col) + 1;

  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
  }

  BanditDataset data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  data.features.resize(n, static_cast<Eigen::Index>(d));
  data.rewards.resize(n);
  if (K > 0) data.propensities = Matrix(n, static_cast<Eigen::Index>(K));
  int max_action = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = rows[i];
    const auto r = static_cast<Eigen::Index>(i);
    const std::size_t ln = i + 2;
    for (std::size_t j = 0; j < d; ++j) data.features(r, static_cast<Eigen::Index>(j)) = parse_real(f[j], ln);
    const long a = parse_integer(f[static_cast<std::size_t>(action_col)], ln);
    data.actions.push_back(static_cast<Action>(a));
    max_action = std::max(max_action, static_cast<int>(a));
    data.rewards(r) = parse_real(f[static_cast<std::size_t>(reward_col)], ln);
    for (std::size_t k = 0; k < K; ++k) {
      (*data.propensities)(r, static_cast<Eigen::Index>(k)) = parse_real(f[p_start + k], ln);
    }
    try {
      data.splits.push_back(parse_split(f[static_cast<std::size_t>(split_col)]));
    } catch (const Error&) {
      throw ParseError("line " + std::to_string(ln) + ": unknown split tag '" +
                       f[static_cast<std::size_t>(split_col)] + "'");
    }
  }
  data.n_actions = K > 0 ? static_cast<int>(K) : max_action;
  if (data.propensities) {
    // Nine printed digits leave row sums off by up to ~K * 5e-10; undo that
    // rounding, but leave genuinely wrong rows for validate() to reject.
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = data.propensities->row(i).sum();
      if (std::abs(s - 1.0) <= 1e-6) data.propensities->row(i) /= s;
    }
  }
  data.validate();
  return data;
}

nlohmann::json ground_truth_to_json(const simgen::GroundTruth& gt) {
  return {{"format", "incentive.ground_truth.v1"},
          {"n_actions", gt.n_actions},
          {"mu", gt.mu},
          {"sigma", gt.sigma},
          {"a", to_vector(gt.a)},
          {"b", matrix_rows(gt.b)},
          {"c", matrix_rows(gt.c)}};
}

simgen::GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  require(j.value("format", std::string{}) == "incentive.ground_truth.v1",
          "unrecognized ground-truth format");
  simgen::GroundTruth gt;
  gt.n_actions = j.at("n_actions").get<int>();
  gt.mu = j.at("mu").get<double>();
  gt.sigma = j.at("sigma").get<double>();
  const auto a = j.at("a").get<std::vector<double>>();
  gt.a = Eigen::Map<const Vector>(a.data(), static_cast<Eigen::Index>(a.size()));
  gt.b = matrix_from_rows(j, "b");
  gt.c = matrix_from_rows(j, "c");
  require_dims(gt.b.rows() == gt.a.size() && gt.c.rows() == gt.a.size() &&
                   gt.b.cols() == gt.c.cols(),
               "ground-truth parameter shapes disagree");
  require(gt.sigma > 0.0, "ground-truth sigma must be positive");
  return gt;
}

void write_matrix_csv(std::ostream& out, const Matrix& M, const std::vector<std::string>& header) {
  if (!header.empty()) {
    require_dims(static_cast<Eigen::Index>(header.size()) == M.cols(), "header width mismatch");
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << csv_escape(header[c]);
    out << '\n';
  }
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) out << (c ? "," : "") << format_real(M(r, c));
    out << '\n';
  }
}

Matrix read_matrix_csv(std::istream& in, bool has_header) {
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  if (has_header) {
    if (!std::getline(in, line)) throw ParseError("matrix file is empty");
    ++line_no;
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    for (const auto& f : split_csv_line(line)) {
      const double v = parse_real(f, line_no);
      if (!std::isfinite(v)) {
        throw ParseError("line " + std::to_string(line_no) + ": non-finite matrix entry");
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows[0].size()) {
      throw ParseError("line " + std::to_string(line_no) + ": row width differs from the first row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("matrix file has no data rows");
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return M;
}

void write_training_log(std::ostream& out, const std::vector<sire::EpochRecord>& log) {
  out << "epoch,train_mse,hsic\n";
  for (const auto& rec : log) {
    out << rec.epoch << ',' << format_real(rec.train_mse) << ',' << format_real(rec.hsic) << '\n';
  }
}

}  // namespace incentive::io
