#include "partmix/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace partmix {

namespace {

std::string trimmed(std::string s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trimmed(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t row, std::size_t col,
                             const std::string& what) {
  throw ParseError(path + ": row " + std::to_string(row) + ", column " +
                   std::to_string(col) + ": " + what);
}

double parse_cell_double(const std::string& path, std::size_t row, std::size_t col,
                         const std::string& cell) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    parse_fail(path, row, col, "expected a number, got '" + cell + "'");
  return v;
}

}  // namespace

PartialSample read_sample_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file, header expected");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.empty()) throw ParseError(path + ": empty header row");

  const bool has_label = header.back() == "label";
  const std::size_t p = header.size() - (has_label ? 1 : 0);
  if (p == 0) throw ParseError(path + ": header has no feature columns");
  for (std::size_t c = 0; c < p; ++c) {
    const std::string expected = "f" + std::to_string(c + 1);
    if (header[c] != expected)
      parse_fail(path, 1, c + 1, "expected header '" + expected + "', got '" + header[c] + "'");
  }

  std::vector<double> values;
  std::vector<Label> labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trimmed(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      parse_fail(path, row, cells.size(), "expected " + std::to_string(header.size()) +
                                              " cells, got " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < p; ++c)
      values.push_back(parse_cell_double(path, row, c + 1, cells[c]));
    if (!has_label || cells[p].empty()) {
      labels.push_back(std::nullopt);
    } else if (cells[p] == "1") {
      labels.push_back(ClassLabel::Class1);
    } else if (cells[p] == "2") {
      labels.push_back(ClassLabel::Class2);
    } else {
      parse_fail(path, row, p + 1, "label must be 1, 2 or empty, got '" + cells[p] + "'");
    }
  }

  PartialSample sample;
  sample.labels = std::move(labels);
  sample.features.resize(static_cast<Eigen::Index>(sample.labels.size()),
                         static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < sample.features.rows(); ++j)
    for (Eigen::Index c = 0; c < sample.features.cols(); ++c)
      sample.features(j, c) = values[static_cast<std::size_t>(j * sample.features.cols() + c)];
  sample.validate();
  return sample;
}

void write_sample_csv(const std::string& path, const PartialSample& sample) {
  sample.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  for (Eigen::Index c = 0; c < sample.dim(); ++c) out << "f" << (c + 1) << ",";
  out << "label\n";
  for (Eigen::Index j = 0; j < sample.size(); ++j) {
    for (Eigen::Index c = 0; c < sample.dim(); ++c)
      out << format_double(sample.features(j, c)) << ",";
    const Label& label = sample.labels[static_cast<std::size_t>(j)];
    if (label) out << class_number(*label);
    out << "\n";
  }
}

std::string format_double(double value) {
  char buf[40];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

MixtureParams theta_from_fit_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    const nlohmann::json& t = doc.contains("theta") ? doc.at("theta") : doc;
    MixtureParams theta;
    theta.pi1 = t.at("pi1").get<double>();
    const auto vec = [](const nlohmann::json& a) {
      Eigen::VectorXd v(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a.at(i).get<double>();
      return v;
    };
    const auto mat = [](const nlohmann::json& a) {
      Eigen::MatrixXd m(a.size(), a.empty() ? 0 : a.at(0).size());
      for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.at(i).size(); ++j)
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              a.at(i).at(j).get<double>();
      return m;
    };
    theta.mu1 = vec(t.at("mu1"));
    theta.mu2 = vec(t.at("mu2"));
    const nlohmann::json& cov = t.at("covariance");
    const std::string kind = cov.at("kind").get<std::string>();
    if (kind == "common") {
      theta.covariance = CommonCovariance{mat(cov.at("sigma"))};
    } else if (kind == "per_class") {
      theta.covariance = PerClassCovariance{mat(cov.at("sigma1")), mat(cov.at("sigma2"))};
    } else {
      throw ParseError(path + ": unknown covariance kind '" + kind + "'");
    }
    theta.validate();
    return theta;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": malformed fit result: " + e.what());
  }
}

}  // namespace partmix
