#include "ztube/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ztube {

Json vector_to_json(const Eigen::VectorXd& v) {
  Json j = Json::array();
  for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("expected a numeric array");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError("expected a numeric array");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json j = Json::array();
  for (Index r = 0; r < m.rows(); ++r) j.push_back(vector_to_json(m.row(r).transpose()));
  return j;
}

Eigen::MatrixXd matrix_from_json(const Json& j, Index cols) {
  if (!j.is_array()) throw FormatError("expected a list of rows");
  if (j.empty()) return Eigen::MatrixXd(0, cols);
  const Index rows = static_cast<Index>(j.size());
  const Index width = static_cast<Index>(j[0].size());
  Eigen::MatrixXd m(rows, width);
  for (Index r = 0; r < rows; ++r) {
    const auto row = vector_from_json(j[static_cast<std::size_t>(r)]);
    if (row.size() != width) throw FormatError("matrix rows have unequal length");
    m.row(r) = row.transpose();
  }
  return m;
}

void to_json(Json& j, const Zonotoped& z) {
  Json gens = Json::array();
  for (Index c = 0; c < z.num_generators(); ++c) gens.push_back(vector_to_json(z.generators().col(c)));
  j = Json{{"center", vector_to_json(z.center())}, {"generators", std::move(gens)}};
}

void from_json(const Json& j, Zonotoped& z) {
  if (!j.is_object() || !j.contains("center")) throw FormatError("zonotope: missing 'center'");
  const Eigen::VectorXd c = vector_from_json(j.at("center"));
  Eigen::MatrixXd g(c.size(), 0);
  if (j.contains("generators")) {
    const auto& gj = j.at("generators");
    if (!gj.is_array()) throw FormatError("zonotope: 'generators' must be a list of columns");
    g.resize(c.size(), static_cast<Index>(gj.size()));
    for (std::size_t k = 0; k < gj.size(); ++k) {
      const auto col = vector_from_json(gj[k]);
      if (col.size() != c.size()) throw FormatError("zonotope: generator length differs from center dimension");
      g.col(static_cast<Index>(k)) = col;
    }
  }
  z = Zonotoped(c, g);
}

void to_json(Json& j, const MatrixZonotoped& m) {
  Json gens = Json::array();
  for (const auto& g : m.generators()) gens.push_back(matrix_to_json(g));
  j = Json{{"center", matrix_to_json(m.center())}, {"generators", std::move(gens)}};
}

void from_json(const Json& j, MatrixZonotoped& m) {
  if (!j.is_object() || !j.contains("center")) throw FormatError("matrix zonotope: missing 'center'");
  const Eigen::MatrixXd c = matrix_from_json(j.at("center"));
  std::vector<Eigen::MatrixXd> gens;
  if (j.contains("generators")) {
    for (const auto& g : j.at("generators")) {
      auto gm = matrix_from_json(g, c.cols());
      if (gm.rows() != c.rows() || gm.cols() != c.cols())
        throw FormatError("matrix zonotope: generator shape differs from center");
      gens.push_back(std::move(gm));
    }
  }
  m = MatrixZonotoped(c, gens);
}

void to_json(Json& j, const IntervalBoxd& b) {
  j = Json{{"lower", vector_to_json(b.lower())}, {"upper", vector_to_json(b.upper())}};
}

void from_json(const Json& j, IntervalBoxd& b) {
  if (!j.is_object() || !j.contains("lower") || !j.contains("upper"))
    throw FormatError("interval box: needs 'lower' and 'upper'");
  b = IntervalBoxd(vector_from_json(j.at("lower")), vector_from_json(j.at("upper")));
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view field) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r' || field.back() == '\t')) field.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw FormatError("not a number: '" + std::string(field) + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace ztube
