#pragma once

/**
 * @file serialize.hpp
 * @brief JSON forms of the set types.
 *
 * Zonotope:        {"center": [...], "generators": [[col 1], [col 2], ...]}
 * MatrixZonotope:  {"center": [[row], ...], "generators": [[[row], ...], ...]}
 * IntervalBox:     {"lower": [...], "upper": [...]}
 *
 * Doubles are written with max_digits10 so finite values round-trip exactly.
 */

#include "ztube/setalg.hpp"

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace ztube {

using Json = nlohmann::json;

Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

/// Row-major list of rows.
Json matrix_to_json(const Eigen::MatrixXd& m);
/// Accepts a list of equal-length rows; `cols` fixes the width of an empty list.
Eigen::MatrixXd matrix_from_json(const Json& j, Index cols = 0);

void to_json(Json& j, const Zonotoped& z);
void from_json(const Json& j, Zonotoped& z);
void to_json(Json& j, const MatrixZonotoped& m);
void from_json(const Json& j, MatrixZonotoped& m);
void to_json(Json& j, const IntervalBoxd& b);
void from_json(const Json& j, IntervalBoxd& b);

/// Malformed document; the message names the offending field.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal form that parses back to the same double.
std::string format_number(double v);
/// Parses a full CSV field as a double; throws FormatError otherwise.
double parse_number(std::string_view field);
/// Splits one line on commas.
std::vector<std::string> split_csv_line(const std::string& line);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace ztube
