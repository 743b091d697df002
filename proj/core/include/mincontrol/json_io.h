#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "mincontrol/gramian.h"

namespace mincontrol {

using Json = nlohmann::json;

/// Row-major nested arrays. A 1-D array is read as a column.
Matrix MatrixFromJson(const Json& j, const std::string& path);
Json MatrixToJson(const Matrix& m);
Vector VectorFromJson(const Json& j, const std::string& path);
Json VectorToJson(const Vector& v);

/// {"A": [[...]], "B": [[...]]}. Errors name the offending field path.
LinearSystem LinearSystemFromJson(const Json& j, const std::string& path = "system");
Json LinearSystemToJson(const LinearSystem& sys);

/// {"method", "horizon" (number or "inf"), "fingerprint", "rank", "Q"}.
Json GramianToJson(const Gramian& g);

/// JSON cannot carry +inf; encode it as the string "inf".
Json NumberToJson(double v);

}  // namespace mincontrol
