#include "mincontrol/json_io.h"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "mincontrol/errors.h"

namespace mincontrol {

Matrix MatrixFromJson(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) {
    throw DomainError(path + ": expected a non-empty array");
  }
  if (!j.front().is_array()) {
    Matrix m(j.size(), 1);
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) {
        throw DomainError(path + "[" + std::to_string(i) + "]: expected a number");
      }
      m(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    }
    return m;
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols) {
      throw DimensionError(row_path + ": ragged matrix row");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) {
        throw DomainError(row_path + "[" + std::to_string(c) + "]: expected a number");
      }
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

Json MatrixToJson(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(NumberToJson(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

Vector VectorFromJson(const Json& j, const std::string& path) {
  const Matrix m = MatrixFromJson(j, path);
  if (m.cols() != 1) throw DimensionError(path + ": expected a flat array");
  return m.col(0);
}

Json VectorToJson(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(NumberToJson(v(i)));
  return out;
}

LinearSystem LinearSystemFromJson(const Json& j, const std::string& path) {
  if (!j.is_object()) throw DomainError(path + ": expected an object with A and B");
  if (!j.contains("A")) throw DomainError(path + ".A: missing");
  if (!j.contains("B")) throw DomainError(path + ".B: missing");
  Matrix a = MatrixFromJson(j.at("A"), path + ".A");
  Matrix b = MatrixFromJson(j.at("B"), path + ".B");
  return LinearSystem(std::move(a), std::move(b));
}

Json LinearSystemToJson(const LinearSystem& sys) {
  Json out;
  out["A"] = MatrixToJson(sys.a());
  out["B"] = MatrixToJson(sys.b());
  out["stability_margin"] = sys.stability_margin();
  return out;
}

Json GramianToJson(const Gramian& g) {
  Json out;
  out["method"] = ToString(g.method());
  out["horizon"] = NumberToJson(g.horizon());
  std::ostringstream fp;
  fp << std::hex << std::setw(16) << std::setfill('0') << g.system_fingerprint();
  out["fingerprint"] = fp.str();
  out["rank"] = g.psd().Rank();
  out["rank_tol"] = g.psd().policy().rel_threshold();
  out["Q"] = MatrixToJson(g.matrix());
  return out;
}

Json NumberToJson(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace mincontrol
