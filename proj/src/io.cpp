#include "latformer/io.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "latformer/errors.hpp"

namespace latformer {

void write_mask_pgm(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "P2\n" << m.cols() << " " << m.rows() << "\n255\n";
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      const int v = static_cast<int>(std::lround(
          std::clamp(m(r, c), 0.0, 1.0) * 255.0));
      out << v << (c + 1 == m.cols() ? '\n' : ' ');
    }
  }
}

void write_mask_json(const Matrix& m, const std::string& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << rows.dump() << "\n";
}

void write_mask(const Matrix& m, const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".pgm")
    write_mask_pgm(m, path);
  else if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
    write_mask_json(m, path);
  else
    throw ConfigError("mask output must end in .pgm or .json: " + path);
}

}  // namespace latformer
