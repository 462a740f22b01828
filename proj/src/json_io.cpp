#include "lqpoison/json_io.hpp"

#include <fstream>
#include <sstream>

#include "lqpoison/errors.hpp"

namespace lqpoison {

Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (long i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vec_to_json(const Vec& v) {
  Json out = Json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Mat mat_from_json(const Json& j, const std::string& key, long rows, long cols) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError("missing field '" + key + "'");
  }
  const Json& a = j.at(key);
  if (!a.is_array() || a.empty()) {
    throw ValidationError("field '" + key + "' must be a non-empty array of rows");
  }
  const long r = static_cast<long>(a.size());
  long c = -1;
  Mat out;
  for (long i = 0; i < r; ++i) {
    const Json& row = a[static_cast<size_t>(i)];
    if (!row.is_array() || row.empty()) {
      throw ValidationError("field '" + key + "' row " + std::to_string(i) +
                            " must be a non-empty array");
    }
    if (c < 0) {
      c = static_cast<long>(row.size());
      out.resize(r, c);
    } else if (static_cast<long>(row.size()) != c) {
      throw ValidationError("field '" + key + "' is ragged");
    }
    for (long k = 0; k < c; ++k) {
      const Json& v = row[static_cast<size_t>(k)];
      if (!v.is_number()) {
        throw ValidationError("field '" + key + "' has a non-numeric entry");
      }
      out(i, k) = v.get<double>();
    }
  }
  if ((rows >= 0 && r != rows) || (cols >= 0 && c != cols)) {
    throw ValidationError("field '" + key + "' must be " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          ", got " + std::to_string(r) + "x" + std::to_string(c));
  }
  if (!out.allFinite()) throw ValidationError("field '" + key + "' is not finite");
  return out;
}

Vec vec_from_json(const Json& j, const std::string& key, long size) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError("missing field '" + key + "'");
  }
  const Json& a = j.at(key);
  if (!a.is_array()) throw ValidationError("field '" + key + "' must be an array");
  Vec out(static_cast<long>(a.size()));
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) {
      throw ValidationError("field '" + key + "' has a non-numeric entry");
    }
    out(static_cast<long>(i)) = a[i].get<double>();
  }
  if (size >= 0 && out.size() != size) {
    throw ValidationError("field '" + key + "' must have " +
                          std::to_string(size) + " entries");
  }
  return out;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace lqpoison
