#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "lqpoison/linalg.hpp"

namespace lqpoison {

using Json = nlohmann::ordered_json;

/// Row-major array of row arrays.
Json mat_to_json(const Mat& m);
Json vec_to_json(const Vec& v);

/**
 * Reads `j[key]` as a matrix. Throws ValidationError naming `key` when the
 * field is missing, ragged, non-numeric, or (when rows/cols >= 0) of the
 * wrong shape.
 */
Mat mat_from_json(const Json& j, const std::string& key, long rows = -1,
                  long cols = -1);
Vec vec_from_json(const Json& j, const std::string& key, long size = -1);

Json read_json_file(const std::filesystem::path& path);

/// Writes via a temporary sibling file and rename so readers never observe a
/// partially written document.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& contents);

}  // namespace lqpoison
