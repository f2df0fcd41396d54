#pragma once

// Private helpers shared by the file formats; nlohmann/json stays out of the
// public headers.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rsddp/errors.hpp"
#include "rsddp/model.hpp"

namespace rsddp::detail {

using json = nlohmann::json;

inline json to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline json to_json(const Matrix& m) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline const json& field(const json& obj, const char* key) {
    if (!obj.is_object()) throw MalformedFile(std::string("expected an object holding '") + key + "'");
    auto it = obj.find(key);
    if (it == obj.end()) throw MalformedFile(std::string("missing field '") + key + "'");
    return *it;
}

inline double number(const json& j) {
    if (!j.is_number()) throw MalformedFile("expected a number, got " + j.dump());
    return j.get<double>();
}

inline long long integer(const json& j) {
    if (!j.is_number_integer()) throw MalformedFile("expected an integer, got " + j.dump());
    return j.get<long long>();
}

inline Vector vector_from(const json& j) {
    if (!j.is_array()) throw MalformedFile("expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i]);
    return v;
}

inline Matrix matrix_from(const json& j) {
    const auto rows = integer(field(j, "rows"));
    const auto cols = integer(field(j, "cols"));
    const auto& data = field(j, "data");
    if (rows < 0 || cols < 0 || !data.is_array() ||
        data.size() != static_cast<std::size_t>(rows * cols)) {
        throw MalformedFile("matrix data does not match its declared shape");
    }
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = number(data[k++]);
    return m;
}

inline void check_header(const json& doc, const char* format, long long version) {
    const auto& f = field(doc, "format");
    if (!f.is_string() || f.get<std::string>() != format) {
        throw MalformedFile(std::string("not a ") + format + " document");
    }
    const auto v = integer(field(doc, "version"));
    if (v != version) {
        throw VersionMismatch(std::string(format) + " version " + std::to_string(v) +
                              " is not supported (expected " + std::to_string(version) + ")");
    }
}

inline json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw MalformedFile(std::string("parse error: ") + e.what());
    }
}

inline std::string canonical_dump(const json& doc) { return doc.dump(1) + "\n"; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedFile("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
    if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace rsddp::detail
