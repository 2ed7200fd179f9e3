#pragma once

// Text state format:
//
//   {
//     "format_version": "entangle-state/1",
//     "matrix": [[[re, im], [re, im], [re, im], [re, im]], ... 4 rows],
//     "metadata": {"label": "...", "seed": 42, "provenance": "..."}
//   }
//
// Rows follow the computational basis |00>, |01>, |10>, |11>. Components are
// written with 17 significant digits, so a save/load cycle is bit-exact.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "entangle/errors.hpp"
#include "entangle/linalg.hpp"
#include "entangle/state.hpp"

namespace entangle {

inline constexpr const char* kStateFormatVersion = "entangle-state/1";

struct StateMetadata {
  std::optional<std::string> label;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> provenance;
};

struct StateFile {
  std::string format_version = kStateFormatVersion;
  DensityMatrix rho;
  StateMetadata metadata;
};

/// Decimal text of a binary64 value with 17 significant digits.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json metadata_to_json(const StateMetadata& m) {
  nlohmann::json j = nlohmann::json::object();
  if (m.label) j["label"] = *m.label;
  if (m.seed) j["seed"] = *m.seed;
  if (m.provenance) j["provenance"] = *m.provenance;
  return j;
}

inline std::string matrix_to_text(const Mat4& m, const std::string& indent) {
  std::string out = "[\n";
  for (int i = 0; i < 4; ++i) {
    out += indent + "  [";
    for (int j = 0; j < 4; ++j) {
      out += "[" + format_real(m(i, j).real()) + ", " + format_real(m(i, j).imag()) + "]";
      if (j < 3) out += ", ";
    }
    out += i < 3 ? "],\n" : "]\n";
  }
  return out + indent + "]";
}

inline std::string serialize_state(const StateFile& f) {
  std::string out = "{\n";
  out += "  \"format_version\": " + nlohmann::json(f.format_version).dump() + ",\n";
  out += "  \"matrix\": " + matrix_to_text(f.rho.mat(), "  ") + ",\n";
  out += "  \"metadata\": " + metadata_to_json(f.metadata).dump() + "\n";
  return out + "}\n";
}

/// The same content as a JSON value, for embedding in reports.
inline nlohmann::json state_to_json(const StateFile& f) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < 4; ++j) row.push_back({f.rho.mat()(i, j).real(), f.rho.mat()(i, j).imag()});
    rows.push_back(row);
  }
  return {{"format_version", f.format_version}, {"matrix", rows}, {"metadata", metadata_to_json(f.metadata)}};
}

inline Mat4 matrix_from_json(const nlohmann::json& m) {
  auto fail = [](const std::string& what) { return Error(ErrorCode::Format, what); };
  if (!m.is_array() || m.size() != 4) throw fail("matrix must have 4 rows");
  Mat4 out;
  for (int i = 0; i < 4; ++i) {
    const auto& row = m[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.size() != 4) throw fail("matrix rows must have 4 entries");
    for (int j = 0; j < 4; ++j) {
      const auto& c = row[static_cast<std::size_t>(j)];
      if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number())
        throw fail("matrix entries must be [re, im] number pairs");
      out(i, j) = cplx(c[0].get<double>(), c[1].get<double>());
    }
  }
  return out;
}

inline StateMetadata metadata_from_json(const nlohmann::json& j) {
  StateMetadata m;
  if (!j.is_object()) throw Error(ErrorCode::Format, "metadata must be an object");
  if (j.contains("label")) {
    if (!j["label"].is_string()) throw Error(ErrorCode::Format, "label must be a string");
    m.label = j["label"].get<std::string>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw Error(ErrorCode::Format, "seed must be unsigned");
    m.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("provenance")) {
    if (!j["provenance"].is_string()) throw Error(ErrorCode::Format, "provenance must be a string");
    m.provenance = j["provenance"].get<std::string>();
  }
  return m;
}

/// Parses and validates a state. Malformed text raises Format; a matrix
/// that is not a density matrix raises InvalidState or NotPositive.
inline StateFile state_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Format, "state file must be a JSON object");
  if (!j.contains("format_version") || !j["format_version"].is_string())
    throw Error(ErrorCode::Format, "missing format_version");
  StateFile f;
  f.format_version = j["format_version"].get<std::string>();
  if (f.format_version != kStateFormatVersion)
    throw Error(ErrorCode::Format, "unsupported format_version " + f.format_version);
  if (!j.contains("matrix")) throw Error(ErrorCode::Format, "missing matrix");
  f.rho = DensityMatrix::from_matrix(matrix_from_json(j["matrix"]));
  if (j.contains("metadata")) f.metadata = metadata_from_json(j["metadata"]);
  return f;
}

inline nlohmann::json parse_json(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Format, std::string("not valid JSON: ") + e.what());
  }
}

inline StateFile parse_state(const std::string& text) { return state_from_json(parse_json(text)); }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

inline StateFile load_state(const std::string& path) { return parse_state(read_text(path)); }

inline void save_state(const std::string& path, const StateFile& f) {
  write_text(path, serialize_state(f));
}

}  // namespace entangle
