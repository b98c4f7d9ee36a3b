#pragma once

// JSON description of an equation (schema "rdde.spec/1").
//
// {
//   "n": 1, "d": 1, "delay": 1.0,
//   "drift":     {"A0": [[-1.0]], "A1": [[1.0]]},
//   "measure":   {"atoms": [{"theta": -1.0, "weight": [[0.2]]}], "density": [[[0.0]]]},
//   "diffusion": {"kind": "linear", "scale": 0.05,
//                 "columns": [{"offset": [0.0], "L": [[1.0]], "K": [[0.0]]}], "a1": 1.0, "a2": 0.0},
//   "initial":   {"constant": [1.0]}
// }
//
// Matrices are row-major nested arrays; a bare number stands for a multiple
// of the identity.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

#include "rdde/delay_solver.hpp"

namespace rdde {

struct SpecDocument {
  nlohmann::json source;     // as read, used for hashing and manifests
  EquationSpec spec;
  Eigen::VectorXd initial;   // constant initial value on [-r, 0]
  std::string diffusion_kind = "zero";
};

/// Throws Error(kConfig) on schema violations.
SpecDocument parse_spec(const nlohmann::json& doc);
SpecDocument load_spec(const std::filesystem::path& file);
nlohmann::json read_json_file(const std::filesystem::path& file);

/// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string spec_hash(const nlohmann::json& doc);
std::uint64_t fnv1a64(const std::string& bytes) noexcept;

/// Constant initial datum on [-r, 0] with zero Gubinelli derivative.
ControlledSegment initial_segment(const SpecDocument& doc, int lag, double step);

Eigen::MatrixXd parse_matrix(const nlohmann::json& j, int rows, int cols, const std::string& what);

}  // namespace rdde
