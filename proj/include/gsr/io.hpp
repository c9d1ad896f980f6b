#pragma once

// CSV and JSON formats.
//
//   graph (edge list)  src,dst,weight per line, 0-based; edge src -> dst is
//                      stored at A(dst, src). Sidecar <stem>.json holds
//                      {"n": N, "normalized": bool}.
//   graph (dense)      N x N CSV, used when no sidecar exists.
//   signals            N x L CSV, one row per node.
//   mask               row,col per line (a single column means col 0).
//
// Every parser rejects NaN and Inf. A first line that does not start with a
// number is treated as a header.

#include <filesystem>
#include <string>
#include <string_view>

#include "gsr/data.hpp"
#include "gsr/graph.hpp"
#include "gsr/solvers.hpp"
#include "json.hpp"

namespace gsr {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, std::string_view text);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

Matrix parse_matrix_csv(std::string_view text, const std::string& origin);
std::string format_matrix_csv(const Matrix& m);
Matrix read_matrix_csv(const fs::path& path);
void write_matrix_csv(const fs::path& path, const Matrix& m);

fs::path graph_sidecar(const fs::path& graph_path);
/// Reads either format. With `normalize`, an unnormalized graph is passed
/// through normalize_shift; a sidecar claiming normalization is verified.
GraphShift read_graph(const fs::path& path, bool normalize = true);
/// Edge list plus sidecar.
void write_graph(const fs::path& path, const GraphShift& shift);

IndexMask parse_mask_csv(std::string_view text, Eigen::Index rows, Eigen::Index cols, const std::string& origin);
IndexMask read_mask(const fs::path& path, Eigen::Index rows, Eigen::Index cols);
void write_mask(const fs::path& path, const IndexMask& mask);

// ---------------------------------------------------------------------------

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const std::string& what);

Json to_json(const SolverConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SolverConfig solver_config_from_json(const Json& j);

Json to_json(const RecoveryResult& r);

Json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const Json& j);

Json to_json(const GraphBuildSpec& spec);
GraphBuildSpec graph_build_spec_from_json(const Json& j);

Json parse_json(std::string_view text, const std::string& origin);

// ---------------------------------------------------------------------------

struct Bundle {
  GraphShift shift;
  SyntheticInstance instance;
  IndexMask mask;
  SyntheticSpec spec;
};

/// Directory with graph.csv (+ graph.json), X0.csv, W.csv, E.csv, T.csv,
/// mask.csv and spec.json.
void write_bundle(const fs::path& dir, const Bundle& bundle);
Bundle read_bundle(const fs::path& dir);

}  // namespace gsr
