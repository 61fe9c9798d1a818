#pragma once

/// JSON (de)serialization of multiaffine models.
///
/// Document layout:
///
///   {
///     "blocks":  [{"name": "x1", "size": 2}, ...],
///     "qbar":    2.0,                      // optional; omitted => inferred
///     "factors": [
///       {
///         "terms": [
///           {"coeff": 1.0,
///            "factors": [{"block": "x1", "vector": [0.0, 1.0]}, ...]}
///         ],
///         "density": {"type": "gnd", "q": 2.0}
///       }, ...
///     ],
///     "x_init":   [ ... ],                 // optional, length = total_dim
///     "metadata": { ... }                  // optional, carried through opaquely
///   }
///
/// Densities: {"type":"gnd","q":Q} (unit scale), {"type":"gnd","q":Q,"scale":S},
/// {"type":"asym_laplace","rate_pos":A,"rate_neg":B}, {"type":"flat"}.
/// Blocks are referenced by name in the document and by index in memory.
/// Numbers are written with full round-trip precision.

#include <optional>
#include <string>

#include <Eigen/Core>

#include "airls/model.hpp"

namespace airls {

/// A model document: the model itself plus optional initial iterate and
/// opaque metadata (raw JSON text, empty when absent).
struct ModelDocument {
    MultiaffineModel model;
    std::optional<Eigen::VectorXd> x_init;
    std::string metadata_json;
};

/// Parses a model document from JSON text. Throws std::invalid_argument with
/// a description of the offending field on malformed input.
ModelDocument parse_model(const std::string& json_text);

/// Reads and parses a model document from a file. Throws std::runtime_error
/// if the file cannot be read.
ModelDocument load_model(const std::string& path);

/// Serializes a model document to pretty-printed JSON text. Throws
/// std::invalid_argument if the model contains a density that has no JSON
/// representation (programmatic custom densities).
std::string serialize_model(const ModelDocument& doc);

/// Serializes and writes a model document. Throws std::runtime_error if the
/// file cannot be written.
void save_model(const ModelDocument& doc, const std::string& path);

}  // namespace airls
