#pragma once

#include <string>

#include "json.hpp"
#include "lglab/types.hpp"

namespace lglab {

/// JSON model document: {s_vocab, d, delta, tau,
///   layers: [{heads: [{kq, v, phi}], mlp: {a, bias, b, activation}}],
///   embed, pos, unembed}
/// with matrices as row-major arrays of arrays. Dimension mismatches are
/// rejected with a descriptive ShapeError.
nlohmann::json model_to_json(const LTParams& params);
LTParams model_from_json(const nlohmann::json& doc);

void save_model(const LTParams& params, const std::string& path);
LTParams load_model(const std::string& path);

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

}  // namespace lglab
