#include "lglab/serialize.hpp"

#include <fstream>

namespace lglab {

namespace {

using nlohmann::json;

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) arr.push_back(v(k));
  return arr;
}

MatrixXd matrix_from_json(const json& doc, const std::string& name,
                          Eigen::Index rows, Eigen::Index cols) {
  if (!doc.is_array() || static_cast<Eigen::Index>(doc.size()) != rows)
    throw ShapeError(name + ": expected " + std::to_string(rows) +
                     " rows, got " + std::to_string(doc.size()));
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = doc[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ShapeError(name + " row " + std::to_string(r) + ": expected " +
                       std::to_string(cols) + " entries, got " +
                       std::to_string(row.size()));
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

// Row count inferred from the document (used for shapes like the MLP width
// or the unembed output dim that the header fields do not pin down).
MatrixXd matrix_from_json_free_rows(const json& doc, const std::string& name,
                                    Eigen::Index cols) {
  if (!doc.is_array() || doc.empty())
    throw ShapeError(name + ": expected a nonempty array of rows");
  return matrix_from_json(doc, name, static_cast<Eigen::Index>(doc.size()),
                          cols);
}

VectorXd vector_from_json(const json& doc, const std::string& name,
                          Eigen::Index size) {
  if (!doc.is_array() || static_cast<Eigen::Index>(doc.size()) != size)
    throw ShapeError(name + ": expected " + std::to_string(size) +
                     " entries, got " + std::to_string(doc.size()));
  VectorXd v(size);
  for (Eigen::Index k = 0; k < size; ++k) v(k) = doc[k].get<double>();
  return v;
}

const json& require(const json& doc, const char* key,
                    const std::string& where) {
  auto it = doc.find(key);
  if (it == doc.end())
    throw ShapeError(where + ": missing field '" + key + "'");
  return *it;
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "relu";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw ShapeError("unknown activation '" + name + "'");
}

nlohmann::json model_to_json(const LTParams& params) {
  json doc;
  doc["s_vocab"] = params.s_vocab;
  doc["d"] = params.d;
  doc["delta"] = params.delta;
  doc["tau"] = params.tau;
  doc["embed"] = matrix_to_json(params.embed);
  doc["pos"] = matrix_to_json(params.pos);
  doc["unembed"] = matrix_to_json(params.unembed);
  json layers = json::array();
  for (const LayerParams& layer : params.layers) {
    json heads = json::array();
    for (const HeadParams& head : layer.heads) {
      heads.push_back({{"kq", matrix_to_json(head.kq)},
                       {"v", matrix_to_json(head.v)},
                       {"phi", vector_to_json(head.phi)}});
    }
    json mlp = {{"a", matrix_to_json(layer.mlp.a)},
                {"bias", vector_to_json(layer.mlp.bias)},
                {"b", matrix_to_json(layer.mlp.b)},
                {"activation", activation_name(layer.mlp.activation)}};
    layers.push_back({{"heads", std::move(heads)}, {"mlp", std::move(mlp)}});
  }
  doc["layers"] = std::move(layers);
  return doc;
}

LTParams model_from_json(const nlohmann::json& doc) {
  LTParams params;
  params.s_vocab = require(doc, "s_vocab", "model").get<int>();
  params.d = require(doc, "d", "model").get<int>();
  params.delta = require(doc, "delta", "model").get<int>();
  params.tau = require(doc, "tau", "model").get<int>();
  if (params.s_vocab < 1 || params.d < 1 || params.delta < 1 || params.tau < 0)
    throw ShapeError("model: s_vocab, d, delta must be >= 1 and tau >= 0");
  const Eigen::Index d = params.d;
  params.embed =
      matrix_from_json(require(doc, "embed", "model"), "embed",
                       params.s_vocab, d);
  params.pos =
      matrix_from_json(require(doc, "pos", "model"), "pos", params.delta, d);
  params.unembed =
      matrix_from_json_free_rows(require(doc, "unembed", "model"), "unembed",
                                 d);
  const json& layers = require(doc, "layers", "model");
  if (!layers.is_array()) throw ShapeError("model: 'layers' must be an array");
  int li = 0;
  for (const json& layer_doc : layers) {
    const std::string where = "layer " + std::to_string(li + 1);
    LayerParams layer;
    const json& heads = require(layer_doc, "heads", where);
    if (!heads.is_array())
      throw ShapeError(where + ": 'heads' must be an array");
    int hi = 0;
    for (const json& head_doc : heads) {
      const std::string hwhere = where + " head " + std::to_string(hi + 1);
      HeadParams head;
      head.kq = matrix_from_json(require(head_doc, "kq", hwhere),
                                 hwhere + " kq", d, d);
      head.v = matrix_from_json(require(head_doc, "v", hwhere),
                                hwhere + " v", d, d);
      head.phi = vector_from_json(require(head_doc, "phi", hwhere),
                                  hwhere + " phi", params.tau + 1);
      layer.heads.push_back(std::move(head));
      ++hi;
    }
    const json& mlp_doc = require(layer_doc, "mlp", where);
    layer.mlp.a = matrix_from_json_free_rows(require(mlp_doc, "a", where),
                                             where + " mlp a", d);
    const Eigen::Index width = layer.mlp.a.rows();
    layer.mlp.bias = vector_from_json(require(mlp_doc, "bias", where),
                                      where + " mlp bias", width);
    layer.mlp.b = matrix_from_json(require(mlp_doc, "b", where),
                                   where + " mlp b", d, width);
    layer.mlp.activation = activation_from_name(
        require(mlp_doc, "activation", where).get<std::string>());
    params.layers.push_back(std::move(layer));
    ++li;
  }
  params.validate();
  return params;
}

void save_model(const LTParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PreconditionError("cannot open '" + path + "' for writing");
  out << model_to_json(params).dump(2) << "\n";
}

LTParams load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open model file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw PreconditionError("invalid JSON in '" + path + "': " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace lglab
