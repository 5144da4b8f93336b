#pragma once

#include <fstream>
#include <istream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "reluforge/network.hpp"

namespace reluforge {

using Json = nlohmann::json;

namespace detail {

inline double finite_number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw NonFiniteError(where + ": non-finite value");
  return v;
}

inline Vector number_array(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array");
  Vector v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v.push_back(finite_number(j[i], where + "[" + std::to_string(i) + "]"));
  return v;
}

}  // namespace detail

inline Json network_to_json(const Network& net) {
  Json doc;
  doc["version"] = 1;
  doc["input_dim"] = net.input_dim();
  Json layers = Json::array();
  for (const Layer& layer : net.layers()) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < layer.width(); ++r) {
      auto row = layer.weights.row(r);
      rows.push_back(Json(std::vector<double>(row.begin(), row.end())));
    }
    layers.push_back({{"weights", rows}, {"bias", layer.bias}, {"activation", to_string(layer.activation)}});
  }
  doc["layers"] = layers;
  doc["metadata"] = Json::object();
  for (const auto& [k, v] : net.metadata()) doc["metadata"][k] = v;
  return doc;
}

inline Network network_from_json(const Json& doc) {
  if (!doc.is_object()) throw ParseError("network document must be a JSON object");
  if (!doc.contains("version") || doc["version"] != 1)
    throw ParseError("unsupported or missing network format version");
  if (!doc.contains("input_dim") || !doc["input_dim"].is_number_unsigned())
    throw ParseError("input_dim must be a positive integer");
  const auto input_dim = doc["input_dim"].get<std::size_t>();
  if (!doc.contains("layers") || !doc["layers"].is_array()) throw ParseError("missing layers array");

  std::vector<Layer> layers;
  std::size_t prev = input_dim;
  for (std::size_t l = 0; l < doc["layers"].size(); ++l) {
    const Json& jl = doc["layers"][l];
    const std::string where = "layers[" + std::to_string(l) + "]";
    if (!jl.is_object() || !jl.contains("weights") || !jl.contains("bias"))
      throw ParseError(where + ": needs weights and bias");
    const Json& rows = jl["weights"];
    if (!rows.is_array() || rows.empty()) throw ParseError(where + ".weights: expected non-empty array of rows");
    const std::size_t cols = rows[0].is_array() ? rows[0].size() : 0;
    if (cols != prev)
      throw DimensionError(where + ": weights have " + std::to_string(cols) + " columns, expected " +
                           std::to_string(prev));
    Layer layer;
    layer.weights = Matrix(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      Vector row = detail::number_array(rows[r], where + ".weights[" + std::to_string(r) + "]");
      if (row.size() != cols) throw DimensionError(where + ": ragged weight rows");
      std::copy(row.begin(), row.end(), layer.weights.row(r).begin());
    }
    layer.bias = detail::number_array(jl["bias"], where + ".bias");
    const std::string act = jl.value("activation", std::string("relu"));
    if (act == "relu") {
      layer.activation = Activation::relu;
    } else if (act == "identity") {
      layer.activation = Activation::identity;
    } else {
      throw ParseError(where + ": unknown activation '" + act + "'");
    }
    prev = layer.width();
    layers.push_back(std::move(layer));
  }

  Metadata metadata;
  if (doc.contains("metadata")) {
    if (!doc["metadata"].is_object()) throw ParseError("metadata must be an object");
    for (const auto& [k, v] : doc["metadata"].items()) metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  return Network(input_dim, std::move(layers), std::move(metadata));
}

inline Network load_network(std::istream& in) {
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed network document: ") + e.what());
  } catch (const nlohmann::json::out_of_range& e) {
    throw NonFiniteError(std::string("number out of range in network document: ") + e.what());
  }
  return network_from_json(doc);
}

inline Network load_network_string(const std::string& text) {
  std::istringstream in(text);
  return load_network(in);
}

inline Network load_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open network file: " + path);
  return load_network(in);
}

// Doubles are written in shortest round-trip form, so reloading reproduces
// every weight bit for bit.
inline std::string save_network(const Network& net) { return network_to_json(net).dump(1) + "\n"; }

inline void save_network_file(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write network file: " + path);
  out << save_network(net);
  if (!out) throw Error("failed writing network file: " + path);
}

}  // namespace reluforge
