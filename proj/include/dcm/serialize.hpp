#pragma once

#include <json.hpp>

#include "dcm/matrix.hpp"
#include "dcm/nn.hpp"

namespace dcm {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json data = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) data.push_back(m.data()[i]);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};  // row-major
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto& data = j.at("data");
  require(data.size() == m.size(), "matrix json: data length mismatch");
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = data[i].get<double>();
  return m;
}

inline nlohmann::json mlp_to_json(const Mlp& net) {
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& w : net.weights) weights.push_back(matrix_to_json(w));
  nlohmann::json biases = nlohmann::json::array();
  for (const auto& b : net.biases) biases.push_back(b);
  return {{"layer_sizes", net.layer_sizes}, {"weights", weights}, {"biases", biases}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net;
  net.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  for (const auto& w : j.at("weights")) net.weights.push_back(matrix_from_json(w));
  for (const auto& b : j.at("biases")) net.biases.push_back(b.get<Vector>());
  require(net.weights.size() + 1 == net.layer_sizes.size(), "mlp json: layer mismatch");
  return net;
}

}  // namespace dcm
