#include "causerl/params.hpp"

#include <fstream>

#include "causerl/error.hpp"

namespace causerl {

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

std::uint64_t checksum(const ParamList& params) {
  const auto tensors = tensors_of(params);
  return checksum(std::span<const Tensor>(tensors));
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng, bool requires_grad) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor gaussian_tensor(Shape shape, double sigma, Rng& rng, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

nlohmann::json params_to_json(const ParamList& params) {
  nlohmann::json body = nlohmann::json::object();
  for (const auto& p : params) {
    body[p.name] = {{"shape", p.tensor.shape()},
                    {"values", std::vector<double>(p.tensor.data().begin(), p.tensor.data().end())}};
  }
  return {{"format", "causerl-params/1"}, {"params", body}};
}

void params_from_json(const nlohmann::json& doc, const ParamList& params) {
  if (!doc.contains("params") || !doc["params"].is_object()) {
    throw Error(ErrorKind::kParseError, "checkpoint has no params object");
  }
  const auto& body = doc["params"];
  for (const auto& p : params) {
    if (!body.contains(p.name)) {
      throw Error(ErrorKind::kMissingArtifact, "checkpoint lacks parameter " + p.name);
    }
    const auto shape = body[p.name]["shape"].get<Shape>();
    const auto values = body[p.name]["values"].get<std::vector<double>>();
    if (shape != p.tensor.shape() || values.size() != p.tensor.numel()) {
      throw Error(ErrorKind::kShapeMismatch, "checkpoint shape differs for " + p.name);
    }
    Tensor t = p.tensor;
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamList& params) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kMissingArtifact, "cannot write " + path.string());
  out << params_to_json(params).dump() << '\n';
}

void load_checkpoint(const std::filesystem::path& path, const ParamList& params) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "cannot read " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParseError, path.string() + ": " + e.what());
  }
  params_from_json(doc, params);
}

}  // namespace causerl
