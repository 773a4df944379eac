#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "causerl/tensor.hpp"

namespace causerl {

using Rng = std::mt19937_64;

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

std::vector<Tensor> tensors_of(const ParamList& params);
std::uint64_t checksum(const ParamList& params);

Tensor uniform_tensor(Shape shape, double bound, Rng& rng, bool requires_grad);
Tensor gaussian_tensor(Shape shape, double sigma, Rng& rng, bool requires_grad);

/// Checkpoint document: {"format": "causerl-params/1", "params": {name:
/// {"shape": [...], "values": [...]}}}. Doubles are written in shortest
/// round-trip form, so save → load is bit-exact.
nlohmann::json params_to_json(const ParamList& params);
/// Copies values into the existing tensors. Every name in `params` must be
/// present with an identical shape.
void params_from_json(const nlohmann::json& doc, const ParamList& params);

void save_checkpoint(const std::filesystem::path& path, const ParamList& params);
void load_checkpoint(const std::filesystem::path& path, const ParamList& params);

}  // namespace causerl
