#pragma once

#include <map>
#include <string>

#include "flairsyn/layers.hpp"
#include "flairsyn/optim.hpp"
#include "json.hpp"

namespace flairsyn::nn {

/// Binary blob of named tensors (parameters, running buffers, optimizer
/// moments) plus a JSON sidecar at <path>.json carrying config, epoch and
/// seed metadata.
struct CheckpointContents {
  std::map<std::string, Tensor> tensors;
  nlohmann::json meta;
};

void write_tensor_blob(const std::string& path, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> read_tensor_blob(const std::string& path);

void save_checkpoint(const std::string& path, const ParamRegistry& params, const Adam* optimizer,
                     const nlohmann::json& meta);
CheckpointContents load_checkpoint(const std::string& path);

/// Copies matching tensors from a loaded checkpoint into live parameters and
/// buffers; every registry entry must be present with an identical shape.
void restore_params(const CheckpointContents& ckpt, ParamRegistry& params);
void restore_optimizer(const CheckpointContents& ckpt, const ParamRegistry& params, Adam& optimizer);

}  // namespace flairsyn::nn
