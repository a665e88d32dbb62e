#include "flairsyn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace flairsyn::nn {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64(std::ofstream& f, uint64_t v) { f.write(reinterpret_cast<const char*>(&v), sizeof(v)); }

uint64_t get_u64(std::ifstream& f, const std::string& path) {
  uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!f) throw std::runtime_error("truncated checkpoint " + path);
  return v;
}

}  // namespace

void write_tensor_blob(const std::string& path, const std::map<std::string, Tensor>& tensors) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(kMagic, sizeof(kMagic));
  put_u64(f, tensors.size());
  for (const auto& [name, t] : tensors) {
    put_u64(f, name.size());
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(f, t.ndim());
    for (size_t d = 0; d < t.ndim(); ++d) put_u64(f, static_cast<uint64_t>(t.dim(d)));
    f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("write failure in " + path);
}

std::map<std::string, Tensor> read_tensor_blob(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[sizeof(kMagic)];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path + " is not a checkpoint blob");
  std::map<std::string, Tensor> tensors;
  const uint64_t count = get_u64(f, path);
  for (uint64_t i = 0; i < count; ++i) {
    std::string name(get_u64(f, path), '\0');
    f.read(name.data(), static_cast<std::streamsize>(name.size()));
    const uint64_t ndim = get_u64(f, path);
    std::vector<int64_t> shape(ndim);
    for (auto& d : shape) d = static_cast<int64_t>(get_u64(f, path));
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!f) throw std::runtime_error("truncated checkpoint " + path);
    tensors.emplace(std::move(name), std::move(t));
  }
  return tensors;
}

void save_checkpoint(const std::string& path, const ParamRegistry& params, const Adam* optimizer,
                     const nlohmann::json& meta) {
  std::map<std::string, Tensor> tensors;
  for (const auto& p : params.params) tensors["param." + p.name] = p.var->value;
  for (const auto& b : params.buffers) tensors["buffer." + b.name] = *b.tensor;
  if (optimizer) {
    const auto& st = optimizer->state();
    if (st.m.size() != params.params.size())
      throw std::invalid_argument("optimizer state does not cover the parameter registry");
    for (size_t i = 0; i < st.m.size(); ++i) {
      tensors["adam.m." + params.params[i].name] = st.m[i];
      tensors["adam.v." + params.params[i].name] = st.v[i];
    }
    tensors["adam.step"] = Tensor::scalar(static_cast<double>(st.step_count));
  }
  write_tensor_blob(path, tensors);
  std::ofstream mf(path + ".json");
  if (!mf) throw std::runtime_error("cannot open " + path + ".json for writing");
  mf << meta.dump(2) << "\n";
}

CheckpointContents load_checkpoint(const std::string& path) {
  CheckpointContents out;
  out.tensors = read_tensor_blob(path);
  std::ifstream mf(path + ".json");
  if (mf) {
    try {
      mf >> out.meta;
    } catch (const std::exception& e) {
      throw std::runtime_error("bad checkpoint sidecar " + path + ".json: " + e.what());
    }
  }
  return out;
}

namespace {
const Tensor& find_tensor(const CheckpointContents& ckpt, const std::string& key,
                          const std::vector<int64_t>& want_shape) {
  auto it = ckpt.tensors.find(key);
  if (it == ckpt.tensors.end()) throw std::runtime_error("checkpoint is missing tensor '" + key + "'");
  if (it->second.shape() != want_shape)
    throw std::runtime_error("checkpoint tensor '" + key + "' has shape " + shape_str(it->second.shape()) +
                             ", expected " + shape_str(want_shape));
  return it->second;
}
}  // namespace

void restore_params(const CheckpointContents& ckpt, ParamRegistry& params) {
  for (auto& p : params.params) p.var->value = find_tensor(ckpt, "param." + p.name, p.var->value.shape());
  for (auto& b : params.buffers) *b.tensor = find_tensor(ckpt, "buffer." + b.name, b.tensor->shape());
}

void restore_optimizer(const CheckpointContents& ckpt, const ParamRegistry& params, Adam& optimizer) {
  auto it = ckpt.tensors.find("adam.step");
  if (it == ckpt.tensors.end()) throw std::runtime_error("checkpoint carries no optimizer state");
  if (params.params.size() != optimizer.param_count())
    throw std::invalid_argument("parameter registry does not match the optimizer");
  Adam::State st;
  st.step_count = static_cast<int64_t>(it->second[0]);
  for (const auto& p : params.params) {
    const auto& shape = p.var->value.shape();
    st.m.push_back(find_tensor(ckpt, "adam.m." + p.name, shape));
    st.v.push_back(find_tensor(ckpt, "adam.v." + p.name, shape));
  }
  optimizer.restore_state(std::move(st));
}

}  // namespace flairsyn::nn
