#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "asgl/error.hpp"
#include "asgl/nn.hpp"
#include "asgl/optim.hpp"
#include "asgl/tensor.hpp"

namespace asgl {

// One tensor in the container; optimizer moments travel as extra records
// named "adam.m.<param>" / "adam.v.<param>". Values are held as doubles
// regardless of run mode (float values widen and narrow losslessly).
struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct CheckpointFile {
  std::string dtype;  // "f32" or "f64"
  std::size_t epoch = 0;
  std::size_t adam_step = 0;
  std::string rng_state;
  std::vector<TensorRecord> tensors;
};

// Binary container: magic, JSON directory (names, shapes, counters, rng
// state), then the raw little-endian doubles in directory order. Writing the
// same content twice yields identical bytes.
void save_checkpoint_file(const std::string& path, const CheckpointFile& c);
CheckpointFile load_checkpoint_file(const std::string& path);

template <typename T>
const char* dtype_name() {
  if constexpr (sizeof(T) == 4) {
    return "f32";
  } else {
    return "f64";
  }
}

template <typename T>
CheckpointFile pack_checkpoint(const ParamList<T>& params, const Adam<T>* opt,
                               std::size_t epoch,
                               const std::string& rng_state) {
  CheckpointFile c;
  c.dtype = dtype_name<T>();
  c.epoch = epoch;
  c.rng_state = rng_state;
  for (const auto& p : params) {
    TensorRecord r;
    r.name = p.name;
    r.shape = p.tensor.shape();
    r.values.assign(p.tensor.data().begin(), p.tensor.data().end());
    c.tensors.push_back(std::move(r));
  }
  if (opt != nullptr) {
    c.adam_step = opt->step_count();
    for (std::size_t i = 0; i < params.size(); ++i) {
      c.tensors.push_back({"adam.m." + params[i].name,
                           params[i].tensor.shape(),
                           {opt->moments_m()[i].begin(),
                            opt->moments_m()[i].end()}});
      c.tensors.push_back({"adam.v." + params[i].name,
                           params[i].tensor.shape(),
                           {opt->moments_v()[i].begin(),
                            opt->moments_v()[i].end()}});
    }
  }
  return c;
}

// Fills the model parameters (and optionally optimizer state) in place.
// Names and shapes must match the receiving model exactly.
template <typename T>
void apply_checkpoint(const CheckpointFile& c, ParamList<T>& params,
                      Adam<T>* opt) {
  if (c.dtype != dtype_name<T>()) {
    raise(ErrorCode::data, "checkpoint holds " + c.dtype +
                               " parameters but the run is " +
                               dtype_name<T>());
  }
  std::size_t cursor = 0;
  auto take = [&](const std::string& name,
                  const Shape& shape) -> const TensorRecord& {
    if (cursor >= c.tensors.size()) {
      raise(ErrorCode::data, "checkpoint is missing tensor " + name);
    }
    const TensorRecord& r = c.tensors[cursor++];
    if (r.name != name) {
      raise(ErrorCode::data, "checkpoint tensor " + r.name +
                                 " where the model expects " + name);
    }
    if (r.shape != shape || r.values.size() != shape_numel(shape)) {
      raise(ErrorCode::data, "checkpoint tensor " + name + " has shape " +
                                 shape_str(r.shape) +
                                 " but the model expects " + shape_str(shape));
    }
    return r;
  };
  for (auto& p : params) {
    const auto& r = take(p.name, p.tensor.shape());
    std::copy(r.values.begin(), r.values.end(), p.tensor.data().begin());
  }
  if (opt != nullptr) {
    if (cursor == c.tensors.size()) {
      raise(ErrorCode::data, "checkpoint carries no optimizer state");
    }
    std::vector<std::vector<T>> m, v;
    for (const auto& p : params) {
      const auto& rm = take("adam.m." + p.name, p.tensor.shape());
      const auto& rv = take("adam.v." + p.name, p.tensor.shape());
      m.emplace_back(rm.values.begin(), rm.values.end());
      v.emplace_back(rv.values.begin(), rv.values.end());
    }
    opt->restore(std::move(m), std::move(v), c.adam_step);
  }
  // optimizer records are fine to leave behind when only parameters are
  // wanted; anything else unconsumed is a mismatched model
  for (; cursor < c.tensors.size(); ++cursor) {
    if (c.tensors[cursor].name.rfind("adam.", 0) != 0) {
      raise(ErrorCode::data, "checkpoint tensor " + c.tensors[cursor].name +
                                 " has no place in the model");
    }
  }
}

template <typename T>
CheckpointFile pack_checkpoint(const ParamList<T>& params, std::size_t epoch,
                               const std::string& rng_state) {
  return pack_checkpoint(params, static_cast<const Adam<T>*>(nullptr), epoch,
                         rng_state);
}

template <typename T>
void apply_checkpoint(const CheckpointFile& c, ParamList<T>& params) {
  apply_checkpoint(c, params, static_cast<Adam<T>*>(nullptr));
}

}  // namespace asgl
