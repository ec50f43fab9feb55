#include "asgl/checkpoint.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "asgl/error.hpp"

namespace asgl {

using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'S', 'G', 'L', 'C', 'K', 'P', '1'};

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64(std::ifstream& in, const std::string& path) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) raise(ErrorCode::file, path + ": truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint_file(const std::string& path, const CheckpointFile& c) {
  json dir = json::array();
  for (const auto& r : c.tensors) {
    dir.push_back(json{{"name", r.name}, {"shape", r.shape}});
  }
  const std::string header = json{{"dtype", c.dtype},
                                  {"epoch", c.epoch},
                                  {"adam_step", c.adam_step},
                                  {"rng", c.rng_state},
                                  {"tensors", std::move(dir)}}
                                 .dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::file, "cannot open " + path + " for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  static_assert(sizeof(double) == 8);
  for (const auto& r : c.tensors) {
    out.write(reinterpret_cast<const char*>(r.values.data()),
              static_cast<std::streamsize>(r.values.size() * sizeof(double)));
  }
  if (!out) raise(ErrorCode::file, "error while writing " + path);
}

CheckpointFile load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::file, "cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    raise(ErrorCode::file, path + ": not a checkpoint");
  }
  const std::uint64_t header_len = get_u64(in, path);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) raise(ErrorCode::file, path + ": truncated checkpoint");
  json j = json::parse(header, nullptr, false);
  if (j.is_discarded()) {
    raise(ErrorCode::file, path + ": malformed checkpoint directory");
  }
  CheckpointFile c;
  try {
    c.dtype = j.at("dtype").get<std::string>();
    c.epoch = j.at("epoch").get<std::size_t>();
    c.adam_step = j.at("adam_step").get<std::size_t>();
    c.rng_state = j.at("rng").get<std::string>();
    for (const auto& e : j.at("tensors")) {
      TensorRecord r;
      r.name = e.at("name").get<std::string>();
      r.shape = e.at("shape").get<Shape>();
      c.tensors.push_back(std::move(r));
    }
  } catch (const json::exception& ex) {
    raise(ErrorCode::file,
          path + ": malformed checkpoint directory (" + ex.what() + ")");
  }
  if (c.dtype != "f32" && c.dtype != "f64") {
    raise(ErrorCode::file, path + ": unknown dtype " + c.dtype);
  }
  for (auto& r : c.tensors) {
    r.values.resize(shape_numel(r.shape));
    in.read(reinterpret_cast<char*>(r.values.data()),
            static_cast<std::streamsize>(r.values.size() * sizeof(double)));
    if (!in) {
      raise(ErrorCode::file,
            path + ": truncated checkpoint payload at tensor " + r.name);
    }
    for (double v : r.values) {
      if (!std::isfinite(v)) {
        raise(ErrorCode::data,
              path + ": non-finite value in checkpoint tensor " + r.name);
      }
    }
  }
  in.peek();
  if (!in.eof()) {
    raise(ErrorCode::file, path + ": trailing bytes after the payload");
  }
  return c;
}

}  // namespace asgl
