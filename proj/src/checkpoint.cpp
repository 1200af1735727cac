#include "embedforge/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "embedforge/error.hpp"

namespace embedforge {

using nlohmann::json;

namespace {

json layers_to_json(const MlpParams& p) {
  json arr = json::array();
  for (const auto& l : p.layers) {
    arr.push_back({{"in", l.in()},
                   {"out", l.out()},
                   {"weight", l.weight.data()},
                   {"bias", l.bias}});
  }
  return arr;
}

MlpParams layers_from_json(const json& arr) {
  if (!arr.is_array()) throw FormatError("checkpoint: 'layers' must be an array");
  MlpParams p;
  for (const auto& jl : arr) {
    const auto in = jl.at("in").get<std::size_t>();
    const auto out = jl.at("out").get<std::size_t>();
    auto weight = jl.at("weight").get<std::vector<double>>();
    auto bias = jl.at("bias").get<std::vector<double>>();
    if (weight.size() != in * out || bias.size() != out) {
      throw FormatError("checkpoint: layer arrays do not match declared shape " +
                        std::to_string(out) + "x" + std::to_string(in));
    }
    p.layers.push_back({Matrix(out, in, std::move(weight)), std::move(bias)});
  }
  return p;
}

}  // namespace

json checkpoint_to_json(const Checkpoint& c) {
  const auto& h = c.adam.hyper;
  return {
      {"format_version", kCheckpointFormatVersion},
      {"layers", layers_to_json(c.params)},
      {"adam",
       {{"learning_rate", h.learning_rate},
        {"beta1", h.beta1},
        {"beta2", h.beta2},
        {"epsilon", h.epsilon},
        {"decay_start", h.decay_start},
        {"total_iters", h.total_iters},
        {"final_lr_factor", h.final_lr_factor},
        {"step_count", c.adam.step_count},
        {"m", layers_to_json(c.adam.m)},
        {"v", layers_to_json(c.adam.v)}}},
      {"rng", {{"seed", c.rng_seed}, {"counter", c.rng_counter}}},
  };
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw FormatError("checkpoint: unsupported format_version " + std::to_string(version));
    }
    Checkpoint c;
    c.params = layers_from_json(j.at("layers"));
    c.params.validate();
    const auto& ja = j.at("adam");
    auto& h = c.adam.hyper;
    h.learning_rate = ja.at("learning_rate").get<double>();
    h.beta1 = ja.at("beta1").get<double>();
    h.beta2 = ja.at("beta2").get<double>();
    h.epsilon = ja.at("epsilon").get<double>();
    h.decay_start = ja.at("decay_start").get<std::int64_t>();
    h.total_iters = ja.at("total_iters").get<std::int64_t>();
    h.final_lr_factor = ja.at("final_lr_factor").get<double>();
    c.adam.step_count = ja.at("step_count").get<std::int64_t>();
    c.adam.m = layers_from_json(ja.at("m"));
    c.adam.v = layers_from_json(ja.at("v"));
    if (!(c.adam.m.zeros_like() == c.params.zeros_like()) ||
        !(c.adam.v.zeros_like() == c.params.zeros_like())) {
      throw ConfigError("checkpoint: Adam moment shapes differ from the network");
    }
    c.rng_seed = j.at("rng").at("seed").get<std::uint64_t>();
    c.rng_counter = j.at("rng").at("counter").get<std::uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_to_json(ckpt).dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace embedforge
