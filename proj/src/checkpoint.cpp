// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "minerf/errors.hpp"

namespace minerf {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

namespace {

using json = nlohmann::json;

constexpr const char* kFormat = "minerf-checkpoint";
constexpr int kVersion = 1;

void append(std::vector<std::uint8_t>& out, const Mat& m) {
  const auto n = static_cast<std::size_t>(m.size()) * sizeof(double);
  const auto* p = reinterpret_cast<const std::uint8_t*>(m.data());
  out.insert(out.end(), p, p + n);
}

Mat read_block(const std::uint8_t* payload, std::size_t payload_size, std::size_t offset, int rows, int cols) {
  const std::size_t n = static_cast<std::size_t>(rows) * cols * sizeof(double);
  if (offset + n > payload_size) throw ConfigError("checkpoint: payload truncated");
  Mat m(rows, cols);
  std::memcpy(m.data(), payload + offset, n);
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  json tensors = json::array();
  std::vector<std::uint8_t> payload;
  for (const auto& p : ckpt.model.params.all()) {
    const int rows = static_cast<int>(p.value.rows());
    const int cols = static_cast<int>(p.value.cols());
    const Mat m = p.adam_m.size() == 0 ? Mat(Mat::Zero(rows, cols)) : p.adam_m;
    const Mat v = p.adam_v.size() == 0 ? Mat(Mat::Zero(rows, cols)) : p.adam_v;
    json entry = {{"name", p.name}, {"shape", {rows, cols}}, {"adam_t", p.adam_t}};
    entry["offset"] = payload.size();
    append(payload, p.value);
    entry["m_offset"] = payload.size();
    append(payload, m);
    entry["v_offset"] = payload.size();
    append(payload, v);
    tensors.push_back(std::move(entry));
  }
  json identities = json::array();
  for (const auto& s : ckpt.model.identities) {
    identities.push_back({{"name", s.name}, {"n_frames", s.n_frames}, {"n_train", s.n_train}});
  }
  const json header = {{"format", kFormat},
                       {"version", kVersion},
                       {"step", ckpt.step},
                       {"config", to_json(ckpt.config)},
                       {"identities", identities},
                       {"tensors", tensors},
                       {"payload_bytes", payload.size()}};
  const std::string line = header.dump() + "\n";
  std::vector<std::uint8_t> out(line.begin(), line.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  const auto nl = std::find(bytes.begin(), bytes.end(), std::uint8_t('\n'));
  if (nl == bytes.end()) throw ConfigError("checkpoint: missing header line");
  json header;
  try {
    header = json::parse(bytes.begin(), nl);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (header.value("format", "") != kFormat || header.value("version", 0) != kVersion) {
    throw ConfigError("checkpoint: unsupported format");
  }
  const std::uint8_t* payload = &*nl + 1;
  const auto payload_size = static_cast<std::size_t>(bytes.end() - nl - 1);
  if (payload_size != header.at("payload_bytes").get<std::size_t>()) {
    throw ConfigError("checkpoint: payload size does not match header");
  }

  Checkpoint ckpt;
  ckpt.config = config_from_json(header.at("config"));
  ckpt.step = header.at("step").get<std::int64_t>();
  ckpt.model.cfg = ModelConfig::from(ckpt.config);
  for (const auto& s : header.at("identities")) {
    ckpt.model.identities.push_back(
        {s.at("name").get<std::string>(), s.at("n_frames").get<int>(), s.at("n_train").get<int>()});
  }
  for (const auto& t : header.at("tensors")) {
    const int rows = t.at("shape").at(0).get<int>();
    const int cols = t.at("shape").at(1).get<int>();
    Param& p = ckpt.model.params.add(t.at("name").get<std::string>(),
                                     read_block(payload, payload_size, t.at("offset").get<std::size_t>(), rows, cols));
    p.adam_m = read_block(payload, payload_size, t.at("m_offset").get<std::size_t>(), rows, cols);
    p.adam_v = read_block(payload, payload_size, t.at("v_offset").get<std::size_t>(), rows, cols);
    p.adam_t = t.at("adam_t").get<std::int64_t>();
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write checkpoint " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw UsageError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint initial_checkpoint(const RunConfig& cfg, const std::vector<IdentitySlot>& identities) {
  cfg.validate();
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.model = Model::init(ModelConfig::from(cfg), identities, cfg.train.seed);
  return ckpt;
}

}  // namespace minerf
