#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "hg/error.hpp"
#include "hg/model/model.hpp"
#include "hg/trainer/adam.hpp"
#include "hg/trainer/config.hpp"

namespace hg::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'H', 'G', 'C', 'K', 'P', 'T', '\0', '\n'};

template <typename S>
struct Checkpoint {
  TrainConfig config;
  model::Model<S> model;
  Adam<S> optimizer;
  int pretrain_epochs_done = 0;
  int joint_epochs_done = 0;
  json history = json::array();  // per-epoch aggregates and eval snapshots

  int epoch() const { return pretrain_epochs_done + joint_epochs_done; }
};

template <typename S>
const char* precision_name() {
  return std::is_same_v<S, float> ? "float" : "double";
}

namespace detail {

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& data, std::size_t end) : data_(data), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw LoadError("checkpoint truncated");
  }
  const std::string& data_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

template <typename S>
void put_tensor(std::string& out, const std::string& name, const Tensor<S>& t) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) put<std::int32_t>(out, d);
  for (std::size_t i = 0; i < t.size(); ++i) put<double>(out, static_cast<double>(t[i]));
}

struct RawTensor {
  std::vector<int> shape;
  std::vector<double> values;
};

template <typename S>
void assign(const std::map<std::string, RawTensor>& raw, const std::string& key, Tensor<S>& dst) {
  const auto it = raw.find(key);
  if (it == raw.end()) throw LoadError("checkpoint is missing tensor '" + key + "'");
  if (it->second.shape != dst.shape())
    throw LoadError("checkpoint tensor '" + key + "' has shape mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<S>(it->second.values[i]);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("checkpoint not found: " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Validates magic, version and checksum; returns the header and the tensor section reader offset.
inline json parse_header(const std::string& data, std::size_t& offset) {
  if (data.size() < sizeof(kCheckpointMagic) + 4 + 8 + 8 ||
      std::memcmp(data.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw LoadError("not a checkpoint file (bad magic)");
  const std::size_t body = data.size() - 8;
  std::uint64_t stored = 0;
  std::memcpy(&stored, data.data() + body, 8);
  if (fnv1a(data.substr(0, body)) != stored) throw LoadError("checkpoint checksum mismatch (corrupt file)");
  Reader r(data, body);
  r.bytes(sizeof(kCheckpointMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw LoadError("checkpoint version " + std::to_string(version) + " does not match expected " +
                    std::to_string(kCheckpointVersion));
  const auto len = r.get<std::uint64_t>();
  json header;
  try {
    header = json::parse(r.bytes(len));
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint header unreadable: ") + e.what());
  }
  offset = sizeof(kCheckpointMagic) + 4 + 8 + len;
  return header;
}

}  // namespace detail

template <typename S>
std::string serialize_checkpoint(Checkpoint<S>& ck) {
  json header;
  header["config"] = train_config_to_json(ck.config);
  header["precision"] = precision_name<S>();
  header["pretrain_epochs_done"] = ck.pretrain_epochs_done;
  header["joint_epochs_done"] = ck.joint_epochs_done;
  header["attention_frozen"] = ck.model.attention_frozen();
  header["history"] = ck.history;
  json steps = json::object();
  for (const auto& [name, slot] : ck.optimizer.slots()) steps[name] = slot.step;
  header["adam_steps"] = steps;
  header["adam"] = {{"lr", ck.optimizer.lr}, {"beta1", ck.optimizer.beta1}, {"beta2", ck.optimizer.beta2},
                    {"eps", ck.optimizer.eps}};
  const std::string hs = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint64_t>(out, hs.size());
  out += hs;

  std::uint32_t count = 0;
  std::string tensors;
  ck.model.for_each_param([&](model::Group, model::Param<S>& p) {
    detail::put_tensor(tensors, "param/" + p.name, p.value);
    ++count;
  });
  ck.model.for_each_buffer([&](model::Buffer<S>& b) {
    detail::put_tensor(tensors, "buffer/" + b.name, b.value);
    ++count;
  });
  for (const auto& [name, slot] : ck.optimizer.slots()) {
    detail::put_tensor(tensors, "adam_m/" + name, slot.m);
    detail::put_tensor(tensors, "adam_v/" + name, slot.v);
    count += 2;
  }
  detail::put<std::uint32_t>(out, count);
  out += tensors;
  detail::put<std::uint64_t>(out, detail::fnv1a(out));
  return out;
}

// Writes atomically: a temporary sibling is renamed into place; on failure it is removed.
template <typename S>
void save_checkpoint(const std::filesystem::path& path, Checkpoint<S>& ck) {
  const std::string bytes = serialize_checkpoint(ck);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed to write checkpoint " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("failed to move checkpoint into place: " + path.string());
  }
}

inline json read_checkpoint_header(const std::filesystem::path& path) {
  const std::string data = detail::read_file(path);
  std::size_t off = 0;
  return detail::parse_header(data, off);
}

template <typename S>
Checkpoint<S> deserialize_checkpoint(const std::string& data) {
  std::size_t off = 0;
  const json header = detail::parse_header(data, off);

  std::map<std::string, detail::RawTensor> raw;
  detail::Reader r(data, data.size() - 8);
  r.bytes(off);
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto nlen = r.get<std::uint32_t>();
    const std::string name = r.bytes(nlen);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw LoadError("checkpoint tensor '" + name + "' has an invalid rank");
    detail::RawTensor rt;
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const int dim = r.get<std::int32_t>();
      if (dim < 0) throw LoadError("checkpoint tensor '" + name + "' has a negative dimension");
      rt.shape.push_back(dim);
      n *= static_cast<std::size_t>(dim);
    }
    rt.values.resize(n);
    for (auto& v : rt.values) v = r.get<double>();
    raw.emplace(name, std::move(rt));
  }
  if (!r.done()) throw LoadError("checkpoint has trailing bytes");

  Checkpoint<S> ck;
  try {
    ck.config = train_config_from_json(header.at("config"));
    ck.pretrain_epochs_done = header.at("pretrain_epochs_done").get<int>();
    ck.joint_epochs_done = header.at("joint_epochs_done").get<int>();
    ck.history = header.at("history");
    ck.optimizer.lr = header.at("adam").at("lr").get<double>();
    ck.optimizer.beta1 = header.at("adam").at("beta1").get<double>();
    ck.optimizer.beta2 = header.at("adam").at("beta2").get<double>();
    ck.optimizer.eps = header.at("adam").at("eps").get<double>();
    ck.model = model::Model<S>(ck.config.model);
    ck.model.set_attention_frozen(header.at("attention_frozen").get<bool>());
    for (const auto& [name, step] : header.at("adam_steps").items()) {
      auto& slot = ck.optimizer.slots()[name];
      slot.step = step.template get<long>();
      const auto& m = raw.at("adam_m/" + name);
      slot.m = Tensor<S>(m.shape);
      slot.v = Tensor<S>(m.shape);
      detail::assign(raw, "adam_m/" + name, slot.m);
      detail::assign(raw, "adam_v/" + name, slot.v);
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint header incomplete: ") + e.what());
  } catch (const std::out_of_range&) {
    throw LoadError("checkpoint is missing optimizer state");
  } catch (const InvalidArgument& e) {
    throw LoadError(std::string("checkpoint config invalid: ") + e.what());
  }
  ck.model.for_each_param([&](model::Group, model::Param<S>& p) { detail::assign(raw, "param/" + p.name, p.value); });
  ck.model.for_each_buffer([&](model::Buffer<S>& b) { detail::assign(raw, "buffer/" + b.name, b.value); });
  return ck;
}

template <typename S>
Checkpoint<S> load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint<S>(detail::read_file(path));
}

// Human-readable sidecar: hyperparameters, seed, epoch and the latest metrics.
template <typename S>
json checkpoint_manifest(const Checkpoint<S>& ck) {
  json m;
  m["format_version"] = kCheckpointVersion;
  m["precision"] = precision_name<S>();
  m["epoch"] = ck.epoch();
  m["pretrain_epochs_done"] = ck.pretrain_epochs_done;
  m["joint_epochs_done"] = ck.joint_epochs_done;
  m["seed"] = ck.config.seed;
  m["config"] = train_config_to_json(ck.config);
  m["metrics"] = ck.history.empty() ? json::object() : ck.history.back();
  return m;
}

}  // namespace hg::train
