#include "evoprune/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "evoprune/error.hpp"

namespace evoprune {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'E', 'V', 'O', 'P', 'R', 'C', 'K', 'P'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::vector<std::uint8_t>& out, const T& v) {
  const auto* b = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), b, b + sizeof(T));
}

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> v) {
  const auto* b = reinterpret_cast<const std::uint8_t*>(v.data());
  out.insert(out.end(), b, b + v.size_bytes());
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void read(void* dst, std::size_t n) {
    if (n > bytes_.size() - pos_) {
      throw CheckpointError("corrupt checkpoint: truncated at byte " + std::to_string(pos_));
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T get() {
    T v;
    read(&v, sizeof v);
    return v;
  }
  void floats(std::span<float> dst) { read(dst.data(), dst.size_bytes()); }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

nlohmann::json metrics_to_json(const EpochMetrics& m) {
  auto num = [](double v) -> nlohmann::json {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  return {{"epoch", m.epoch},         {"train_loss", num(m.train_loss)},
          {"test_accuracy", num(m.test_accuracy)},
          {"total_mass", m.total_mass}, {"min_mass", m.min_mass},
          {"q25_mass", m.q25_mass},   {"median_mass", m.median_mass},
          {"q75_mass", m.q75_mass},   {"max_mass", m.max_mass},
          {"below_0_1", m.below_0_1}, {"histogram", m.histogram}};
}

EpochMetrics metrics_from_json(const nlohmann::json& j) {
  auto num = [&](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  EpochMetrics m;
  m.epoch = j.at("epoch").get<std::uint64_t>();
  m.train_loss = num("train_loss");
  m.test_accuracy = num("test_accuracy");
  m.total_mass = num("total_mass");
  m.min_mass = num("min_mass");
  m.q25_mass = num("q25_mass");
  m.median_mass = num("median_mass");
  m.q75_mass = num("q75_mass");
  m.max_mass = num("max_mass");
  m.below_0_1 = j.at("below_0_1").get<std::uint64_t>();
  m.histogram = j.at("histogram").get<std::vector<std::uint64_t>>();
  return m;
}

template <typename Fn>
void for_each_tensor(const ModelParams<float>& params, Fn&& fn) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    fn("W" + std::to_string(l + 1), params.layers[l].weight.values());
    fn("b" + std::to_string(l + 1), std::span<const float>(params.layers[l].bias));
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const TrainState& state) {
  nlohmann::json manifest = nlohmann::json::array();
  auto list = [&](const std::string& prefix, const ModelParams<float>& m) {
    for_each_tensor(m, [&](const std::string& name, std::span<const float> v) {
      manifest.push_back({{"name", prefix + name}, {"count", v.size()}});
    });
  };
  list("", state.params);
  list("momentum.", state.momentum);
  manifest.push_back({{"name", "population"}, {"count", state.population.size()}});

  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& m : state.metrics) metrics.push_back(metrics_to_json(m));

  nlohmann::json header{{"format", "evoprune-checkpoint"},
                        {"config", state.config},
                        {"trajectory_hash", state.config.trajectory_hash()},
                        {"widths", state.params.arch.widths},
                        {"epoch", state.epoch},
                        {"step", state.step},
                        {"batch_in_epoch", state.batch_in_epoch},
                        {"epoch_loss_sum", state.epoch_loss_sum},
                        {"metrics", metrics},
                        {"tensors", manifest}};
  const std::string header_text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint64_t>(header_text.size()));
  const std::size_t body_start = out.size();
  out.insert(out.end(), header_text.begin(), header_text.end());
  for_each_tensor(state.params, [&](const std::string&, std::span<const float> v) { put_floats(out, v); });
  for_each_tensor(state.momentum, [&](const std::string&, std::span<const float> v) { put_floats(out, v); });
  put_floats(out, state.population);
  put(out, fnv1a(out.data() + body_start, out.size() - body_start));
  return out;
}

TrainState deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw CheckpointError("not an evoprune checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = r.get<std::uint64_t>();
  const std::size_t body_start = r.pos();
  if (bytes.size() < body_start + sizeof(std::uint64_t) ||
      header_len > bytes.size() - body_start - sizeof(std::uint64_t)) {
    throw CheckpointError("corrupt checkpoint: truncated header");
  }
  const std::size_t body_end = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, bytes.data() + body_end, sizeof stored_sum);
  if (stored_sum != fnv1a(bytes.data() + body_start, body_end - body_start)) {
    throw CheckpointError("corrupt checkpoint: checksum mismatch (file truncated or damaged)");
  }

  std::string header_text(header_len, '\0');
  r.read(header_text.data(), header_len);
  TrainState s;
  try {
    const auto header = nlohmann::json::parse(header_text);
    s.config = header.at("config").get<TrainConfig>();
    if (header.at("trajectory_hash").get<std::uint64_t>() != s.config.trajectory_hash()) {
      throw CheckpointError("checkpoint config does not match its recorded hash");
    }
    const Architecture arch{header.at("widths").get<std::vector<std::size_t>>()};
    if (arch != s.config.architecture(arch.input_dim(), arch.num_classes())) {
      throw CheckpointError("checkpoint architecture disagrees with its config");
    }
    s.params = ModelParams<float>::zeros(arch);
    s.momentum = ModelParams<float>::zeros(arch);
    s.population.assign(arch.population_size(), 0.0f);
    s.epoch = header.at("epoch").get<std::uint64_t>();
    s.step = header.at("step").get<std::uint64_t>();
    s.batch_in_epoch = header.at("batch_in_epoch").get<std::uint64_t>();
    s.epoch_loss_sum = header.at("epoch_loss_sum").get<double>();
    for (const auto& m : header.at("metrics")) s.metrics.push_back(metrics_from_json(m));

    std::size_t expected = 2 * s.params.parameter_count() + s.population.size();
    std::size_t listed = 0;
    for (const auto& t : header.at("tensors")) listed += t.at("count").get<std::size_t>();
    if (listed != expected) throw CheckpointError("checkpoint tensor manifest does not match architecture");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
  }

  auto fill = [&](ModelParams<float>& m) {
    for (auto& layer : m.layers) {
      r.floats(layer.weight.values());
      r.floats(std::span<float>(layer.bias));
    }
  };
  fill(s.params);
  fill(s.momentum);
  r.floats(std::span<float>(s.population));
  if (r.pos() != body_end) throw CheckpointError("corrupt checkpoint: trailing bytes");
  return s;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(state);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace evoprune
