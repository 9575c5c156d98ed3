#include "ean/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ean/errors.hpp"

namespace ean {

namespace {

constexpr char kMagic[8] = {'E', 'A', 'N', 'N', 'E', 'T', '0', '1'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return value;
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error("checkpoint: truncated file");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> serialize_nets(std::span<const nn::MlpParams> nets) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le(out, static_cast<std::uint32_t>(nets.size()));
  for (const auto& net : nets) {
    nn::validate(net);
    put_le(out, static_cast<std::uint32_t>(net.num_layers()));
    for (auto d : net.layer_dims) put_le(out, static_cast<std::uint64_t>(d));
    for (auto a : net.activations) out.push_back(static_cast<std::uint8_t>(a));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      for (double w : net.weights[l].data) put_f64(out, w);
      for (double b : net.biases[l]) put_f64(out, b);
    }
  }
  return out;
}

std::vector<nn::MlpParams> deserialize_nets(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) throw Error("checkpoint: bad magic bytes");
  const auto count = in.get<std::uint32_t>();
  std::vector<nn::MlpParams> nets;
  nets.reserve(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    const auto layers = in.get<std::uint32_t>();
    if (layers == 0) throw Error("checkpoint: network without layers");
    std::vector<std::size_t> dims(layers + 1);
    for (auto& d : dims) d = static_cast<std::size_t>(in.get<std::uint64_t>());
    std::vector<nn::Activation> acts(layers);
    for (auto& a : acts) {
      const auto code = in.get<std::uint8_t>();
      if (code > 2) throw Error("checkpoint: unknown activation code " + std::to_string(code));
      a = static_cast<nn::Activation>(code);
    }
    nn::MlpParams p = nn::make_mlp(dims, acts);
    for (std::size_t l = 0; l < layers; ++l) {
      for (double& w : p.weights[l].data) w = in.get_f64();
      for (double& b : p.biases[l]) b = in.get_f64();
    }
    nn::validate(p);
    nets.push_back(std::move(p));
  }
  if (!in.done()) throw Error("checkpoint: trailing bytes");
  return nets;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

std::string save_checkpoint(const std::filesystem::path& path, std::span<const NamedNet> nets,
                            const nlohmann::json& metadata) {
  std::vector<nn::MlpParams> params;
  params.reserve(nets.size());
  for (const auto& n : nets) params.push_back(n.params);
  const auto bytes = serialize_nets(params);
  const std::string digest = digest_hex(fnv1a64(bytes));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("checkpoint: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }

  nlohmann::json side;
  side["format"] = "ean-checkpoint";
  side["version"] = 1;
  side["digest"] = digest;
  side["nets"] = nlohmann::json::array();
  for (const auto& n : nets) {
    nlohmann::json acts = nlohmann::json::array();
    for (auto a : n.params.activations) acts.push_back(std::string(nn::to_string(a)));
    side["nets"].push_back({{"name", n.name},
                            {"layer_dims", n.params.layer_dims},
                            {"activations", acts},
                            {"parameter_count", n.params.parameter_count()}});
  }
  side["metadata"] = metadata;
  std::ofstream meta(path.string() + ".json", std::ios::trunc);
  if (!meta) throw Error("checkpoint: cannot write sidecar for " + path.string());
  meta << side.dump(2) << '\n';
  return digest;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  LoadedCheckpoint out;
  out.digest = digest_hex(fnv1a64(bytes));
  auto nets = deserialize_nets(bytes);

  std::ifstream meta(path.string() + ".json");
  if (!meta) throw Error("checkpoint: missing sidecar " + path.string() + ".json");
  out.sidecar = nlohmann::json::parse(meta);
  if (out.sidecar.value("digest", "") != out.digest)
    throw Error("checkpoint: digest mismatch between " + path.string() + " and its sidecar");
  const auto& names = out.sidecar.at("nets");
  if (names.size() != nets.size()) throw Error("checkpoint: sidecar lists a different number of networks");
  for (std::size_t i = 0; i < nets.size(); ++i)
    out.nets.push_back({names[i].at("name").get<std::string>(), std::move(nets[i])});
  return out;
}

std::string file_digest(const std::filesystem::path& path) { return digest_hex(fnv1a64(read_file(path))); }

nlohmann::json to_json(const nn::MlpParams& params) {
  nlohmann::json acts = nlohmann::json::array();
  for (auto a : params.activations) acts.push_back(std::string(nn::to_string(a)));
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& w : params.weights) weights.push_back(w.data);
  return {{"layer_dims", params.layer_dims}, {"activations", acts}, {"weights", weights}, {"biases", params.biases}};
}

nn::MlpParams mlp_from_json(const nlohmann::json& j) {
  const auto dims = j.at("layer_dims").get<std::vector<std::size_t>>();
  std::vector<nn::Activation> acts;
  for (const auto& a : j.at("activations")) acts.push_back(nn::activation_from_string(a.get<std::string>()));
  nn::MlpParams p = nn::make_mlp(dims, acts);
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  if (weights.size() != p.num_layers() || biases.size() != p.num_layers())
    throw Error("mlp_from_json: layer count mismatch");
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    p.weights[l].data = weights[l].get<std::vector<double>>();
    p.biases[l] = biases[l].get<std::vector<double>>();
  }
  nn::validate(p);
  return p;
}

nlohmann::json to_json(const nn::GradientBundle& grads) {
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& w : grads.weights) {
    weights.push_back(w.data);
    shapes.push_back({w.rows, w.cols});
  }
  return {{"shapes", shapes}, {"weights", weights}, {"biases", grads.biases}};
}

nn::GradientBundle gradients_from_json(const nlohmann::json& j) {
  nn::GradientBundle g;
  const auto& shapes = j.at("shapes");
  const auto& weights = j.at("weights");
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    nn::Matrix m(shapes[l].at(0).get<std::size_t>(), shapes[l].at(1).get<std::size_t>());
    m.data = weights.at(l).get<std::vector<double>>();
    if (m.data.size() != m.rows * m.cols) throw Error("gradients_from_json: shape mismatch");
    g.weights.push_back(std::move(m));
  }
  g.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  return g;
}

nlohmann::json to_json(const nn::OptimizerState& s) {
  nlohmann::json j{{"kind", s.kind == nn::OptimizerKind::sgd ? "sgd" : "adam"},
                   {"learning_rate", s.learning_rate},
                   {"beta1", s.beta1},
                   {"beta2", s.beta2},
                   {"epsilon", s.epsilon},
                   {"step", s.step}};
  if (!s.moments.first.weights.empty()) {
    j["first_moment"] = to_json(s.moments.first);
    j["second_moment"] = to_json(s.moments.second);
  }
  return j;
}

nn::OptimizerState optimizer_from_json(const nlohmann::json& j) {
  nn::OptimizerState s;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "sgd")
    s.kind = nn::OptimizerKind::sgd;
  else if (kind == "adam")
    s.kind = nn::OptimizerKind::adam;
  else
    throw Error("optimizer_from_json: unknown optimizer '" + kind + "'");
  s.learning_rate = j.at("learning_rate").get<double>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  s.step = j.at("step").get<std::uint64_t>();
  if (j.contains("first_moment")) {
    s.moments.first = gradients_from_json(j.at("first_moment"));
    s.moments.second = gradients_from_json(j.at("second_moment"));
  }
  return s;
}

}  // namespace ean
