#include "jamlab/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "jamlab/error.hpp"
#include "jamlab/rng.hpp"

using nlohmann::json;

namespace jamlab {

namespace {

// fan-in-scaled uniform: U(-a, a) with a = sqrt(1/fan_in); draws are taken in
// double so float and double builds share the same pattern
template <class S>
Tensor<S> init_tensor(std::vector<int> shape, long fan_in, Rng& rng) {
  Tensor<S> t(std::move(shape));
  double a = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (long i = 0; i < t.size(); ++i)
    t.data[i] = static_cast<S>(rng.uniform(-a, a));
  return t;
}

json arch_json(const BackboneConfig& cfg, bool has_projection) {
  return json{{"widths", cfg.widths},
              {"in_channels", cfg.in_channels},
              {"img_size", cfg.img_size},
              {"num_classes", cfg.num_classes},
              {"proj_dim", cfg.proj_dim},
              {"proj_hidden", cfg.proj_hidden},
              {"has_projection", has_projection}};
}

constexpr char kMagic[4] = {'J', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw IoError("checkpoint truncated");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

}  // namespace

template <class S>
ModelState<S> build_model(const BackboneConfig& cfg, std::uint64_t seed) {
  if (cfg.num_classes < 2) throw ConfigError("build_model: need at least 2 classes");
  if (cfg.widths.empty()) throw ConfigError("build_model: empty width list");
  for (int w : cfg.widths)
    if (w < 1) throw ConfigError("build_model: widths must be >= 1");
  const int pool_factor = 1 << static_cast<int>(cfg.widths.size());
  if (cfg.img_size % pool_factor != 0)
    throw ConfigError("build_model: img_size " + std::to_string(cfg.img_size) +
                      " not divisible by " + std::to_string(pool_factor));

  Rng rng(hash_mix(seed, 0x6D6F64656Cull));
  ModelState<S> m;
  m.cfg = cfg;
  int cin = cfg.in_channels;
  for (int cout : cfg.widths) {
    long fan_in = static_cast<long>(cin) * 9;
    m.conv_w.push_back(init_tensor<S>({cout, cin, 3, 3}, fan_in, rng));
    m.conv_b.push_back(init_tensor<S>({cout}, fan_in, rng));
    cin = cout;
  }
  const int F = cfg.feature_dim();
  m.cls_w = init_tensor<S>({F, cfg.num_classes}, F, rng);
  m.cls_b = init_tensor<S>({cfg.num_classes}, F, rng);
  m.proj_w1 = init_tensor<S>({F, cfg.proj_hidden}, F, rng);
  m.proj_b1 = init_tensor<S>({cfg.proj_hidden}, F, rng);
  m.proj_w2 = init_tensor<S>({cfg.proj_hidden, cfg.proj_dim}, cfg.proj_hidden, rng);
  m.proj_b2 = init_tensor<S>({cfg.proj_dim}, cfg.proj_hidden, rng);
  m.has_projection = true;
  return m;
}

template <class S>
ModelVars<S> register_params(Tape<S>& tape, const ModelState<S>& model, bool trainable) {
  auto reg = [&](const Tensor<S>& t) {
    return trainable ? tape.input(t) : tape.constant(t);
  };
  ModelVars<S> v;
  for (std::size_t i = 0; i < model.conv_w.size(); ++i) {
    v.conv_w.push_back(reg(model.conv_w[i]));
    v.conv_b.push_back(reg(model.conv_b[i]));
  }
  v.cls_w = reg(model.cls_w);
  v.cls_b = reg(model.cls_b);
  v.has_projection = model.has_projection;
  if (model.has_projection) {
    v.proj_w1 = reg(model.proj_w1);
    v.proj_b1 = reg(model.proj_b1);
    v.proj_w2 = reg(model.proj_w2);
    v.proj_b2 = reg(model.proj_b2);
  }
  return v;
}

template <class S>
ForwardOut<S> forward(Tape<S>& tape, const ModelVars<S>& vars,
                      const BackboneConfig& cfg, typename Tape<S>::Var x) {
  const auto& xv = tape.value(x);
  if (xv.ndim() != 4 || xv.shape[1] != cfg.in_channels ||
      xv.shape[2] != cfg.img_size || xv.shape[3] != cfg.img_size)
    throw ShapeError("forward: input shape " + shape_str(xv.shape) +
                     " does not match configured geometry");

  auto cur = x;
  for (std::size_t i = 0; i < vars.conv_w.size(); ++i) {
    cur = tape.conv2d(cur, vars.conv_w[i], vars.conv_b[i], 1);
    cur = tape.relu(cur);
    cur = tape.maxpool2x2(cur);
  }
  ForwardOut<S> out;
  out.h = tape.global_avg_pool(cur);
  out.logits = tape.bias_add(tape.matmul(out.h, vars.cls_w), vars.cls_b);
  if (vars.has_projection) {
    auto hidden = tape.relu(
        tape.bias_add(tape.matmul(out.h, vars.proj_w1), vars.proj_b1));
    auto raw = tape.bias_add(tape.matmul(hidden, vars.proj_w2), vars.proj_b2);
    out.z = tape.l2_normalize_rows(raw);
    out.has_z = true;
  }
  return out;
}

template <class S>
ForwardOut<S> forward_batch(Tape<S>& tape, const ModelState<S>& model, Tensor<S> x,
                            bool trainable) {
  auto vars = register_params(tape, model, trainable);
  auto xv = trainable ? tape.input(std::move(x)) : tape.constant(std::move(x));
  return forward(tape, vars, model.cfg, xv);
}

template <class S>
ParamCount param_count(const ModelState<S>& model) {
  ParamCount pc;
  for (std::size_t i = 0; i < model.conv_w.size(); ++i) {
    long n = model.conv_w[i].size() + model.conv_b[i].size();
    pc.per_layer.push_back({"conv" + std::to_string(i + 1), n});
    pc.conv_total += n;
  }
  pc.per_layer.push_back({"classifier", model.cls_w.size() + model.cls_b.size()});
  if (model.has_projection)
    pc.per_layer.push_back({"projection", model.proj_w1.size() + model.proj_b1.size() +
                                              model.proj_w2.size() + model.proj_b2.size()});
  for (const auto& [name, n] : pc.per_layer) pc.total += n;
  return pc;
}

template <class S>
void save_checkpoint(const ModelState<S>& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write(kMagic, 4);
  write_u32(f, kVersion);
  std::string arch = arch_json(model.cfg, model.has_projection).dump();
  write_u32(f, static_cast<std::uint32_t>(arch.size()));
  f.write(arch.data(), static_cast<std::streamsize>(arch.size()));
  for (const Tensor<S>* t : model.params()) {
    for (long i = 0; i < t->size(); ++i) {
      float v = static_cast<float>(t->data[i]);
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  if (!f) throw IoError("write failed: " + path);
}

template <class S>
ModelState<S> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad checkpoint magic: " + path);
  std::uint32_t version = read_u32(f);
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  std::uint32_t arch_len = read_u32(f);
  std::string arch(arch_len, '\0');
  f.read(arch.data(), arch_len);
  if (!f) throw IoError("checkpoint truncated: " + path);
  json a = json::parse(arch, nullptr, false);
  if (a.is_discarded()) throw FormatError("bad architecture descriptor: " + path);

  BackboneConfig cfg;
  cfg.widths = a.at("widths").get<std::vector<int>>();
  cfg.in_channels = a.at("in_channels").get<int>();
  cfg.img_size = a.at("img_size").get<int>();
  cfg.num_classes = a.at("num_classes").get<int>();
  cfg.proj_dim = a.at("proj_dim").get<int>();
  cfg.proj_hidden = a.at("proj_hidden").get<int>();
  bool has_projection = a.at("has_projection").get<bool>();

  ModelState<S> m;
  m.cfg = cfg;
  int cin = cfg.in_channels;
  for (int cout : cfg.widths) {
    m.conv_w.push_back(Tensor<S>({cout, cin, 3, 3}));
    m.conv_b.push_back(Tensor<S>({cout}));
    cin = cout;
  }
  const int F = cfg.feature_dim();
  m.cls_w = Tensor<S>({F, cfg.num_classes});
  m.cls_b = Tensor<S>({cfg.num_classes});
  m.has_projection = has_projection;
  if (has_projection) {
    m.proj_w1 = Tensor<S>({F, cfg.proj_hidden});
    m.proj_b1 = Tensor<S>({cfg.proj_hidden});
    m.proj_w2 = Tensor<S>({cfg.proj_hidden, cfg.proj_dim});
    m.proj_b2 = Tensor<S>({cfg.proj_dim});
  }
  for (Tensor<S>* t : m.params()) {
    for (long i = 0; i < t->size(); ++i) {
      float v;
      f.read(reinterpret_cast<char*>(&v), 4);
      if (!f) throw IoError("checkpoint truncated: " + path);
      t->data[i] = static_cast<S>(v);
    }
  }
  return m;
}

template <class S>
long checkpoint_byte_size(const ModelState<S>& model) {
  long n = 4 + 4 + 4;  // magic + version + arch length
  n += static_cast<long>(arch_json(model.cfg, model.has_projection).dump().size());
  for (const Tensor<S>* t : model.params()) n += 4 * t->size();
  return n;
}

// explicit instantiations for the two numeric modes
template ModelState<float> build_model<float>(const BackboneConfig&, std::uint64_t);
template ModelState<double> build_model<double>(const BackboneConfig&, std::uint64_t);
template ModelVars<float> register_params<float>(Tape<float>&, const ModelState<float>&, bool);
template ModelVars<double> register_params<double>(Tape<double>&, const ModelState<double>&, bool);
template ForwardOut<float> forward<float>(Tape<float>&, const ModelVars<float>&,
                                          const BackboneConfig&, Tape<float>::Var);
template ForwardOut<double> forward<double>(Tape<double>&, const ModelVars<double>&,
                                            const BackboneConfig&, Tape<double>::Var);
template ForwardOut<float> forward_batch<float>(Tape<float>&, const ModelState<float>&,
                                                Tensor<float>, bool);
template ForwardOut<double> forward_batch<double>(Tape<double>&, const ModelState<double>&,
                                                  Tensor<double>, bool);
template ParamCount param_count<float>(const ModelState<float>&);
template ParamCount param_count<double>(const ModelState<double>&);
template void save_checkpoint<float>(const ModelState<float>&, const std::string&);
template void save_checkpoint<double>(const ModelState<double>&, const std::string&);
template ModelState<float> load_checkpoint<float>(const std::string&);
template ModelState<double> load_checkpoint<double>(const std::string&);
template long checkpoint_byte_size<float>(const ModelState<float>&);
template long checkpoint_byte_size<double>(const ModelState<double>&);

}  // namespace jamlab
