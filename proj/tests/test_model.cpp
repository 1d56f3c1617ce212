#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "jamlab/error.hpp"
#include "jamlab/gradcheck.hpp"
#include "jamlab/model.hpp"
#include "jamlab/rng.hpp"

using namespace jamlab;

namespace {
Tensor<float> rand_input(const BackboneConfig& cfg, int batch, std::uint64_t seed) {
  Tensor<float> x({batch, cfg.in_channels, cfg.img_size, cfg.img_size});
  Rng rng(seed);
  for (long i = 0; i < x.size(); ++i) x.data[i] = static_cast<float>(rng.uniform());
  return x;
}

BackboneConfig tiny_cfg() {
  BackboneConfig cfg;
  cfg.widths = {4, 8};
  cfg.img_size = 8;
  cfg.proj_dim = 8;
  cfg.proj_hidden = 16;
  return cfg;
}
}  // namespace

TEST_CASE("default config shapes: feature dim and pooling chain") {
  BackboneConfig cfg;
  CHECK(cfg.feature_dim() == 128);
  auto model = build_model<float>(cfg, 1);
  Tape<float> tape;
  auto out = forward_batch(tape, model, rand_input(cfg, 2, 3));
  CHECK(tape.value(out.h).shape == std::vector<int>{2, 128});
  CHECK(tape.value(out.logits).shape == std::vector<int>{2, 6});
  CHECK(tape.value(out.z).shape == std::vector<int>{2, 128});
  CHECK(tape.value(out.logits).all_finite());
}

TEST_CASE("build is deterministic; different seeds differ") {
  BackboneConfig cfg = tiny_cfg();
  auto a = build_model<float>(cfg, 5);
  auto b = build_model<float>(cfg, 5);
  auto c = build_model<float>(cfg, 6);
  auto pa = a.params(), pb = b.params(), pc = c.params();
  bool all_eq = true, any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (long k = 0; k < pa[i]->size(); ++k) {
      if (pa[i]->data[k] != pb[i]->data[k]) all_eq = false;
      if (pa[i]->data[k] != pc[i]->data[k]) any_diff = true;
    }
  }
  CHECK(all_eq);
  CHECK(any_diff);
}

TEST_CASE("img_size must be divisible by 2^stages") {
  BackboneConfig cfg;
  cfg.img_size = 60;
  CHECK_THROWS_AS(build_model<float>(cfg, 1), ConfigError);
}

TEST_CASE("z rows are unit norm") {
  auto cfg = tiny_cfg();
  auto model = build_model<float>(cfg, 7);
  Tape<float> tape;
  auto out = forward_batch(tape, model, rand_input(cfg, 5, 9));
  REQUIRE(out.has_z);
  auto Z = tape.value(out.z).mat();
  for (long r = 0; r < Z.rows(); ++r)
    CHECK(std::abs(Z.row(r).norm() - 1.0f) < 1e-5f);
}

TEST_CASE("zero input gives batch-constant logits") {
  auto cfg = tiny_cfg();
  auto model = build_model<float>(cfg, 11);
  Tape<float> tape;
  auto x = Tensor<float>::zeros({3, cfg.in_channels, cfg.img_size, cfg.img_size});
  auto out = forward_batch(tape, model, x);
  auto L = tape.value(out.logits).mat();
  for (long r = 1; r < L.rows(); ++r)
    for (long c = 0; c < L.cols(); ++c) CHECK(L(r, c) == L(0, c));
}

TEST_CASE("wrong spatial size raises shape error") {
  auto cfg = tiny_cfg();
  auto model = build_model<float>(cfg, 13);
  Tape<float> tape;
  auto bad = Tensor<float>::zeros({1, cfg.in_channels, 16, 16});
  CHECK_THROWS_AS(forward_batch(tape, model, bad), ShapeError);
}

TEST_CASE("param_count pins: classifier 774, stage-1 conv 448") {
  BackboneConfig cfg;  // widths {16,32,64,128}, C=6
  auto model = build_model<float>(cfg, 17);
  auto pc = param_count(model);
  long cls = 0, conv1 = 0;
  for (const auto& [name, n] : pc.per_layer) {
    if (name == "classifier") cls = n;
    if (name == "conv1") conv1 = n;
  }
  CHECK(cls == 774);
  CHECK(conv1 == 448);
  long sum = 0;
  for (const auto& [name, n] : pc.per_layer) sum += n;
  CHECK(sum == pc.total);
  CHECK(pc.conv_total == 448 + 4640 + 18496 + 73856);
}

TEST_CASE("checkpoint round-trip preserves forward bitwise") {
  auto cfg = tiny_cfg();
  auto model = build_model<float>(cfg, 19);
  std::string path = "/tmp/jamlab_model_ckpt.bin";
  save_checkpoint(model, path);
  auto loaded = load_checkpoint<float>(path);

  auto x = rand_input(cfg, 3, 21);
  Tape<float> t1, t2;
  auto o1 = forward_batch(t1, model, x);
  auto o2 = forward_batch(t2, loaded, x);
  for (long i = 0; i < t1.value(o1.logits).size(); ++i)
    CHECK(t1.value(o1.logits).data[i] == t2.value(o2.logits).data[i]);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint size is 4 bytes per param plus small header") {
  auto cfg = tiny_cfg();
  auto model = build_model<float>(cfg, 23);
  std::string path = "/tmp/jamlab_model_size.bin";
  save_checkpoint(model, path);
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  long bytes = static_cast<long>(f.tellg());
  long payload = 4L * param_count(model).total;
  CHECK(bytes > payload);
  CHECK(bytes - payload < 1024);
  CHECK(checkpoint_byte_size(model) == bytes);
  std::remove(path.c_str());
}

TEST_CASE("corrupted magic raises format error, truncation raises io error") {
  auto cfg = tiny_cfg();
  auto model = build_model<float>(cfg, 29);
  std::string path = "/tmp/jamlab_model_bad.bin";
  save_checkpoint(model, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');
  }
  CHECK_THROWS_AS(load_checkpoint<float>(path), FormatError);

  save_checkpoint(model, path);
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<long>(bytes.size()) / 2);
  }
  CHECK_THROWS_AS(load_checkpoint<float>(path), IoError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint<float>("/tmp/jamlab_no_such_ckpt.bin"), IoError);
}

TEST_CASE("full model gradcheck in f64 on a tiny geometry") {
  BackboneConfig cfg;
  cfg.widths = {3, 4};
  cfg.img_size = 4;
  cfg.num_classes = 3;
  cfg.proj_dim = 4;
  cfg.proj_hidden = 6;
  auto model = build_model<double>(cfg, 31);

  Tensor<double> x({2, 3, 4, 4});
  Rng rng(33);
  for (long i = 0; i < x.size(); ++i) x.data[i] = rng.uniform();

  std::vector<Tensor<double>> params;
  for (auto* p : model.params()) params.push_back(*p);

  double err = grad_check_max(
      [&](Tape<double>& t, const std::vector<Tape<double>::Var>& vs) {
        ModelState<double> m = model;
        std::size_t k = 0;
        ModelVars<double> vars;
        vars.has_projection = true;
        for (std::size_t s = 0; s < m.conv_w.size(); ++s) {
          vars.conv_w.push_back(vs[k++]);
          vars.conv_b.push_back(vs[k++]);
        }
        vars.cls_w = vs[k++];
        vars.cls_b = vs[k++];
        vars.proj_w1 = vs[k++];
        vars.proj_b1 = vs[k++];
        vars.proj_w2 = vs[k++];
        vars.proj_b2 = vs[k++];
        auto out = forward(t, vars, cfg, t.constant(x));
        // mix logits and z so every head gets gradient
        auto a = t.sum(t.mul(out.logits, out.logits));
        auto b = t.sum(t.mul(out.z, out.z));
        return t.add(a, t.scale(b, 0.5));
      },
      params, 1e-5, 40);
  CHECK(err < 1e-5);
}

TEST_CASE("model cast float<->double preserves values") {
  auto cfg = tiny_cfg();
  auto mf = build_model<float>(cfg, 37);
  auto md = mf.cast<double>();
  auto back = md.cast<float>();
  auto pa = mf.params(), pb = back.params();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (long k = 0; k < pa[i]->size(); ++k) CHECK(pa[i]->data[k] == pb[i]->data[k]);
}
