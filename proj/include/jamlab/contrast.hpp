#pragma once

#include <algorithm>
#include <deque>
#include <fstream>
#include <vector>

#include "jamlab/error.hpp"
#include "jamlab/tape.hpp"

namespace jamlab {

struct ContrastConfig {
  double tau = 0.1;
  double k1_start = 0.0;
  double k1_end = 0.2;
  int k1_ramp_epochs = 5;
  double k2 = 1.0;
  double tau_dict = 0.1;
  int mem_positives = 8;   // P
  int mem_negatives = 32;  // Q
  double proto_weight = 0.5;
  double alpha_dict = 0.5;
  int alpha_dict_ramp_epochs = 3;
  double lambda = 0.5;         // CE vs contrastive mix
  double label_smoothing = 0.1;
  int mem_capacity = 512;      // K
  double momentum = 0.99;      // prototype EMA
  bool carry_memory_over_pruning = false;

  void validate() const {
    if (tau <= 0 || tau_dict <= 0) throw InvalidArgument("temperatures must be > 0");
    if (k1_start < 0 || k1_end < 0 || k2 < 0) throw InvalidArgument("k1/k2 must be >= 0");
    if (label_smoothing < 0 || label_smoothing >= 1)
      throw InvalidArgument("label smoothing must be in [0,1)");
    if (lambda < 0 || lambda >= 1 + 1e-12) throw InvalidArgument("lambda must be in [0,1]");
    if (alpha_dict < 0 || alpha_dict > 1) throw InvalidArgument("alpha_dict must be in [0,1]");
    if (momentum < 0 || momentum >= 1) throw InvalidArgument("momentum must be in [0,1)");
    if (mem_capacity < 1 || mem_positives < 1 || mem_negatives < 1)
      throw InvalidArgument("K, P, Q must be >= 1");
  }
};

// linear ramp: t = min(1, (e-1)/R)
inline double k1_schedule(int epoch, int ramp_epochs, double k1_start, double k1_end) {
  if (epoch < 1) throw InvalidArgument("k1_schedule: epoch must be >= 1");
  if (ramp_epochs < 1) throw InvalidArgument("k1_schedule: R must be >= 1");
  double t = std::min(1.0, static_cast<double>(epoch - 1) / ramp_epochs);
  return (1.0 - t) * k1_start + t * k1_end;
}

inline double alpha_dict_schedule(int epoch, int ramp_epochs, double alpha_end) {
  if (ramp_epochs < 1) return alpha_end;
  return k1_schedule(epoch, ramp_epochs, 0.0, alpha_end);
}

// Per-class FIFO queue of detached unit-norm embeddings plus an EMA prototype.
template <class S>
class ClassMemory {
 public:
  struct Entry {
    Eigen::Matrix<S, Eigen::Dynamic, 1> z;
    long age = 0;  // global insertion counter, lower = older
  };

  ClassMemory() = default;
  ClassMemory(int num_classes, int dim, int capacity)
      : dim_(dim), capacity_(capacity), queues_(num_classes),
        prototypes_(num_classes), proto_init_(num_classes, false) {}

  int num_classes() const { return static_cast<int>(queues_.size()); }
  int dim() const { return dim_; }
  int capacity() const { return capacity_; }
  const std::deque<Entry>& queue(int c) const { return queues_[c]; }
  bool proto_initialized(int c) const { return proto_init_[c]; }
  const Eigen::Matrix<S, Eigen::Dynamic, 1>& prototype(int c) const {
    return prototypes_[c];
  }

  bool empty() const {
    for (const auto& q : queues_)
      if (!q.empty()) return false;
    for (bool b : proto_init_)
      if (b) return false;
    return true;
  }

  void clear() {
    for (auto& q : queues_) q.clear();
    std::fill(proto_init_.begin(), proto_init_.end(), false);
    next_age_ = 0;
  }

  // Prototype EMA then enqueue every row (detached), evicting oldest beyond K.
  void update(const Tensor<S>& Z, const std::vector<int>& labels, double m) {
    const int B = Z.shape[0];
    const int d = Z.shape[1];
    if (static_cast<int>(labels.size()) != B)
      throw InvalidArgument("memory update: label count mismatch");
    auto M = Z.mat();
    for (int c = 0; c < num_classes(); ++c) {
      Eigen::Matrix<S, Eigen::Dynamic, 1> zbar = Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(d);
      int count = 0;
      for (int i = 0; i < B; ++i)
        if (labels[i] == c) {
          zbar += M.row(i).transpose();
          ++count;
        }
      if (count == 0) continue;
      zbar /= static_cast<S>(count);
      if (!proto_init_[c]) {
        prototypes_[c] = zbar.normalized();
        proto_init_[c] = true;
      } else {
        Eigen::Matrix<S, Eigen::Dynamic, 1> blended =
            static_cast<S>(m) * prototypes_[c] + static_cast<S>(1.0 - m) * zbar;
        prototypes_[c] = blended.normalized();
      }
    }
    for (int i = 0; i < B; ++i) {
      auto& q = queues_[labels[i]];
      q.push_back({M.row(i).transpose(), next_age_++});
      while (static_cast<int>(q.size()) > capacity_) q.pop_front();
    }
  }

  void save(const std::string& path) const;
  static ClassMemory load(const std::string& path);

 private:
  int dim_ = 0;
  int capacity_ = 0;
  std::vector<std::deque<Entry>> queues_;
  std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1>> prototypes_;
  std::vector<bool> proto_init_;
  long next_age_ = 0;
};

template <class S>
struct LossResult {
  typename Tape<S>::Var var{};
  bool empty_anchor_set = false;  // set when no valid anchor existed (loss is 0)
};

// label-smoothed cross-entropy over all rows (both views stacked)
template <class S>
typename Tape<S>::Var ce_label_smoothed(Tape<S>& tape, typename Tape<S>::Var logits,
                                        const std::vector<int>& labels, double eps) {
  const auto& L = tape.value(logits);
  if (L.ndim() != 2) throw ShapeError("ce_label_smoothed: logits not 2-D");
  const int B = L.shape[0], C = L.shape[1];
  if (C < 2) throw InvalidArgument("ce_label_smoothed: need at least 2 classes");
  if (eps >= 1.0 || eps < 0.0) throw InvalidArgument("ce_label_smoothed: eps must be in [0,1)");
  if (static_cast<int>(labels.size()) != B)
    throw InvalidArgument("ce_label_smoothed: label count mismatch");

  Tensor<S> targets({B, C});
  const S off = static_cast<S>(eps / (C - 1));
  for (int i = 0; i < B; ++i) {
    for (int c = 0; c < C; ++c) targets.data[static_cast<long>(i) * C + c] = off;
    targets.data[static_cast<long>(i) * C + labels[i]] = static_cast<S>(1.0 - eps);
  }
  auto logp = tape.log_softmax_rows(logits);
  auto weighted = tape.cmul(logp, targets);
  return tape.scale(tape.sum(weighted), static_cast<S>(-1.0 / B));
}

namespace detail {

// Replace per-anchor numerator/denominator with 1 where the anchor is invalid
// so log terms vanish and no gradient flows there.
template <class S>
typename Tape<S>::Var masked_log_ratio(Tape<S>& tape, typename Tape<S>::Var num,
                                       typename Tape<S>::Var den,
                                       const Tensor<S>& valid_mask, int valid_count) {
  Tensor<S> invalid = valid_mask;
  for (long i = 0; i < invalid.size(); ++i)
    invalid.data[i] = S(1) - invalid.data[i];
  auto num_safe = tape.cadd(tape.cmul(num, valid_mask), invalid);
  auto den_safe = tape.cadd(tape.cmul(den, valid_mask), invalid);
  auto per_anchor = tape.sub(tape.log(den_safe), tape.log(num_safe));
  return tape.scale(tape.sum(per_anchor), static_cast<S>(1.0 / valid_count));
}

}  // namespace detail

// TCL over a batch of unit-norm view embeddings
template <class S>
LossResult<S> tcl_loss(Tape<S>& tape, typename Tape<S>::Var z,
                       const std::vector<int>& labels, double tau, double k1, double k2) {
  const auto& Z = tape.value(z);
  if (Z.ndim() != 2) throw ShapeError("tcl_loss: embeddings not 2-D");
  const int B = Z.shape[0];
  if (static_cast<int>(labels.size()) != B)
    throw InvalidArgument("tcl_loss: label count mismatch");
  for (int i = 0; i < B; ++i) {
    double nrm = Z.mat().row(i).norm();
    if (std::abs(nrm - 1.0) > 1e-4)
      throw InvalidArgument("tcl_loss: row " + std::to_string(i) + " is not unit-norm");
  }

  Tensor<S> pos_mask({B, B}), neg_mask({B, B}), valid({B});
  int valid_count = 0;
  for (int i = 0; i < B; ++i) {
    int positives = 0;
    for (int j = 0; j < B; ++j) {
      if (j == i) continue;
      if (labels[j] == labels[i]) {
        pos_mask.data[static_cast<long>(i) * B + j] = S(1);
        ++positives;
      } else {
        neg_mask.data[static_cast<long>(i) * B + j] = S(1);
      }
    }
    if (positives > 0) {
      valid.data[i] = S(1);
      ++valid_count;
    }
  }

  if (valid_count == 0) {
    LossResult<S> r;
    r.var = tape.constant(Tensor<S>::zeros({1}));
    r.empty_anchor_set = true;
    return r;
  }

  auto sims = tape.scale(tape.matmul_nt(z, z), static_cast<S>(1.0 / tau));
  auto e_pos = tape.exp(sims);
  auto e_neg_sim = tape.exp(tape.scale(sims, S(-1)));
  auto pos_sum = tape.row_sum(tape.cmul(e_pos, pos_mask));
  auto neg_sum = tape.row_sum(tape.cmul(e_pos, neg_mask));
  auto hard_pos_sum = tape.row_sum(tape.cmul(e_neg_sim, pos_mask));
  auto denom = tape.add(tape.add(pos_sum, tape.scale(neg_sum, static_cast<S>(k2))),
                        tape.scale(hard_pos_sum, static_cast<S>(k1)));

  LossResult<S> r;
  r.var = detail::masked_log_ratio(tape, pos_sum, denom, valid, valid_count);
  return r;
}

// Dictionary loss against a fixed memory snapshot; gradient flows only into z.
template <class S>
LossResult<S> dictionary_loss(Tape<S>& tape, typename Tape<S>::Var z,
                              const std::vector<int>& labels, const ClassMemory<S>& mem,
                              double tau_dict, int P, int Q, double w_p) {
  if (P < 1 || Q < 1) throw InvalidArgument("dictionary_loss: P and Q must be >= 1");
  const auto& Z = tape.value(z);
  const int B = Z.shape[0];
  const int d = Z.shape[1];
  if (static_cast<int>(labels.size()) != B)
    throw InvalidArgument("dictionary_loss: label count mismatch");

  // Flatten all queues into one constant matrix; record class and age per row.
  struct MemRow {
    int cls;
    long age;
  };
  std::vector<MemRow> rows;
  std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1>> vecs;
  for (int c = 0; c < mem.num_classes(); ++c)
    for (const auto& e : mem.queue(c)) {
      rows.push_back({c, e.age});
      vecs.push_back(e.z);
    }
  const int Kt = static_cast<int>(rows.size());

  Tensor<S> valid({B});
  int valid_count = 0;
  for (int i = 0; i < B; ++i) {
    bool has_queue = !mem.queue(labels[i]).empty();
    bool has_proto = mem.proto_initialized(labels[i]);
    if (has_queue || has_proto) {
      valid.data[i] = S(1);
      ++valid_count;
    }
  }
  if (valid_count == 0) {
    LossResult<S> r;
    r.var = tape.constant(Tensor<S>::zeros({1}));
    r.empty_anchor_set = true;
    return r;
  }

  // Retrieval is non-differentiable: rank stored entries by raw similarity,
  // ties broken by (similarity desc, age asc).
  Tensor<S> pos_sel({B, std::max(Kt, 1)}), neg_sel({B, std::max(Kt, 1)});
  if (Kt > 0) {
    for (int i = 0; i < B; ++i) {
      Eigen::Matrix<S, Eigen::Dynamic, 1> anchor = Z.mat().row(i).transpose();
      std::vector<std::pair<double, int>> pos_rank, neg_rank;
      for (int k = 0; k < Kt; ++k) {
        double sim = static_cast<double>(vecs[k].dot(anchor));
        if (rows[k].cls == labels[i])
          pos_rank.push_back({sim, k});
        else
          neg_rank.push_back({sim, k});
      }
      auto by_hardness = [&](const std::pair<double, int>& a,
                             const std::pair<double, int>& b) {
        if (a.first != b.first) return a.first > b.first;
        return rows[a.second].age < rows[b.second].age;
      };
      std::sort(pos_rank.begin(), pos_rank.end(), by_hardness);
      std::sort(neg_rank.begin(), neg_rank.end(), by_hardness);
      for (int k = 0; k < std::min<int>(P, pos_rank.size()); ++k)
        pos_sel.data[static_cast<long>(i) * Kt + pos_rank[k].second] = S(1);
      for (int k = 0; k < std::min<int>(Q, neg_rank.size()); ++k)
        neg_sel.data[static_cast<long>(i) * Kt + neg_rank[k].second] = S(1);
    }
  }

  typename Tape<S>::Var pos_sum, neg_sum;
  if (Kt > 0) {
    Tensor<S> memmat({Kt, d});
    for (int k = 0; k < Kt; ++k) memmat.mat().row(k) = vecs[k].transpose();
    auto sims = tape.scale(tape.matmul_nt(z, tape.constant(memmat)),
                           static_cast<S>(1.0 / tau_dict));
    auto esims = tape.exp(sims);
    pos_sum = tape.row_sum(tape.cmul(esims, pos_sel));
    neg_sum = tape.row_sum(tape.cmul(esims, neg_sel));
  } else {
    pos_sum = tape.constant(Tensor<S>::zeros({B}));
    neg_sum = tape.constant(Tensor<S>::zeros({B}));
  }

  // Prototype attraction: one column per class, selected where initialized.
  Tensor<S> protos({mem.num_classes(), d});
  Tensor<S> proto_sel({B, mem.num_classes()});
  for (int c = 0; c < mem.num_classes(); ++c)
    if (mem.proto_initialized(c)) protos.mat().row(c) = mem.prototype(c).transpose();
  for (int i = 0; i < B; ++i)
    if (mem.proto_initialized(labels[i]))
      proto_sel.data[static_cast<long>(i) * mem.num_classes() + labels[i]] = S(1);
  auto proto_sims = tape.scale(tape.matmul_nt(z, tape.constant(protos)),
                               static_cast<S>(1.0 / tau_dict));
  auto proto_term = tape.row_sum(tape.cmul(tape.exp(proto_sims), proto_sel));

  auto numer = tape.add(pos_sum, tape.scale(proto_term, static_cast<S>(w_p)));
  auto denom = tape.add(numer, neg_sum);

  LossResult<S> r;
  r.var = detail::masked_log_ratio(tape, numer, denom, valid, valid_count);
  return r;
}

template <class S>
struct BlendResult {
  typename Tape<S>::Var l_con{};
  typename Tape<S>::Var l_total{};
};

// L_con = (1-a) L_TCL + a L_dict; L_pre = (1-lambda) L_CE + lambda L_con
template <class S>
BlendResult<S> pre_objective(Tape<S>& tape, typename Tape<S>::Var ce,
                             typename Tape<S>::Var tcl, typename Tape<S>::Var dict,
                             double alpha_dict_now, double lambda) {
  BlendResult<S> r;
  r.l_con = tape.add(tape.scale(tcl, static_cast<S>(1.0 - alpha_dict_now)),
                     tape.scale(dict, static_cast<S>(alpha_dict_now)));
  r.l_total = tape.add(tape.scale(ce, static_cast<S>(1.0 - lambda)),
                       tape.scale(r.l_con, static_cast<S>(lambda)));
  return r;
}

template <class S>
void ClassMemory<S>::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  auto w32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  w32(0x4D454D31u);  // "MEM1"
  w32(static_cast<std::uint32_t>(num_classes()));
  w32(static_cast<std::uint32_t>(dim_));
  w32(static_cast<std::uint32_t>(capacity_));
  for (int c = 0; c < num_classes(); ++c) {
    w32(static_cast<std::uint32_t>(queues_[c].size()));
    for (const auto& e : queues_[c])
      for (int k = 0; k < dim_; ++k) {
        float v = static_cast<float>(e.z[k]);
        f.write(reinterpret_cast<const char*>(&v), 4);
      }
    w32(proto_init_[c] ? 1u : 0u);
    if (proto_init_[c])
      for (int k = 0; k < dim_; ++k) {
        float v = static_cast<float>(prototypes_[c][k]);
        f.write(reinterpret_cast<const char*>(&v), 4);
      }
  }
  if (!f) throw IoError("write failed: " + path);
}

template <class S>
ClassMemory<S> ClassMemory<S>::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  auto r32 = [&]() {
    std::uint32_t v;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (!f) throw IoError("memory file truncated: " + path);
    return v;
  };
  if (r32() != 0x4D454D31u) throw FormatError("bad memory file magic: " + path);
  int classes = static_cast<int>(r32());
  int dim = static_cast<int>(r32());
  int cap = static_cast<int>(r32());
  ClassMemory mem(classes, dim, cap);
  for (int c = 0; c < classes; ++c) {
    int qn = static_cast<int>(r32());
    for (int q = 0; q < qn; ++q) {
      Entry e;
      e.z.resize(dim);
      for (int k = 0; k < dim; ++k) {
        float v;
        f.read(reinterpret_cast<char*>(&v), 4);
        e.z[k] = static_cast<S>(v);
      }
      e.age = mem.next_age_++;
      mem.queues_[c].push_back(std::move(e));
    }
    if (r32()) {
      mem.prototypes_[c].resize(dim);
      for (int k = 0; k < dim; ++k) {
        float v;
        f.read(reinterpret_cast<char*>(&v), 4);
        mem.prototypes_[c][k] = static_cast<S>(v);
      }
      mem.proto_init_[c] = true;
    }
  }
  if (!f) throw IoError("memory file truncated: " + path);
  return mem;
}

}  // namespace jamlab
