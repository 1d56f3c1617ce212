#pragma once

#include <functional>
#include <vector>

#include "jamlab/rng.hpp"
#include "jamlab/tape.hpp"

namespace jamlab {

struct GradCheckReport {
  double max_rel_err = 0.0;
  long coords_checked = 0;
  bool ok(double tol) const { return max_rel_err < tol; }
};

// Central-difference check of a scalar function of several parameter tensors.
// The function receives a fresh tape plus the parameter Vars registered on it
// and returns the scalar output Var. Runs in f64; checks a random coordinate
// subsample (at least min_coords per parameter, or all if fewer).
inline std::vector<GradCheckReport> grad_check(
    const std::function<Tape<double>::Var(Tape<double>&,
                                          const std::vector<Tape<double>::Var>&)>& fn,
    std::vector<Tensor<double>> params, double step = 1e-5,
    long min_coords = 200, std::uint64_t seed = 0) {
  auto eval = [&](const std::vector<Tensor<double>>& ps, bool want_grads,
                  std::vector<Tensor<double>>* grads) {
    Tape<double> tape;
    std::vector<Tape<double>::Var> vars;
    for (const auto& p : ps) vars.push_back(tape.input(p));
    auto out = fn(tape, vars);
    if (!tape.value(out).all_finite())
      throw NumericError("grad_check: non-finite forward value");
    double v = tape.value(out).data[0];
    if (want_grads) {
      tape.backward(out);
      grads->clear();
      for (auto var : vars) {
        Tensor<double> g = tape.grad(var);
        if (g.size() == 0) g = Tensor<double>::zeros(tape.value(var).shape);
        if (!g.all_finite()) throw NumericError("grad_check: non-finite gradient");
        grads->push_back(std::move(g));
      }
    }
    return v;
  };

  std::vector<Tensor<double>> analytic;
  eval(params, true, &analytic);

  Rng rng(hash_mix(seed, 0x67726164ull));
  std::vector<GradCheckReport> reports(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    const long n = params[p].size();
    std::vector<long> coords;
    if (n <= min_coords) {
      coords.resize(n);
      for (long i = 0; i < n; ++i) coords[i] = i;
    } else {
      for (long i = 0; i < min_coords; ++i)
        coords.push_back(static_cast<long>(rng.below(static_cast<std::uint64_t>(n))));
    }
    for (long c : coords) {
      double orig = params[p].data[c];
      params[p].data[c] = orig + step;
      double fp = eval(params, false, nullptr);
      params[p].data[c] = orig - step;
      double fm = eval(params, false, nullptr);
      params[p].data[c] = orig;
      double numeric = (fp - fm) / (2.0 * step);
      double an = analytic[p].data[c];
      double rel = std::abs(an - numeric) /
                   std::max({1.0, std::abs(an), std::abs(numeric)});
      reports[p].max_rel_err = std::max(reports[p].max_rel_err, rel);
      ++reports[p].coords_checked;
    }
  }
  return reports;
}

inline double grad_check_max(
    const std::function<Tape<double>::Var(Tape<double>&,
                                          const std::vector<Tape<double>::Var>&)>& fn,
    std::vector<Tensor<double>> params, double step = 1e-5,
    long min_coords = 200, std::uint64_t seed = 0) {
  double worst = 0.0;
  for (const auto& r : grad_check(fn, std::move(params), step, min_coords, seed))
    worst = std::max(worst, r.max_rel_err);
  return worst;
}

}  // namespace jamlab
