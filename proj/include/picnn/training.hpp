#pragma once

/**
 * \file training.hpp
 * \brief Staged pICNN-QLV training: normalized multi-mode loss, Adam with projection, schedule driver.
 *
 * Stage sequence:
 *   1  pICNN on the fastest tension rate, instantaneous stress only
 *   2  gamma MLP on every tension rate (pICNN frozen)
 *   3  pICNN on every tension rate through QLV (gamma frozen)
 *   4, 5  further gamma / pICNN visits until the tension loss stops improving
 *   6  pICNN with torsion ramped in
 *   7  pICNN with the L0 weights ramped in
 *
 * Each record's loss is the squared norm of its min-max normalized residuals over the batch samples;
 * records are averaged per mode. Every epoch splits each record's training samples into a fixed number of
 * batches; batch b of every active record forms optimizer step b.
 */

#include <picnn/adam.hpp>
#include <picnn/errors.hpp>
#include <picnn/experiment.hpp>
#include <picnn/loading.hpp>
#include <picnn/potential_net.hpp>
#include <picnn/viscoelastic.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace picnn {

// ---------------------------------------------------------------------------------------------------------------
// Counter-based randomness

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t i)
{
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return splitmix64(h ^ i);
}

/// Uniform in the open interval (0, 1), a pure function of its key.
inline double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t i)
{
  return (static_cast<double>(counter_bits(seed, a, b, c, i) >> 11) + 0.5) * 0x1p-53;
}

// ---------------------------------------------------------------------------------------------------------------
// Loss

struct LossWeights
{
  double tension = 1.0;
  double torsion = 0.0;
  double fc = 0.0;
  double nc = 0.0;
  double ncfc = 0.0;

  void validate() const
  {
    if (!(tension >= 0.0 && torsion >= 0.0 && fc >= 0.0 && nc >= 0.0 && ncfc >= 0.0))
      throw ConfigError("loss weights must be non-negative");
  }

  [[nodiscard]] double mode(LoadingMode m) const { return m == LoadingMode::tension ? tension : torsion; }
  [[nodiscard]] std::array<double, 3> sparsity() const { return {fc, nc, ncfc}; }
};

/// One predicted curve against its measured curve.
struct CurveFit
{
  LoadingMode mode = LoadingMode::tension;
  std::vector<double> prediction;
  std::vector<double> target;
};

/// Weighted expected-L0 penalty of the model.
inline double sparsity_penalty(const PicnnModel& model, const LossWeights& w)
{
  const auto s = model.expected_l0_by_group();
  return w.fc * s[0] + w.nc * s[1] + w.ncfc * s[2];
}

/**
 * sum_mode alpha_mode / N_mode sum_k |(y_k - yhat_k) / (max y_k - min y_k)|^2 plus the weighted expected-L0
 * terms. Constant-target curves are excluded with a warning on stderr.
 */
inline double loss_multi(const std::vector<CurveFit>& curves, const LossWeights& w, const PicnnModel& model,
                         bool per_sample_mean = false)
{
  w.validate();
  std::array<double, 2> sums{0.0, 0.0};
  std::array<int, 2> counts{0, 0};
  for (const auto& cv : curves) {
    if (cv.prediction.size() != cv.target.size() || cv.target.empty())
      throw DomainError("prediction and target differ in length");
    const auto [lo, hi] = std::minmax_element(cv.target.begin(), cv.target.end());
    const double scale = *hi - *lo;
    if (!(scale > 0.0)) {
      std::cerr << "warning: constant " << to_string(cv.mode) << " curve excluded from the loss\n";
      continue;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < cv.target.size(); ++i) {
      const double r = (cv.prediction[i] - cv.target[i]) / scale;
      s += r * r;
    }
    if (per_sample_mean)
      s /= static_cast<double>(cv.target.size());
    const auto m = static_cast<std::size_t>(cv.mode);
    sums[m] += s;
    ++counts[m];
  }
  double loss = 0.0;
  for (std::size_t m = 0; m < 2; ++m)
    if (counts[m] > 0)
      loss += w.mode(static_cast<LoadingMode>(m)) * sums[m] / counts[m];
  return loss + sparsity_penalty(model, w);
}

// ---------------------------------------------------------------------------------------------------------------
// Train / validation split

struct RecordSplit
{
  std::size_t record = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

struct DataSplit
{
  std::vector<RecordSplit> records; // test-role records are absent
};

/**
 * Per-record sample split: round(fraction * n) shuffled samples train, the rest validate. Records with a
 * validation role contribute only validation samples; test-role records are left out entirely.
 */
inline DataSplit split_train_validation(const std::vector<ExperimentRecord>& records, double fraction, std::uint64_t seed)
{
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ConfigError("train fraction must lie in [0, 1]");
  DataSplit out;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (is_test_role(rec.role))
      continue;
    if (rec.samples.size() < 5)
      throw ConfigError("record '" + rec.id + "' has fewer than 5 samples");
    RecordSplit s;
    s.record = r;
    std::vector<std::size_t> idx(rec.samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (rec.role == DataRole::validation) {
      s.validation = idx;
    } else {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(r)));
      std::shuffle(idx.begin(), idx.end(), rng);
      const auto n_train = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
      s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
      s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
      std::sort(s.train.begin(), s.train.end());
      std::sort(s.validation.begin(), s.validation.end());
    }
    out.records.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------------------------
// Prepared problem

/// Records sharing mode, composition and input history share one network evaluation.
struct PreparedGroup
{
  LoadingMode mode = LoadingMode::tension;
  double c = 0.0;
  std::vector<double> inputs;
  Eigen::MatrixXd invariants;
  Eigen::RowVectorXd k1, k2; // tension
  Eigen::RowVectorXd coeff;  // torsion
  TorsionGeometry geometry{};
  std::size_t nq = 1;
  std::size_t steps = 0;
};

struct PreparedRecord
{
  std::size_t record = 0;
  std::size_t group = 0;
  LoadingMode mode = LoadingMode::tension;
  double c = 0.0;
  double rate = 0.0;
  std::vector<double> times;          // refined grid
  std::vector<std::size_t> observed;  // grid index of every sample
  std::vector<double> targets;        // every sample
  double scale = 1.0;                 // max - min of targets
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

class TrainingProblem
{
public:
  TrainingProblem(const std::vector<ExperimentRecord>& records, const DataSplit& split,
                  int quadrature_order = kDefaultQuadratureOrder)
  {
    for (const auto& rs : split.records) {
      const auto& rec = records.at(rs.record);
      const auto grid = refine_grid(rec);
      PreparedRecord p;
      p.record = rs.record;
      p.mode = rec.mode;
      p.c = rec.c;
      p.rate = rec.rate;
      p.times = grid.times;
      p.observed = grid.observed;
      p.targets = rec.outputs();
      const auto [lo, hi] = std::minmax_element(p.targets.begin(), p.targets.end());
      p.scale = *hi - *lo;
      if (!(p.scale > 0.0)) {
        std::cerr << "warning: record '" << rec.id << "' has a constant output and is excluded from training\n";
        continue;
      }
      p.train = rs.train;
      p.validation = rs.validation;
      p.group = find_or_add_group(rec.mode, rec.c, grid.inputs, rec.geometry, quadrature_order);
      records_.push_back(std::move(p));
    }
  }

  [[nodiscard]] const std::vector<PreparedRecord>& records() const { return records_; }
  [[nodiscard]] const std::vector<PreparedGroup>& groups() const { return groups_; }

private:
  std::size_t find_or_add_group(LoadingMode mode, double c, const std::vector<double>& inputs,
                                const TorsionGeometry& geom, int order)
  {
    for (std::size_t g = 0; g < groups_.size(); ++g)
      if (groups_[g].mode == mode && groups_[g].c == c && groups_[g].inputs == inputs &&
          (mode == LoadingMode::tension || (groups_[g].geometry.length == geom.length &&
                                            groups_[g].geometry.radius == geom.radius)))
        return g;
    PreparedGroup g;
    g.mode = mode;
    g.c = c;
    g.inputs = inputs;
    g.steps = inputs.size();
    g.geometry = geom;
    if (mode == LoadingMode::tension) {
      auto b = tension_batch(inputs);
      g.invariants = std::move(b.invariants);
      g.k1 = std::move(b.k1);
      g.k2 = std::move(b.k2);
    } else {
      const TorsionQuadrature quad(geom, order);
      std::vector<double> twists;
      for (double deg : inputs)
        twists.push_back(degrees_to_radians(deg));
      auto b = torsion_batch(twists, quad);
      g.invariants = std::move(b.invariants);
      g.coeff = std::move(b.coeff);
      g.nq = quad.order();
    }
    groups_.push_back(std::move(g));
    return groups_.size() - 1;
  }

  std::vector<PreparedRecord> records_;
  std::vector<PreparedGroup> groups_;
};

/// Instantaneous output history of a group from its energy partials.
inline std::vector<double> group_instantaneous(const PreparedGroup& g, const Eigen::RowVectorXd& d1,
                                               const Eigen::RowVectorXd& d2)
{
  std::vector<double> out(g.steps, 0.0);
  if (g.mode == LoadingMode::tension) {
    for (std::size_t k = 0; k < g.steps; ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      out[k] = g.k1(i) * d1(i) + g.k2(i) * d2(i);
    }
  } else {
    for (std::size_t k = 0; k < g.steps; ++k)
      for (std::size_t q = 0; q < g.nq; ++q) {
        const auto i = static_cast<Eigen::Index>(k * g.nq + q);
        out[k] += g.coeff(i) * (d1(i) + d2(i));
      }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------------------------
// Loss evaluation with gradients

/// Which records and which of their samples enter one loss evaluation.
struct Selection
{
  std::vector<std::size_t> records;              // indices into TrainingProblem::records()
  std::vector<std::vector<std::size_t>> samples; // per selected record, sample indices
};

struct EvalOptions
{
  LossWeights weights{};
  bool use_qlv = true;
  bool per_sample_mean = false;
  bool picnn_gradient = false;
  bool gamma_gradient = false;
  int threads = 1;
  const std::vector<std::vector<double>>* cached_instantaneous = nullptr; // per group, frozen pICNN
};

struct EvalResult
{
  double data_loss = 0.0;
  Vector picnn_grad; // d data_loss / d pICNN parameters (sparsity excluded)
  Vector gamma_grad;
};

namespace detail {

template <class F>
void parallel_for(std::size_t n, int threads, F&& f)
{
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      f(i);
    return;
  }
  const auto t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  for (std::size_t w = 0; w < t; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += t)
          f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool)
    th.join();
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

} // namespace detail

/// Instantaneous output histories of every group under one gate realization.
inline std::vector<std::vector<double>> instantaneous_histories(const TrainingProblem& problem, const PicnnModel& model,
                                                                const GateRealization& gates, int threads = 1)
{
  const EnergyNetwork net(model, gates);
  std::vector<std::vector<double>> out(problem.groups().size());
  detail::parallel_for(out.size(), threads, [&](std::size_t g) {
    const auto& grp = problem.groups()[g];
    const auto tape = net.forward(grp.invariants, grp.c);
    out[g] = group_instantaneous(grp, tape.out.dpsi_di1, tape.out.dpsi_di2);
  });
  return out;
}

/**
 * Data loss over a selection and, on request, its gradient w.r.t. the pICNN parameters (through the given
 * gate realization) and the gamma MLP parameters. Sparsity terms are not included.
 */
inline EvalResult evaluate_selection(const TrainingProblem& problem, const Selection& sel, const PicnnModel& model,
                                     const GateRealization& gates, const QlvModel& qlv, const EvalOptions& opt)
{
  const auto& recs = problem.records();
  const auto& groups = problem.groups();
  if (sel.records.size() != sel.samples.size())
    throw ConfigError("selection records and samples differ in length");
  if (opt.picnn_gradient && opt.cached_instantaneous)
    throw ConfigError("cached histories cannot provide pICNN gradients");

  std::array<int, 2> counts{0, 0};
  std::vector<char> group_used(groups.size(), 0);
  for (auto r : sel.records) {
    ++counts[static_cast<std::size_t>(recs.at(r).mode)];
    group_used[recs[r].group] = 1;
  }
  std::vector<std::size_t> active;
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (group_used[g])
      active.push_back(g);

  // without relaxation only the observed steps of the selected samples are needed
  const bool subset = !opt.use_qlv && !opt.cached_instantaneous;
  std::vector<std::vector<std::size_t>> steps(groups.size());
  std::vector<std::vector<Eigen::Index>> cols(groups.size());
  if (subset) {
    std::vector<std::vector<char>> need(groups.size());
    for (auto g : active)
      need[g].assign(groups[g].steps, 0);
    for (std::size_t s = 0; s < sel.records.size(); ++s) {
      const auto& p = recs[sel.records[s]];
      for (auto i : sel.samples[s])
        need[p.group][p.observed.at(i)] = 1;
    }
    for (auto g : active) {
      for (std::size_t k = 0; k < groups[g].steps; ++k)
        if (need[g][k]) {
          steps[g].push_back(k);
          for (std::size_t q = 0; q < groups[g].nq; ++q)
            cols[g].push_back(static_cast<Eigen::Index>(k * groups[g].nq + q));
        }
    }
  }

  std::optional<EnergyNetwork> net;
  if (!opt.cached_instantaneous)
    net.emplace(model, gates);
  std::vector<EnergyTape> tapes(groups.size());
  std::vector<std::vector<double>> inst(groups.size());
  detail::parallel_for(active.size(), opt.threads, [&](std::size_t a) {
    const auto g = active[a];
    const auto& grp = groups[g];
    if (opt.cached_instantaneous) {
      inst[g] = opt.cached_instantaneous->at(g);
      return;
    }
    if (!subset) {
      tapes[g] = net->forward(grp.invariants, grp.c);
      inst[g] = group_instantaneous(grp, tapes[g].out.dpsi_di1, tapes[g].out.dpsi_di2);
    } else {
      const Eigen::MatrixXd sub = grp.invariants(Eigen::all, cols[g]);
      tapes[g] = net->forward(sub, grp.c);
      const auto& d1 = tapes[g].out.dpsi_di1;
      const auto& d2 = tapes[g].out.dpsi_di2;
      inst[g].assign(grp.steps, 0.0);
      for (std::size_t j = 0; j < steps[g].size(); ++j) {
        const auto k = steps[g][j];
        double v = 0.0;
        for (std::size_t q = 0; q < grp.nq; ++q) {
          const auto i = static_cast<Eigen::Index>(j * grp.nq + q);
          const auto full = static_cast<Eigen::Index>(k * grp.nq + q);
          v += grp.mode == LoadingMode::tension ? grp.k1(full) * d1(i) + grp.k2(full) * d2(i)
                                                : grp.coeff(full) * (d1(i) + d2(i));
        }
        inst[g][k] = v;
      }
    }
    if (!opt.picnn_gradient)
      tapes[g] = EnergyTape{};
  });

  EvalResult res;
  std::vector<std::vector<double>> inst_bar(groups.size());
  for (auto g : active)
    inst_bar[g].assign(groups[g].steps, 0.0);
  if (opt.gamma_gradient)
    res.gamma_grad = Vector::Zero(qlv.mlp.parameter_count());

  for (std::size_t s = 0; s < sel.records.size(); ++s) {
    const auto& p = recs[sel.records[s]];
    const auto& samples = sel.samples[s];
    if (samples.empty())
      continue;
    const auto& x = inst[p.group];
    const double gamma = opt.use_qlv ? qlv.relax_coeff(p.c) : 0.0;
    const auto relaxed = opt.use_qlv ? qlv_relax(p.times, x, gamma, qlv.tau, qlv.form) : x;
    const double alpha = opt.weights.mode(p.mode);
    const double norm = alpha / counts[static_cast<std::size_t>(p.mode)] /
                        (opt.per_sample_mean ? static_cast<double>(samples.size()) : 1.0);
    std::vector<double> rel_bar(p.times.size(), 0.0);
    for (auto i : samples) {
      const auto k = p.observed.at(i);
      const double r = (relaxed[k] - p.targets[i]) / p.scale;
      res.data_loss += norm * r * r;
      rel_bar[k] += 2.0 * norm * r / p.scale;
    }
    if (!opt.use_qlv) {
      for (std::size_t k = 0; k < rel_bar.size(); ++k)
        inst_bar[p.group][k] += rel_bar[k];
      continue;
    }
    double gamma_bar = 0.0;
    if (qlv.form == QlvForm::convolution) {
      const auto h = qlv_history_integral(p.times, x, qlv.tau);
      const auto h_adj = qlv_history_integral_adjoint(p.times, rel_bar, qlv.tau);
      for (std::size_t k = 0; k < rel_bar.size(); ++k) {
        inst_bar[p.group][k] += rel_bar[k] - gamma * h_adj[k];
        gamma_bar -= rel_bar[k] * h[k];
      }
    } else {
      for (std::size_t k = 0; k < rel_bar.size(); ++k) {
        const double decay = 1.0 - std::exp(-(p.times[k] - p.times.front()) / qlv.tau);
        inst_bar[p.group][k] += rel_bar[k] * (1.0 - gamma * decay);
        gamma_bar -= rel_bar[k] * x[k] * decay;
      }
    }
    if (opt.gamma_gradient)
      res.gamma_grad += gamma_bar * gamma_gradient(p.c, qlv.mlp);
  }

  if (opt.picnn_gradient) {
    std::vector<WeightGradient> parts(active.size(), WeightGradient(model));
    detail::parallel_for(active.size(), opt.threads, [&](std::size_t a) {
      const auto g = active[a];
      const auto& grp = groups[g];
      if (subset) {
        const auto n = static_cast<Eigen::Index>(cols[g].size());
        Eigen::RowVectorXd s1(n), s2(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto full = cols[g][static_cast<std::size_t>(i)];
          const double bar = inst_bar[g][static_cast<std::size_t>(full) / grp.nq];
          if (grp.mode == LoadingMode::tension) {
            s1(i) = bar * grp.k1(full);
            s2(i) = bar * grp.k2(full);
          } else {
            s1(i) = bar * grp.coeff(full);
            s2(i) = s1(i);
          }
        }
        net->backward(tapes[g], Eigen::RowVectorXd::Zero(n), s1, s2, parts[a]);
        return;
      }
      const auto n = grp.invariants.cols();
      Eigen::RowVectorXd s1(n), s2(n);
      if (grp.mode == LoadingMode::tension) {
        for (Eigen::Index k = 0; k < n; ++k) {
          s1(k) = inst_bar[g][static_cast<std::size_t>(k)] * grp.k1(k);
          s2(k) = inst_bar[g][static_cast<std::size_t>(k)] * grp.k2(k);
        }
      } else {
        for (Eigen::Index col = 0; col < n; ++col) {
          s1(col) = inst_bar[g][static_cast<std::size_t>(col) / grp.nq] * grp.coeff(col);
          s2(col) = s1(col);
        }
      }
      net->backward(tapes[g], Eigen::RowVectorXd::Zero(n), s1, s2, parts[a]);
    });
    WeightGradient total(model);
    for (const auto& part : parts)
      total += part;
    res.picnn_grad = net->parameter_gradient(total);
  }
  return res;
}

// ---------------------------------------------------------------------------------------------------------------
// Schedule

struct TrainingSchedule
{
  std::array<int, 7> epochs{1000, 200, 200, 200, 200, 100, 1000};
  int batches_per_experiment = 4;
  int min_cycles = 5; // gamma / pICNN alternation cycles, the first is stages 2-3
  int max_cycles = 5;
  double convergence_tolerance = 0.005; // relative tension-loss improvement per cycle
  double lr_picnn = 0.005;
  double lr_gamma = 0.001;
  LossWeights targets{1.0, 0.1, 5e-4, 1e-6, 1e-6};
  double torsion_rate = 360.0; // deg/min
  bool per_sample_mean = false;
  double train_fraction = 0.8;
  int threads = 1;
  bool pooled_batches = false;      // one step per batch index over all records instead of one per record batch
  int sampled_gates_from_stage = 7; // earlier stages train through the deterministic inference gates
  bool full_loss_estimate = true;   // scale single-record steps to an unbiased estimate of the full-data loss

  void validate() const
  {
    for (int e : epochs)
      if (e < 0)
        throw ConfigError("epoch counts must be non-negative");
    if (batches_per_experiment < 1)
      throw ConfigError("at least one batch per experiment is required");
    if (min_cycles < 1 || max_cycles < min_cycles)
      throw ConfigError("alternation cycles need 1 <= min_cycles <= max_cycles");
    if (!(convergence_tolerance >= 0.0))
      throw ConfigError("convergence tolerance must be non-negative");
    if (!(lr_picnn > 0.0) || !(lr_gamma > 0.0))
      throw ConfigError("learning rates must be positive");
    targets.validate();
    if (threads < 1)
      throw ConfigError("thread count must be at least 1");
    if (sampled_gates_from_stage < 1 || sampled_gates_from_stage > 8)
      throw ConfigError("sampled_gates_from_stage must lie in 1..8 (8 disables sampling)");
  }
};

struct TraceRow
{
  long epoch = 0;
  int stage = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double l0_loss = 0.0; // expected number of active gates
  long fc_active = 0;
  long nc_active = 0;
  long ncfc_active = 0;
};

struct TrainingTrace
{
  std::vector<TraceRow> rows;
};

struct TrainingOptions
{
  PicnnArchitecture architecture{};
  L0Hyper hyper{};
  QlvForm qlv_form = QlvForm::convolution;
  double tau = kDefaultRelaxationTime;
  int quadrature_order = kDefaultQuadratureOrder;
  std::function<void(int stage, const PicnnModel&, const QlvModel&)> on_stage_end;
  std::function<void(const TraceRow&)> on_epoch;
};

struct TrainingResult
{
  PicnnModel model;
  QlvModel qlv;
  TrainingTrace trace;
  DataSplit split;
  int cycles = 0;
};

enum class Trainable { picnn, gamma };

struct StageSpec
{
  int stage = 1;
  int epochs = 0;
  Trainable trainable = Trainable::picnn;
  bool use_qlv = true;
  bool fastest_only = false;
  bool torsion = false;
  LossWeights start{};
  LossWeights end{};
};

inline LossWeights ramp(const LossWeights& a, const LossWeights& b, double f)
{
  auto lerp = [f](double x, double y) { return x + f * (y - x); };
  return {lerp(a.tension, b.tension), lerp(a.torsion, b.torsion), lerp(a.fc, b.fc), lerp(a.nc, b.nc),
          lerp(a.ncfc, b.ncfc)};
}

/// Checksum of a parameter vector, used to confirm freezing.
inline std::uint64_t parameter_checksum(const Vector& p)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    std::uint64_t bits;
    const double v = p(i);
    std::memcpy(&bits, &v, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

class ScheduleRunner
{
public:
  ScheduleRunner(const std::vector<ExperimentRecord>& data, const TrainingSchedule& schedule, std::uint64_t seed,
                 TrainingOptions options)
      : data_(data), sched_(schedule), seed_(seed), opt_(std::move(options)),
        split_(split_train_validation(data, schedule.train_fraction, seed)),
        problem_(data, split_, opt_.quadrature_order), model_(opt_.architecture, opt_.hyper)
  {
    sched_.validate();
    check_data();
    std::mt19937_64 rng(splitmix64(seed_ ^ 0x5EED));
    initialize_parameters(model_, rng);
    qlv_.mlp.initialize(rng);
    qlv_.tau = opt_.tau;
    qlv_.form = opt_.qlv_form;
    adam_picnn_ = AdamState(model_.parameter_count(), sched_.lr_picnn);
    adam_gamma_ = AdamState(qlv_.mlp.parameter_count(), sched_.lr_gamma);
  }

  TrainingResult run()
  {
    const LossWeights tension_only{sched_.targets.tension, 0.0, 0.0, 0.0, 0.0};
    run_stage({1, sched_.epochs[0], Trainable::picnn, false, true, false, tension_only, tension_only});
    double prev = full_tension_loss();
    int cycles = 0;
    for (int cycle = 0; cycle < sched_.max_cycles; ++cycle) {
      const bool first = cycle == 0;
      run_stage({first ? 2 : 4, sched_.epochs[first ? 1 : 3], Trainable::gamma, true, false, false, tension_only,
                 tension_only});
      run_stage({first ? 3 : 5, sched_.epochs[first ? 2 : 4], Trainable::picnn, true, false, false, tension_only,
                 tension_only});
      ++cycles;
      const double cur = full_tension_loss();
      const bool converged = !(prev > 0.0) || (prev - cur) / prev < sched_.convergence_tolerance;
      prev = cur;
      if (cycles >= sched_.min_cycles && converged)
        break;
    }
    const LossWeights with_torsion{sched_.targets.tension, sched_.targets.torsion, 0.0, 0.0, 0.0};
    run_stage({6, sched_.epochs[5], Trainable::picnn, true, false, true, tension_only, with_torsion});
    run_stage({7, sched_.epochs[6], Trainable::picnn, true, false, true, with_torsion, sched_.targets});
    return {model_, qlv_, trace_, split_, cycles};
  }

private:
  [[nodiscard]] double fastest_rate() const
  {
    double r = 0.0;
    for (const auto& p : problem_.records())
      if (p.mode == LoadingMode::tension && !p.train.empty())
        r = std::max(r, p.rate);
    return r;
  }

  void check_data() const
  {
    bool tension = false;
    bool torsion = false;
    for (const auto& p : problem_.records()) {
      if (p.train.empty())
        continue;
      tension |= p.mode == LoadingMode::tension;
      torsion |= p.mode == LoadingMode::torsion && p.rate == sched_.torsion_rate;
    }
    if (!tension)
      throw ConfigError("training needs tension records with training samples");
    if (!torsion && sched_.targets.torsion > 0.0 && (sched_.epochs[5] > 0 || sched_.epochs[6] > 0))
      throw ConfigError("torsion stages need torsion records at " + std::to_string(sched_.torsion_rate) + " deg/min");
  }

  [[nodiscard]] std::vector<std::size_t> stage_records(const StageSpec& st) const
  {
    std::vector<std::size_t> out;
    const double fast = fastest_rate();
    for (std::size_t i = 0; i < problem_.records().size(); ++i) {
      const auto& p = problem_.records()[i];
      if (p.mode == LoadingMode::tension && (!st.fastest_only || p.rate == fast))
        out.push_back(i);
      else if (p.mode == LoadingMode::torsion && st.torsion && p.rate == sched_.torsion_rate)
        out.push_back(i);
    }
    return out;
  }

  [[nodiscard]] Selection selection(const std::vector<std::size_t>& recs, bool validation) const
  {
    Selection sel;
    for (auto r : recs) {
      const auto& p = problem_.records()[r];
      const auto& s = validation ? p.validation : p.train;
      if (s.empty())
        continue;
      sel.records.push_back(r);
      sel.samples.push_back(s);
    }
    return sel;
  }

  [[nodiscard]] double full_tension_loss() const
  {
    StageSpec st;
    const auto gates = inference_gates(model_);
    EvalOptions o;
    o.weights = {1.0, 0.0, 0.0, 0.0, 0.0};
    o.per_sample_mean = sched_.per_sample_mean;
    o.threads = sched_.threads;
    return evaluate_selection(problem_, selection(stage_records(st), false), model_, gates, qlv_, o).data_loss;
  }

  [[nodiscard]] GateRealization step_gates(std::uint64_t visit, std::uint64_t epoch, std::uint64_t batch) const
  {
    std::vector<double> noise(static_cast<std::size_t>(model_.weight_count()));
    for (std::size_t i = 0; i < noise.size(); ++i)
      noise[i] = counter_uniform(seed_, visit, epoch, batch, i);
    return sample_gates(model_, noise);
  }

  void run_stage(const StageSpec& st)
  {
    const std::uint64_t visit = ++visits_;
    const auto recs = stage_records(st);
    const auto train_sel = selection(recs, false);
    const auto val_sel = selection(recs, true);
    std::vector<std::vector<double>> cache;
    if (st.trainable == Trainable::gamma && st.epochs > 0)
      cache = instantaneous_histories(problem_, model_, inference_gates(model_), sched_.threads);
    const int nb = sched_.batches_per_experiment;
    // A single-record step estimates the full-data loss: records in stage / records of its mode, and with
    // summed squares, curve samples / batch samples.
    std::map<std::size_t, std::pair<double, double>> step_factors;
    {
      std::array<double, 2> per_mode{0.0, 0.0};
      for (auto r : train_sel.records)
        per_mode[static_cast<std::size_t>(problem_.records()[r].mode)] += 1.0;
      for (std::size_t s = 0; s < train_sel.records.size(); ++s) {
        const auto r = train_sel.records[s];
        const auto m = static_cast<std::size_t>(problem_.records()[r].mode);
        step_factors[r] = {static_cast<double>(train_sel.records.size()) / per_mode[m],
                           static_cast<double>(train_sel.samples[s].size())};
      }
    }
    auto batch_scale = [&](const Selection& b) {
      if (!sched_.full_loss_estimate || b.records.size() != 1)
        return 1.0;
      const auto [balance, curve] = step_factors.at(b.records[0]);
      return sched_.per_sample_mean ? balance : balance * curve / static_cast<double>(b.samples[0].size());
    };

    for (int e = 0; e < st.epochs; ++e) {
      const double f = st.epochs > 1 ? static_cast<double>(e + 1) / st.epochs : 1.0;
      const LossWeights w = ramp(st.start, st.end, f);
      // shuffled training samples of each record cut into nb contiguous chunks
      std::vector<Selection> batches;
      if (sched_.pooled_batches)
        batches.resize(static_cast<std::size_t>(nb));
      for (std::size_t s = 0; s < train_sel.records.size(); ++s) {
        auto idx = train_sel.samples[s];
        std::mt19937_64 rng(counter_bits(seed_, visit, static_cast<std::uint64_t>(e), 0xBA7C4, train_sel.records[s]));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int b = 0; b < nb; ++b) {
          const auto lo = idx.size() * static_cast<std::size_t>(b) / static_cast<std::size_t>(nb);
          const auto hi = idx.size() * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(nb);
          if (lo == hi)
            continue;
          if (!sched_.pooled_batches)
            batches.emplace_back();
          auto& bs = sched_.pooled_batches ? batches[static_cast<std::size_t>(b)] : batches.back();
          bs.records.push_back(train_sel.records[s]);
          bs.samples.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                  idx.begin() + static_cast<std::ptrdiff_t>(hi));
        }
      }
      if (!sched_.pooled_batches) {
        std::mt19937_64 rng(counter_bits(seed_, visit, static_cast<std::uint64_t>(e), 0x0DE5, 0));
        std::shuffle(batches.begin(), batches.end(), rng);
      }
      const auto steps = batches.size();
      double epoch_loss = 0.0;
      for (std::size_t b = 0; b < steps; ++b) {
        EvalOptions o;
        o.weights = w;
        o.use_qlv = st.use_qlv;
        o.per_sample_mean = sched_.per_sample_mean;
        o.threads = sched_.threads;
        if (st.trainable == Trainable::picnn) {
          o.picnn_gradient = true;
          const auto& batch = batches[b];
          Vector grad = Vector::Zero(model_.parameter_count());
          double data_loss = 0.0;
          if (st.stage >= sched_.sampled_gates_from_stage) {
            const int mc = model_.hyper().mc_samples;
            for (int k = 0; k < mc; ++k) {
              const auto gates = step_gates(visit, static_cast<std::uint64_t>(e),
                                            static_cast<std::uint64_t>(b) + steps * static_cast<std::uint64_t>(k));
              auto r = evaluate_selection(problem_, batch, model_, gates, qlv_, o);
              data_loss += r.data_loss / mc;
              grad += r.picnn_grad / mc;
            }
          } else {
            auto r = evaluate_selection(problem_, batch, model_, inference_gates(model_), qlv_, o);
            data_loss = r.data_loss;
            grad = r.picnn_grad;
          }
          const double scale = batch_scale(batch);
          data_loss *= scale;
          grad *= scale;
          epoch_loss += data_loss + sparsity_penalty(model_, w);
          if (w.fc > 0.0 || w.nc > 0.0 || w.ncfc > 0.0)
            grad += expected_l0_gradient(model_, w.sparsity());
          Vector p = model_.parameters();
          apply_adam(p, grad, adam_picnn_, st.stage);
          model_.set_parameters(p);
          model_.project_nonnegative();
        } else {
          o.gamma_gradient = true;
          o.cached_instantaneous = &cache;
          const GateRealization none;
          auto r = evaluate_selection(problem_, batches[b], model_, none, qlv_, o);
          const double scale = batch_scale(batches[b]);
          epoch_loss += scale * r.data_loss;
          Vector p = qlv_.mlp.parameters();
          apply_adam(p, scale * r.gamma_grad, adam_gamma_, st.stage);
          qlv_.mlp.set_parameters(p);
        }
      }
      record_epoch(st, w, val_sel, steps ? epoch_loss / static_cast<double>(steps) : 0.0, st.trainable == Trainable::gamma ? &cache : nullptr);
    }
    if (opt_.on_stage_end)
      opt_.on_stage_end(st.stage, model_, qlv_);
  }

  static void apply_adam(Vector& p, const Vector& g, AdamState& s, int stage)
  {
    try {
      adam_step(p, g, s);
    } catch (const NumericalError& err) {
      throw NumericalError("stage " + std::to_string(stage) + " aborted: " + err.what());
    }
  }

  void record_epoch(const StageSpec& st, const LossWeights& w, const Selection& val_sel, double train_loss,
                    const std::vector<std::vector<double>>* cache)
  {
    TraceRow row;
    row.epoch = ++epoch_counter_;
    row.stage = st.stage;
    row.train_loss = train_loss;
    if (!val_sel.records.empty()) {
      EvalOptions o;
      o.weights = w;
      o.use_qlv = st.use_qlv;
      o.per_sample_mean = sched_.per_sample_mean;
      o.threads = sched_.threads;
      o.cached_instantaneous = cache;
      const auto gates = inference_gates(model_);
      row.val_loss = evaluate_selection(problem_, val_sel, model_, gates, qlv_, o).data_loss;
    }
    row.l0_loss = model_.expected_l0_penalty();
    const auto counts = model_.count_active_parameters();
    row.fc_active = counts.fc;
    row.nc_active = counts.nc;
    row.ncfc_active = counts.ncfc;
    trace_.rows.push_back(row);
    if (opt_.on_epoch)
      opt_.on_epoch(row);
  }

  const std::vector<ExperimentRecord>& data_;
  TrainingSchedule sched_;
  std::uint64_t seed_;
  TrainingOptions opt_;
  DataSplit split_;
  TrainingProblem problem_;
  PicnnModel model_;
  QlvModel qlv_;
  AdamState adam_picnn_;
  AdamState adam_gamma_;
  TrainingTrace trace_;
  std::uint64_t visits_ = 0;
  long epoch_counter_ = 0;
};

/// Runs the full staged schedule from a seeded initialization.
inline TrainingResult run_schedule(const std::vector<ExperimentRecord>& data, const TrainingSchedule& schedule,
                                   std::uint64_t seed, TrainingOptions options = {})
{
  ScheduleRunner runner(data, schedule, seed, std::move(options));
  return runner.run();
}

} // namespace picnn
