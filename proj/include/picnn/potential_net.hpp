#pragma once

/**
 * \file potential_net.hpp
 * \brief Partially input-convex strain-energy network with L0-gated weights.
 *
 * The network maps the isochoric invariants (I1, I2) and a scalar composition c to a strain energy.
 * It is convex and non-decreasing-compatible in (I1, I2) and arbitrarily nonlinear in c:
 *
 *   y_1 = sp(Wnc_0 c),            y_h = sp(Wnc_{h-1} y_{h-1})
 *   C_h = sp(V_{h-1} y_h)         (or V_{h-1} y_h with linear coupling)
 *   x_1 = sp(Win_0 I + U_0 C_1)
 *   x_h = sp(Wz_{h-1} x_{h-1} + Win_{h-1} I + U_{h-1} C_{h-1}),   h >= 2
 *   psi = w_out . [x_H; C_H; I]
 *
 * Wz, Win_{h>=1} and w_out are non-negative; Win_0, U, Wnc and V are unconstrained. There are no biases.
 * With the default widths (30, 30 convex; 5, 5 non-convex; 5 coupling features) the fc group holds
 * 1357 weights.
 *
 * Derivatives are computed by one forward sweep that carries the tangents dx/dI1, dx/dI2 alongside the
 * activations (forward mode in the two invariants), recorded per layer in an EnergyTape. The reverse
 * sweep over that tape yields the exact parameter gradient of any linear combination of psi,
 * dpsi/dI1 and dpsi/dI2, which is what stress-based losses need.
 */

#include <picnn/activations.hpp>
#include <picnn/errors.hpp>
#include <picnn/gates.hpp>

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace picnn {

enum class CouplingTransform { softplus, linear };

inline const char* to_string(CouplingTransform t) { return t == CouplingTransform::softplus ? "softplus" : "linear"; }

struct PicnnArchitecture
{
  std::vector<int> convex_widths{30, 30};
  std::vector<int> nc_widths{5, 5};
  int coupling_width = 5;
  CouplingTransform coupling = CouplingTransform::softplus;

  void validate() const
  {
    if (convex_widths.empty())
      throw ConfigError("at least one convex layer is required");
    if (nc_widths.size() != convex_widths.size())
      throw ConfigError("the non-convex path needs one layer per convex layer (got " + std::to_string(nc_widths.size()) +
                        " vs " + std::to_string(convex_widths.size()) + ")");
    for (int w : convex_widths)
      if (w < 1)
        throw ConfigError("convex layer widths must be positive");
    for (int w : nc_widths)
      if (w < 1)
        throw ConfigError("non-convex layer widths must be positive");
    if (coupling_width < 1)
      throw ConfigError("coupling width must be positive");
  }

  [[nodiscard]] std::size_t depth() const { return convex_widths.size(); }
};

/// Index of every matrix inside PicnnModel::matrices().
struct PicnnLayout
{
  std::vector<std::size_t> input;    // Win_h, width_h x 2
  std::vector<std::size_t> hidden;   // Wz_h for h >= 1 (hidden[0] unused), width_h x width_{h-1}
  std::vector<std::size_t> coupling; // U_h, width_h x coupling_width
  std::size_t output = 0;            // 1 x (width_H + coupling_width + 2)
  std::vector<std::size_t> nc;       // Wnc_h, nc_h x (h == 0 ? 1 : nc_{h-1})
  std::vector<std::size_t> ncfc;     // V_h, coupling_width x nc_h
};

struct ActiveCounts
{
  long fc = 0;
  long nc = 0;
  long ncfc = 0;

  [[nodiscard]] long total() const { return fc + nc + ncfc; }
  bool operator==(const ActiveCounts&) const = default;
};

class PicnnModel
{
public:
  explicit PicnnModel(PicnnArchitecture arch = {}, L0Hyper hyper = {}) : arch_(std::move(arch)), hyper_(hyper)
  {
    arch_.validate();
    hyper_.validate();
    build();
  }

  [[nodiscard]] const PicnnArchitecture& architecture() const { return arch_; }
  [[nodiscard]] const L0Hyper& hyper() const { return hyper_; }
  [[nodiscard]] const PicnnLayout& layout() const { return layout_; }

  [[nodiscard]] std::vector<GatedMatrix>& matrices() { return mats_; }
  [[nodiscard]] const std::vector<GatedMatrix>& matrices() const { return mats_; }

  GatedMatrix& input_map(std::size_t h) { return mats_[layout_.input.at(h)]; }
  GatedMatrix& hidden_map(std::size_t h) { return mats_[layout_.hidden.at(h)]; }
  GatedMatrix& coupling_map(std::size_t h) { return mats_[layout_.coupling.at(h)]; }
  GatedMatrix& output_map() { return mats_[layout_.output]; }
  GatedMatrix& nc_map(std::size_t h) { return mats_[layout_.nc.at(h)]; }
  GatedMatrix& ncfc_map(std::size_t h) { return mats_[layout_.ncfc.at(h)]; }

  /// Number of gated weights (each has one theta_bar and one log_alpha).
  [[nodiscard]] Eigen::Index weight_count() const
  {
    Eigen::Index n = 0;
    for (const auto& m : mats_)
      n += m.size();
    return n;
  }

  /// theta_bar and log_alpha of every weight.
  [[nodiscard]] Eigen::Index parameter_count() const { return 2 * weight_count(); }

  /// Flat parameter vector: for each matrix in order, theta_bar (column-major) then log_alpha.
  [[nodiscard]] Vector parameters() const
  {
    Vector p(parameter_count());
    Eigen::Index k = 0;
    for (const auto& m : mats_) {
      p.segment(k, m.size()) = m.theta_bar.reshaped();
      k += m.size();
      p.segment(k, m.size()) = m.log_alpha.reshaped();
      k += m.size();
    }
    return p;
  }

  void set_parameters(const Vector& p)
  {
    if (p.size() != parameter_count())
      throw ConfigError("parameter vector has " + std::to_string(p.size()) + " entries, model expects " +
                        std::to_string(parameter_count()));
    Eigen::Index k = 0;
    for (auto& m : mats_) {
      m.theta_bar.reshaped() = p.segment(k, m.size());
      k += m.size();
      m.log_alpha.reshaped() = p.segment(k, m.size());
      k += m.size();
    }
  }

  /// Clamp theta_bar of every non-negative matrix to max(0, value).
  void project_nonnegative()
  {
    for (auto& m : mats_)
      if (m.constraint == Constraint::nonnegative)
        m.theta_bar = m.theta_bar.cwiseMax(0.0);
  }

  /// Throws ConfigError if any matrix shape disagrees with the architecture.
  void validate() const
  {
    const PicnnModel fresh(arch_, hyper_);
    if (fresh.mats_.size() != mats_.size())
      throw ConfigError("model holds " + std::to_string(mats_.size()) + " matrices, architecture implies " +
                        std::to_string(fresh.mats_.size()));
    for (std::size_t i = 0; i < mats_.size(); ++i) {
      const auto& a = mats_[i];
      const auto& b = fresh.mats_[i];
      if (a.theta_bar.rows() != b.theta_bar.rows() || a.theta_bar.cols() != b.theta_bar.cols() ||
          a.log_alpha.rows() != b.log_alpha.rows() || a.log_alpha.cols() != b.log_alpha.cols())
        throw ConfigError("shape mismatch in matrix '" + b.name + "'");
      if (a.constraint != b.constraint)
        throw ConfigError("constraint mismatch in matrix '" + b.name + "'");
    }
  }

  /// Weights whose inference gate is non-zero, grouped as fc / nc / ncfc.
  [[nodiscard]] ActiveCounts count_active_parameters() const
  {
    ActiveCounts counts;
    for (const auto& m : mats_) {
      long n = 0;
      for (Eigen::Index i = 0; i < m.size(); ++i)
        if (inference_gate(m.log_alpha.reshaped()(i), hyper_).z > 0.0)
          ++n;
      switch (m.group) {
        case ParamGroup::fc: counts.fc += n; break;
        case ParamGroup::nc: counts.nc += n; break;
        case ParamGroup::ncfc: counts.ncfc += n; break;
      }
    }
    return counts;
  }

  /// Sum over all weights of the probability of a non-zero gate, split by group.
  [[nodiscard]] std::array<double, 3> expected_l0_by_group() const
  {
    std::array<double, 3> sums{0.0, 0.0, 0.0};
    for (const auto& m : mats_) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < m.size(); ++i)
        s += expected_gate_activity(m.log_alpha.reshaped()(i), hyper_);
      sums[static_cast<std::size_t>(m.group)] += s;
    }
    return sums;
  }

  [[nodiscard]] double expected_l0_penalty() const
  {
    const auto s = expected_l0_by_group();
    return s[0] + s[1] + s[2];
  }

private:
  void add(std::string name, ParamGroup group, Constraint constraint, int rows, int cols)
  {
    mats_.push_back({std::move(name), group, constraint, Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
  }

  void build()
  {
    mats_.clear();
    layout_ = {};
    const auto depth = arch_.depth();
    const int cw = arch_.coupling_width;
    layout_.hidden.assign(depth, 0);
    for (std::size_t h = 0; h < depth; ++h) {
      const int w = arch_.convex_widths[h];
      layout_.input.push_back(mats_.size());
      add("icnn_input_" + std::to_string(h), ParamGroup::fc,
          h == 0 ? Constraint::unconstrained : Constraint::nonnegative, w, 2);
      if (h > 0) {
        layout_.hidden[h] = mats_.size();
        add("icnn_hidden_" + std::to_string(h), ParamGroup::fc, Constraint::nonnegative, w, arch_.convex_widths[h - 1]);
      }
      layout_.coupling.push_back(mats_.size());
      add("icnn_coupling_" + std::to_string(h), ParamGroup::fc, Constraint::unconstrained, w, cw);
    }
    layout_.output = mats_.size();
    add("icnn_output", ParamGroup::fc, Constraint::nonnegative, 1, arch_.convex_widths.back() + cw + 2);
    for (std::size_t h = 0; h < depth; ++h) {
      layout_.nc.push_back(mats_.size());
      add("nc_" + std::to_string(h), ParamGroup::nc, Constraint::unconstrained, arch_.nc_widths[h],
          h == 0 ? 1 : arch_.nc_widths[h - 1]);
    }
    for (std::size_t h = 0; h < depth; ++h) {
      layout_.ncfc.push_back(mats_.size());
      add("ncfc_" + std::to_string(h), ParamGroup::ncfc, Constraint::unconstrained, cw, arch_.nc_widths[h]);
    }
  }

  PicnnArchitecture arch_;
  L0Hyper hyper_;
  PicnnLayout layout_;
  std::vector<GatedMatrix> mats_;
};

/// Default initialization: theta_bar ~ U[0, 0.1] (non-negative) or U[-0.1, 0.1], log_alpha ~ N(0, 0.01).
template <class Rng>
void initialize_parameters(PicnnModel& model, Rng& rng)
{
  std::uniform_real_distribution<double> pos(0.0, 0.1);
  std::uniform_real_distribution<double> sym(-0.1, 0.1);
  std::normal_distribution<double> la(0.0, model.hyper().log_alpha_init_std);
  for (auto& m : model.matrices()) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.theta_bar.reshaped()(i) = m.constraint == Constraint::nonnegative ? pos(rng) : sym(rng);
      m.log_alpha.reshaped()(i) = la(rng);
    }
  }
}

/// One gate value per weight, aligned with PicnnModel::matrices().
struct GateRealization
{
  std::vector<Gate> gates;
};

inline GateRealization inference_gates(const PicnnModel& model)
{
  GateRealization r;
  for (const auto& m : model.matrices()) {
    Gate g{Matrix(m.log_alpha.rows(), m.log_alpha.cols()), Matrix(m.log_alpha.rows(), m.log_alpha.cols())};
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const auto v = inference_gate(m.log_alpha.reshaped()(i), model.hyper());
      g.z.reshaped()(i) = v.z;
      g.dz_dlog_alpha.reshaped()(i) = v.dz_dlog_alpha;
    }
    r.gates.push_back(std::move(g));
  }
  return r;
}

/// Every gate fixed at 1 with zero sensitivity.
inline GateRealization all_open_gates(const PicnnModel& model)
{
  GateRealization r;
  for (const auto& m : model.matrices())
    r.gates.push_back({Matrix::Ones(m.log_alpha.rows(), m.log_alpha.cols()),
                       Matrix::Zero(m.log_alpha.rows(), m.log_alpha.cols())});
  return r;
}

/// Sampled gates from uniform noise, one value per weight in matrix order (column-major within a matrix).
inline GateRealization sample_gates(const PicnnModel& model, std::span<const double> noise)
{
  if (static_cast<Eigen::Index>(noise.size()) != model.weight_count())
    throw ConfigError("gate noise has " + std::to_string(noise.size()) + " entries, model has " +
                      std::to_string(model.weight_count()) + " weights");
  GateRealization r;
  std::size_t k = 0;
  for (const auto& m : model.matrices()) {
    Gate g{Matrix(m.log_alpha.rows(), m.log_alpha.cols()), Matrix(m.log_alpha.rows(), m.log_alpha.cols())};
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const auto v = sample_gate(m.log_alpha.reshaped()(i), noise[k++], model.hyper());
      g.z.reshaped()(i) = v.z;
      g.dz_dlog_alpha.reshaped()(i) = v.dz_dlog_alpha;
    }
    r.gates.push_back(std::move(g));
  }
  return r;
}

/// Values of the energy and its invariant derivatives for a batch of points.
struct EnergyBatch
{
  Eigen::RowVectorXd psi;
  Eigen::RowVectorXd dpsi_di1;
  Eigen::RowVectorXd dpsi_di2;
};

/// Forward record for one composition and a batch of invariant pairs.
struct EnergyTape
{
  double composition = 0.0;
  // non-convex path
  std::vector<Vector> nc_pre;  // Wnc_h y_{h-1}
  std::vector<Vector> nc_act;  // y_{h+1}
  std::vector<Vector> cpl_pre; // V_h y_{h+1}
  std::vector<Vector> cpl;     // C_{h+1}
  // convex path
  Matrix invariants; // 2 x N
  std::vector<Matrix> slope;      // sp'(Z_h) = sigmoid(Z_h)
  std::vector<Matrix> dz1, dz2;   // dZ_h/dI1, dZ_h/dI2
  std::vector<Matrix> x, dx1, dx2;
  EnergyBatch out;
};

/// Gradient w.r.t. the effective (gated) weights, one matrix per model matrix.
struct WeightGradient
{
  std::vector<Matrix> d_theta;

  explicit WeightGradient(const PicnnModel& model)
  {
    for (const auto& m : model.matrices())
      d_theta.push_back(Matrix::Zero(m.theta_bar.rows(), m.theta_bar.cols()));
  }

  void set_zero()
  {
    for (auto& m : d_theta)
      m.setZero();
  }

  WeightGradient& operator+=(const WeightGradient& o)
  {
    for (std::size_t i = 0; i < d_theta.size(); ++i)
      d_theta[i] += o.d_theta[i];
    return *this;
  }
};

/**
 * Evaluates the gated network for a fixed gate realization. Holds the effective weights theta_bar * z so a
 * realization is applied once and reused across all data points of a batch.
 */
class EnergyNetwork
{
public:
  EnergyNetwork(const PicnnModel& model, const GateRealization& gates) : model_(&model), gates_(&gates)
  {
    if (gates.gates.size() != model.matrices().size())
      throw ConfigError("gate realization does not match the model layout");
    for (std::size_t i = 0; i < model.matrices().size(); ++i) {
      const auto& m = model.matrices()[i];
      if (gates.gates[i].z.rows() != m.theta_bar.rows() || gates.gates[i].z.cols() != m.theta_bar.cols())
        throw ConfigError("gate realization shape mismatch in '" + m.name + "'");
      w_.push_back(m.theta_bar.cwiseProduct(gates.gates[i].z));
    }
  }

  [[nodiscard]] const PicnnModel& model() const { return *model_; }
  [[nodiscard]] const Matrix& weight(std::size_t i) const { return w_[i]; }

  /// Forward sweep over a 2 x N batch of (I1, I2) at composition c.
  [[nodiscard]] EnergyTape forward(const Matrix& invariants, double c) const
  {
    if (invariants.rows() != 2)
      throw ConfigError("invariant batch must have two rows");
    const auto& lay = model_->layout();
    const auto& arch = model_->architecture();
    const auto depth = arch.depth();
    const auto n = invariants.cols();
    EnergyTape t;
    t.composition = c;
    t.invariants = invariants;

    Vector prev = Vector::Constant(1, c);
    for (std::size_t h = 0; h < depth; ++h) {
      Vector pre = w_[lay.nc[h]] * prev;
      Vector act = pre.unaryExpr([](double v) { return softplus(v); });
      Vector cpre = w_[lay.ncfc[h]] * act;
      Vector cpl = arch.coupling == CouplingTransform::softplus ? Vector(cpre.unaryExpr([](double v) { return softplus(v); }))
                                                                : cpre;
      t.nc_pre.push_back(std::move(pre));
      t.nc_act.push_back(act);
      t.cpl_pre.push_back(std::move(cpre));
      t.cpl.push_back(std::move(cpl));
      prev = std::move(act);
    }

    for (std::size_t h = 0; h < depth; ++h) {
      const Matrix& win = w_[lay.input[h]];
      const Vector shift = w_[lay.coupling[h]] * t.cpl[h == 0 ? 0 : h - 1];
      Matrix z = win * invariants;
      z.colwise() += shift;
      Matrix dz1 = win.col(0).replicate(1, n);
      Matrix dz2 = win.col(1).replicate(1, n);
      if (h > 0) {
        const Matrix& wz = w_[lay.hidden[h]];
        z.noalias() += wz * t.x.back();
        dz1.noalias() += wz * t.dx1.back();
        dz2.noalias() += wz * t.dx2.back();
      }
      Matrix s = z.unaryExpr([](double v) { return sigmoid(v); });
      t.x.push_back(z.unaryExpr([](double v) { return softplus(v); }));
      t.dx1.push_back(s.cwiseProduct(dz1));
      t.dx2.push_back(s.cwiseProduct(dz2));
      t.slope.push_back(std::move(s));
      t.dz1.push_back(std::move(dz1));
      t.dz2.push_back(std::move(dz2));
    }

    const Matrix& wo = w_[lay.output];
    const int wh = arch.convex_widths.back();
    const int cw = arch.coupling_width;
    const auto wx = wo.leftCols(wh);
    const auto wc = wo.middleCols(wh, cw);
    const auto wi = wo.rightCols(2);
    const double c_term = (wc * t.cpl.back())(0);
    t.out.psi = wx * t.x.back() + wi * invariants;
    t.out.psi.array() += c_term;
    t.out.dpsi_di1 = wx * t.dx1.back();
    t.out.dpsi_di1.array() += wi(0, 0);
    t.out.dpsi_di2 = wx * t.dx2.back();
    t.out.dpsi_di2.array() += wi(0, 1);
    return t;
  }

  /**
   * Reverse sweep. Accumulates into `grad` the gradient w.r.t. the effective weights of
   *   sum_n seed_psi[n] psi[n] + seed_d1[n] dpsi_di1[n] + seed_d2[n] dpsi_di2[n].
   */
  void backward(const EnergyTape& t, const Eigen::RowVectorXd& seed_psi, const Eigen::RowVectorXd& seed_d1,
                const Eigen::RowVectorXd& seed_d2, WeightGradient& grad) const
  {
    const auto& lay = model_->layout();
    const auto& arch = model_->architecture();
    const auto depth = arch.depth();
    const auto n = t.invariants.cols();
    if (seed_psi.size() != n || seed_d1.size() != n || seed_d2.size() != n)
      throw ConfigError("seed length does not match the tape batch");
    const int wh = arch.convex_widths.back();
    const int cw = arch.coupling_width;
    const Matrix& wo = w_[lay.output];
    const auto wx = wo.leftCols(wh);
    const auto wc = wo.middleCols(wh, cw);

    std::vector<Vector> cpl_bar(depth);
    for (std::size_t h = 0; h < depth; ++h)
      cpl_bar[h] = Vector::Zero(cw);

    const double sum_psi = seed_psi.sum();
    Matrix& gout = grad.d_theta[lay.output];
    gout.leftCols(wh) += (t.x.back() * seed_psi.transpose() + t.dx1.back() * seed_d1.transpose() +
                          t.dx2.back() * seed_d2.transpose())
                             .transpose();
    gout.middleCols(wh, cw) += sum_psi * t.cpl.back().transpose();
    gout(0, wh + cw) += t.invariants.row(0).dot(seed_psi) + seed_d1.sum();
    gout(0, wh + cw + 1) += t.invariants.row(1).dot(seed_psi) + seed_d2.sum();
    cpl_bar[depth - 1] += sum_psi * wc.transpose();

    Matrix x_bar = wx.transpose() * seed_psi;
    Matrix dx1_bar = wx.transpose() * seed_d1;
    Matrix dx2_bar = wx.transpose() * seed_d2;

    for (std::size_t hh = depth; hh-- > 0;) {
      const Matrix& s = t.slope[hh];
      const Matrix curv = s.cwiseProduct((1.0 - s.array()).matrix());
      const Matrix z_bar = s.cwiseProduct(x_bar) +
                           curv.cwiseProduct(t.dz1[hh].cwiseProduct(dx1_bar) + t.dz2[hh].cwiseProduct(dx2_bar));
      const Matrix dz1_bar = s.cwiseProduct(dx1_bar);
      const Matrix dz2_bar = s.cwiseProduct(dx2_bar);

      Matrix& gin = grad.d_theta[lay.input[hh]];
      gin.noalias() += z_bar * t.invariants.transpose();
      gin.col(0) += dz1_bar.rowwise().sum();
      gin.col(1) += dz2_bar.rowwise().sum();

      const Vector zsum = z_bar.rowwise().sum();
      const std::size_t ci = hh == 0 ? 0 : hh - 1;
      grad.d_theta[lay.coupling[hh]].noalias() += zsum * t.cpl[ci].transpose();
      cpl_bar[ci].noalias() += w_[lay.coupling[hh]].transpose() * zsum;

      if (hh > 0) {
        const Matrix& wz = w_[lay.hidden[hh]];
        Matrix& gz = grad.d_theta[lay.hidden[hh]];
        gz.noalias() += z_bar * t.x[hh - 1].transpose();
        gz.noalias() += dz1_bar * t.dx1[hh - 1].transpose();
        gz.noalias() += dz2_bar * t.dx2[hh - 1].transpose();
        x_bar.noalias() = wz.transpose() * z_bar;
        dx1_bar.noalias() = wz.transpose() * dz1_bar;
        dx2_bar.noalias() = wz.transpose() * dz2_bar;
      }
    }

    // non-convex path, in reverse
    Vector y_bar = Vector::Zero(arch.nc_widths.back());
    for (std::size_t hh = depth; hh-- > 0;) {
      Vector cpre_bar = cpl_bar[hh];
      if (arch.coupling == CouplingTransform::softplus)
        cpre_bar = cpre_bar.cwiseProduct(t.cpl_pre[hh].unaryExpr([](double v) { return sigmoid(v); }));
      grad.d_theta[lay.ncfc[hh]].noalias() += cpre_bar * t.nc_act[hh].transpose();
      y_bar.noalias() += w_[lay.ncfc[hh]].transpose() * cpre_bar;
      const Vector pre_bar = y_bar.cwiseProduct(t.nc_pre[hh].unaryExpr([](double v) { return sigmoid(v); }));
      const Vector prev = hh == 0 ? Vector::Constant(1, t.composition) : t.nc_act[hh - 1];
      grad.d_theta[lay.nc[hh]].noalias() += pre_bar * prev.transpose();
      y_bar = w_[lay.nc[hh]].transpose() * pre_bar;
    }
  }

  /// Chain rule from effective weights to the flat (theta_bar, log_alpha) parameter vector.
  [[nodiscard]] Vector parameter_gradient(const WeightGradient& g) const
  {
    Vector out(model_->parameter_count());
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      const auto& m = model_->matrices()[i];
      const auto& gate = gates_->gates[i];
      out.segment(k, m.size()) = g.d_theta[i].cwiseProduct(gate.z).reshaped();
      k += m.size();
      out.segment(k, m.size()) =
          g.d_theta[i].cwiseProduct(m.theta_bar).cwiseProduct(gate.dz_dlog_alpha).reshaped();
      k += m.size();
    }
    return out;
  }

private:
  const PicnnModel* model_;
  const GateRealization* gates_;
  std::vector<Matrix> w_;
};

/// Energy value, invariant partials and the parameter gradient of the normalized energy at one point.
struct EnergyEval
{
  double psi = 0.0;
  double dpsi_di1 = 0.0;
  double dpsi_di2 = 0.0;
  Vector param_gradients;
};

namespace detail {

inline void check_invariant_domain(double i1, double i2, double c)
{
  if (!(i1 >= 3.0 - 1e-6) || !(i2 >= 3.0 - 1e-6))
    throw DomainError("invariants must satisfy I1, I2 >= 3");
  if (!(c >= 0.0))
    throw DomainError("composition must be non-negative");
}

inline Matrix invariant_column(double i1, double i2)
{
  Matrix p(2, 1);
  p << i1, i2;
  return p;
}

} // namespace detail

/// Raw network output psi_NN(I1, I2, c).
inline double forward_energy(double i1, double i2, double c, const PicnnModel& model, const GateRealization& gates)
{
  detail::check_invariant_domain(i1, i2, c);
  const EnergyNetwork net(model, gates);
  return net.forward(detail::invariant_column(i1, i2), c).out.psi(0);
}

/// psi_NN(I1, I2, c) - psi_NN(3, 3, c) under one gate realization.
inline double normalized_energy(double i1, double i2, double c, const PicnnModel& model, const GateRealization& gates)
{
  detail::check_invariant_domain(i1, i2, c);
  const EnergyNetwork net(model, gates);
  Matrix p(2, 2);
  p << i1, 3.0, i2, 3.0;
  const auto tape = net.forward(p, c);
  return tape.out.psi(0) - tape.out.psi(1);
}

/// Normalized energy, its invariant partials and the gradient of the normalized energy w.r.t. all parameters.
inline EnergyEval energy_gradients(double i1, double i2, double c, const PicnnModel& model, const GateRealization& gates)
{
  detail::check_invariant_domain(i1, i2, c);
  const EnergyNetwork net(model, gates);
  Matrix p(2, 2);
  p << i1, 3.0, i2, 3.0;
  const auto tape = net.forward(p, c);
  WeightGradient g(model);
  Eigen::RowVectorXd seed_psi(2);
  seed_psi << 1.0, -1.0;
  net.backward(tape, seed_psi, Eigen::RowVectorXd::Zero(2), Eigen::RowVectorXd::Zero(2), g);
  return {tape.out.psi(0) - tape.out.psi(1), tape.out.dpsi_di1(0), tape.out.dpsi_di2(0), net.parameter_gradient(g)};
}

/// Gradient of the expected-L0 term (per-group weights) w.r.t. the flat parameter vector.
inline Vector expected_l0_gradient(const PicnnModel& model, const std::array<double, 3>& group_weights)
{
  Vector out = Vector::Zero(model.parameter_count());
  Eigen::Index k = 0;
  const double shift = model.hyper().penalty_shift();
  for (const auto& m : model.matrices()) {
    k += m.size();
    const double w = group_weights[static_cast<std::size_t>(m.group)];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double s = sigmoid(m.log_alpha.reshaped()(i) - shift);
      out(k + i) = w * s * (1.0 - s);
    }
    k += m.size();
  }
  return out;
}

} // namespace picnn
