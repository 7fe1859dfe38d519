#include "test_support.hpp"

#include <picnn/kinematics.hpp>
#include <picnn/potential_net.hpp>

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

using namespace picnn;

namespace {

double sp(double x) { return std::log1p(std::exp(x)); }

void set_all_log_alpha(PicnnModel& m, double v)
{
  for (auto& g : m.matrices())
    g.log_alpha.setConstant(v);
}

PicnnArchitecture toy_architecture()
{
  PicnnArchitecture a;
  a.convex_widths = {1};
  a.nc_widths = {1};
  a.coupling_width = 1;
  return a;
}

double min_hessian_eigenvalue(const PicnnModel& m, const GateRealization& g, double i1, double i2, double c)
{
  const double h = 1e-4;
  auto grad = [&](double a, double b) {
    const auto e = energy_gradients(a, b, c, m, g);
    return Eigen::Vector2d(e.dpsi_di1, e.dpsi_di2);
  };
  Eigen::Matrix2d hess;
  hess.col(0) = (grad(i1 + h, i2) - grad(i1 - h, i2)) / (2.0 * h);
  hess.col(1) = (grad(i1, i2 + h) - grad(i1, i2 - h)) / (2.0 * h);
  const Eigen::Matrix2d sym = 0.5 * (hess + hess.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(sym).eigenvalues().minCoeff();
}

} // namespace

TEST(Layout, DefaultCounts)
{
  PicnnModel m;
  std::mt19937_64 rng(1);
  initialize_parameters(m, rng);
  const auto c = m.count_active_parameters();
  EXPECT_EQ(c.fc, 1357);
  EXPECT_EQ(c.nc, 30);
  EXPECT_EQ(c.ncfc, 50);
  EXPECT_EQ(m.weight_count(), 1437);
}

TEST(Layout, ConstraintTags)
{
  PicnnModel m;
  const auto& lay = m.layout();
  const auto& mats = m.matrices();
  EXPECT_EQ(mats[lay.input[0]].constraint, Constraint::unconstrained);
  EXPECT_EQ(mats[lay.input[1]].constraint, Constraint::nonnegative);
  EXPECT_EQ(mats[lay.hidden[1]].constraint, Constraint::nonnegative);
  EXPECT_EQ(mats[lay.output].constraint, Constraint::nonnegative);
  EXPECT_EQ(mats[lay.coupling[0]].constraint, Constraint::unconstrained);
  for (auto i : lay.nc)
    EXPECT_EQ(mats[i].constraint, Constraint::unconstrained);
  for (auto i : lay.ncfc)
    EXPECT_EQ(mats[i].constraint, Constraint::unconstrained);
}

TEST(Layout, InvalidArchitectureRejected)
{
  PicnnArchitecture a;
  a.nc_widths = {5};
  EXPECT_THROW(PicnnModel{a}, ConfigError);
  a = {};
  a.convex_widths = {30, 0};
  EXPECT_THROW(PicnnModel{a}, ConfigError);
  PicnnModel m;
  m.matrices()[0].theta_bar = Matrix::Zero(3, 3);
  EXPECT_THROW(m.validate(), ConfigError);
}

TEST(Counts, AllClosedAndMixed)
{
  PicnnModel m;
  set_all_log_alpha(m, -10.0);
  EXPECT_EQ(m.count_active_parameters(), (ActiveCounts{0, 0, 0}));
  m.matrices()[m.layout().output].log_alpha(0, 3) = 10.0;
  m.matrices()[m.layout().output].log_alpha(0, 5) = 0.0;
  m.matrices()[m.layout().nc[1]].log_alpha(2, 2) = -2.0; // sig(-2) * 1.2 - 0.1 > 0
  m.matrices()[m.layout().ncfc[0]].log_alpha(1, 4) = -2.5; // below the clamp
  EXPECT_EQ(m.count_active_parameters(), (ActiveCounts{2, 1, 0}));
}

TEST(Energy, ZeroModel)
{
  const PicnnModel m;
  const auto g = all_open_gates(m);
  EXPECT_EQ(forward_energy(5.0, 4.25, 0.3, m, g), 0.0);
  const auto e = energy_gradients(5.0, 4.25, 0.3, m, g);
  EXPECT_EQ(e.psi, 0.0);
  EXPECT_EQ(e.dpsi_di1, 0.0);
  EXPECT_EQ(e.dpsi_di2, 0.0);
  // only the pass-through output weights see the input: d psi / d w = I - 3
  EXPECT_EQ(e.param_gradients.cwiseAbs().maxCoeff(), 2.0);
}

TEST(Energy, HandEvaluatedToy)
{
  PicnnModel m(toy_architecture());
  const auto& lay = m.layout();
  auto& mats = m.matrices();
  mats[lay.input[0]].theta_bar << 0.4, -0.2;
  mats[lay.coupling[0]].theta_bar << 0.7;
  mats[lay.nc[0]].theta_bar << 1.5;
  mats[lay.ncfc[0]].theta_bar << -0.8;
  mats[lay.output].theta_bar << 2.0, 0.5, 0.1, 0.3;
  const auto g = all_open_gates(m);
  const double i1 = 4.0, i2 = 3.5, c = 0.6;
  const double y = sp(1.5 * c);
  const double cpl = sp(-0.8 * y);
  const double x = sp(0.4 * i1 - 0.2 * i2 + 0.7 * cpl);
  const double expect = 2.0 * x + 0.5 * cpl + 0.1 * i1 + 0.3 * i2;
  EXPECT_NEAR(forward_energy(i1, i2, c, m, g), expect, 1e-14);
}

TEST(Energy, LinearCouplingFlag)
{
  auto arch = toy_architecture();
  arch.coupling = CouplingTransform::linear;
  PicnnModel m(arch);
  const auto& lay = m.layout();
  auto& mats = m.matrices();
  mats[lay.input[0]].theta_bar << 0.4, -0.2;
  mats[lay.coupling[0]].theta_bar << 0.7;
  mats[lay.nc[0]].theta_bar << 1.5;
  mats[lay.ncfc[0]].theta_bar << -0.8;
  mats[lay.output].theta_bar << 2.0, 0.5, 0.1, 0.3;
  const auto g = all_open_gates(m);
  const double y = sp(1.5 * 0.6);
  const double cpl = -0.8 * y;
  const double x = sp(0.4 * 4.0 - 0.2 * 3.5 + 0.7 * cpl);
  EXPECT_NEAR(forward_energy(4.0, 3.5, 0.6, m, g), 2.0 * x + 0.5 * cpl + 0.4 + 1.05, 1e-14);
}

TEST(Energy, MonotoneWithNonNegativeFirstLayer)
{
  std::mt19937_64 rng(4);
  auto m = fixtures::random_model(rng);
  auto& w = m.matrices()[m.layout().input[0]].theta_bar;
  w = w.cwiseAbs();
  const auto g = inference_gates(m);
  double prev = -std::numeric_limits<double>::infinity();
  for (double i1 = 3.0; i1 <= 7.0; i1 += 0.05) {
    const double v = forward_energy(i1, 4.0, 0.5, m, g);
    EXPECT_GE(v, prev);
    prev = v;
  }
  const auto e = energy_gradients(4.5, 3.7, 0.2, m, g);
  EXPECT_GE(e.dpsi_di1, 0.0);
  EXPECT_GE(e.dpsi_di2, 0.0);
}

TEST(Energy, NormalizationExact)
{
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> cu(0.0, 2.1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = fixtures::random_model(rng);
    const auto g = inference_gates(m);
    const double c = cu(rng);
    EXPECT_EQ(normalized_energy(3.0, 3.0, c, m, g), 0.0);
  }
}

TEST(Energy, NormalizedIsDifferenceOfRawCalls)
{
  std::mt19937_64 rng(6);
  const auto m = fixtures::random_model(rng);
  const auto g = inference_gates(m);
  EXPECT_NEAR(normalized_energy(5.0, 4.25, 0.5, m, g),
              forward_energy(5.0, 4.25, 0.5, m, g) - forward_energy(3.0, 3.0, 0.5, m, g), 1e-12);
}

TEST(Energy, SampledRealizationReusable)
{
  std::mt19937_64 rng(7);
  const auto m = fixtures::random_model(rng);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> noise(static_cast<std::size_t>(m.weight_count()));
  for (auto& v : noise)
    v = u(rng);
  const auto g = sample_gates(m, noise);
  EXPECT_EQ(normalized_energy(4.0, 3.6, 0.9, m, g), normalized_energy(4.0, 3.6, 0.9, m, g));
  EXPECT_EQ(normalized_energy(4.0, 3.6, 0.9, m, g), normalized_energy(4.0, 3.6, 0.9, m, sample_gates(m, noise)));
}

TEST(Energy, DomainChecks)
{
  const PicnnModel m;
  const auto g = all_open_gates(m);
  EXPECT_THROW(forward_energy(2.5, 3.0, 0.0, m, g), DomainError);
  EXPECT_THROW(forward_energy(3.0, 3.0, -1.0, m, g), DomainError);
}

TEST(Energy, InvariantGradientsMatchFiniteDifferences)
{
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> iu(3.2, 7.0), cu(0.0, 2.1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = fixtures::random_model(rng, 0.3);
    const auto g = inference_gates(m);
    const double i1 = iu(rng), i2 = iu(rng), c = cu(rng);
    const auto e = energy_gradients(i1, i2, c, m, g);
    const double h = 1e-5;
    const double f1 = (forward_energy(i1 + h, i2, c, m, g) - forward_energy(i1 - h, i2, c, m, g)) / (2 * h);
    const double f2 = (forward_energy(i1, i2 + h, c, m, g) - forward_energy(i1, i2 - h, c, m, g)) / (2 * h);
    EXPECT_NEAR(e.dpsi_di1, f1, 1e-6 * std::max(1.0, std::abs(f1)));
    EXPECT_NEAR(e.dpsi_di2, f2, 1e-6 * std::max(1.0, std::abs(f2)));
  }
}

TEST(Energy, ParameterGradientsMatchFiniteDifferences)
{
  std::mt19937_64 rng(9);
  const auto arch = fixtures::small_architecture();
  for (int trial = 0; trial < 5; ++trial) {
    auto m = fixtures::random_model(rng, 0.3, arch);
    const double i1 = 4.3, i2 = 3.9, c = 0.7;
    const auto e = energy_gradients(i1, i2, c, m, inference_gates(m));
    const Vector p = m.parameters();
    std::uniform_int_distribution<Eigen::Index> pick(0, p.size() - 1);
    const double floor = 1e-3 * e.param_gradients.cwiseAbs().maxCoeff();
    for (int k = 0; k < 20; ++k) {
      const auto i = pick(rng);
      const double h = 1e-6 * std::max(1.0, std::abs(p(i)));
      PicnnModel a = m, b = m;
      Vector pa = p, pb = p;
      pa(i) += h;
      pb(i) -= h;
      a.set_parameters(pa);
      b.set_parameters(pb);
      const double fd = (normalized_energy(i1, i2, c, a, inference_gates(a)) -
                         normalized_energy(i1, i2, c, b, inference_gates(b))) / (2 * h);
      EXPECT_LE(std::abs(e.param_gradients(i) - fd), 1e-5 * std::max(std::abs(fd), floor)) << "parameter " << i;
    }
  }
}

TEST(Convexity, RandomConstrainedModels)
{
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> iu(3.0, 7.0), cu(0.0, 2.1);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = fixtures::random_model(rng);
    const auto g = inference_gates(m);
    for (int k = 0; k < 50; ++k)
      EXPECT_GE(min_hessian_eigenvalue(m, g, iu(rng) + 1e-3, iu(rng) + 1e-3, cu(rng)), -1e-8);
  }
}

TEST(Convexity, Midpoint)
{
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> iu(3.0, 7.0), cu(0.0, 2.1);
  const auto m = fixtures::random_model(rng);
  const auto g = inference_gates(m);
  for (int k = 0; k < 1000; ++k) {
    const double c = cu(rng);
    const double a1 = iu(rng), a2 = iu(rng), b1 = iu(rng), b2 = iu(rng);
    const double mid = forward_energy(0.5 * (a1 + b1), 0.5 * (a2 + b2), c, m, g);
    const double avg = 0.5 * forward_energy(a1, a2, c, m, g) + 0.5 * forward_energy(b1, b2, c, m, g);
    EXPECT_LE(mid, avg + 1e-10 * std::max(1.0, std::abs(avg)));
  }
}

TEST(Convexity, CompositionAxisMayBeNonConvex)
{
  // psi = sp(I1 - 3 + sp(-4 sp(3c) + 3)) style bump: non-convex in c, convex in the invariants
  PicnnModel m(toy_architecture());
  const auto& lay = m.layout();
  auto& mats = m.matrices();
  mats[lay.input[0]].theta_bar << 1.0, 0.0;
  mats[lay.coupling[0]].theta_bar << -6.0;
  mats[lay.nc[0]].theta_bar << 4.0;
  mats[lay.ncfc[0]].theta_bar << -3.0;
  mats[lay.output].theta_bar << 1.0, 0.0, 0.0, 0.0;
  const auto g = all_open_gates(m);
  bool non_convex = false;
  for (double c = 0.05; c < 2.0; c += 0.05) {
    const double h = 0.05;
    const double d2 = forward_energy(4.0, 4.0, c + h, m, g) - 2.0 * forward_energy(4.0, 4.0, c, m, g) +
                      forward_energy(4.0, 4.0, c - h, m, g);
    non_convex = non_convex || d2 < -1e-9;
    EXPECT_GE(min_hessian_eigenvalue(m, g, 4.0, 4.0, c), -1e-8);
  }
  EXPECT_TRUE(non_convex);
}

TEST(Gates, SampledExamples)
{
  const L0Hyper hp;
  EXPECT_NEAR(sample_gate(0.0, 0.5, hp).z, 0.5, 1e-15);
  EXPECT_EQ(sample_gate(50.0, 0.5, hp).z, 1.0);
  EXPECT_EQ(sample_gate(-50.0, 0.5, hp).z, 0.0);
  EXPECT_THROW(sample_gate(0.0, 0.0, hp), DomainError);
  EXPECT_THROW(sample_gate(0.0, 1.0, hp), DomainError);
}

TEST(Gates, InferenceExamples)
{
  const L0Hyper hp;
  EXPECT_NEAR(inference_gate(0.0, hp).z, 0.5, 1e-15);
  EXPECT_EQ(inference_gate(-10.0, hp).z, 0.0);
  EXPECT_EQ(inference_gate(10.0, hp).z, 1.0);
}

TEST(Gates, AlwaysInsideUnitInterval)
{
  const L0Hyper hp;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> la(0.0, 5.0);
  std::uniform_real_distribution<double> u(1e-12, 1.0 - 1e-12);
  for (int k = 0; k < 10000; ++k) {
    const double a = la(rng);
    const double zs = sample_gate(a, u(rng), hp).z;
    const double zi = inference_gate(a, hp).z;
    EXPECT_GE(zs, 0.0);
    EXPECT_LE(zs, 1.0);
    EXPECT_GE(zi, 0.0);
    EXPECT_LE(zi, 1.0);
  }
}

TEST(Gates, NoiseLengthChecked)
{
  const PicnnModel m;
  std::vector<double> noise(10, 0.5);
  EXPECT_THROW(sample_gates(m, noise), ConfigError);
}

TEST(Gates, HyperValidation)
{
  L0Hyper hp;
  hp.gamma_gate = 0.1;
  EXPECT_THROW(hp.validate(), ConfigError);
  hp = {};
  hp.beta = 1.5;
  EXPECT_THROW(hp.validate(), ConfigError);
}

TEST(ExpectedL0, Examples)
{
  const L0Hyper hp;
  EXPECT_NEAR(expected_gate_activity(hp.beta * std::log(1.0 / 11.0), hp), 0.5, 1e-15);
  PicnnModel m(toy_architecture());
  set_all_log_alpha(m, -1e3);
  EXPECT_LT(m.expected_l0_penalty(), 1e-100);
  set_all_log_alpha(m, 1e3);
  EXPECT_DOUBLE_EQ(m.expected_l0_penalty(), static_cast<double>(m.weight_count()));
}

TEST(ExpectedL0, GradientMatchesFiniteDifferences)
{
  std::mt19937_64 rng(13);
  auto m = fixtures::random_model(rng, 1.0, fixtures::small_architecture());
  const std::array<double, 3> w{5e-4, 1e-6, 2e-6};
  const Vector g = expected_l0_gradient(m, w);
  auto weighted = [&](const PicnnModel& x) {
    const auto s = x.expected_l0_by_group();
    return w[0] * s[0] + w[1] * s[1] + w[2] * s[2];
  };
  const Vector p = m.parameters();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    PicnnModel a = m, b = m;
    Vector pa = p, pb = p;
    pa(i) += 1e-5;
    pb(i) -= 1e-5;
    a.set_parameters(pa);
    b.set_parameters(pb);
    EXPECT_NEAR(g(i), (weighted(a) - weighted(b)) / 2e-5, 1e-12);
  }
}

TEST(Projection, Examples)
{
  PicnnModel m;
  auto& out = m.matrices()[m.layout().output].theta_bar;
  auto& first = m.matrices()[m.layout().input[0]].theta_bar;
  out(0, 0) = -0.3;
  out(0, 1) = 0.7;
  first(0, 0) = -0.3;
  m.project_nonnegative();
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_EQ(out(0, 1), 0.7);
  EXPECT_EQ(first(0, 0), -0.3);
}

TEST(Stress, ZeroAtIdentityForRandomModels)
{
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = fixtures::random_model(rng);
    const auto g = inference_gates(m);
    const auto e = energy_gradients(3.0, 3.0, 0.3, m, g);
    const Tensor3 s = second_pk_deviatoric(Tensor3::Identity(), e.dpsi_di1, e.dpsi_di2);
    EXPECT_LE(push_forward(Tensor3::Identity(), s).cwiseAbs().maxCoeff(), 1e-10);
  }
}
