#pragma once

#include <picnn/errors.hpp>
#include <picnn/kinematics.hpp>
#include <picnn/loading.hpp>

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace picnn {

enum class DataRole { train, validation, test_interpolation, test_extrapolation };

inline const char* to_string(DataRole r)
{
  switch (r) {
    case DataRole::train: return "train";
    case DataRole::validation: return "validation";
    case DataRole::test_interpolation: return "test-interpolation";
    case DataRole::test_extrapolation: return "test-extrapolation";
  }
  return "?";
}

inline std::optional<DataRole> parse_role(std::string_view s)
{
  if (s == "train")
    return DataRole::train;
  if (s == "validation")
    return DataRole::validation;
  if (s == "test-interpolation")
    return DataRole::test_interpolation;
  if (s == "test-extrapolation")
    return DataRole::test_extrapolation;
  return std::nullopt;
}

inline bool is_test_role(DataRole r) { return r == DataRole::test_interpolation || r == DataRole::test_extrapolation; }

struct CompositionEntry
{
  std::string_view name;
  double c;
};

/// Scaled Digital ABS content of the five printed compositions.
inline constexpr std::array<CompositionEntry, 5> kCompositionTable{{
    {"A", 0.0},
    {"DM-40", 0.1755},
    {"DM-50", 0.4669},
    {"DM-60", 1.0},
    {"DM-70", 2.0895},
}};

inline std::optional<double> composition_value(std::string_view name)
{
  for (const auto& e : kCompositionTable)
    if (e.name == name)
      return e.c;
  return std::nullopt;
}

/// Default role of a named composition: DM-40 interpolation test, DM-70 extrapolation test, others train.
inline DataRole default_role(std::string_view name)
{
  if (name == "DM-40")
    return DataRole::test_interpolation;
  if (name == "DM-70")
    return DataRole::test_extrapolation;
  return DataRole::train;
}

struct Sample
{
  double time = 0.0;
  double input = 0.0;  // stretch, or twist in degrees
  double output = 0.0; // sigma11 in MPa, or torque in N mm
};

/// One loading protocol with its measured (or synthesized) response.
struct ExperimentRecord
{
  std::string id;
  LoadingMode mode = LoadingMode::tension;
  std::string composition_name;
  double c = 0.0;
  double rate = 0.0; // tension 1/s, torsion deg/min
  TorsionGeometry geometry{};
  DataRole role = DataRole::train;
  int substeps = 1; // integration sub-intervals per observation interval
  std::vector<Sample> samples;

  [[nodiscard]] const char* rate_unit() const { return mode == LoadingMode::tension ? "1/s" : "deg/min"; }

  [[nodiscard]] std::vector<double> times() const
  {
    std::vector<double> t;
    for (const auto& s : samples)
      t.push_back(s.time);
    return t;
  }

  [[nodiscard]] std::vector<double> outputs() const
  {
    std::vector<double> y;
    for (const auto& s : samples)
      y.push_back(s.output);
    return y;
  }

  [[nodiscard]] LoadingProtocol protocol() const
  {
    LoadingProtocol p;
    p.mode = mode;
    p.rate = rate;
    p.duration = samples.empty() ? 1.0 : std::max(samples.back().time, 1e-12);
    p.time_step = samples.size() > 1 ? p.duration / static_cast<double>((samples.size() - 1) * substeps) : p.duration;
    p.composition = c;
    p.geometry = geometry;
    return p;
  }
};

/// Integration grid: each observation interval split into `substeps` equal parts, with the observation indices.
struct RefinedGrid
{
  std::vector<double> times;
  std::vector<double> inputs;
  std::vector<std::size_t> observed; // grid index of each sample
};

inline RefinedGrid refine_grid(const ExperimentRecord& rec)
{
  if (rec.substeps < 1)
    throw ConfigError("substeps must be at least 1");
  RefinedGrid g;
  if (rec.samples.empty())
    return g;
  g.times.push_back(rec.samples.front().time);
  g.inputs.push_back(rec.samples.front().input);
  g.observed.push_back(0);
  for (std::size_t k = 1; k < rec.samples.size(); ++k) {
    const auto& a = rec.samples[k - 1];
    const auto& b = rec.samples[k];
    for (int j = 1; j <= rec.substeps; ++j) {
      const double w = static_cast<double>(j) / rec.substeps;
      g.times.push_back(j == rec.substeps ? b.time : a.time + w * (b.time - a.time));
      g.inputs.push_back(j == rec.substeps ? b.input : a.input + w * (b.input - a.input));
    }
    g.observed.push_back(g.times.size() - 1);
  }
  return g;
}

} // namespace picnn
