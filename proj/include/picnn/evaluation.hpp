#pragma once

/// \file evaluation.hpp
/// \brief Record-level prediction with a trained or the reference model, and per-record metric rows.

#include <picnn/experiment.hpp>
#include <picnn/io.hpp>
#include <picnn/loading.hpp>
#include <picnn/metrics.hpp>
#include <picnn/potential_net.hpp>
#include <picnn/reference_material.hpp>
#include <picnn/viscoelastic.hpp>

#include <functional>
#include <vector>

namespace picnn {

/// Maps a record to the model response at its sample times.
using Predictor = std::function<std::vector<double>(const ExperimentRecord&)>;

inline Predictor model_predictor(const PicnnModel& model, const QlvModel& qlv,
                                 int quadrature_order = kDefaultQuadratureOrder)
{
  return [&model, &qlv, quadrature_order, gates = inference_gates(model)](const ExperimentRecord& rec) {
    return predict_record(rec, PicnnMaterial(model, gates, rec.c), {qlv.relax_coeff(rec.c), qlv.tau, qlv.form},
                          quadrature_order);
  };
}

inline Predictor reference_predictor(QlvForm form = QlvForm::convolution, int quadrature_order = kDefaultQuadratureOrder)
{
  return [form, quadrature_order](const ExperimentRecord& rec) {
    return predict_record(rec, ReferenceMaterial(rec.c), {gamma_reference(rec.c), kDefaultRelaxationTime, form},
                          quadrature_order);
  };
}

/// Copy of the record with its outputs replaced by the prediction.
inline ExperimentRecord predicted_record(const ExperimentRecord& rec, const Predictor& predict)
{
  auto out = rec;
  const auto y = predict(rec);
  for (std::size_t k = 0; k < y.size(); ++k)
    out.samples[k].output = y[k];
  return out;
}

inline std::vector<MetricRow> evaluate_records(const std::vector<ExperimentRecord>& records, const Predictor& predict)
{
  std::vector<MetricRow> rows;
  for (const auto& rec : records) {
    const auto y = predict(rec);
    const auto t = rec.outputs();
    rows.push_back({rec.id, rec.composition_name, rec.mode, rec.rate, rec.role, evaluate_metrics(y, t)});
  }
  return rows;
}

} // namespace picnn
