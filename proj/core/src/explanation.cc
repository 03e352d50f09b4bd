// Copyright 2026 The NeuroDissect Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "neurodissect/explanation.h"

#include <fmt/core.h>

#include "neurodissect/error.h"
#include "neurodissect/io.h"

namespace neurodissect {
namespace {

constexpr char kModule[] = "explanation";

void require_core(const ConceptSet& core) {
  if (core.empty()) {
    throw Error(ErrorCode::kEmptyCoreConcepts, kModule,
                "metrics are undefined for an empty core-concept set");
  }
}

std::string percent_cell(bool present, double v) {
  return present ? fmt::format("{:.2f}", v) : std::string("-");
}

std::string mean_cell(bool present, double v) {
  return present ? fmt::format("{:.2f}", 100.0 * v) : std::string("-");
}

}  // namespace

double consistency_metric(const ConceptSet& learned, const ConceptSet& core) {
  require_core(core);
  return static_cast<double>(intersection_size(learned, core)) /
         static_cast<double>(core.size());
}

double similarity_metric(const ConceptSet& learned, const ConceptSet& core) {
  require_core(core);
  const std::size_t inter = intersection_size(learned, core);
  const std::size_t uni = learned.size() + core.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double difference_metric(const ConceptSet& learned, const ConceptSet& core) {
  require_core(core);
  const std::size_t outside = learned.size() - intersection_size(learned, core);
  return static_cast<double>(outside) / static_cast<double>(core.size());
}

ExplanationScores explain(ImageId image, SceneId scene,
                          const ConceptSet& learned, const ConceptSet& core) {
  return {image, scene, consistency_metric(learned, core),
          similarity_metric(learned, core), difference_metric(learned, core)};
}

FalsePredictionReport false_prediction_report(
    std::span<const PredictionRecord> false_predictions,
    const LearnedConceptsFn& learned, const CoreConceptsFn& core) {
  if (false_predictions.empty()) {
    throw Error(ErrorCode::kEmptyFalseSet, kModule,
                "no misclassified images to explain");
  }
  std::size_t cm = 0;
  std::size_t dm = 0;
  std::size_t sm = 0;
  for (const auto& r : false_predictions) {
    if (r.predicted == r.target) {
      throw Error(ErrorCode::kInvalidArgument, kModule,
                  fmt::format("image {} is correctly predicted", r.image_id));
    }
    const auto& lc = learned(r.image_id);
    const auto at_pred = explain(r.image_id, r.predicted, lc, core(r.predicted));
    const auto at_target = explain(r.image_id, r.target, lc, core(r.target));
    cm += at_pred.cm > at_target.cm;
    dm += at_pred.dm > at_target.dm;
    sm += at_pred.sm > at_target.sm;
  }
  const double n = static_cast<double>(false_predictions.size());
  return {false_predictions.size(), 100.0 * cm / n, 100.0 * dm / n,
          100.0 * sm / n};
}

TruePredictionReport true_prediction_report(
    std::span<const PredictionRecord> true_predictions,
    std::span<const PredictionRecord> false_predictions,
    const LearnedConceptsFn& learned, const CoreConceptsFn& core) {
  if (true_predictions.empty() || false_predictions.empty()) {
    throw Error(ErrorCode::kEmptySet, kModule,
                "both the true and the false prediction sets must be "
                "non-empty");
  }
  auto means = [&](std::span<const PredictionRecord> set) {
    double cm = 0.0;
    double sm = 0.0;
    for (const auto& r : set) {
      const auto s = explain(r.image_id, r.target, learned(r.image_id),
                             core(r.target));
      cm += s.cm;
      sm += s.sm;
    }
    const double n = static_cast<double>(set.size());
    return std::pair{cm / n, sm / n};
  };
  const auto [cm_tp, sm_tp] = means(true_predictions);
  const auto [cm_t_fp, sm_t_fp] = means(false_predictions);
  return {true_predictions.size(), false_predictions.size(), cm_tp, cm_t_fp,
          sm_tp, sm_t_fp};
}

std::string format_ppe_tsv(std::span<const PPEReport> reports) {
  std::string out =
      "lc\tcc\tn_false\tcm_fp\tdm_fp\tsm_fp\tn_true\tcm_tp\tcm_t_fp\tsm_tp\t"
      "sm_t_fp\n";
  auto cell = [](bool present, double v) {
    return present ? format_double(v) : std::string("-");
  };
  for (const auto& r : reports) {
    const auto& f = r.false_report;
    const auto& t = r.true_report;
    out += fmt::format(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.lc_strategy,
        r.cc_kind, r.has_false ? f.count : 0, cell(r.has_false, f.cm_fp),
        cell(r.has_false, f.dm_fp), cell(r.has_false, f.sm_fp),
        r.has_true ? t.true_count : 0, cell(r.has_true, t.cm_tp),
        cell(r.has_true, t.cm_t_fp), cell(r.has_true, t.sm_tp),
        cell(r.has_true, t.sm_t_fp));
  }
  return out;
}

std::string format_ppe_table(std::span<const PPEReport> reports) {
  std::string out;
  out += fmt::format("{:<12} {:<4} | {:>7} {:>7} {:>7} | {:>7} {:>8} {:>7} "
                     "{:>8}\n",
                     "LC", "CC", "CM^FP", "DM^FP", "SM^FP", "CM^TP",
                     "CM^T_FP", "SM^TP", "SM^T_FP");
  out += std::string(84, '-') + '\n';
  for (const auto& r : reports) {
    const auto& f = r.false_report;
    const auto& t = r.true_report;
    out += fmt::format(
        "{:<12} {:<4} | {:>7} {:>7} {:>7} | {:>7} {:>8} {:>7} {:>8}\n",
        r.lc_strategy, r.cc_kind, percent_cell(r.has_false, f.cm_fp),
        percent_cell(r.has_false, f.dm_fp), percent_cell(r.has_false, f.sm_fp),
        mean_cell(r.has_true, t.cm_tp), mean_cell(r.has_true, t.cm_t_fp),
        mean_cell(r.has_true, t.sm_tp), mean_cell(r.has_true, t.sm_t_fp));
  }
  out += "All columns in percent; true-prediction means are scaled by 100.\n";
  return out;
}

}  // namespace neurodissect
