#include "tvkd/reports.hpp"

#include <algorithm>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

namespace tvkd {

void write_table4_csv(std::ostream& out, std::span<const Table4Row> rows) {
  out << "seed,scorer,accuracy\n";
  for (const auto& r : rows) out << fmt::format("{},{},{}\n", r.seed, r.scorer, r.accuracy);
}

void write_table5_csv(std::ostream& out, std::span<const Table5Row> rows) {
  out << "seed,model,divergence\n";
  for (const auto& r : rows) out << fmt::format("{},{},{}\n", r.seed, r.model, r.divergence);
}

void write_table6_csv(std::ostream& out, std::span<const AuxiliaryRow> rows) {
  out << "seed,variant,state_dependent,margin_accuracy,student_accuracy,invariance_kl,invariance_passed\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{}\n", r.seed, to_string(r.variant), r.state_dependent ? 1 : 0,
                       r.margin_accuracy, r.student_accuracy, r.invariance_kl, r.invariance_passed ? 1 : 0);
  }
}

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  out << "method,alpha,beta,seed,accuracy_ground_truth,value_alignment\n";
  for (const auto& c : report.baseline) {
    out << fmt::format("dpo,{},{},{},{},{}\n", c.alpha, c.beta, c.seed, c.accuracy_ground_truth, c.value_alignment);
  }
  for (const auto& c : report.cells) {
    out << fmt::format("tvkd,{},{},{},{},{}\n", c.alpha, c.beta, c.seed, c.accuracy_ground_truth, c.value_alignment);
  }
}

void write_token_annotation_csv(std::ostream& out, std::span<const TokenAnnotation> rows) {
  out << "record,prompt_id,position,token,psi,marked,rank\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    for (std::size_t t = 0; t < r.psi.size(); ++t) {
      const auto it = std::find(r.marked.begin(), r.marked.end(), t);
      const bool marked = it != r.marked.end();
      const std::string rank = marked ? std::to_string(it - r.marked.begin() + 1) : "";
      out << fmt::format("{},{},{},{},{},{},{}\n", i, r.prompt_id, t, r.actions[t].value, r.psi[t], marked ? 1 : 0,
                         rank);
    }
  }
}

void write_run_report_json(std::ostream& out, const RunReport& report) {
  nlohmann::ordered_json j;
  j["method"] = report.method;
  j["alpha"] = report.alpha;
  j["beta"] = report.beta;
  j["seed"] = report.seed;
  j["steps"] = report.steps;
  j["epoch_loss"] = report.epoch_loss;
  j["epoch_margin"] = report.epoch_margin;
  j["epoch_eval_accuracy"] = report.epoch_eval_accuracy;
  j["selected_epoch"] = report.selected_epoch;
  j["accuracy_ground_truth"] = report.accuracy_ground_truth;
  j["accuracy_labels"] = report.accuracy_labels;
  j["value_alignment"] = report.value_alignment;
  out << j.dump(2) << '\n';
}

}  // namespace tvkd
