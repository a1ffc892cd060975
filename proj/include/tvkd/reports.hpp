#pragma once

// CSV writers for the analysis tables. Every file starts with a header row;
// numbers use the shortest round-trip decimal form.

#include <iosfwd>
#include <span>

#include "tvkd/experiments.hpp"

namespace tvkd {

void write_table4_csv(std::ostream& out, std::span<const Table4Row> rows);
void write_table5_csv(std::ostream& out, std::span<const Table5Row> rows);
void write_table6_csv(std::ostream& out, std::span<const AuxiliaryRow> rows);
void write_sweep_csv(std::ostream& out, const SweepReport& report);
void write_token_annotation_csv(std::ostream& out, std::span<const TokenAnnotation> rows);
void write_run_report_json(std::ostream& out, const RunReport& report);

}  // namespace tvkd
