#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rnnlip/io.hpp"

namespace rnnlip {

// One horizon of the fleet table. Missing inputs leave a cell empty.
struct ReportRow {
  int horizon = 0;
  std::optional<double> L_cert_global, L_cert_local, L_act, L_act_b, L_rand;
  std::optional<double> gap_pct;          // (L_cert_global - L_act) / L_act * 100
  std::optional<double> improvement_pct;  // (L_global - L_local) / L_global * 100
};

struct Report {
  std::string model_digest;
  std::vector<ReportRow> rows;
  io::json summary;
};

// Joins certification files (output of `certify`) and estimate files (output of
// `estimate`) by model digest and horizon. Numbers are copied from the inputs,
// never recomputed from the model. Throws ContractError when digests differ or
// no horizon has both a certificate and an estimate.
Report build_report(const std::vector<io::json>& certs, const std::vector<io::json>& estimates);

std::string report_csv(const Report& report);

}  // namespace rnnlip
