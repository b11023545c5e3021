#include "rnnlip/report.hpp"

#include <charconv>
#include <map>
#include <set>

#include "rnnlip/errors.hpp"

namespace rnnlip {

namespace {

std::string digest_of(const io::json& j, const char* what) {
  if (!j.contains("model_digest") || !j["model_digest"].is_string())
    throw IoError(std::string(what) + " file has no model_digest");
  return j["model_digest"].get<std::string>();
}

const io::json& results_of(const io::json& j, const char* what) {
  if (!j.contains("results") || !j["results"].is_array())
    throw IoError(std::string(what) + " file has no results array");
  return j["results"];
}

std::string format(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, *v);
  return std::string(buf, res.ptr);
}

io::json opt(const std::optional<double>& v) { return v ? io::json(*v) : io::json(nullptr); }

struct Mean {
  double sum = 0.0;
  int count = 0;
  void add(const std::optional<double>& v) {
    if (v) {
      sum += *v;
      ++count;
    }
  }
  io::json value() const { return count ? io::json(sum / count) : io::json(nullptr); }
};

}  // namespace

Report build_report(const std::vector<io::json>& certs, const std::vector<io::json>& estimates) {
  require(!certs.empty() && !estimates.empty(),
          "report: need at least one certification and one estimate file");
  Report report;
  report.model_digest = digest_of(certs.front(), "certification");
  for (const auto& j : certs)
    if (digest_of(j, "certification") != report.model_digest)
      throw ContractError("report: certification files refer to different models");
  for (const auto& j : estimates)
    if (digest_of(j, "estimate") != report.model_digest)
      throw ContractError("report: estimate files refer to a different model");

  std::map<int, ReportRow> cert_rows;
  for (const auto& j : certs) {
    for (const auto& r : results_of(j, "certification")) {
      if (r.at("status").get<std::string>() != "optimal") continue;
      const int h = r.at("horizon").get<int>();
      auto& row = cert_rows[h];
      row.horizon = h;
      const double L = r.at("L").get<double>();
      if (r.at("mode").get<std::string>() == "global")
        row.L_cert_global = L;
      else
        row.L_cert_local = L;
    }
  }
  std::set<int> estimated;
  std::map<int, ReportRow> est_rows;
  for (const auto& j : estimates) {
    for (const auto& r : results_of(j, "estimate")) {
      const int h = r.at("horizon").get<int>();
      const std::string method = r.at("method").get<std::string>();
      const double L = r.at("L_emp").get<double>();
      auto& row = est_rows[h];
      if (method == "random")
        row.L_rand = L;
      else if (method == "active")
        row.L_act = L;
      else if (method == "active-bounded")
        row.L_act_b = L;
      else
        throw IoError("report: unknown estimate method " + method);
      estimated.insert(h);
    }
  }

  Mean gap, improvement;
  io::json per_horizon = io::json::array();
  for (auto& [h, row] : cert_rows) {
    if (!estimated.count(h)) continue;
    const ReportRow& e = est_rows[h];
    row.L_act = e.L_act;
    row.L_act_b = e.L_act_b;
    row.L_rand = e.L_rand;
    if (row.L_cert_global && row.L_act && *row.L_act > 0.0)
      row.gap_pct = (*row.L_cert_global - *row.L_act) / *row.L_act * 100.0;
    if (row.L_cert_global && row.L_cert_local && *row.L_cert_global > 0.0)
      row.improvement_pct = (*row.L_cert_global - *row.L_cert_local) / *row.L_cert_global * 100.0;
    gap.add(row.gap_pct);
    improvement.add(row.improvement_pct);
    report.rows.push_back(row);
  }
  if (report.rows.empty())
    throw ContractError("report: no horizon has both a certificate and an estimate");

  bool ordered = true;
  for (const auto& row : report.rows) {
    if (row.L_rand && row.L_act && *row.L_rand > *row.L_act) ordered = false;
    if (row.L_act && row.L_cert_global && *row.L_act > *row.L_cert_global * (1 + 1e-6) + 1e-8)
      ordered = false;
  }
  for (const auto& row : report.rows)
    per_horizon.push_back({{"horizon", row.horizon},
                           {"L_cert_global", opt(row.L_cert_global)},
                           {"L_cert_local", opt(row.L_cert_local)},
                           {"L_act", opt(row.L_act)},
                           {"L_act_b", opt(row.L_act_b)},
                           {"L_rand", opt(row.L_rand)},
                           {"gap_pct", opt(row.gap_pct)},
                           {"improvement_pct", opt(row.improvement_pct)}});
  report.summary = {{"model_digest", report.model_digest},
                    {"horizons", static_cast<int>(report.rows.size())},
                    {"mean_gap_pct", gap.value()},
                    {"mean_improvement_pct", improvement.value()},
                    {"soundness_ordering_holds", ordered},
                    {"rows", per_horizon}};
  return report;
}

std::string report_csv(const Report& report) {
  std::string out = "horizon,L_cert_global,L_cert_local,L_act,L_act_b,L_rand,gap_pct,improvement_pct\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.horizon);
    for (const auto* v : {&r.L_cert_global, &r.L_cert_local, &r.L_act, &r.L_act_b, &r.L_rand,
                          &r.gap_pct, &r.improvement_pct})
      out += "," + format(*v);
    out += "\n";
  }
  return out;
}

}  // namespace rnnlip
