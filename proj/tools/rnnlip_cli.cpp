// rnnlip: data generation, training, certification, estimation and reporting.
#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rnnlip/certify.hpp"
#include "rnnlip/empirical.hpp"
#include "rnnlip/errors.hpp"
#include "rnnlip/io.hpp"
#include "rnnlip/kernels.hpp"
#include "rnnlip/report.hpp"
#include "rnnlip/tank.hpp"
#include "rnnlip/trainer.hpp"

#ifndef RNNLIP_VERSION
#define RNNLIP_VERSION "0.0.0"
#endif

using namespace rnnlip;
using io::json;

namespace {

enum Exit { ok = 0, usage = 1, io_failure = 2, numerical = 3, contract = 4 };

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "not an integer list: " + text);
    }
  }
  if (out.empty()) throw CLI::ValidationError(what, "empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "not a number list: " + text);
    }
  }
  if (out.empty()) throw CLI::ValidationError(what, "empty list");
  return out;
}

// Sidecar written next to every output. Timings live here so that the outputs
// themselves stay byte-identical across reruns.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {
    start_ = std::chrono::steady_clock::now();
  }

  void config(json c) { config_ = std::move(c); }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void input(const std::string& path) { inputs_[path] = io::file_sha256(path); }
  void output(const std::string& path) { outputs_.push_back(path); }

  void write(const std::string& primary) const {
    json j;
    j["command"] = command_;
    j["tool_version"] = std::string("rnnlip ") + RNNLIP_VERSION;
    j["config"] = config_;
    j["seeds"] = seeds_.is_null() ? json::object() : seeds_;
    j["inputs"] = inputs_.is_null() ? json::object() : inputs_;
    json outs = json::object();
    for (const auto& p : outputs_) outs[p] = io::file_sha256(p);
    j["outputs"] = outs;
    j["threads"] = kernels::max_threads();
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["timings"] = {{"wall_seconds", wall}, {"finished_utc", stamp}};
    io::write_json(manifest_path(primary), j);
  }

  static std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

 private:
  std::string command_;
  json config_, seeds_, inputs_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

std::string file_name(const std::string& path) {
  const auto pos = path.find_last_of('/');
  return pos == std::string::npos ? path : path.substr(pos + 1);
}

// ---- gen-data

struct GenArgs {
  int tanks = 3;
  int sequences = 1000;
  int length = 100;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen_data(const GenArgs& a) {
  TankConfig cfg;
  cfg.tanks = a.tanks;
  cfg.sequences = a.sequences;
  cfg.sequence_length = a.length;
  cfg.seed = a.seed;
  Manifest manifest("gen-data");
  const SequenceDataset data = generate_dataset(cfg);
  json j = io::to_json(data);
  j["manifest"] = file_name(Manifest::manifest_path(a.out));
  io::write_json(a.out, j);
  manifest.config(io::to_json(cfg));
  manifest.seed("data", a.seed);
  manifest.output(a.out);
  manifest.write(a.out);
  std::cout << "wrote " << a.out << ": " << data.train.size() << " train / " << data.val.size()
            << " val sequences\n";
  return ok;
}

// ---- train

struct TrainArgs {
  std::string data;
  int hidden = 8;
  std::uint64_t seed = 0;
  std::string out;
  int max_epochs = TrainConfig{}.max_epochs;
};

int run_train(const TrainArgs& a) {
  Manifest manifest("train");
  manifest.input(a.data);
  const SequenceDataset data = io::dataset_from_json(io::read_json(a.data));
  TrainConfig cfg;
  cfg.hidden = a.hidden;
  cfg.seed = a.seed;
  cfg.max_epochs = a.max_epochs;
  const TrainResult result = train(data, cfg);

  const std::string log_path = a.out + ".log.json";
  io::write_json(a.out, io::to_json(result.model));
  json log = io::training_log_json(result);
  log["config"] = io::to_json(cfg);
  log["manifest"] = file_name(Manifest::manifest_path(a.out));
  io::write_json(log_path, log);

  manifest.config(io::to_json(cfg));
  manifest.seed("train", a.seed);
  manifest.output(a.out);
  manifest.output(log_path);
  manifest.write(a.out);
  std::cout << "wrote " << a.out << ": epochs " << result.log.size() << ", best epoch "
            << result.best_epoch << ", val mse " << result.best_val << ", ||W_h||_2 "
            << result.spectral_norm << "\n";
  if (!result.norm_condition_met) {
    std::cerr << "warning: norm-condition-unmet (||W_h||_2 >= 1)\n";
    return numerical;
  }
  return ok;
}

// ---- certify

struct CertifyArgs {
  std::string model;
  std::string horizons = "1,2,5,10,20";
  std::string mode = "global";
  std::string input_lb = "-1";
  std::string input_ub = "1";
  std::string out;
};

VectorXd bound_vector(const std::string& text, Index m, const char* flag) {
  const auto values = parse_double_list(text, flag);
  if (values.size() == 1) return VectorXd::Constant(m, values.front());
  if (static_cast<Index>(values.size()) != m)
    throw ContractError(std::string(flag) + ": give one value or one per input channel");
  return Eigen::Map<const VectorXd>(values.data(), m);
}

int run_certify(const CertifyArgs& a) {
  Manifest manifest("certify");
  manifest.input(a.model);
  const RnnModel model = io::model_from_json(io::read_json(a.model));
  const auto horizons = parse_int_list(a.horizons, "--horizons");

  SweepOptions opt;
  opt.mode = parse_slope_mode(a.mode);
  const IntervalBox h0_box = IntervalBox::uniform(model.hidden(), -1.0, 1.0);
  IntervalBox x_box{bound_vector(a.input_lb, model.input(), "--input-lb"),
                    bound_vector(a.input_ub, model.input(), "--input-ub")};
  x_box.validate();
  if (opt.mode == SlopeMode::local) {
    opt.x_box = x_box;
    opt.h0_box = h0_box;
  }
  const SweepResult sweep = sweep_horizons(model, horizons, opt);

  json j;
  j["model"] = a.model;
  j["model_digest"] = io::file_sha256(a.model);
  j["mode"] = a.mode;
  j["solver"] = conic::InteriorPointBackend{}.name();
  j["horizons"] = horizons;
  if (opt.mode == SlopeMode::local) {
    j["input_box"] = {{"lb", io::vector_to_json(x_box.lower)}, {"ub", io::vector_to_json(x_box.upper)}};
    j["h0_box"] = {{"lb", io::vector_to_json(h0_box.lower)}, {"ub", io::vector_to_json(h0_box.upper)}};
  }
  json results = json::array();
  for (const auto& r : sweep.results) results.push_back(io::to_json(r));
  j["results"] = results;
  j["overall_L"] = sweep.overall_L;
  j["warning"] = sweep.warning;
  if (opt.mode == SlopeMode::local) {
    // Layer l's slopes do not depend on the horizon, so the longest sweep covers all.
    int longest = 0;
    for (int h : horizons) longest = std::max(longest, h);
    j["slopes"] = io::to_json(propagate_slope_bounds(model, longest, x_box, h0_box));
  }
  j["manifest"] = file_name(Manifest::manifest_path(a.out));
  io::write_json(a.out, j);

  json timings = json::array();
  for (const auto& r : sweep.results)
    timings.push_back({{"horizon", r.horizon}, {"solve_seconds", r.solve_seconds}});
  manifest.config({{"horizons", horizons},
                   {"mode", a.mode},
                   {"input_lb", a.input_lb},
                   {"input_ub", a.input_ub},
                   {"solve_timings", timings}});
  manifest.output(a.out);
  manifest.write(a.out);

  for (const auto& r : sweep.results)
    std::cout << "N=" << r.horizon << " " << to_string(r.mode) << " L=" << r.L << " status "
              << conic::to_string(r.status) << " residual " << r.certificate_residual << "\n";
  std::cout << "overall L=" << sweep.overall_L << (sweep.warning ? " (warning)" : "") << "\n";
  return sweep.warning ? numerical : ok;
}

// ---- estimate

struct EstimateArgs {
  std::string model;
  std::string method = "active";
  std::string horizon = "1";
  std::int64_t samples = ExplorationConfig{}.samples;
  int restarts = ExplorationConfig{}.restarts;
  std::uint64_t seed = 0;
  std::string out;
};

int run_estimate(const EstimateArgs& a) {
  Manifest manifest("estimate");
  manifest.input(a.model);
  const RnnModel model = io::model_from_json(io::read_json(a.model));
  const auto horizons = parse_int_list(a.horizon, "--horizon");
  const ExploreMethod method = parse_explore_method(a.method);
  ExplorationConfig cfg;
  cfg.samples = a.samples;
  cfg.restarts = a.restarts;
  cfg.seed = a.seed;

  json results = json::array();
  for (int h : horizons) {
    const EmpiricalResult r = explore(model, h, cfg, method);
    results.push_back(io::to_json(r));
    std::cout << "N=" << h << " " << to_string(method) << " L_emp=" << r.L_emp << "\n";
  }
  json config = {{"samples", cfg.samples},
                 {"restarts", cfg.restarts},
                 {"perturbation_variance", cfg.perturbation_variance},
                 {"perturbation_box", cfg.perturbation_box},
                 {"patience", cfg.patience},
                 {"step_size", cfg.step_size},
                 {"max_epochs", cfg.max_epochs},
                 {"seed", cfg.seed}};
  json j;
  j["model"] = a.model;
  j["model_digest"] = io::file_sha256(a.model);
  j["method"] = a.method;
  j["config"] = config;
  j["results"] = results;
  j["manifest"] = file_name(Manifest::manifest_path(a.out));
  io::write_json(a.out, j);

  manifest.config(config);
  manifest.seed("explore", a.seed);
  manifest.output(a.out);
  manifest.write(a.out);
  return ok;
}

// ---- report

struct ReportArgs {
  std::vector<std::string> certs;
  std::vector<std::string> estimates;
  std::string out;
};

int run_report(const ReportArgs& a) {
  Manifest manifest("report");
  std::vector<json> certs, estimates;
  for (const auto& p : a.certs) {
    manifest.input(p);
    certs.push_back(io::read_json(p));
  }
  for (const auto& p : a.estimates) {
    manifest.input(p);
    estimates.push_back(io::read_json(p));
  }
  const Report report = build_report(certs, estimates);
  const std::string csv_path = a.out + ".csv";
  const std::string json_path = a.out + ".json";
  io::write_text(csv_path, report_csv(report));
  json summary = report.summary;
  summary["certifications"] = a.certs;
  summary["estimates"] = a.estimates;
  summary["manifest"] = file_name(Manifest::manifest_path(json_path));
  io::write_json(json_path, summary);
  manifest.config({{"certs", a.certs}, {"estimates", a.estimates}});
  manifest.output(csv_path);
  manifest.output(json_path);
  manifest.write(json_path);
  std::cout << report_csv(report);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  kernels::configure_threads();

  CLI::App app{"Certified Lipschitz bounds for tanh RNNs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("rnnlip ") + RNNLIP_VERSION);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "simulate the tank cascade and write a dataset");
  gen_cmd->add_option("--tanks", gen.tanks)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--sequences", gen.sequences)->check(CLI::Range(2, 100000000));
  gen_cmd->add_option("--length", gen.length)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--out", gen.out)->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a stability-regularized RNN");
  train_cmd->add_option("--data", tr.data)->required();
  train_cmd->add_option("--hidden", tr.hidden)->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_option("--out", tr.out)->required();
  train_cmd->add_option("--max-epochs", tr.max_epochs)->check(CLI::PositiveNumber);

  CertifyArgs cert;
  auto* cert_cmd = app.add_subcommand("certify", "certified Lipschitz upper bounds per horizon");
  cert_cmd->add_option("--model", cert.model)->required();
  cert_cmd->add_option("--horizons", cert.horizons, "comma-separated, e.g. 1,2,5,10");
  cert_cmd->add_option("--mode", cert.mode)->check(CLI::IsMember({"global", "local"}));
  cert_cmd->add_option("--input-lb", cert.input_lb, "scalar or one value per input");
  cert_cmd->add_option("--input-ub", cert.input_ub, "scalar or one value per input");
  cert_cmd->add_option("--out", cert.out)->required();

  EstimateArgs est;
  auto* est_cmd = app.add_subcommand("estimate", "empirical Lipschitz lower bounds");
  est_cmd->add_option("--model", est.model)->required();
  est_cmd->add_option("--method", est.method)
      ->check(CLI::IsMember({"random", "active", "active-bounded"}));
  est_cmd->add_option("--horizon", est.horizon, "one horizon or a comma-separated list");
  // Accepts 100000 as well as 1e5.
  est_cmd->add_option_function<double>(
             "--samples",
             [&](const double& v) {
               if (!(v >= 1.0 && v <= 9.0e15 && v == std::floor(v)))
                 throw CLI::ValidationError("--samples", "expected a positive whole number");
               est.samples = static_cast<std::int64_t>(v);
             })
      ->type_name("INT");
  est_cmd->add_option("--restarts", est.restarts)->check(CLI::PositiveNumber);
  est_cmd->add_option("--seed", est.seed);
  est_cmd->add_option("--out", est.out)->required();

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "join certificates and estimates of one model");
  rep_cmd->add_option("--certs", rep.certs, "certification files")->required()->delimiter(',');
  rep_cmd->add_option("--estimates", rep.estimates, "estimate files")->required()->delimiter(',');
  rep_cmd->add_option("--out", rep.out, "output prefix; writes <out>.csv and <out>.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr);
    if (*cert_cmd) return run_certify(cert);
    if (*est_cmd) return run_estimate(est);
    if (*rep_cmd) return run_report(rep);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return usage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return io_failure;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return numerical;
  } catch (const ContractError& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return contract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return numerical;
  }
  return usage;
}
