#include "rnnlip/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include "rnnlip/errors.hpp"

namespace rnnlip::io {

namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw IoError(std::string("missing JSON field: ") + key);
  return j.at(key);
}

// inf and nan have no JSON spelling; unbounded interval ends are written as strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double to_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw IoError("expected a number in JSON");
}

json box_to_json(const IntervalBox& box) {
  return {{"lb", vector_to_json(box.lower)}, {"ub", vector_to_json(box.upper)}};
}

}  // namespace

json matrix_to_json(const MatrixXd& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(number(M(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw IoError("expected a nested array for a matrix");
  const auto rows = static_cast<Index>(j.size());
  const Index cols = rows ? static_cast<Index>(j.front().size()) : 0;
  MatrixXd M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw IoError("ragged matrix in JSON");
    for (Index c = 0; c < cols; ++c) M(i, c) = to_number(row[static_cast<std::size_t>(c)]);
  }
  return M;
}

json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw IoError("expected an array for a vector");
  VectorXd v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = to_number(j[static_cast<std::size_t>(i)]);
  return v;
}

json to_json(const RnnModel& model) {
  json j;
  j["n"] = model.hidden();
  j["m"] = model.input();
  j["p"] = model.output();
  j["activation"] = "tanh";
  j["W_x"] = matrix_to_json(model.W_x);
  j["W_h"] = matrix_to_json(model.W_h);
  j["b"] = vector_to_json(model.b);
  j["W_out"] = matrix_to_json(model.W_out);
  j["b_out"] = vector_to_json(model.b_out);
  return j;
}

RnnModel model_from_json(const json& j) {
  try {
    RnnModel model;
    if (field(j, "activation").get<std::string>() != "tanh")
      throw ContractError("model: only the tanh activation is supported");
    const auto n = field(j, "n").get<Index>();
    const auto m = field(j, "m").get<Index>();
    const auto p = field(j, "p").get<Index>();
    // Empty matrices come back as 0x0; restore the declared shapes first.
    model = RnnModel::zeros(n, m, p);
    if (n > 0 && m > 0) model.W_x = matrix_from_json(field(j, "W_x"));
    if (n > 0) model.W_h = matrix_from_json(field(j, "W_h"));
    model.b = vector_from_json(field(j, "b"));
    if (p > 0 && n > 0) model.W_out = matrix_from_json(field(j, "W_out"));
    model.b_out = vector_from_json(field(j, "b_out"));
    require(model.hidden() == n && model.W_h.cols() == n && model.W_x.rows() == n &&
                model.input() == m && model.output() == p && model.W_out.cols() == n,
            "model: matrix shapes disagree with n, m, p");
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed model JSON: ") + e.what());
  }
}

json to_json(const TankConfig& cfg) {
  json j;
  j["tanks"] = cfg.tanks;
  j["a"] = cfg.outflow();
  j["dt"] = cfg.dt;
  j["sequence_length"] = cfg.sequence_length;
  j["sequences"] = cfg.sequences;
  j["split"] = cfg.split;
  j["input_range"] = {cfg.input_lo, cfg.input_hi};
  j["initial_level_max"] = cfg.initial_level_hi;
  j["hold_range"] = {cfg.hold_min, cfg.hold_max};
  j["seed"] = cfg.seed;
  return j;
}

TankConfig tank_config_from_json(const json& j) {
  TankConfig cfg;
  cfg.tanks = field(j, "tanks").get<int>();
  cfg.a = field(j, "a").get<std::vector<double>>();
  cfg.dt = field(j, "dt").get<double>();
  cfg.sequence_length = field(j, "sequence_length").get<int>();
  cfg.sequences = field(j, "sequences").get<int>();
  cfg.split = field(j, "split").get<double>();
  cfg.input_lo = field(j, "input_range").at(0).get<double>();
  cfg.input_hi = field(j, "input_range").at(1).get<double>();
  cfg.initial_level_hi = field(j, "initial_level_max").get<double>();
  cfg.hold_min = field(j, "hold_range").at(0).get<int>();
  cfg.hold_max = field(j, "hold_range").at(1).get<int>();
  cfg.seed = field(j, "seed").get<std::uint64_t>();
  return cfg;
}

namespace {

json norm_to_json(const Normalization& n) {
  return {{"offset", vector_to_json(n.offset)}, {"scale", vector_to_json(n.scale)}};
}

Normalization norm_from_json(const json& j) {
  return Normalization{vector_from_json(field(j, "offset")), vector_from_json(field(j, "scale"))};
}

json records(const std::vector<Sequence>& seqs) {
  json out = json::array();
  for (const auto& s : seqs) out.push_back({{"u", matrix_to_json(s.u)}, {"y", matrix_to_json(s.y)}});
  return out;
}

std::vector<Sequence> records_from_json(const json& j) {
  std::vector<Sequence> out;
  for (const auto& r : j)
    out.push_back(Sequence{matrix_from_json(field(r, "u")), matrix_from_json(field(r, "y"))});
  return out;
}

}  // namespace

json to_json(const SequenceDataset& data) {
  json j;
  j["config"] = to_json(data.config);
  j["normalization"] = {{"input", norm_to_json(data.input_norm)},
                        {"output", norm_to_json(data.output_norm)}};
  j["split"] = {{"train", data.train_index}, {"val", data.val_index}};
  j["train"] = records(data.train);
  j["val"] = records(data.val);
  return j;
}

SequenceDataset dataset_from_json(const json& j) {
  try {
    SequenceDataset data;
    data.config = tank_config_from_json(field(j, "config"));
    const json& norm = field(j, "normalization");
    data.input_norm = norm_from_json(field(norm, "input"));
    data.output_norm = norm_from_json(field(norm, "output"));
    if (j.contains("split")) {
      data.train_index = j["split"].at("train").get<std::vector<int>>();
      data.val_index = j["split"].at("val").get<std::vector<int>>();
    }
    data.train = records_from_json(field(j, "train"));
    data.val = records_from_json(field(j, "val"));
    return data;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed dataset JSON: ") + e.what());
  }
}

json to_json(const SlopeBoundSet& slopes) {
  json layers = json::array();
  for (int l = 0; l < slopes.horizon(); ++l) {
    const auto& layer = slopes.layers[l];
    layers.push_back({{"layer", l + 1},
                      {"alpha", vector_to_json(layer.alpha)},
                      {"beta", vector_to_json(layer.beta)},
                      {"preactivation", box_to_json(layer.preactivation)},
                      {"hidden", box_to_json(layer.hidden)}});
  }
  return {{"layers", layers}};
}

json to_json(const CertificationResult& r) {
  json j;
  j["horizon"] = r.horizon;
  j["mode"] = to_string(r.mode);
  j["rho"] = r.rho;
  j["L"] = r.L;
  j["status"] = conic::to_string(r.status);
  j["certificate_residual"] = r.certificate_residual;
  j["solve_seconds"] = r.solve_seconds;
  json summary = {{"min", 0.0}, {"max", 0.0}, {"mean", 0.0}};
  if (r.lambda.size() > 0)
    summary = {{"min", r.lambda.minCoeff()}, {"max", r.lambda.maxCoeff()}, {"mean", r.lambda.mean()}};
  j["lambda_summary"] = summary;
  j["iterations"] = r.iterations;
  j["message"] = r.message;
  return j;
}

json to_json(const EmpiricalResult& r) {
  json j;
  j["horizon"] = r.horizon;
  j["method"] = to_string(r.method);
  j["L_emp"] = r.L_emp;
  j["evaluations"] = r.evaluations;
  j["argmax_pair"] = {{"base", vector_to_json(r.base)}, {"perturbed", vector_to_json(r.perturbed)}};
  j["notes"] = r.notes;
  return j;
}

json to_json(const TrainConfig& cfg) {
  json j;
  j["hidden"] = cfg.hidden;
  j["washout"] = cfg.washout;
  j["a1"] = cfg.a1;
  j["a2"] = cfg.a2;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["max_epochs"] = cfg.max_epochs;
  j["patience"] = cfg.patience;
  j["seed"] = cfg.seed;
  j["power_iterations"] = cfg.power_iterations;
  j["power_tol"] = cfg.power_tol;
  return j;
}

json training_log_json(const TrainResult& r) {
  json epochs = json::array();
  for (const auto& e : r.log)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"spectral_norm", e.spectral_norm},
                      {"best_val", e.best_val}});
  json j;
  j["best_epoch"] = r.best_epoch;
  j["best_val"] = r.best_val;
  j["spectral_norm"] = r.spectral_norm;
  j["norm_condition_met"] = r.norm_condition_met;
  j["flag"] = r.norm_condition_met ? "ok" : "norm-condition-unmet";
  j["stopped_early"] = r.stopped_early;
  j["epochs"] = std::move(epochs);
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path);
  return buf.str();
}

json read_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

}  // namespace rnnlip::io
