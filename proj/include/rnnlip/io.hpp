#pragma once

#include <string>

#include <json.hpp>

#include "rnnlip/certify.hpp"
#include "rnnlip/empirical.hpp"
#include "rnnlip/model.hpp"
#include "rnnlip/slopes.hpp"
#include "rnnlip/tank.hpp"
#include "rnnlip/trainer.hpp"

// JSON interchange. Matrices are row-major nested arrays; doubles are written
// in shortest round-trip form, so write -> read reproduces every bit.
namespace rnnlip::io {

using json = nlohmann::ordered_json;

json matrix_to_json(const MatrixXd& M);
MatrixXd matrix_from_json(const json& j);
json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const json& j);

json to_json(const RnnModel& model);
RnnModel model_from_json(const json& j);

json to_json(const TankConfig& cfg);
TankConfig tank_config_from_json(const json& j);
json to_json(const SequenceDataset& data);
SequenceDataset dataset_from_json(const json& j);

json to_json(const SlopeBoundSet& slopes);
json to_json(const CertificationResult& result);
json to_json(const EmpiricalResult& result);
json to_json(const TrainConfig& cfg);
json training_log_json(const TrainResult& result);

// Throws IoError.
std::string read_file(const std::string& path);
json read_json(const std::string& path);
// Pretty-printed with a trailing newline; byte-stable for equal content.
void write_json(const std::string& path, const json& j);
void write_text(const std::string& path, const std::string& text);

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::string& path);

}  // namespace rnnlip::io
