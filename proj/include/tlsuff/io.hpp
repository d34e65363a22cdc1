#pragma once

#include <string>

#include "tlsuff/mc_harness.hpp"
#include "tlsuff/types.hpp"

namespace tlsuff {

// CSV schemas (header row required):
//   target: y,x1,...,xp with y in {0,1}
//   source: y,x1,...,xp with y in {0,...,K}; K inferred as max label
//   model:  beta_1,...,beta_K; p data rows
// All floating-point values are serialized with 17 significant digits.

TargetDataset read_target_csv(const std::string& path, bool center = false);
SourceDataset read_source_csv(const std::string& path, bool center = false);
void write_target_csv(const std::string& path, const TargetDataset& data);
void write_source_csv(const std::string& path, const SourceDataset& data);

Matrix read_model_csv(const std::string& path);
void write_model_csv(const std::string& path, const Matrix& B);

// JSON sidecar next to a model file: diagnostics plus the source sample size.
void write_model_sidecar(const std::string& model_path, const SourceModel& model);
// Returns a SourceModel with n_source/diagnostics restored when the sidecar
// exists, otherwise just the matrix.
SourceModel read_model(const std::string& model_path);
void write_model(const std::string& model_path, const SourceModel& model);

std::string sufficiency_result_json(const SufficiencyResult& r, bool centered);
void write_sufficiency_result(const std::string& path, const SufficiencyResult& r,
                              bool centered);

// Flat key = value config document for `simulate`.
ExperimentConfig parse_experiment_config(const std::string& path);

// Experiment outputs: <prefix>.csv (one row per record) and <prefix>.json.
void write_experiment_result(const std::string& prefix, const ExperimentResult& result);
std::string experiment_result_json(const ExperimentResult& result);

// Writes to a temp file in the destination directory, then renames.
void atomic_write_file(const std::string& path, const std::string& contents);

}  // namespace tlsuff
