#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crsvm/coordinator.hpp"
#include "crsvm/data_shard.hpp"

namespace crsvm {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kMetricsSchemaVersion = 1;

struct TrainingInfo {
  std::size_t n_train = 0;
  std::size_t iterations = 0;
  std::size_t phase_switch_iteration = 0;
  bool converged = false;
  double final_mu = 0.0;
  double objective = 0.0;
};

/// Everything needed to score new rows.
struct Model {
  ModelConfig config;
  Vector beta;
  double beta0 = 0.0;
  Scaling scaling;  // empty when training data was not standardized
  std::optional<GroupPartition> groups;
  std::vector<std::string> feature_names;
  TrainingInfo info;

  std::size_t p() const { return static_cast<std::size_t>(beta.size()); }

  /// Replays the stored scaling, then scores.
  Prediction predict(const Matrix& X_raw) const;
};

Model make_model(const FitResult& fit, const Scaling& scaling,
                 std::vector<std::string> feature_names, std::size_t n_train);

nlohmann::json config_to_json(const ModelConfig& c);
/// Missing keys keep the values already in `into`.
void config_from_json(const nlohmann::json& j, ModelConfig& into);

nlohmann::json model_to_json(const Model& m);
Model model_from_json(const nlohmann::json& j);

void write_model(const std::string& path, const Model& m);
Model read_model(const std::string& path);

struct MetricsReport {
  std::optional<double> car;
  double ct = 0.0;
  std::size_t ni = 0;
  std::optional<std::size_t> ntsf;
  double sparsity = 0.0;
  std::vector<std::string> group_names;
  std::vector<double> group_norms;
  bool converged = false;
  double final_primal = 0.0;
  double final_dual = 0.0;
  double final_mu = 0.0;
  std::size_t phase_switch_iteration = 0;
  double objective = 0.0;
};

/// Fraction of exactly-zero coefficients.
double sparsity(const Vector& beta);

/// Number of support indices among the first 10 coordinates.
std::size_t ntsf(const std::vector<std::size_t>& support);

/// Fraction of matching labels.
double accuracy(const Vector& predicted, const Vector& truth);

MetricsReport make_metrics(const FitResult& fit);

nlohmann::json metrics_to_json(const MetricsReport& m);
MetricsReport metrics_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace crsvm
