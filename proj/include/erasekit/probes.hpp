#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "erasekit/dataset.hpp"

namespace erasekit {

/// Linear classifier. With one weight row and two classes the sign rule
/// applies (positive score -> classes[1]); otherwise the arg-max row wins,
/// ties going to the lower class index.
struct LinearModel {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
  std::vector<std::string> classes;

  bool uses_sign_rule() const noexcept { return weights.rows() == 1 && classes.size() == 2; }
  std::size_t predict_index(VectorRef x) const;
  std::vector<std::string> predict(const Matrix& vectors) const;
};

struct PerceptronConfig {
  std::uint64_t seed = 0;
  std::size_t max_epochs = 100;
};

struct SgdConfig {
  std::uint64_t seed = 0;
  std::size_t epochs = 50;
  double learning_rate = 0.1;
  double l2 = 1e-4;
};

/// Binary error-driven perceptron with bias. Stops after a clean epoch.
LinearModel train_perceptron(const LabeledSlice& data, const PerceptronConfig& config = {});

/// One-vs-rest linear model, hinge loss with L2, plain SGD at a constant
/// learning rate. One weight row per class, also for two classes.
LinearModel train_sgd_multiclass(const LabeledSlice& data, const SgdConfig& config = {});

struct Evaluation {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Macro F1 is averaged over classes seen in the gold labels or predictions.
Evaluation evaluate_predictions(std::span<const std::string> gold, std::span<const std::string> predicted);
Evaluation evaluate(const LinearModel& model, const LabeledSlice& data);

/// Prevalence of the most frequent label.
double majority_baseline(std::span<const std::string> labels);

std::map<std::string, double> label_distribution(std::span<const std::string> labels);

/// Macro F1 expected from a guesser that picks one of the K labels
/// uniformly at random.
double expected_random_f1(std::span<const double> prevalences);
double expected_random_f1(const std::map<std::string, double>& distribution);

struct ProbeResult {
  std::string property;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double majority_baseline = 0.0;
  double random_f1 = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

struct ProbeReport {
  std::vector<ProbeResult> results;

  double mean_accuracy() const;
  double mean_macro_f1() const;
  double mean_random_f1() const;
};

enum class ProbeKind { sgd, perceptron };

/// Trains on `train`, reports on `test`.
ProbeResult run_probe(const std::string& property, const LabeledSlice& train, const LabeledSlice& test,
                      ProbeKind kind, std::uint64_t seed, const SgdConfig& sgd = {},
                      const PerceptronConfig& perceptron = {});

void save_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_model(const std::filesystem::path& path);

}  // namespace erasekit
