#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "erasekit/dataset.hpp"
#include "erasekit/embedding.hpp"
#include "erasekit/error.hpp"
#include "erasekit/probes.hpp"

namespace erasekit {

/// How a projection was obtained. Only `single` and `regressive` are
/// guaranteed orthogonal projections; every mode is a contraction.
enum class ProjectionMode { single, regressive, non_regressive, external };

std::string_view to_string(ProjectionMode mode);
ProjectionMode projection_mode_from_string(std::string_view text);

/// One composed nullspace step.
struct ProvenanceRecord {
  std::string property;
  std::size_t iteration = 0;
  std::size_t classifier_rank = 0;
  double dev_accuracy = 0.0;
  double majority = 0.0;

  friend bool operator==(const ProvenanceRecord&, const ProvenanceRecord&) = default;
};

struct ProjectionMatrix {
  Eigen::MatrixXd matrix;
  std::vector<ProvenanceRecord> provenance;
  ProjectionMode mode = ProjectionMode::single;

  static ProjectionMatrix identity(Eigen::Index dim, ProjectionMode mode = ProjectionMode::single);
  Eigen::Index dim() const noexcept { return matrix.rows(); }
};

/// I - B^T B with B an orthonormal basis of the row space of `weights`.
/// A zero matrix yields the identity and a warning.
ProjectionMatrix nullspace_projection(const Eigen::MatrixXd& weights, Diagnostics* diagnostics = nullptr);

/// Rank of the row space used by nullspace_projection().
std::size_t numerical_rank(const Eigen::MatrixXd& weights);

struct InlpConfig {
  std::size_t max_iters = 25;
  double stop_margin = 0.01;
  std::uint64_t seed = 0;
  SgdConfig classifier;
};

/// Every classifier fit, including the final one that triggered the stop.
struct IterationLog {
  std::string property;
  std::size_t iteration = 0;
  double dev_accuracy = 0.0;
  double majority = 0.0;
  std::size_t classifier_rank = 0;
  bool projected = false;
};

/// Seed of the classifier for a property position and iteration. Shared by
/// both multi-property variants so they fit identical first classifiers.
std::uint64_t classifier_seed(std::uint64_t seed, std::size_t property_position, std::size_t iteration);

/// Iterative nullspace projection for one property. Stops when the dev
/// accuracy of a fresh classifier is within `stop_margin` of the dev
/// majority rate, or after `max_iters` compositions.
ProjectionMatrix inlp(const std::string& property, const LabeledSlice& train, const LabeledSlice& dev,
                      const InlpConfig& config, std::vector<IterationLog>* log = nullptr,
                      std::size_t property_position = 0);

enum class I2nlpVariant { regressive, non_regressive };

std::string_view to_string(I2nlpVariant variant);
I2nlpVariant variant_from_string(std::string_view text);

struct I2nlpConfig {
  InlpConfig inlp;
  bool drop_none = false;
  /// Worker cap for the independent per-property runs of the
  /// non-regressive variant.
  unsigned threads = 1;
};

/// Regressive: each property is erased from the vectors already projected
/// for the previous ones. Non-regressive: every property is erased from the
/// original vectors and the projections are multiplied so that the first
/// listed property is applied first.
ProjectionMatrix i2nlp(const LabeledDataset& train, const LabeledDataset& dev,
                       std::span<const std::string> properties, I2nlpVariant variant,
                       const I2nlpConfig& config, std::vector<IterationLog>* log = nullptr);

EmbeddingSpace apply_projection(const EmbeddingSpace& space, const ProjectionMatrix& projection);

/// Largest singular value.
double operator_norm(const Eigen::MatrixXd& m);

/// Throws if the matrix violates the invariants of its mode.
void validate_projection(const ProjectionMatrix& projection);

/// Orthonormal basis (columns) of the directions the projection sends to
/// (nearly) zero: right singular vectors with singular value below 0.5.
Eigen::MatrixXd erased_subspace(const Eigen::MatrixXd& projection);

/// Principal angles in degrees between the column spans of two orthonormal
/// bases; min(p, q) angles in ascending order.
std::vector<double> principal_angles_deg(const Eigen::MatrixXd& basis_a, const Eigen::MatrixXd& basis_b);

void save_projection(const ProjectionMatrix& projection, const std::filesystem::path& path);
/// Files without a mode header are treated as external projections and only
/// checked for being contractions.
ProjectionMatrix load_projection(const std::filesystem::path& path);

}  // namespace erasekit
