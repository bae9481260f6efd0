#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "erasekit/embedding.hpp"

namespace erasekit {

/// Label used for tokens where a property is not marked.
inline constexpr std::string_view kNoneLabel = "none";

/// Vectors with one categorical label each, for a single property. `groups`
/// holds the unit used for splitting (sentence id, or surface for types).
struct LabeledSlice {
  Matrix vectors;
  std::vector<std::string> labels;
  std::vector<std::string> groups;

  std::size_t size() const noexcept { return labels.size(); }
  LabeledSlice rows(std::span<const std::size_t> indices) const;
  /// Same rows with every vector replaced by P x.
  LabeledSlice projected(const Eigen::MatrixXd& projection) const;
};

/// Vectors with labels for several properties, aligned row by row.
struct LabeledDataset {
  Matrix vectors;
  std::vector<OccurrenceKey> keys;
  std::vector<std::string> groups;
  /// (property, labels) in the order the properties were requested.
  std::vector<std::pair<std::string, std::vector<std::string>>> labels;

  std::size_t size() const noexcept { return keys.size(); }
  bool has_property(std::string_view property) const;
  const std::vector<std::string>& property_labels(std::string_view property) const;

  /// One property's view. With drop_none, unmarked rows are left out.
  LabeledSlice slice(std::string_view property, bool drop_none = false) const;
  LabeledDataset rows(std::span<const std::size_t> indices) const;
  LabeledDataset projected(const Eigen::MatrixXd& projection) const;
};

enum class SplitPart : std::uint8_t { train, dev, test };

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
};

/// Assigns whole groups to train/dev/test after a seeded shuffle of the
/// distinct groups (in first-seen order). With at least three groups every
/// part receives one.
std::vector<SplitPart> split_by_group(std::span<const std::string> groups, SplitFractions fractions,
                                      std::uint64_t seed);

std::vector<std::size_t> rows_in(std::span<const SplitPart> split, SplitPart part);

/// Number of distinct labels.
std::size_t count_classes(std::span<const std::string> labels);

}  // namespace erasekit
