#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "erasekit/embedding.hpp"
#include "erasekit/error.hpp"

namespace erasekit {

/// Unit vector; its sign makes the first member of each pair project
/// positively on average.
struct GenderDirection {
  Vector direction;
};

/// Type-level vector of a surface: the mean of all its entries.
std::optional<Vector> surface_vector(const EmbeddingSpace& space, std::string_view surface);

/// First principal component of the pair-centered members of each pair
/// (i.e. of the difference vectors feminine - masculine, up to scale).
/// Pairs with an unresolvable member are skipped with a warning.
GenderDirection gender_direction(const EmbeddingSpace& space,
                                 std::span<const std::pair<std::string, std::string>> pairs,
                                 Diagnostics* diagnostics = nullptr);

/// x . direction for every entry.
std::vector<double> project_onto(const EmbeddingSpace& space, const GenderDirection& direction);

struct TaggedWord {
  OccurrenceKey key;
  double projection = 0.0;
};

/// The k most positive (feminine) and k most negative (masculine) entries,
/// each ordered by |projection| descending with ties in entry order.
struct BiasTagList {
  std::vector<TaggedWord> feminine;
  std::vector<TaggedWord> masculine;
  std::size_t k = 0;

  std::unordered_map<OccurrenceKey, double, OccurrenceKeyHash> projections() const;
};

BiasTagList tag_biased(const EmbeddingSpace& space, const GenderDirection& direction, std::size_t k);
BiasTagList tag_by_projection(const EmbeddingSpace& space, std::span<const double> projections, std::size_t k);

/// TSV with columns side, key, projection.
void write_tags(const BiasTagList& tags, const std::filesystem::path& path);
BiasTagList read_tags(const std::filesystem::path& path);

struct WeatConfig {
  /// Random re-partitions when the pooled target set exceeds 12 words.
  std::size_t permutations = 100000;
  std::uint64_t seed = 0;
};

struct WeatResult {
  double d = 0.0;
  double p_value = 1.0;
  std::size_t n_permutations = 0;
  bool exhaustive = false;
};

/// Effect size and one-sided permutation p-value from precomputed
/// differential associations s(w) of the X and Y targets.
WeatResult weat_from_associations(std::span<const double> s_x, std::span<const double> s_y,
                                  const WeatConfig& config = {});

/// Target sets are keys; attribute sets are surfaces resolved with
/// surface_vector().
WeatResult weat(const EmbeddingSpace& space, std::span<const OccurrenceKey> x, std::span<const OccurrenceKey> y,
                std::span<const std::string> a, std::span<const std::string> b, const WeatConfig& config = {});

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Pearson r with a two-sided p-value from the t distribution with n-2
/// degrees of freedom. Throws if either variable is constant.
Correlation pearson(std::span<const double> x, std::span<const double> y);

struct KnnBiasConfig {
  std::size_t k_neighbors = 100;
  /// Restrict neighbors to tagged words.
  bool neighbors_among_tagged = false;
  unsigned threads = 1;
};

struct KnnBiasResult {
  Correlation correlation;
  /// Per tagged word (feminine list first): share of its neighbors that are
  /// tagged feminine, and its bias value.
  std::vector<double> feminine_fraction;
  std::vector<double> bias;
};

/// Correlates each tagged word's bias with the share of feminine-tagged
/// words among its nearest neighbors in `space`. Bias values come from
/// `bias_values` (by default the tag-time projections on the original space).
KnnBiasResult knn_bias_correlation(const EmbeddingSpace& space, const BiasTagList& tags,
                                   const std::unordered_map<OccurrenceKey, double, OccurrenceKeyHash>& bias_values,
                                   const KnnBiasConfig& config = {});

}  // namespace erasekit
