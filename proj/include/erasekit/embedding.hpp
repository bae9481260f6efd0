#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "erasekit/error.hpp"

namespace erasekit {

using Vector = Eigen::VectorXd;
/// Row-major so that each entry's vector is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// Identifies one vector in a space: a word occurrence in a sentence, or a
/// word type when sentence_id is empty.
struct OccurrenceKey {
  std::string surface;
  std::string sentence_id;
  std::size_t token_index = 0;

  static OccurrenceKey type(std::string surface) { return {std::move(surface), {}, 0}; }

  bool is_type() const noexcept { return sentence_id.empty(); }

  /// "surface" for type keys, "surface##sentence##index" otherwise.
  std::string encode() const;
  static OccurrenceKey decode(std::string_view text);

  friend bool operator==(const OccurrenceKey&, const OccurrenceKey&) = default;
};

struct OccurrenceKeyHash {
  std::size_t operator()(const OccurrenceKey& key) const noexcept;
};

/// Throws if a surface cannot be stored in the flat vector format.
void validate_surface(std::string_view surface);

/// Ordered, immutable set of keyed vectors. Vectors are stored as given
/// (unnormalized).
class EmbeddingSpace {
 public:
  EmbeddingSpace() = default;
  /// Validates dimensions, key uniqueness and finiteness.
  EmbeddingSpace(std::vector<OccurrenceKey> keys, Matrix vectors);

  std::size_t size() const noexcept { return keys_.size(); }
  Eigen::Index dim() const noexcept { return vectors_.cols(); }
  bool empty() const noexcept { return keys_.empty(); }

  const std::vector<OccurrenceKey>& keys() const noexcept { return keys_; }
  const OccurrenceKey& key(std::size_t i) const { return keys_.at(i); }
  const Matrix& vectors() const noexcept { return vectors_; }
  Vector vector(std::size_t i) const { return vectors_.row(static_cast<Eigen::Index>(i)).transpose(); }

  std::optional<std::size_t> find(const OccurrenceKey& key) const;
  /// Throws UnresolvedError if absent.
  std::size_t index_of(const OccurrenceKey& key) const;
  /// All entries whose surface equals `surface`, in entry order.
  std::vector<std::size_t> find_surface(std::string_view surface) const;

  EmbeddingSpace subset(std::span<const std::size_t> rows) const;
  /// Same keys, new vectors (rows must match).
  EmbeddingSpace with_vectors(Matrix vectors) const;

 private:
  std::vector<OccurrenceKey> keys_;
  Matrix vectors_;
  std::unordered_map<OccurrenceKey, std::size_t, OccurrenceKeyHash> index_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_surface_;
};

/// u.v / (|u||v|). Throws on zero vectors or length mismatch.
double cosine(VectorRef u, VectorRef v);

/// Coordinate-wise mean. Throws on an empty list or mixed dimensions.
Vector mean_vector(std::span<const Vector> vectors);

/// The k entries most cosine-similar to `query`, excluding the query itself.
/// Ties go to the earlier entry.
std::vector<OccurrenceKey> knn(const EmbeddingSpace& space, const OccurrenceKey& query, std::size_t k);

/// Exact cosine neighbor search over a fixed space. Rows are normalized once.
class NeighborIndex {
 public:
  explicit NeighborIndex(const EmbeddingSpace& space);

  /// Neighbors of entry `query` by index. `candidates`, when non-empty, masks
  /// which entries may be returned.
  std::vector<std::size_t> search(std::size_t query, std::size_t k,
                                  const std::vector<bool>& candidates = {}) const;

  /// Same as search() for many queries. Work is split into fixed blocks so
  /// the result does not depend on `threads`.
  std::vector<std::vector<std::size_t>> search_batch(std::span<const std::size_t> queries,
                                                     std::size_t k,
                                                     const std::vector<bool>& candidates = {},
                                                     unsigned threads = 1) const;

 private:
  std::vector<std::size_t> top_k(const double* scores, std::size_t query, std::size_t k,
                                 const std::vector<bool>& candidates) const;

  Matrix unit_;
};

EmbeddingSpace read_vectors(const std::filesystem::path& path);
void write_vectors(const EmbeddingSpace& space, const std::filesystem::path& path);

}  // namespace erasekit
