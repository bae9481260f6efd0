#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "erasekit/corpus.hpp"
#include "erasekit/embedding.hpp"
#include "erasekit/error.hpp"

namespace erasekit {

struct MorphOutlier {
  std::string surface;
  std::string lemma;
  std::string source_tag;
  std::string target_tag;
};

/// Three words sharing a feature bundle, one of them semantically unrelated
/// (sem_outlier), plus a re-inflected relative of the anchor (morph_outlier).
struct Quadruple {
  std::string anchor;
  std::string sibling;
  MorphOutlier morph_outlier;
  std::string sem_outlier;
  std::string shared_tag;

  /// Field order: anchor, sibling, morph_outlier, sem_outlier.
  std::array<std::string, 4> surfaces() const {
    return {anchor, sibling, morph_outlier.surface, sem_outlier};
  }
};

inline constexpr std::size_t kAnchor = 0;
inline constexpr std::size_t kSibling = 1;
inline constexpr std::size_t kMorphOutlier = 2;
inline constexpr std::size_t kSemOutlier = 3;

struct GenerationConfig {
  /// Semantic outliers are drawn from the same-tag forms whose cosine to the
  /// anchor lies in this bottom fraction.
  double dissimilar_percentile = 0.5;
  std::uint64_t seed = 0;
  /// Keep forms of the anchor's lemma out of the similar-word search.
  bool exclude_same_lemma = true;
  /// Candidate draws before giving up; 0 means max(1000, 100 n).
  std::size_t retry_budget = 0;
};

/// Samples exactly n distinct quadruples. Throws with the progress count if
/// the lexicon cannot supply them within the retry budget.
std::vector<Quadruple> generate_quadruples(const MorphLexicon& lexicon, const EmbeddingSpace& static_space,
                                           std::size_t n, const GenerationConfig& config = {});

/// Items ordered from most to least outlier-like. An item's score is the
/// mean pairwise cosine of the other three.
struct QuadrupleRanking {
  std::array<std::size_t, 4> order{};
  std::array<double, 4> scores{};

  std::size_t predicted() const noexcept { return order[0]; }
  std::size_t position_of(std::size_t item) const;
};

QuadrupleRanking score_quadruple(std::span<const Vector, 4> vectors);

/// Percentages in [0, 100]. OPP gives an item 100 * (1 - position / 3).
struct DeodScore {
  double sem_hard = 0.0;
  double morph_hard = 0.0;
  double sem_opp = 0.0;
  double morph_opp = 0.0;
  std::size_t n = 0;
  std::size_t skipped = 0;
};

/// Quadruples with a surface missing from `space` are skipped and counted.
DeodScore score_dataset(std::span<const Quadruple> quadruples, const EmbeddingSpace& space);

/// Scores with every surface replaced by the vector of its first lexicon
/// lemma. Ambiguous lemmas are reported through `diagnostics`.
DeodScore lemma_skyline(std::span<const Quadruple> quadruples, const EmbeddingSpace& space,
                        const MorphLexicon& lexicon, Diagnostics* diagnostics = nullptr);

/// TSV: anchor, sibling, morph_outlier, sem_outlier, shared_tag, target_tag.
void write_quadruples(std::span<const Quadruple> quadruples, const std::filesystem::path& path);
std::vector<Quadruple> read_quadruples(const std::filesystem::path& path);

}  // namespace erasekit
