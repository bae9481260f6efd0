#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "erasekit/dataset.hpp"
#include "erasekit/embedding.hpp"
#include "erasekit/error.hpp"

namespace erasekit {

/// Universal Dependencies FEATS column, key -> value.
using FeatMap = std::map<std::string, std::string>;

struct Token {
  std::string surface;
  std::string lemma;
  std::string upos;
  FeatMap feats;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;
};

/// Parsed CoNLL-U file. Token positions are 0-based over surface tokens,
/// i.e. after multiword ranges are merged into one token.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Sentence> sentences);

  const std::vector<Sentence>& sentences() const noexcept { return sentences_; }
  const Sentence* find_sentence(std::string_view id) const;
  const Token* find_token(std::string_view sentence_id, std::size_t token_index) const;
  std::size_t token_count() const;

 private:
  std::vector<Sentence> sentences_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// "Gender=Masc|Number=Sing" -> map; "_" -> empty map.
FeatMap parse_feats(std::string_view text);

/// Union of subword features. On a conflicting value the first subword wins
/// and a warning is recorded.
FeatMap merge_subword_tags(std::span<const FeatMap> feats, Diagnostics* diagnostics = nullptr);

/// Sentences take their id from "# sent_id = ..." or, failing that, from
/// their 1-based position in the file.
Corpus parse_conllu(std::istream& in, const std::string& source, Diagnostics* diagnostics = nullptr);
Corpus parse_conllu(const std::filesystem::path& path, Diagnostics* diagnostics = nullptr);

struct LexEntry {
  std::string lemma;
  std::string form;
  std::string tag;

  friend bool operator==(const LexEntry&, const LexEntry&) = default;
};

/// Inflection lexicon with (form, tag) unique. Entry order is file order.
class MorphLexicon {
 public:
  MorphLexicon() = default;
  /// Drops repeated (form, tag) pairs, keeping the first; a differing lemma
  /// on a repeat is reported through `diagnostics`.
  explicit MorphLexicon(std::vector<LexEntry> entries, Diagnostics* diagnostics = nullptr);

  const std::vector<LexEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Lemma of the first entry listing `form`.
  std::optional<std::string> first_lemma(std::string_view form) const;
  /// Distinct lemmas listed for `form`.
  std::vector<std::string> lemmas_of(std::string_view form) const;
  bool has(std::string_view form, std::string_view tag) const;
  /// Indices of the entries of a lemma, in entry order.
  const std::vector<std::size_t>& entries_of_lemma(std::string_view lemma) const;
  const std::vector<std::size_t>& entries_of_form(std::string_view form) const;

 private:
  std::vector<LexEntry> entries_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_lemma_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_form_;
  std::set<std::pair<std::string, std::string>> form_tag_;
};

MorphLexicon parse_unimorph(std::istream& in, const std::string& source, Diagnostics* diagnostics = nullptr);
MorphLexicon parse_unimorph(const std::filesystem::path& path, Diagnostics* diagnostics = nullptr);
void write_unimorph(const MorphLexicon& lexicon, std::ostream& out);

/// Explicitly gendered vocabulary. Every pair member is also in `words`.
struct GenderedWordlist {
  std::set<std::string> words;
  /// (feminine, masculine)
  std::vector<std::pair<std::string, std::string>> pairs;

  void add_word(std::string_view word);
  void add_pair(std::string_view feminine, std::string_view masculine);
  bool contains(std::string_view surface) const;
};

/// One surface per line.
GenderedWordlist read_wordlist(const std::filesystem::path& path);
/// "feminine<TAB>masculine" per line. Pairs are kept in their original case.
std::vector<std::pair<std::string, std::string>> read_pairs(const std::filesystem::path& path);

/// One row per space entry; properties absent from a token's FEATS get the
/// "none" label. Throws UnresolvedError listing every key that does not
/// resolve to a corpus token.
LabeledDataset build_labeled_dataset(const EmbeddingSpace& space, const Corpus& corpus,
                                     std::span<const std::string> properties);

/// Drops gendered occurrences and every occurrence from a sentence that
/// contains a gendered word. Case-insensitive. `corpus` may be null, in which
/// case sentences are judged by the occurrences present in the space.
EmbeddingSpace filter_gendered(const EmbeddingSpace& space, const Corpus* corpus,
                               const GenderedWordlist& wordlist);

/// One type-level entry per surface, averaged over its occurrences, in
/// order of first occurrence.
EmbeddingSpace average_by_type(const EmbeddingSpace& space);

}  // namespace erasekit
