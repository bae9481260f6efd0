#include "erasekit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <fmt/format.h>

#include "text_util.hpp"

namespace erasekit {

Corpus::Corpus(std::vector<Sentence> sentences) : sentences_(std::move(sentences)) {
  for (std::size_t i = 0; i < sentences_.size(); ++i)
    if (!index_.emplace(sentences_[i].id, i).second)
      throw Error(fmt::format("duplicate sentence id '{}'", sentences_[i].id));
}

const Sentence* Corpus::find_sentence(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &sentences_[it->second];
}

const Token* Corpus::find_token(std::string_view sentence_id, std::size_t token_index) const {
  const Sentence* s = find_sentence(sentence_id);
  if (s == nullptr || token_index >= s->tokens.size()) return nullptr;
  return &s->tokens[token_index];
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences_) n += s.tokens.size();
  return n;
}

FeatMap parse_feats(std::string_view text) {
  FeatMap feats;
  if (text == "_" || text.empty()) return feats;
  for (auto item : detail::split(text, '|')) {
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size())
      throw Error(fmt::format("malformed feature '{}'", item));
    feats.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
  }
  return feats;
}

FeatMap merge_subword_tags(std::span<const FeatMap> feats, Diagnostics* diagnostics) {
  FeatMap merged;
  for (const auto& f : feats) {
    for (const auto& [key, value] : f) {
      const auto [it, inserted] = merged.emplace(key, value);
      if (!inserted && it->second != value && diagnostics != nullptr)
        diagnostics->warn(fmt::format("conflicting subword values for {}: kept {}, dropped {}", key,
                                      it->second, value));
    }
  }
  return merged;
}

namespace {

struct PendingRange {
  std::size_t first = 0;
  std::size_t last = 0;
  std::string surface;
  std::vector<std::string> lemmas;
  std::string upos;
  std::vector<FeatMap> feats;
};

}  // namespace

Corpus parse_conllu(std::istream& in, const std::string& source, Diagnostics* diagnostics) {
  std::vector<Sentence> sentences;
  Sentence current;
  std::optional<PendingRange> range;
  std::string line;
  std::size_t line_no = 0;
  std::size_t ordinal = 0;

  auto flush = [&] {
    if (range) throw ParseError(source, line_no, "multiword range not completed by its subwords");
    if (current.tokens.empty() && current.id.empty()) return;
    ++ordinal;
    if (current.id.empty()) current.id = std::to_string(ordinal);
    sentences.push_back(std::move(current));
    current = {};
  };

  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') {
      auto body = detail::trim(std::string_view(line).substr(1));
      if (body.starts_with("sent_id")) {
        const auto eq = body.find('=');
        if (eq != std::string_view::npos) current.id = std::string(detail::trim(body.substr(eq + 1)));
      }
      continue;
    }
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 10)
      throw ParseError(source, line_no, fmt::format("expected 10 tab-separated columns, found {}", cols.size()));
    const std::string_view id = cols[0];
    FeatMap feats;
    try {
      feats = parse_feats(cols[5]);
    } catch (const Error& e) {
      throw ParseError(source, line_no, e.what());
    }

    if (id.find('.') != std::string_view::npos) continue;  // empty node
    if (const auto dash = id.find('-'); dash != std::string_view::npos) {
      if (range) throw ParseError(source, line_no, "nested multiword range");
      const auto first = detail::parse_size(id.substr(0, dash));
      const auto last = detail::parse_size(id.substr(dash + 1));
      if (!first || !last || *last < *first) throw ParseError(source, line_no, fmt::format("bad range id '{}'", id));
      range = PendingRange{*first, *last, std::string(cols[1]), {}, {}, {}};
      continue;
    }
    const auto index = detail::parse_size(id);
    if (!index || *index == 0) throw ParseError(source, line_no, fmt::format("bad token id '{}'", id));
    if (cols[1].empty()) throw ParseError(source, line_no, "empty FORM");

    if (range) {
      if (*index < range->first || *index > range->last)
        throw ParseError(source, line_no, "token outside its multiword range");
      range->lemmas.emplace_back(cols[2]);
      if (range->upos.empty()) range->upos = std::string(cols[3]);
      range->feats.push_back(std::move(feats));
      if (*index == range->last) {
        Diagnostics local;
        Token merged{range->surface, {}, range->upos, merge_subword_tags(range->feats, &local)};
        for (std::size_t i = 0; i < range->lemmas.size(); ++i)
          merged.lemma += (i ? "+" : "") + range->lemmas[i];
        if (diagnostics)
          for (const auto& w : local.warnings())
            diagnostics->warn(fmt::format("{}:{}: {}", source, line_no, w));
        current.tokens.push_back(std::move(merged));
        range.reset();
      }
      continue;
    }
    current.tokens.push_back(Token{std::string(cols[1]), std::string(cols[2]), std::string(cols[3]), std::move(feats)});
  }
  flush();
  try {
    return Corpus(std::move(sentences));
  } catch (const Error& e) {
    throw ParseError(source, line_no, e.what());
  }
}

Corpus parse_conllu(const std::filesystem::path& path, Diagnostics* diagnostics) {
  auto in = detail::open_input(path);
  return parse_conllu(in, path.string(), diagnostics);
}

namespace {

const std::vector<std::size_t> kNoEntries;

}  // namespace

MorphLexicon::MorphLexicon(std::vector<LexEntry> entries, Diagnostics* diagnostics) {
  for (auto& e : entries) {
    if (e.lemma.empty() || e.form.empty() || e.tag.empty()) throw Error("lexicon entry with an empty field");
    if (!form_tag_.emplace(e.form, e.tag).second) {
      if (diagnostics) {
        for (auto i : by_form_.at(e.form))
          if (entries_[i].tag == e.tag && entries_[i].lemma != e.lemma)
            diagnostics->warn(fmt::format("form '{}' with tag {} listed under lemmas '{}' and '{}'; kept the first",
                                          e.form, e.tag, entries_[i].lemma, e.lemma));
      }
      continue;
    }
    const std::size_t i = entries_.size();
    by_lemma_[e.lemma].push_back(i);
    by_form_[e.form].push_back(i);
    entries_.push_back(std::move(e));
  }
}

std::optional<std::string> MorphLexicon::first_lemma(std::string_view form) const {
  const auto& idx = entries_of_form(form);
  if (idx.empty()) return std::nullopt;
  return entries_[idx.front()].lemma;
}

std::vector<std::string> MorphLexicon::lemmas_of(std::string_view form) const {
  std::vector<std::string> lemmas;
  for (auto i : entries_of_form(form))
    if (std::find(lemmas.begin(), lemmas.end(), entries_[i].lemma) == lemmas.end())
      lemmas.push_back(entries_[i].lemma);
  return lemmas;
}

bool MorphLexicon::has(std::string_view form, std::string_view tag) const {
  return form_tag_.contains({std::string(form), std::string(tag)});
}

const std::vector<std::size_t>& MorphLexicon::entries_of_lemma(std::string_view lemma) const {
  const auto it = by_lemma_.find(std::string(lemma));
  return it == by_lemma_.end() ? kNoEntries : it->second;
}

const std::vector<std::size_t>& MorphLexicon::entries_of_form(std::string_view form) const {
  const auto it = by_form_.find(std::string(form));
  return it == by_form_.end() ? kNoEntries : it->second;
}

MorphLexicon parse_unimorph(std::istream& in, const std::string& source, Diagnostics* diagnostics) {
  std::vector<LexEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 3)
      throw ParseError(source, line_no, fmt::format("expected 3 tab-separated columns, found {}", cols.size()));
    for (auto c : cols)
      if (c.empty()) throw ParseError(source, line_no, "empty lemma, form or tag");
    entries.push_back({std::string(cols[0]), std::string(cols[1]), std::string(cols[2])});
  }
  return MorphLexicon(std::move(entries), diagnostics);
}

MorphLexicon parse_unimorph(const std::filesystem::path& path, Diagnostics* diagnostics) {
  auto in = detail::open_input(path);
  return parse_unimorph(in, path.string(), diagnostics);
}

void write_unimorph(const MorphLexicon& lexicon, std::ostream& out) {
  for (const auto& e : lexicon.entries()) out << e.lemma << '\t' << e.form << '\t' << e.tag << '\n';
}

void GenderedWordlist::add_word(std::string_view word) { words.insert(detail::to_lower_ascii(word)); }

void GenderedWordlist::add_pair(std::string_view feminine, std::string_view masculine) {
  add_word(feminine);
  add_word(masculine);
  pairs.emplace_back(std::string(feminine), std::string(masculine));
}

bool GenderedWordlist::contains(std::string_view surface) const {
  return words.contains(detail::to_lower_ascii(surface));
}

GenderedWordlist read_wordlist(const std::filesystem::path& path) {
  GenderedWordlist list;
  for (const auto& w : detail::read_lines(path)) list.add_word(w);
  return list;
}

std::vector<std::pair<std::string, std::string>> read_pairs(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> pairs;
  auto in = detail::open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cols = detail::split_ws(t);
    if (cols.size() != 2) throw ParseError(path.string(), line_no, "expected 'feminine<TAB>masculine'");
    pairs.emplace_back(std::string(cols[0]), std::string(cols[1]));
  }
  return pairs;
}

LabeledDataset build_labeled_dataset(const EmbeddingSpace& space, const Corpus& corpus,
                                     std::span<const std::string> properties) {
  LabeledDataset data;
  data.vectors = space.vectors();
  data.keys = space.keys();
  data.groups.reserve(space.size());
  for (const auto& p : properties) data.labels.emplace_back(p, std::vector<std::string>{});

  std::vector<std::string> missing;
  for (const auto& key : space.keys()) {
    const Token* token = key.is_type() ? nullptr : corpus.find_token(key.sentence_id, key.token_index);
    if (token == nullptr) {
      missing.push_back(key.encode());
      continue;
    }
    data.groups.push_back(key.sentence_id);
    for (auto& [property, values] : data.labels) {
      const auto it = token->feats.find(property);
      values.push_back(it == token->feats.end() ? std::string(kNoneLabel) : it->second);
    }
  }
  if (!missing.empty()) throw UnresolvedError("space keys not found in the corpus", std::move(missing));
  return data;
}

EmbeddingSpace filter_gendered(const EmbeddingSpace& space, const Corpus* corpus,
                               const GenderedWordlist& wordlist) {
  if (wordlist.words.empty()) return space;
  std::unordered_set<std::string> flagged;
  if (corpus != nullptr) {
    for (const auto& s : corpus->sentences())
      for (const auto& t : s.tokens)
        if (wordlist.contains(t.surface)) {
          flagged.insert(s.id);
          break;
        }
  }
  for (const auto& key : space.keys())
    if (!key.is_type() && wordlist.contains(key.surface)) flagged.insert(key.sentence_id);

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& key = space.key(i);
    if (wordlist.contains(key.surface)) continue;
    if (!key.is_type() && flagged.contains(key.sentence_id)) continue;
    keep.push_back(i);
  }
  return space.subset(keep);
}

EmbeddingSpace average_by_type(const EmbeddingSpace& space) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < space.size(); ++i) {
    auto [it, inserted] = members.try_emplace(space.key(i).surface);
    if (inserted) order.push_back(space.key(i).surface);
    it->second.push_back(i);
  }
  std::vector<OccurrenceKey> keys;
  keys.reserve(order.size());
  Matrix vectors(static_cast<Eigen::Index>(order.size()), space.dim());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& rows = members.at(order[r]);
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(space.dim());
    for (auto i : rows) sum += space.vectors().row(static_cast<Eigen::Index>(i));
    vectors.row(static_cast<Eigen::Index>(r)) = sum / static_cast<double>(rows.size());
    keys.push_back(OccurrenceKey::type(order[r]));
  }
  return {std::move(keys), std::move(vectors)};
}

}  // namespace erasekit
