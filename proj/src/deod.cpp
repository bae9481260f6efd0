#include "erasekit/deod.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "erasekit/bias.hpp"
#include "text_util.hpp"

namespace erasekit {

namespace {

/// Resolvable vocabulary of the lexicon with unit vectors.
struct GenerationIndex {
  std::unordered_map<std::string, Vector> unit;
  std::vector<std::size_t> entries;  // lexicon entries with a vector
  std::unordered_map<std::string, std::vector<std::string>> forms_by_tag;
};

GenerationIndex build_index(const MorphLexicon& lexicon, const EmbeddingSpace& space) {
  GenerationIndex idx;
  for (std::size_t i = 0; i < lexicon.size(); ++i) {
    const auto& e = lexicon.entries()[i];
    auto it = idx.unit.find(e.form);
    if (it == idx.unit.end()) {
      auto v = surface_vector(space, e.form);
      if (!v || v->norm() == 0.0) continue;
      it = idx.unit.emplace(e.form, v->normalized()).first;
    }
    idx.entries.push_back(i);
    idx.forms_by_tag[e.tag].push_back(e.form);
  }
  return idx;
}

bool has_lemma(const MorphLexicon& lexicon, const std::string& form, const std::string& lemma) {
  for (auto i : lexicon.entries_of_form(form))
    if (lexicon.entries()[i].lemma == lemma) return true;
  return false;
}

}  // namespace

std::vector<Quadruple> generate_quadruples(const MorphLexicon& lexicon, const EmbeddingSpace& static_space,
                                           std::size_t n, const GenerationConfig& config) {
  if (n == 0) throw Error("number of quadruples must be positive");
  if (!(config.dissimilar_percentile > 0.0 && config.dissimilar_percentile <= 1.0))
    throw Error("dissimilar percentile must be in (0, 1]");
  const GenerationIndex idx = build_index(lexicon, static_space);
  if (idx.entries.empty()) throw Error("no lexicon form has a vector in the static space");

  // A morphological outlier needs a lemma with a second resolvable tag.
  bool any_multi = false;
  {
    std::unordered_map<std::string, std::set<std::string>> tags_of_lemma;
    for (auto i : idx.entries) tags_of_lemma[lexicon.entries()[i].lemma].insert(lexicon.entries()[i].tag);
    for (const auto& [_, tags] : tags_of_lemma) any_multi = any_multi || tags.size() > 1;
  }
  if (!any_multi) throw Error("no lemma has forms under two tags; no morphological outlier can be built");

  const std::size_t budget = config.retry_budget ? config.retry_budget : std::max<std::size_t>(1000, 100 * n);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick_entry(0, idx.entries.size() - 1);
  std::bernoulli_distribution coin(0.5);

  std::vector<Quadruple> accepted;
  std::set<std::array<std::string, 4>> seen;
  std::size_t draws = 0;
  while (accepted.size() < n) {
    if (draws++ >= budget)
      throw Error(fmt::format("generated only {} of {} quadruples within {} draws", accepted.size(), n, budget));

    const LexEntry& anchor = lexicon.entries()[idx.entries[pick_entry(rng)]];
    const Vector& anchor_vec = idx.unit.at(anchor.form);

    struct Candidate {
      std::string form;
      double cos;
      std::size_t order;
    };
    std::vector<Candidate> candidates;
    std::set<std::string> listed;
    for (const auto& form : idx.forms_by_tag.at(anchor.tag)) {
      if (form == anchor.form || !listed.insert(form).second) continue;
      if (config.exclude_same_lemma && has_lemma(lexicon, form, anchor.lemma)) continue;
      candidates.push_back({form, idx.unit.at(form).dot(anchor_vec), candidates.size()});
    }
    if (candidates.size() < 3) continue;

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.cos != b.cos) return a.cos > b.cos;
      return a.order < b.order;
    });
    const std::array<std::string, 2> similar = {candidates[0].form, candidates[1].form};

    // Remaining candidates, least similar first.
    std::vector<Candidate> pool(candidates.begin() + 2, candidates.end());
    std::reverse(pool.begin(), pool.end());
    const auto bottom = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(config.dissimilar_percentile * static_cast<double>(pool.size()))));
    std::uniform_int_distribution<std::size_t> pick_outlier(0, std::min(bottom, pool.size()) - 1);
    const std::string sem_outlier = pool[pick_outlier(rng)].form;

    const bool replace_first = coin(rng);
    const std::string& replaced = similar[replace_first ? 0 : 1];
    const std::string& sibling = similar[replace_first ? 1 : 0];

    std::string lemma;
    for (auto i : lexicon.entries_of_form(replaced))
      if (lexicon.entries()[i].tag == anchor.tag) {
        lemma = lexicon.entries()[i].lemma;
        break;
      }
    std::vector<std::string> target_tags;
    for (auto i : lexicon.entries_of_lemma(lemma)) {
      const auto& e = lexicon.entries()[i];
      if (e.tag == anchor.tag || !idx.unit.contains(e.form)) continue;
      if (std::find(target_tags.begin(), target_tags.end(), e.tag) == target_tags.end()) target_tags.push_back(e.tag);
    }
    if (target_tags.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick_tag(0, target_tags.size() - 1);
    const std::string target_tag = target_tags[pick_tag(rng)];
    std::string morph_form;
    for (auto i : lexicon.entries_of_lemma(lemma)) {
      const auto& e = lexicon.entries()[i];
      if (e.tag == target_tag && idx.unit.contains(e.form)) {
        morph_form = e.form;
        break;
      }
    }

    Quadruple q{anchor.form, sibling, {morph_form, lemma, anchor.tag, target_tag}, sem_outlier, anchor.tag};
    auto surfaces = q.surfaces();
    const std::set<std::string> distinct(surfaces.begin(), surfaces.end());
    if (distinct.size() != 4) continue;
    if (lexicon.has(morph_form, anchor.tag)) continue;  // ambiguous form, not an outlier
    std::sort(surfaces.begin(), surfaces.end());
    if (!seen.insert(surfaces).second) continue;
    accepted.push_back(std::move(q));
  }
  return accepted;
}

std::size_t QuadrupleRanking::position_of(std::size_t item) const {
  for (std::size_t p = 0; p < 4; ++p)
    if (order[p] == item) return p;
  throw Error("item not in ranking");
}

QuadrupleRanking score_quadruple(std::span<const Vector, 4> vectors) {
  double cos[4][4];
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) cos[i][j] = cos[j][i] = cosine(vectors[i], vectors[j]);

  QuadrupleRanking ranking;
  for (std::size_t w = 0; w < 4; ++w) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j)
        if (i != w && j != w) sum += cos[i][j];
    ranking.scores[w] = sum / 3.0;
  }
  std::iota(ranking.order.begin(), ranking.order.end(), std::size_t{0});
  std::stable_sort(ranking.order.begin(), ranking.order.end(),
                   [&](std::size_t a, std::size_t b) { return ranking.scores[a] > ranking.scores[b]; });
  return ranking;
}

namespace {

struct ScoreAccumulator {
  std::size_t n = 0;
  std::size_t skipped = 0;
  double sem_hit = 0, morph_hit = 0, sem_opp = 0, morph_opp = 0;

  void add(const QuadrupleRanking& r) {
    ++n;
    sem_hit += r.predicted() == kSemOutlier ? 1.0 : 0.0;
    morph_hit += r.predicted() == kMorphOutlier ? 1.0 : 0.0;
    sem_opp += 1.0 - static_cast<double>(r.position_of(kSemOutlier)) / 3.0;
    morph_opp += 1.0 - static_cast<double>(r.position_of(kMorphOutlier)) / 3.0;
  }

  DeodScore finish() const {
    if (n == 0) throw Error(fmt::format("no scorable quadruples ({} skipped)", skipped));
    const double scale = 100.0 / static_cast<double>(n);
    return {sem_hit * scale, morph_hit * scale, sem_opp * scale, morph_opp * scale, n, skipped};
  }
};

}  // namespace

DeodScore score_dataset(std::span<const Quadruple> quadruples, const EmbeddingSpace& space) {
  ScoreAccumulator acc;
  std::unordered_map<std::string, std::optional<Vector>> cache;
  auto lookup = [&](const std::string& s) -> const std::optional<Vector>& {
    auto it = cache.find(s);
    if (it == cache.end()) it = cache.emplace(s, surface_vector(space, s)).first;
    return it->second;
  };
  for (const auto& q : quadruples) {
    std::array<Vector, 4> v;
    bool ok = true;
    const auto surfaces = q.surfaces();
    for (std::size_t i = 0; i < 4 && ok; ++i) {
      const auto& found = lookup(surfaces[i]);
      ok = found.has_value() && found->norm() > 0.0;
      if (ok) v[i] = *found;
    }
    if (!ok) {
      ++acc.skipped;
      continue;
    }
    acc.add(score_quadruple(v));
  }
  return acc.finish();
}

DeodScore lemma_skyline(std::span<const Quadruple> quadruples, const EmbeddingSpace& space,
                        const MorphLexicon& lexicon, Diagnostics* diagnostics) {
  ScoreAccumulator acc;
  std::set<std::string> warned;
  for (const auto& q : quadruples) {
    std::array<Vector, 4> v;
    bool ok = true;
    const auto surfaces = q.surfaces();
    for (std::size_t i = 0; i < 4 && ok; ++i) {
      const auto lemmas = lexicon.lemmas_of(surfaces[i]);
      if (lemmas.empty()) {
        ok = false;
        break;
      }
      if (lemmas.size() > 1 && diagnostics && warned.insert(surfaces[i]).second)
        diagnostics->warn(fmt::format("'{}' has {} lemmas; using '{}'", surfaces[i], lemmas.size(), lemmas.front()));
      auto lv = surface_vector(space, lemmas.front());
      ok = lv.has_value() && lv->norm() > 0.0;
      if (ok) v[i] = std::move(*lv);
    }
    if (!ok) {
      ++acc.skipped;
      continue;
    }
    acc.add(score_quadruple(v));
  }
  return acc.finish();
}

void write_quadruples(std::span<const Quadruple> quadruples, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "# anchor\tsibling\tmorph_outlier\tsem_outlier\tshared_tag\ttarget_tag\n";
  for (const auto& q : quadruples)
    out << q.anchor << '\t' << q.sibling << '\t' << q.morph_outlier.surface << '\t' << q.sem_outlier << '\t'
        << q.shared_tag << '\t' << q.morph_outlier.target_tag << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<Quadruple> read_quadruples(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<Quadruple> quads;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty() || line.front() == '#') continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 6) throw ParseError(path.string(), line_no, fmt::format("expected 6 columns, found {}", cols.size()));
    for (auto c : cols)
      if (c.empty()) throw ParseError(path.string(), line_no, "empty field");
    Quadruple q;
    q.anchor = cols[0];
    q.sibling = cols[1];
    q.morph_outlier = {std::string(cols[2]), {}, std::string(cols[4]), std::string(cols[5])};
    q.sem_outlier = cols[3];
    q.shared_tag = cols[4];
    quads.push_back(std::move(q));
  }
  return quads;
}

}  // namespace erasekit
