#include "erasekit/bias.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include <Eigen/SVD>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "text_util.hpp"

namespace erasekit {

std::optional<Vector> surface_vector(const EmbeddingSpace& space, std::string_view surface) {
  const auto rows = space.find_surface(surface);
  if (rows.empty()) return std::nullopt;
  Vector sum = Vector::Zero(space.dim());
  for (auto r : rows) sum += space.vectors().row(static_cast<Eigen::Index>(r)).transpose();
  return Vector(sum / static_cast<double>(rows.size()));
}

GenderDirection gender_direction(const EmbeddingSpace& space,
                                 std::span<const std::pair<std::string, std::string>> pairs,
                                 Diagnostics* diagnostics) {
  std::vector<Vector> diffs;
  for (const auto& [fem, masc] : pairs) {
    const auto f = surface_vector(space, fem);
    const auto m = surface_vector(space, masc);
    if (!f || !m) {
      if (diagnostics) diagnostics->warn(fmt::format("gender pair ({}, {}) not in the space; skipped", fem, masc));
      continue;
    }
    diffs.push_back(*f - *m);
  }
  if (diffs.empty()) throw Error("no gender pair could be resolved in the embedding space");

  // Centering each pair on its own mean gives members +-(f - m)/2, so the
  // principal component is the top right singular vector of the differences.
  Eigen::MatrixXd centered(2 * static_cast<Eigen::Index>(diffs.size()), space.dim());
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    centered.row(2 * static_cast<Eigen::Index>(i)) = 0.5 * diffs[i].transpose();
    centered.row(2 * static_cast<Eigen::Index>(i) + 1) = -0.5 * diffs[i].transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  if (svd.singularValues()(0) == 0.0) throw Error("gender pairs have identical vectors; no direction");
  Vector direction = svd.matrixV().col(0).normalized();

  double orientation = 0.0;
  for (const auto& d : diffs) orientation += d.dot(direction);
  if (orientation < 0.0) direction = -direction;
  return {std::move(direction)};
}

std::vector<double> project_onto(const EmbeddingSpace& space, const GenderDirection& direction) {
  if (direction.direction.size() != space.dim()) throw Error("gender direction does not match the space dimension");
  const Eigen::VectorXd p = space.vectors() * direction.direction;
  return {p.data(), p.data() + p.size()};
}

std::unordered_map<OccurrenceKey, double, OccurrenceKeyHash> BiasTagList::projections() const {
  std::unordered_map<OccurrenceKey, double, OccurrenceKeyHash> out;
  for (const auto& t : feminine) out.emplace(t.key, t.projection);
  for (const auto& t : masculine) out.emplace(t.key, t.projection);
  return out;
}

BiasTagList tag_by_projection(const EmbeddingSpace& space, std::span<const double> projections, std::size_t k) {
  if (k == 0) throw Error("k must be positive");
  if (projections.size() != space.size()) throw Error("one projection per entry required");
  if (space.size() < 2 * k)
    throw Error(fmt::format("tagging k={} per side needs at least {} entries, space has {}", k, 2 * k, space.size()));

  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < projections.size(); ++i) {
    if (projections[i] > 0.0) pos.push_back(i);
    if (projections[i] < 0.0) neg.push_back(i);
  }
  if (pos.size() < k || neg.size() < k)
    throw Error(fmt::format("only {} positive and {} negative projections; achievable k is {}", pos.size(), neg.size(),
                            std::min(pos.size(), neg.size())));

  auto by_magnitude = [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(projections[a]);
    const double mb = std::abs(projections[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  };
  std::partial_sort(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(k), pos.end(), by_magnitude);
  std::partial_sort(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(k), neg.end(), by_magnitude);

  BiasTagList tags;
  tags.k = k;
  for (std::size_t i = 0; i < k; ++i) {
    tags.feminine.push_back({space.key(pos[i]), projections[pos[i]]});
    tags.masculine.push_back({space.key(neg[i]), projections[neg[i]]});
  }
  return tags;
}

BiasTagList tag_biased(const EmbeddingSpace& space, const GenderDirection& direction, std::size_t k) {
  const auto p = project_onto(space, direction);
  return tag_by_projection(space, p, k);
}

void write_tags(const BiasTagList& tags, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "side\tkey\tprojection\n";
  for (const auto& t : tags.feminine) out << fmt::format("feminine\t{}\t{:.17g}\n", t.key.encode(), t.projection);
  for (const auto& t : tags.masculine) out << fmt::format("masculine\t{}\t{:.17g}\n", t.key.encode(), t.projection);
  if (!out) throw Error("failed writing " + path.string());
}

BiasTagList read_tags(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  const std::string source = path.string();
  BiasTagList tags;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty() || line.front() == '#') continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 3) throw ParseError(source, line_no, "expected side, key and projection");
    if (cols[0] == "side") continue;
    const auto p = detail::parse_double(cols[2]);
    if (!p) throw ParseError(source, line_no, fmt::format("non-numeric projection '{}'", cols[2]));
    OccurrenceKey key;
    try {
      key = OccurrenceKey::decode(cols[1]);
    } catch (const Error& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (cols[0] == "feminine")
      tags.feminine.push_back({std::move(key), *p});
    else if (cols[0] == "masculine")
      tags.masculine.push_back({std::move(key), *p});
    else
      throw ParseError(source, line_no, fmt::format("unknown side '{}'", cols[0]));
  }
  if (tags.feminine.size() != tags.masculine.size())
    throw Error(fmt::format("{}: {} feminine and {} masculine tags", source, tags.feminine.size(), tags.masculine.size()));
  tags.k = tags.feminine.size();
  return tags;
}

WeatResult weat_from_associations(std::span<const double> s_x, std::span<const double> s_y, const WeatConfig& config) {
  if (s_x.empty() || s_y.empty()) throw Error("WEAT target sets must be non-empty");
  std::vector<double> pooled(s_x.begin(), s_x.end());
  pooled.insert(pooled.end(), s_y.begin(), s_y.end());
  const double n = static_cast<double>(pooled.size());
  const double mean_all = std::accumulate(pooled.begin(), pooled.end(), 0.0) / n;
  double var = 0.0;
  for (double v : pooled) var += (v - mean_all) * (v - mean_all);
  const double stdev = std::sqrt(var / n);
  if (!(stdev > 0.0)) throw Error("WEAT associations have zero spread; effect size undefined");

  const double sum_x = std::accumulate(s_x.begin(), s_x.end(), 0.0);
  const double sum_y = std::accumulate(s_y.begin(), s_y.end(), 0.0);
  WeatResult result;
  result.d = (sum_x / static_cast<double>(s_x.size()) - sum_y / static_cast<double>(s_y.size())) / stdev;

  // The test statistic sum_X s - sum_Y s is monotone in sum_X s for a fixed
  // pool, so re-partitions are compared on the sum of their X side.
  const double tolerance = 1e-12 * (1.0 + std::abs(sum_x));
  const std::size_t nx = s_x.size();
  std::size_t at_least = 0;
  if (pooled.size() <= 12) {
    const unsigned total = 1u << pooled.size();
    for (unsigned mask = 0; mask < total; ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != nx) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < pooled.size(); ++i)
        if (mask & (1u << i)) s += pooled[i];
      ++result.n_permutations;
      if (s >= sum_x - tolerance) ++at_least;
    }
    result.exhaustive = true;
  } else {
    if (config.permutations == 0) throw Error("permutation count must be positive");
    std::mt19937_64 rng(config.seed);
    std::vector<double> shuffled = pooled;
    for (std::size_t t = 0; t < config.permutations; ++t) {
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      const double s = std::accumulate(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(nx), 0.0);
      if (s >= sum_x - tolerance) ++at_least;
    }
    result.n_permutations = config.permutations;
  }
  result.p_value = static_cast<double>(at_least) / static_cast<double>(result.n_permutations);
  return result;
}

WeatResult weat(const EmbeddingSpace& space, std::span<const OccurrenceKey> x, std::span<const OccurrenceKey> y,
                std::span<const std::string> a, std::span<const std::string> b, const WeatConfig& config) {
  if (x.empty() || y.empty() || a.empty() || b.empty()) throw Error("WEAT needs four non-empty word sets");
  std::unordered_set<OccurrenceKey, OccurrenceKeyHash> xs(x.begin(), x.end());
  for (const auto& k : y)
    if (xs.contains(k)) throw Error(fmt::format("'{}' is in both target sets", k.encode()));

  std::vector<std::string> missing;
  auto resolve_attributes = [&](std::span<const std::string> words) {
    std::vector<Vector> out;
    for (const auto& w : words) {
      if (auto v = surface_vector(space, w))
        out.push_back(std::move(*v));
      else
        missing.push_back(w);
    }
    return out;
  };
  const auto va = resolve_attributes(a);
  const auto vb = resolve_attributes(b);
  for (const auto& k : x)
    if (!space.find(k)) missing.push_back(k.encode());
  for (const auto& k : y)
    if (!space.find(k)) missing.push_back(k.encode());
  if (!missing.empty()) throw UnresolvedError("WEAT words not in the embedding space", std::move(missing));

  auto association = [&](const OccurrenceKey& key) {
    const Vector w = space.vector(space.index_of(key));
    double sa = 0.0;
    for (const auto& v : va) sa += cosine(w, v);
    double sb = 0.0;
    for (const auto& v : vb) sb += cosine(w, v);
    return sa / static_cast<double>(va.size()) - sb / static_cast<double>(vb.size());
  };
  std::vector<double> s_x;
  std::vector<double> s_y;
  for (const auto& k : x) s_x.push_back(association(k));
  for (const auto& k : y) s_y.push_back(association(k));
  return weat_from_associations(s_x, s_y, config);
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("correlation of vectors with different lengths");
  if (x.size() < 3) throw Error("correlation needs at least 3 observations");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("correlation with a constant variable is undefined");
  Correlation c;
  c.n = x.size();
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = n - 2.0;
  if (std::abs(c.r) >= 1.0) {
    c.p_value = 0.0;
  } else {
    const double t = std::abs(c.r) * std::sqrt(df / (1.0 - c.r * c.r));
    const boost::math::students_t dist(df);
    c.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
  }
  return c;
}

KnnBiasResult knn_bias_correlation(const EmbeddingSpace& space, const BiasTagList& tags,
                                   const std::unordered_map<OccurrenceKey, double, OccurrenceKeyHash>& bias_values,
                                   const KnnBiasConfig& config) {
  if (config.k_neighbors == 0) throw Error("k must be positive");
  std::vector<std::size_t> queries;
  std::vector<std::string> missing;
  std::vector<bool> feminine(space.size(), false);
  std::vector<bool> tagged(space.size(), false);
  std::vector<double> bias;
  auto add = [&](const TaggedWord& t, bool is_feminine) {
    const auto idx = space.find(t.key);
    const auto b = bias_values.find(t.key);
    if (!idx || b == bias_values.end()) {
      missing.push_back(t.key.encode());
      return;
    }
    queries.push_back(*idx);
    feminine[*idx] = feminine[*idx] || is_feminine;
    tagged[*idx] = true;
    bias.push_back(b->second);
  };
  for (const auto& t : tags.feminine) add(t, true);
  for (const auto& t : tags.masculine) add(t, false);
  if (!missing.empty()) throw UnresolvedError("tagged words without a vector or bias value", std::move(missing));

  const NeighborIndex index(space);
  const auto neighbors = index.search_batch(queries, config.k_neighbors,
                                            config.neighbors_among_tagged ? tagged : std::vector<bool>{},
                                            config.threads);
  KnnBiasResult result;
  result.bias = std::move(bias);
  result.feminine_fraction.reserve(queries.size());
  for (const auto& nn : neighbors) {
    const auto fem = std::count_if(nn.begin(), nn.end(), [&](std::size_t j) { return feminine[j]; });
    result.feminine_fraction.push_back(static_cast<double>(fem) / static_cast<double>(config.k_neighbors));
  }
  result.correlation = pearson(result.feminine_fraction, result.bias);
  return result;
}

}  // namespace erasekit
