#include "erasekit/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "text_util.hpp"

namespace erasekit {

namespace {

constexpr std::string_view kKeySep = "##";
constexpr std::size_t kQueryBlock = 64;

}  // namespace

void validate_surface(std::string_view surface) {
  if (surface.empty()) throw Error("empty surface");
  if (surface.find(kKeySep) != std::string_view::npos)
    throw Error(fmt::format("surface '{}' contains the reserved separator '##'", surface));
  if (surface.find_first_of(" \t\r\n") != std::string_view::npos)
    throw Error(fmt::format("surface '{}' contains whitespace", surface));
}

std::string OccurrenceKey::encode() const {
  if (is_type()) return surface;
  return fmt::format("{}##{}##{}", surface, sentence_id, token_index);
}

OccurrenceKey OccurrenceKey::decode(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(kKeySep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      break;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + kKeySep.size();
  }
  if (parts.size() == 1) {
    validate_surface(parts[0]);
    return type(std::string(parts[0]));
  }
  if (parts.size() != 3) throw Error(fmt::format("malformed key '{}'", text));
  validate_surface(parts[0]);
  if (parts[1].empty()) throw Error(fmt::format("key '{}' has an empty sentence id", text));
  const auto index = detail::parse_size(parts[2]);
  if (!index) throw Error(fmt::format("key '{}' has a non-numeric token index", text));
  return {std::string(parts[0]), std::string(parts[1]), *index};
}

std::size_t OccurrenceKeyHash::operator()(const OccurrenceKey& key) const noexcept {
  std::size_t h = std::hash<std::string>{}(key.surface);
  h ^= std::hash<std::string>{}(key.sentence_id) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= std::hash<std::size_t>{}(key.token_index) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

EmbeddingSpace::EmbeddingSpace(std::vector<OccurrenceKey> keys, Matrix vectors)
    : keys_(std::move(keys)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(keys_.size()) != vectors_.rows())
    throw Error(fmt::format("{} keys for {} vectors", keys_.size(), vectors_.rows()));
  if (!keys_.empty() && vectors_.cols() <= 0) throw Error("vector dimension must be positive");
  if (!vectors_.allFinite()) throw Error("embedding space contains non-finite values");
  index_.reserve(keys_.size());
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    validate_surface(keys_[i].surface);
    if (!index_.emplace(keys_[i], i).second)
      throw Error(fmt::format("duplicate key '{}'", keys_[i].encode()));
    by_surface_[keys_[i].surface].push_back(i);
  }
}

std::optional<std::size_t> EmbeddingSpace::find(const OccurrenceKey& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingSpace::index_of(const OccurrenceKey& key) const {
  if (auto i = find(key)) return *i;
  throw UnresolvedError("key not in embedding space", {key.encode()});
}

std::vector<std::size_t> EmbeddingSpace::find_surface(std::string_view surface) const {
  const auto it = by_surface_.find(std::string(surface));
  if (it == by_surface_.end()) return {};
  return it->second;
}

EmbeddingSpace EmbeddingSpace::subset(std::span<const std::size_t> rows) const {
  std::vector<OccurrenceKey> keys;
  keys.reserve(rows.size());
  Matrix vectors(static_cast<Eigen::Index>(rows.size()), dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    keys.push_back(keys_.at(rows[r]));
    vectors.row(static_cast<Eigen::Index>(r)) = vectors_.row(static_cast<Eigen::Index>(rows[r]));
  }
  return {std::move(keys), std::move(vectors)};
}

EmbeddingSpace EmbeddingSpace::with_vectors(Matrix vectors) const {
  return {keys_, std::move(vectors)};
}

double cosine(VectorRef u, VectorRef v) {
  if (u.size() != v.size())
    throw Error(fmt::format("cosine of vectors with lengths {} and {}", u.size(), v.size()));
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw Error("cosine of a zero vector");
  const double c = u.dot(v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

Vector mean_vector(std::span<const Vector> vectors) {
  if (vectors.empty()) throw Error("mean of an empty vector list");
  Vector sum = Vector::Zero(vectors.front().size());
  for (const auto& v : vectors) {
    if (v.size() != sum.size()) throw Error("mean of vectors with different dimensions");
    sum += v;
  }
  return sum / static_cast<double>(vectors.size());
}

NeighborIndex::NeighborIndex(const EmbeddingSpace& space) : unit_(space.vectors()) {
  for (Eigen::Index i = 0; i < unit_.rows(); ++i) {
    const double n = unit_.row(i).norm();
    if (n == 0.0)
      throw Error(fmt::format("zero vector for '{}' in neighbor search",
                              space.key(static_cast<std::size_t>(i)).encode()));
    unit_.row(i) /= n;
  }
}

std::vector<std::size_t> NeighborIndex::top_k(const double* scores, std::size_t query, std::size_t k,
                                              const std::vector<bool>& candidates) const {
  const auto n = static_cast<std::size_t>(unit_.rows());
  std::vector<std::size_t> pool;
  pool.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == query) continue;
    if (!candidates.empty() && !candidates[j]) continue;
    pool.push_back(j);
  }
  if (k > pool.size())
    throw Error(fmt::format("k={} exceeds the {} available neighbors", k, pool.size()));
  auto better = [scores](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end(), better);
  pool.resize(k);
  return pool;
}

std::vector<std::size_t> NeighborIndex::search(std::size_t query, std::size_t k,
                                               const std::vector<bool>& candidates) const {
  const std::size_t q[] = {query};
  return std::move(search_batch(q, k, candidates, 1).front());
}

std::vector<std::vector<std::size_t>> NeighborIndex::search_batch(
    std::span<const std::size_t> queries, std::size_t k, const std::vector<bool>& candidates,
    unsigned threads) const {
  const auto n = static_cast<std::size_t>(unit_.rows());
  if (!candidates.empty() && candidates.size() != n)
    throw Error("candidate mask does not match the space size");
  for (auto q : queries)
    if (q >= n) throw Error(fmt::format("query index {} out of range", q));

  std::vector<std::vector<std::size_t>> results(queries.size());
  const std::size_t blocks = (queries.size() + kQueryBlock - 1) / kQueryBlock;

  auto run_block = [&](std::size_t b) {
    const std::size_t begin = b * kQueryBlock;
    const std::size_t end = std::min(queries.size(), begin + kQueryBlock);
    Matrix block(static_cast<Eigen::Index>(end - begin), unit_.cols());
    for (std::size_t i = begin; i < end; ++i)
      block.row(static_cast<Eigen::Index>(i - begin)) = unit_.row(static_cast<Eigen::Index>(queries[i]));
    // Scores for one query are contiguous.
    const Matrix scores = block * unit_.transpose();
    for (std::size_t i = begin; i < end; ++i)
      results[i] = top_k(scores.row(static_cast<Eigen::Index>(i - begin)).data(), queries[i], k, candidates);
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(blocks, 1))));
  if (threads == 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    return results;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t b = t; b < blocks; b += threads) run_block(b);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

std::vector<OccurrenceKey> knn(const EmbeddingSpace& space, const OccurrenceKey& query, std::size_t k) {
  if (k == 0) throw Error("k must be positive");
  const std::size_t q = space.index_of(query);
  if (k + 1 > space.size())
    throw Error(fmt::format("k={} needs at least {} entries, space has {}", k, k + 1, space.size()));
  const NeighborIndex index(space);
  std::vector<OccurrenceKey> out;
  for (auto j : index.search(q, k)) out.push_back(space.key(j));
  return out;
}

EmbeddingSpace read_vectors(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  const std::string source = path.string();
  std::string line;
  std::size_t line_no = 0;

  std::size_t n = 0;
  std::size_t d = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_ws(line);
    if (fields.size() != 2) throw ParseError(source, line_no, "header must be 'n d'");
    const auto pn = detail::parse_size(fields[0]);
    const auto pd = detail::parse_size(fields[1]);
    if (!pn || !pd || *pd == 0) throw ParseError(source, line_no, "header must be 'n d' with d > 0");
    n = *pn;
    d = *pd;
    break;
  }
  if (d == 0) throw ParseError(source, line_no, "missing header");

  std::vector<OccurrenceKey> keys;
  keys.reserve(n);
  Matrix vectors(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::unordered_map<OccurrenceKey, std::size_t, OccurrenceKeyHash> seen;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_ws(line);
    if (fields.size() != d + 1)
      throw ParseError(source, line_no,
                       fmt::format("expected key and {} values, found {} fields", d, fields.size()));
    if (keys.size() == n) throw ParseError(source, line_no, fmt::format("more than {} entries", n));
    OccurrenceKey key;
    try {
      key = OccurrenceKey::decode(fields[0]);
    } catch (const Error& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (!seen.emplace(key, line_no).second)
      throw ParseError(source, line_no, fmt::format("duplicate key '{}'", fields[0]));
    const auto row = static_cast<Eigen::Index>(keys.size());
    for (std::size_t j = 0; j < d; ++j) {
      const auto v = detail::parse_double(fields[j + 1]);
      if (!v) throw ParseError(source, line_no, fmt::format("non-numeric value '{}'", fields[j + 1]));
      if (!std::isfinite(*v)) throw ParseError(source, line_no, "non-finite value");
      vectors(row, static_cast<Eigen::Index>(j)) = *v;
    }
    keys.push_back(std::move(key));
  }
  if (keys.size() != n)
    throw ParseError(source, line_no, fmt::format("header announces {} entries, found {}", n, keys.size()));
  return {std::move(keys), std::move(vectors)};
}

void write_vectors(const EmbeddingSpace& space, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "{} {}\n", space.size(), space.dim());
  for (std::size_t i = 0; i < space.size(); ++i) {
    fmt::format_to(std::back_inserter(buf), "{}", space.key(i).encode());
    for (Eigen::Index j = 0; j < space.dim(); ++j)
      fmt::format_to(std::back_inserter(buf), " {:.17g}", space.vectors()(static_cast<Eigen::Index>(i), j));
    buf.push_back('\n');
    if (buf.size() > (1 << 20)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace erasekit
