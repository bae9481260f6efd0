#include "erasekit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

namespace erasekit {

namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), m.cols());
  for (std::size_t r = 0; r < indices.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(indices[r]));
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(v.at(i));
  return out;
}

}  // namespace

LabeledSlice LabeledSlice::rows(std::span<const std::size_t> indices) const {
  return {gather_rows(vectors, indices), gather(labels, indices), gather(groups, indices)};
}

LabeledSlice LabeledSlice::projected(const Eigen::MatrixXd& projection) const {
  if (projection.rows() != vectors.cols() || projection.cols() != vectors.cols())
    throw Error("projection does not match the data dimension");
  return {vectors * projection.transpose(), labels, groups};
}

bool LabeledDataset::has_property(std::string_view property) const {
  return std::any_of(labels.begin(), labels.end(), [&](const auto& p) { return p.first == property; });
}

const std::vector<std::string>& LabeledDataset::property_labels(std::string_view property) const {
  for (const auto& [name, values] : labels)
    if (name == property) return values;
  throw Error(fmt::format("property '{}' not in dataset", property));
}

LabeledSlice LabeledDataset::slice(std::string_view property, bool drop_none) const {
  const auto& values = property_labels(property);
  if (!drop_none) return {vectors, values, groups};
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] != kNoneLabel) keep.push_back(i);
  return {gather_rows(vectors, keep), gather(values, keep), gather(groups, keep)};
}

LabeledDataset LabeledDataset::rows(std::span<const std::size_t> indices) const {
  LabeledDataset out{gather_rows(vectors, indices), gather(keys, indices), gather(groups, indices), {}};
  for (const auto& [name, values] : labels) out.labels.emplace_back(name, gather(values, indices));
  return out;
}

LabeledDataset LabeledDataset::projected(const Eigen::MatrixXd& projection) const {
  if (projection.rows() != vectors.cols() || projection.cols() != vectors.cols())
    throw Error("projection does not match the data dimension");
  LabeledDataset out = *this;
  out.vectors = vectors * projection.transpose();
  return out;
}

std::vector<SplitPart> split_by_group(std::span<const std::string> groups, SplitFractions fractions,
                                      std::uint64_t seed) {
  if (fractions.train < 0 || fractions.dev < 0 || fractions.train + fractions.dev > 1.0 + 1e-12)
    throw Error("split fractions must be non-negative and sum to at most 1");
  std::vector<std::string> distinct;
  std::unordered_map<std::string, std::size_t> position;
  for (const auto& g : groups)
    if (position.emplace(g, distinct.size()).second) distinct.push_back(g);

  std::vector<std::size_t> order(distinct.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t g = distinct.size();
  auto n_train = static_cast<std::size_t>(std::llround(fractions.train * static_cast<double>(g)));
  auto n_dev = static_cast<std::size_t>(std::llround(fractions.dev * static_cast<double>(g)));
  if (g >= 3) {
    n_train = std::clamp<std::size_t>(n_train, 1, g - 2);
    n_dev = std::clamp<std::size_t>(n_dev, 1, g - n_train - 1);
  } else {
    n_train = std::min(n_train, g);
    n_dev = std::min(n_dev, g - n_train);
  }

  std::vector<SplitPart> part_of_group(g, SplitPart::test);
  for (std::size_t r = 0; r < g; ++r) {
    if (r < n_train)
      part_of_group[order[r]] = SplitPart::train;
    else if (r < n_train + n_dev)
      part_of_group[order[r]] = SplitPart::dev;
  }
  std::vector<SplitPart> out;
  out.reserve(groups.size());
  for (const auto& gname : groups) out.push_back(part_of_group[position.at(gname)]);
  return out;
}

std::vector<std::size_t> rows_in(std::span<const SplitPart> split, SplitPart part) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == part) rows.push_back(i);
  return rows;
}

std::size_t count_classes(std::span<const std::string> labels) {
  return std::set<std::string>(labels.begin(), labels.end()).size();
}

}  // namespace erasekit
