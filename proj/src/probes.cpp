#include "erasekit/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "text_util.hpp"

namespace erasekit {

namespace {

std::vector<std::string> sorted_classes(std::span<const std::string> labels) {
  const std::set<std::string> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

std::vector<std::size_t> class_indices(std::span<const std::string> labels, const std::vector<std::string>& classes) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t c = 0; c < classes.size(); ++c) pos.emplace(classes[c], c);
  std::vector<std::size_t> y;
  y.reserve(labels.size());
  for (const auto& l : labels) y.push_back(pos.at(l));
  return y;
}

void check_data(const LabeledSlice& data) {
  if (static_cast<Eigen::Index>(data.labels.size()) != data.vectors.rows())
    throw Error("label count does not match the number of vectors");
  if (data.labels.empty()) throw Error("no training data");
}

}  // namespace

std::size_t LinearModel::predict_index(VectorRef x) const {
  if (x.size() != weights.cols()) throw Error("input dimension does not match the model");
  if (uses_sign_rule()) return weights.row(0).dot(x) + bias(0) > 0.0 ? 1 : 0;
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < weights.rows(); ++c) {
    const double s = weights.row(c).dot(x) + bias(c);
    if (s > best_score) {
      best_score = s;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

std::vector<std::string> LinearModel::predict(const Matrix& vectors) const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(vectors.rows()));
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) out.push_back(classes[predict_index(vectors.row(i).transpose())]);
  return out;
}

LinearModel train_perceptron(const LabeledSlice& data, const PerceptronConfig& config) {
  check_data(data);
  auto classes = sorted_classes(data.labels);
  if (classes.size() != 2)
    throw Error(fmt::format("perceptron needs exactly 2 classes, found {}", classes.size()));
  const auto y = class_indices(data.labels, classes);
  const Eigen::Index d = data.vectors.cols();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t mistakes = 0;
    for (auto i : order) {
      const double target = y[i] == 1 ? 1.0 : -1.0;
      const auto x = data.vectors.row(static_cast<Eigen::Index>(i));
      if (target * (x.dot(w) + b) <= 0.0) {
        w += target * x.transpose();
        b += target;
        ++mistakes;
      }
    }
    if (mistakes == 0) break;
  }
  LinearModel model;
  model.weights = w.transpose();
  model.bias = Eigen::VectorXd::Constant(1, b);
  model.classes = std::move(classes);
  return model;
}

LinearModel train_sgd_multiclass(const LabeledSlice& data, const SgdConfig& config) {
  check_data(data);
  auto classes = sorted_classes(data.labels);
  if (classes.size() < 2) throw Error(fmt::format("classifier needs at least 2 classes, found {}", classes.size()));
  const auto y = class_indices(data.labels, classes);
  const auto c = static_cast<Eigen::Index>(classes.size());
  const Eigen::Index d = data.vectors.cols();

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(c, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(c);
  const double shrink = 1.0 - config.learning_rate * config.l2;
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      const auto x = data.vectors.row(static_cast<Eigen::Index>(i));
      for (Eigen::Index k = 0; k < c; ++k) {
        const double target = static_cast<Eigen::Index>(y[i]) == k ? 1.0 : -1.0;
        const double margin = target * (w.row(k).dot(x) + b(k));
        w.row(k) *= shrink;
        if (margin < 1.0) {
          w.row(k) += config.learning_rate * target * x;
          b(k) += config.learning_rate * target;
        }
      }
    }
  }
  return {std::move(w), std::move(b), std::move(classes)};
}

Evaluation evaluate_predictions(std::span<const std::string> gold, std::span<const std::string> predicted) {
  if (gold.empty()) throw Error("cannot evaluate on empty data");
  if (gold.size() != predicted.size()) throw Error("gold and predicted label counts differ");
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> counts;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == predicted[i]) {
      ++correct;
      ++counts[gold[i]].tp;
    } else {
      ++counts[gold[i]].fn;
      ++counts[predicted[i]].fp;
    }
  }
  double f1_sum = 0.0;
  for (const auto& [label, k] : counts) {
    const double precision = k.tp + k.fp ? static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp) : 0.0;
    const double recall = k.tp + k.fn ? static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fn) : 0.0;
    f1_sum += precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  return {static_cast<double>(correct) / static_cast<double>(gold.size()),
          f1_sum / static_cast<double>(counts.size())};
}

Evaluation evaluate(const LinearModel& model, const LabeledSlice& data) {
  if (data.labels.empty()) throw Error("cannot evaluate on empty data");
  const auto predicted = model.predict(data.vectors);
  return evaluate_predictions(data.labels, predicted);
}

double majority_baseline(std::span<const std::string> labels) {
  if (labels.empty()) throw Error("majority baseline of empty data");
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];
  std::size_t best = 0;
  for (const auto& [_, n] : counts) best = std::max(best, n);
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

std::map<std::string, double> label_distribution(std::span<const std::string> labels) {
  std::map<std::string, double> dist;
  for (const auto& l : labels) dist[l] += 1.0;
  for (auto& [_, p] : dist) p /= static_cast<double>(labels.size());
  return dist;
}

double expected_random_f1(std::span<const double> prevalences) {
  if (prevalences.empty()) throw Error("label distribution has no classes");
  double total = 0.0;
  for (double p : prevalences) {
    if (p < 0.0) throw Error("negative prevalence");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(fmt::format("prevalences sum to {}, not 1", total));
  const double guess = 1.0 / static_cast<double>(prevalences.size());
  double sum = 0.0;
  for (double p : prevalences) sum += p + guess > 0.0 ? 2.0 * p * guess / (p + guess) : 0.0;
  return sum / static_cast<double>(prevalences.size());
}

double expected_random_f1(const std::map<std::string, double>& distribution) {
  std::vector<double> p;
  p.reserve(distribution.size());
  for (const auto& [_, v] : distribution) p.push_back(v);
  return expected_random_f1(p);
}

namespace {

template <typename F>
double mean_of(const std::vector<ProbeResult>& results, F field) {
  if (results.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : results) s += field(r);
  return s / static_cast<double>(results.size());
}

}  // namespace

double ProbeReport::mean_accuracy() const {
  return mean_of(results, [](const ProbeResult& r) { return r.accuracy; });
}
double ProbeReport::mean_macro_f1() const {
  return mean_of(results, [](const ProbeResult& r) { return r.macro_f1; });
}
double ProbeReport::mean_random_f1() const {
  return mean_of(results, [](const ProbeResult& r) { return r.random_f1; });
}

ProbeResult run_probe(const std::string& property, const LabeledSlice& train, const LabeledSlice& test,
                      ProbeKind kind, std::uint64_t seed, const SgdConfig& sgd, const PerceptronConfig& perceptron) {
  LinearModel model;
  if (kind == ProbeKind::perceptron) {
    auto cfg = perceptron;
    cfg.seed = seed;
    model = train_perceptron(train, cfg);
  } else {
    auto cfg = sgd;
    cfg.seed = seed;
    model = train_sgd_multiclass(train, cfg);
  }
  const auto eval = evaluate(model, test);
  return {property,
          eval.accuracy,
          eval.macro_f1,
          majority_baseline(test.labels),
          expected_random_f1(label_distribution(test.labels)),
          train.size(),
          test.size()};
}

void save_model(const LinearModel& model, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "# erasekit linear model\n";
  out << "classes";
  for (const auto& c : model.classes) out << '\t' << c;
  out << '\n' << fmt::format("shape\t{}\t{}\n", model.weights.rows(), model.weights.cols());
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r) {
    out << fmt::format("{:.17g}", model.bias(r));
    for (Eigen::Index j = 0; j < model.weights.cols(); ++j) out << fmt::format(" {:.17g}", model.weights(r, j));
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

LinearModel load_model(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  const std::string source = path.string();
  LinearModel model;
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index rows = -1;
  Eigen::Index cols = -1;
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty() || line.front() == '#') continue;
    if (line.starts_with("classes\t")) {
      auto parts = detail::split(line, '\t');
      for (std::size_t i = 1; i < parts.size(); ++i) model.classes.emplace_back(parts[i]);
      continue;
    }
    if (line.starts_with("shape\t")) {
      auto parts = detail::split(line, '\t');
      const auto r = parts.size() == 3 ? detail::parse_size(parts[1]) : std::nullopt;
      const auto c = parts.size() == 3 ? detail::parse_size(parts[2]) : std::nullopt;
      if (!r || !c) throw ParseError(source, line_no, "bad shape line");
      rows = static_cast<Eigen::Index>(*r);
      cols = static_cast<Eigen::Index>(*c);
      model.weights.resize(rows, cols);
      model.bias.resize(rows);
      continue;
    }
    if (rows < 0) throw ParseError(source, line_no, "weights before shape line");
    const auto fields = detail::split_ws(line);
    if (static_cast<Eigen::Index>(fields.size()) != cols + 1 || row >= rows)
      throw ParseError(source, line_no, "weight row does not match the declared shape");
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto v = detail::parse_double(fields[j]);
      if (!v) throw ParseError(source, line_no, fmt::format("non-numeric value '{}'", fields[j]));
      if (j == 0)
        model.bias(row) = *v;
      else
        model.weights(row, static_cast<Eigen::Index>(j - 1)) = *v;
    }
    ++row;
  }
  if (rows < 0 || row != rows) throw ParseError(source, line_no, "incomplete model file");
  const bool consistent = model.uses_sign_rule() || static_cast<Eigen::Index>(model.classes.size()) == rows;
  if (!consistent) throw ParseError(source, line_no, "class count does not match weight rows");
  return model;
}

}  // namespace erasekit
