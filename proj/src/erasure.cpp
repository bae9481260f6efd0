#include "erasekit/erasure.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "text_util.hpp"

namespace erasekit {

namespace {

constexpr double kProjectionTolerance = 1e-8;
constexpr std::size_t kResymmetrizeEvery = 5;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void symmetrize(Eigen::MatrixXd& m) { m = (0.5 * (m + m.transpose())).eval(); }

}  // namespace

std::string_view to_string(ProjectionMode mode) {
  switch (mode) {
    case ProjectionMode::single: return "single";
    case ProjectionMode::regressive: return "regressive";
    case ProjectionMode::non_regressive: return "non_regressive";
    case ProjectionMode::external: return "external";
  }
  return "external";
}

ProjectionMode projection_mode_from_string(std::string_view text) {
  if (text == "single") return ProjectionMode::single;
  if (text == "regressive") return ProjectionMode::regressive;
  if (text == "non_regressive") return ProjectionMode::non_regressive;
  if (text == "external") return ProjectionMode::external;
  throw Error(fmt::format("unknown projection mode '{}'", text));
}

std::string_view to_string(I2nlpVariant variant) {
  return variant == I2nlpVariant::regressive ? "regressive" : "non_regressive";
}

I2nlpVariant variant_from_string(std::string_view text) {
  if (text == "regressive") return I2nlpVariant::regressive;
  if (text == "non_regressive" || text == "non-regressive") return I2nlpVariant::non_regressive;
  throw Error(fmt::format("unknown variant '{}' (expected regressive or non_regressive)", text));
}

ProjectionMatrix ProjectionMatrix::identity(Eigen::Index dim, ProjectionMode mode) {
  return {Eigen::MatrixXd::Identity(dim, dim), {}, mode};
}

namespace {

/// Orthonormal basis of the row space, one basis vector per row.
Eigen::MatrixXd row_space_basis(const Eigen::MatrixXd& weights) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(weights, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = 1e-10 * std::max(1.0, s.size() ? s(0) : 0.0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  return svd.matrixV().leftCols(rank).transpose();
}

}  // namespace

std::size_t numerical_rank(const Eigen::MatrixXd& weights) {
  return static_cast<std::size_t>(row_space_basis(weights).rows());
}

ProjectionMatrix nullspace_projection(const Eigen::MatrixXd& weights, Diagnostics* diagnostics) {
  if (weights.cols() == 0) throw Error("classifier weights have no columns");
  const Eigen::Index d = weights.cols();
  const Eigen::MatrixXd basis = row_space_basis(weights);
  if (basis.rows() == 0) {
    if (diagnostics) diagnostics->warn("degenerate classifier with zero weights; returning the identity");
    return ProjectionMatrix::identity(d);
  }
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(d, d) - basis.transpose() * basis;
  symmetrize(p);
  return {std::move(p), {}, ProjectionMode::single};
}

std::uint64_t classifier_seed(std::uint64_t seed, std::size_t property_position, std::size_t iteration) {
  return splitmix64(splitmix64(seed ^ splitmix64(property_position + 1)) + iteration);
}

ProjectionMatrix inlp(const std::string& property, const LabeledSlice& train, const LabeledSlice& dev,
                      const InlpConfig& config, std::vector<IterationLog>* log, std::size_t property_position) {
  if (count_classes(train.labels) < 2)
    throw Error(fmt::format("property '{}' has fewer than 2 classes in the training data", property));
  if (dev.size() == 0) throw Error(fmt::format("property '{}' has no dev data", property));
  if (train.vectors.cols() != dev.vectors.cols()) throw Error("train and dev dimensions differ");

  const Eigen::Index d = train.vectors.cols();
  ProjectionMatrix acc = ProjectionMatrix::identity(d, ProjectionMode::single);
  const double majority = majority_baseline(dev.labels);

  for (std::size_t it = 0; it <= config.max_iters; ++it) {
    const LabeledSlice train_p = train.projected(acc.matrix);
    const LabeledSlice dev_p = dev.projected(acc.matrix);
    SgdConfig cfg = config.classifier;
    cfg.seed = classifier_seed(config.seed, property_position, it);
    const LinearModel model = train_sgd_multiclass(train_p, cfg);
    const double dev_acc = evaluate(model, dev_p).accuracy;
    const std::size_t rank = numerical_rank(model.weights);

    const bool stop = dev_acc <= majority + config.stop_margin || it == config.max_iters || rank == 0;
    if (log) log->push_back({property, it, dev_acc, majority, rank, !stop});
    if (stop) break;

    const ProjectionMatrix step = nullspace_projection(model.weights);
    acc.matrix = (step.matrix * acc.matrix).eval();
    acc.provenance.push_back({property, it, rank, dev_acc, majority});
    if (acc.provenance.size() % kResymmetrizeEvery == 0) symmetrize(acc.matrix);
  }
  return acc;
}

ProjectionMatrix i2nlp(const LabeledDataset& train, const LabeledDataset& dev,
                       std::span<const std::string> properties, I2nlpVariant variant,
                       const I2nlpConfig& config, std::vector<IterationLog>* log) {
  const Eigen::Index d = train.vectors.cols();
  const ProjectionMode mode =
      variant == I2nlpVariant::regressive ? ProjectionMode::regressive : ProjectionMode::non_regressive;
  ProjectionMatrix total = ProjectionMatrix::identity(d, mode);
  if (properties.empty()) return total;

  for (const auto& p : properties) {
    if (!train.has_property(p)) throw Error(fmt::format("property '{}' not in dataset", p));
    if (count_classes(train.slice(p, config.drop_none).labels) < 2)
      throw Error(fmt::format("property '{}' has fewer than 2 classes in the training data", p));
  }

  if (variant == I2nlpVariant::regressive) {
    std::size_t compositions = 0;
    for (std::size_t k = 0; k < properties.size(); ++k) {
      const auto train_p = train.slice(properties[k], config.drop_none).projected(total.matrix);
      const auto dev_p = dev.slice(properties[k], config.drop_none).projected(total.matrix);
      const ProjectionMatrix step = inlp(properties[k], train_p, dev_p, config.inlp, log, k);
      total.matrix = (step.matrix * total.matrix).eval();
      total.provenance.insert(total.provenance.end(), step.provenance.begin(), step.provenance.end());
      if (++compositions % kResymmetrizeEvery == 0) symmetrize(total.matrix);
    }
    return total;
  }

  // Per-property runs only read the original vectors, so they may run
  // concurrently; results are combined in list order.
  std::vector<ProjectionMatrix> steps(properties.size());
  std::vector<std::vector<IterationLog>> logs(properties.size());
  std::vector<std::exception_ptr> errors(properties.size());
  auto run = [&](std::size_t k) {
    try {
      steps[k] = inlp(properties[k], train.slice(properties[k], config.drop_none),
                      dev.slice(properties[k], config.drop_none), config.inlp, &logs[k], k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(properties.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < properties.size(); ++k) run(k);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t k = t; k < properties.size(); k += workers) run(k);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t k = 0; k < properties.size(); ++k) {
    total.matrix = (steps[k].matrix * total.matrix).eval();
    total.provenance.insert(total.provenance.end(), steps[k].provenance.begin(), steps[k].provenance.end());
    if (log) log->insert(log->end(), logs[k].begin(), logs[k].end());
  }
  return total;
}

EmbeddingSpace apply_projection(const EmbeddingSpace& space, const ProjectionMatrix& projection) {
  if (projection.dim() != space.dim())
    throw Error(fmt::format("projection of dimension {} applied to {}-dimensional vectors", projection.dim(),
                            space.dim()));
  return space.with_vectors(space.vectors() * projection.matrix.transpose());
}

double operator_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

void validate_projection(const ProjectionMatrix& projection) {
  const auto& p = projection.matrix;
  if (p.rows() != p.cols() || p.rows() == 0) throw Error("projection must be a non-empty square matrix");
  if (!p.allFinite()) throw Error("projection contains non-finite values");
  const double norm = operator_norm(p);
  if (norm > 1.0 + kProjectionTolerance)
    throw Error(fmt::format("projection is not a contraction (operator norm {:.6g})", norm));
  if (projection.mode == ProjectionMode::single || projection.mode == ProjectionMode::regressive) {
    const double asym = (p - p.transpose()).cwiseAbs().maxCoeff();
    const double idem = (p * p - p).cwiseAbs().maxCoeff();
    if (asym > kProjectionTolerance || idem > kProjectionTolerance)
      throw Error(fmt::format("{} projection is not an orthogonal projection (asymmetry {:.3g}, P^2-P {:.3g})",
                              to_string(projection.mode), asym, idem));
  }
}

Eigen::MatrixXd erased_subspace(const Eigen::MatrixXd& projection) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(projection, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) < 0.5) cols.push_back(i);
  Eigen::MatrixXd basis(projection.cols(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) basis.col(static_cast<Eigen::Index>(j)) = svd.matrixV().col(cols[j]);
  return basis;
}

std::vector<double> principal_angles_deg(const Eigen::MatrixXd& basis_a, const Eigen::MatrixXd& basis_b) {
  if (basis_a.rows() != basis_b.rows()) throw Error("subspace bases live in different dimensions");
  if (basis_a.cols() == 0 || basis_b.cols() == 0) return {};
  const Eigen::MatrixXd overlap = basis_a.transpose() * basis_b;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(overlap);
  std::vector<double> angles;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    const double c = std::clamp(svd.singularValues()(i), -1.0, 1.0);
    angles.push_back(std::acos(c) * 180.0 / M_PI);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

void save_projection(const ProjectionMatrix& projection, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "# erasekit projection\n# mode\t{}\n# dim\t{}\n", to_string(projection.mode), projection.dim());
  for (const auto& r : projection.provenance)
    fmt::format_to(it, "# step\t{}\t{}\t{}\t{:.17g}\t{:.17g}\n", r.property, r.iteration, r.classifier_rank,
                   r.dev_accuracy, r.majority);
  for (Eigen::Index i = 0; i < projection.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < projection.matrix.cols(); ++j)
      fmt::format_to(it, "{}{:.17g}", j ? " " : "", projection.matrix(i, j));
    buf.push_back('\n');
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing " + path.string());
}

ProjectionMatrix load_projection(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  const std::string source = path.string();
  ProjectionMatrix result;
  result.mode = ProjectionMode::external;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    if (line.front() == '#') {
      const auto fields = detail::split(detail::trim(std::string_view(line).substr(1)), '\t');
      if (fields.size() == 2 && fields[0] == "mode") {
        try {
          result.mode = projection_mode_from_string(fields[1]);
        } catch (const Error& e) {
          throw ParseError(source, line_no, e.what());
        }
      } else if (fields.size() == 6 && fields[0] == "step") {
        const auto iter = detail::parse_size(fields[2]);
        const auto rank = detail::parse_size(fields[3]);
        const auto acc = detail::parse_double(fields[4]);
        const auto maj = detail::parse_double(fields[5]);
        if (!iter || !rank || !acc || !maj) throw ParseError(source, line_no, "malformed step record");
        result.provenance.push_back({std::string(fields[1]), *iter, *rank, *acc, *maj});
      }
      continue;
    }
    std::vector<double> row;
    for (auto f : detail::split_ws(line)) {
      const auto v = detail::parse_double(f);
      if (!v) throw ParseError(source, line_no, fmt::format("non-numeric value '{}'", f));
      row.push_back(*v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(source, line_no, "rows of different lengths");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(source, line_no, "no matrix rows");
  if (rows.size() != rows.front().size())
    throw ParseError(source, line_no, fmt::format("matrix is {}x{}, not square", rows.size(), rows.front().size()));
  const auto d = static_cast<Eigen::Index>(rows.size());
  result.matrix.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) result.matrix(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  try {
    validate_projection(result);
  } catch (const Error& e) {
    throw Error(source + ": " + e.what());
  }
  return result;
}

}  // namespace erasekit
