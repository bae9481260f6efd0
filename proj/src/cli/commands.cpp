#include <iostream>
#include <optional>

#include <fmt/format.h>

#include "erasekit/bias.hpp"
#include "erasekit/corpus.hpp"
#include "erasekit/dataset.hpp"
#include "erasekit/deod.hpp"
#include "erasekit/embedding.hpp"
#include "erasekit/erasure.hpp"
#include "erasekit/probes.hpp"
#include "options.hpp"
#include "text_util.hpp"

namespace erasekit::cli {

namespace {

const std::vector<std::string> kDefaultProperties = {"Tense", "Gender", "Number", "Person", "Case", "VerbForm"};
constexpr const char* kTagProperty = "gender";

void finish(Report& report, const Diagnostics& diagnostics) {
  report.add_warnings(diagnostics);
  for (const auto& w : diagnostics.warnings()) std::cerr << "warning: " << w << '\n';
}

EmbeddingSpace load_space(Report& report, const std::string& name, const std::string& path) {
  report.add_input(name, path);
  return read_vectors(path);
}

EmbeddingSpace maybe_project(Report& report, EmbeddingSpace space, const std::string& projection_path) {
  if (projection_path.empty()) return space;
  report.add_input("projection", projection_path);
  return apply_projection(space, load_projection(projection_path));
}

/// Binary feminine/masculine labels for the tagged entries of `space`.
LabeledDataset tag_dataset(const EmbeddingSpace& space, const BiasTagList& tags) {
  LabeledDataset ds;
  std::vector<std::size_t> rows;
  std::vector<std::string> labels;
  std::vector<std::string> missing;
  auto add = [&](const std::vector<TaggedWord>& side, const char* label) {
    for (const auto& t : side) {
      auto i = space.find(t.key);
      if (!i) {
        missing.push_back(t.key.encode());
        continue;
      }
      rows.push_back(*i);
      labels.emplace_back(label);
      ds.keys.push_back(t.key);
      ds.groups.push_back(t.key.is_type() ? t.key.surface : t.key.sentence_id);
    }
  };
  add(tags.feminine, "feminine");
  add(tags.masculine, "masculine");
  if (!missing.empty()) throw UnresolvedError("tagged words not in the vector file", std::move(missing));
  ds.vectors.resize(static_cast<Eigen::Index>(rows.size()), space.dim());
  for (std::size_t r = 0; r < rows.size(); ++r)
    ds.vectors.row(static_cast<Eigen::Index>(r)) = space.vectors().row(static_cast<Eigen::Index>(rows[r]));
  ds.labels.emplace_back(kTagProperty, std::move(labels));
  return ds;
}

/// Labels from either a CoNLL-U file (morphological properties) or a tag
/// file (one binary "gender" property).
struct LabelSource {
  std::string conllu;
  std::string tags;
  std::vector<std::string> properties = kDefaultProperties;

  void define(OptionSet& o) {
    o.add("conllu", conllu, "CoNLL-U corpus supplying morphological labels");
    o.add("tags", tags, "Tag file from tagbias; erases/probes the binary gender tag");
    o.add_list("properties", properties, "Comma-separated FEATS properties, in erasure order");
  }

  LabeledDataset load(Report& report, const EmbeddingSpace& space, Diagnostics& diagnostics,
                      std::vector<std::string>& props) const {
    if (conllu.empty() == tags.empty()) throw UsageError("give exactly one of --conllu and --tags");
    if (!tags.empty()) {
      report.add_input("tags", tags);
      props = {kTagProperty};
      return tag_dataset(space, read_tags(tags));
    }
    if (properties.empty()) throw UsageError("--properties is empty");
    report.add_input("conllu", conllu);
    props = properties;
    return build_labeled_dataset(space, parse_conllu(conllu, &diagnostics), props);
  }
};

struct SplitData {
  LabeledDataset train, dev, test;
};

SplitData split_dataset(const LabeledDataset& ds, std::uint64_t seed) {
  const auto split = split_by_group(ds.groups, {}, seed);
  return {ds.rows(rows_in(split, SplitPart::train)), ds.rows(rows_in(split, SplitPart::dev)),
          ds.rows(rows_in(split, SplitPart::test))};
}

Json probe_json(const ProbeResult& r) {
  return {{"property", r.property},   {"accuracy", r.accuracy}, {"macro_f1", r.macro_f1},
          {"majority", r.majority_baseline}, {"random_f1", r.random_f1}, {"n_train", r.n_train},
          {"n_test", r.n_test}};
}

class EraseCommand : public Command {
 public:
  const char* name() const override { return "erase"; }
  const char* description() const override { return "Learn an INLP / I2NLP nullspace projection"; }

  void define(OptionSet& o) override {
    o.add("vectors", vectors_, "Vector file", true);
    labels_.define(o);
    o.add("variant", variant_, "regressive or non_regressive")
        ->check(CLI::IsMember({"regressive", "non_regressive", "non-regressive"}));
    o.add("max-iters", inlp_.max_iters, "INLP iterations per property");
    o.add("stop-margin", inlp_.stop_margin, "Stop once dev accuracy <= majority + margin");
    o.add("epochs", inlp_.classifier.epochs, "SGD epochs of each inner classifier");
    o.add("lr", inlp_.classifier.learning_rate, "SGD learning rate");
    o.add("l2", inlp_.classifier.l2, "SGD L2 strength");
    o.add_flag("drop-none", drop_none_, "Leave tokens without the property out instead of labelling them none");
    o.add("projection-out", projection_out_, "Projection file to write", true);
    o.add("projected-out", projected_out_, "Optional vector file with the projected vectors");
  }

  void execute(Report& report, const OptionSet&) override {
    Diagnostics diag;
    const auto space = load_space(report, "vectors", vectors_);
    std::vector<std::string> props;
    const auto ds = labels_.load(report, space, diag, props);
    const auto parts = split_dataset(ds, common.seed);

    I2nlpConfig config;
    config.inlp = inlp_;
    config.inlp.seed = common.seed;
    config.inlp.classifier.seed = common.seed;
    config.drop_none = drop_none_;
    config.threads = common.threads;
    std::vector<IterationLog> log;
    const auto projection = i2nlp(parts.train, parts.dev, props, variant_from_string(variant_), config, &log);
    save_projection(projection, projection_out_);
    if (!projected_out_.empty()) write_vectors(apply_projection(space, projection), projected_out_);

    const auto erased = erased_subspace(projection.matrix).cols();
    report.add_metric("erased_dims", static_cast<double>(erased));
    report.add_metric("compositions", static_cast<double>(projection.provenance.size()));

    // Fresh probes on the held-out split, before and after.
    const auto after_train = parts.train.projected(projection.matrix);
    const auto after_test = parts.test.projected(projection.matrix);
    Json probes = Json::array();
    for (std::size_t i = 0; i < props.size(); ++i) {
      const auto& p = props[i];
      const auto train = parts.train.slice(p, drop_none_);
      const auto test = parts.test.slice(p, drop_none_);
      if (count_classes(train.labels) < 2 || test.size() == 0) {
        diag.warn(fmt::format("property {}: not enough classes or test rows for a probe", p));
        continue;
      }
      SgdConfig sgd = inlp_.classifier;
      sgd.seed = common.seed;
      const auto before = run_probe(p, train, test, ProbeKind::sgd, common.seed, sgd);
      const auto after = run_probe(p, after_train.slice(p, drop_none_), after_test.slice(p, drop_none_),
                                   ProbeKind::sgd, common.seed, sgd);
      report.add_metric(p + ".accuracy_before", before.accuracy);
      report.add_metric(p + ".accuracy_after", after.accuracy);
      report.add_metric(p + ".majority", after.majority_baseline);
      probes.push_back({{"before", probe_json(before)}, {"after", probe_json(after)}});
    }

    Json iterations = Json::array();
    for (const auto& l : log)
      iterations.push_back({{"property", l.property}, {"iteration", l.iteration}, {"dev_accuracy", l.dev_accuracy},
                            {"majority", l.majority}, {"classifier_rank", l.classifier_rank},
                            {"projected", l.projected}});
    report.details()["mode"] = std::string(to_string(projection.mode));
    report.details()["iterations"] = std::move(iterations);
    report.details()["probes"] = std::move(probes);
    finish(report, diag);
  }

 private:
  std::string vectors_;
  LabelSource labels_;
  std::string variant_ = "regressive";
  InlpConfig inlp_;
  bool drop_none_ = false;
  std::string projection_out_;
  std::string projected_out_;
};

class ProbeCommand : public Command {
 public:
  const char* name() const override { return "probe"; }
  const char* description() const override { return "Train and evaluate linear probes on held-out sentences"; }

  void define(OptionSet& o) override {
    o.add("vectors", vectors_, "Vector file", true);
    labels_.define(o);
    o.add("projection", projection_, "Optional projection applied before probing");
    o.add("classifier", classifier_, "sgd or perceptron")->check(CLI::IsMember({"sgd", "perceptron"}));
    o.add("epochs", sgd_.epochs, "SGD epochs");
    o.add("lr", sgd_.learning_rate, "SGD learning rate");
    o.add("l2", sgd_.l2, "SGD L2 strength");
    o.add("max-epochs", perceptron_.max_epochs, "Perceptron epoch cap");
    o.add_flag("drop-none", drop_none_, "Leave tokens without the property out");
  }

  void execute(Report& report, const OptionSet&) override {
    Diagnostics diag;
    const auto space = maybe_project(report, load_space(report, "vectors", vectors_), projection_);
    std::vector<std::string> props;
    const auto ds = labels_.load(report, space, diag, props);
    const auto parts = split_dataset(ds, common.seed);
    const auto kind = classifier_ == "perceptron" ? ProbeKind::perceptron : ProbeKind::sgd;

    ProbeReport probes;
    for (const auto& p : props) {
      const auto train = parts.train.slice(p, drop_none_);
      const auto test = parts.test.slice(p, drop_none_);
      if (count_classes(train.labels) < 2 || test.size() == 0) {
        diag.warn(fmt::format("property {}: not enough classes or test rows for a probe", p));
        continue;
      }
      sgd_.seed = perceptron_.seed = common.seed;
      probes.results.push_back(run_probe(p, train, test, kind, common.seed, sgd_, perceptron_));
    }
    if (probes.results.empty()) throw Error("no property could be probed");

    Json rows = Json::array();
    for (const auto& r : probes.results) {
      report.add_metric(r.property + ".accuracy", r.accuracy);
      report.add_metric(r.property + ".macro_f1", r.macro_f1);
      report.add_metric(r.property + ".majority", r.majority_baseline);
      report.add_metric(r.property + ".random_f1", r.random_f1);
      rows.push_back(probe_json(r));
    }
    report.add_metric("mean_accuracy", probes.mean_accuracy());
    report.add_metric("mean_macro_f1", probes.mean_macro_f1());
    report.add_metric("mean_random_f1", probes.mean_random_f1());
    report.details()["probes"] = std::move(rows);
    finish(report, diag);
  }

 private:
  std::string vectors_;
  LabelSource labels_;
  std::string projection_;
  std::string classifier_ = "sgd";
  SgdConfig sgd_;
  PerceptronConfig perceptron_;
  bool drop_none_ = false;
};

class TagBiasCommand : public Command {
 public:
  const char* name() const override { return "tagbias"; }
  const char* description() const override { return "Tag the most feminine and masculine entries by gender projection"; }

  void define(OptionSet& o) override {
    o.add("vectors", vectors_, "Vector file", true);
    o.add("pairs", pairs_, "Gendered pair file (feminine<TAB>masculine)", true);
    o.add("k", k_, "Entries tagged per side");
    o.add("wordlist", wordlist_, "Explicitly gendered words; their sentences are left out of tagging");
    o.add("conllu", conllu_, "Corpus used to find sentences with gendered words");
    o.add_flag("by-type", by_type_, "Average occurrences into word types first");
    o.add("tags-out", tags_out_, "Tag file to write", true);
  }

  void execute(Report& report, const OptionSet&) override {
    Diagnostics diag;
    auto space = load_space(report, "vectors", vectors_);
    if (by_type_) space = average_by_type(space);
    report.add_input("pairs", pairs_);
    const auto pairs = read_pairs(pairs_);
    const auto direction = gender_direction(space, pairs, &diag);

    auto candidates = space;
    if (!wordlist_.empty()) {
      report.add_input("wordlist", wordlist_);
      std::optional<Corpus> corpus;
      if (!conllu_.empty()) {
        report.add_input("conllu", conllu_);
        corpus = parse_conllu(conllu_, &diag);
      }
      candidates = filter_gendered(space, corpus ? &*corpus : nullptr, read_wordlist(wordlist_));
    }
    const auto tags = tag_biased(candidates, direction, k_);
    write_tags(tags, tags_out_);

    report.add_metric("k", static_cast<double>(tags.k));
    report.add_metric("entries", static_cast<double>(space.size()));
    report.add_metric("candidates", static_cast<double>(candidates.size()));
    report.add_metric("feminine_min_projection", tags.feminine.back().projection);
    report.add_metric("masculine_max_projection", tags.masculine.back().projection);
    report.details()["direction"] = std::vector<double>(direction.direction.begin(), direction.direction.end());
    finish(report, diag);
  }

 private:
  std::string vectors_;
  std::string pairs_;
  std::size_t k_ = 10000;
  std::string wordlist_;
  std::string conllu_;
  bool by_type_ = false;
  std::string tags_out_;
};

class WeatCommand : public Command {
 public:
  const char* name() const override { return "weat"; }
  const char* description() const override { return "WEAT effect size before and after erasure"; }

  void define(OptionSet& o) override {
    o.add("before", before_, "Original vector file", true);
    o.add("after", after_, "Vector file after erasure");
    o.add("tags", tags_, "Tag file: feminine entries are X, masculine entries Y");
    o.add("x-words", x_words_, "Target word list X (instead of --tags)");
    o.add("y-words", y_words_, "Target word list Y (instead of --tags)");
    o.add("attr-a", attr_a_, "Attribute word list A", true);
    o.add("attr-b", attr_b_, "Attribute word list B", true);
    o.add("permutations", weat_.permutations, "Sampled re-partitions when exhaustive enumeration is too large");
  }

  void execute(Report& report, const OptionSet&) override {
    const bool use_tags = !tags_.empty();
    if (use_tags == (!x_words_.empty() || !y_words_.empty()))
      throw UsageError("give either --tags or both --x-words and --y-words");
    if (!use_tags && (x_words_.empty() || y_words_.empty())) throw UsageError("--x-words needs --y-words");

    std::vector<OccurrenceKey> x, y;
    if (use_tags) {
      report.add_input("tags", tags_);
      const auto tags = read_tags(tags_);
      for (const auto& t : tags.feminine) x.push_back(t.key);
      for (const auto& t : tags.masculine) y.push_back(t.key);
    } else {
      report.add_input("x_words", x_words_);
      report.add_input("y_words", y_words_);
      for (const auto& w : detail::read_lines(x_words_)) x.push_back(OccurrenceKey::type(w));
      for (const auto& w : detail::read_lines(y_words_)) y.push_back(OccurrenceKey::type(w));
    }
    report.add_input("attr_a", attr_a_);
    report.add_input("attr_b", attr_b_);
    const auto a = detail::read_lines(attr_a_);
    const auto b = detail::read_lines(attr_b_);
    WeatConfig config = weat_;
    config.seed = common.seed;

    auto evaluate = [&](const std::string& label, const std::string& path) {
      auto space = load_space(report, label, path);
      if (!use_tags) space = average_by_type(space);
      const auto r = weat(space, x, y, a, b, config);
      report.add_metric("weat_d." + label, r.d, r.p_value);
      report.details()[label] = {{"d", r.d}, {"p_value", r.p_value}, {"n_permutations", r.n_permutations},
                                 {"exhaustive", r.exhaustive}};
    };
    evaluate("before", before_);
    if (!after_.empty()) evaluate("after", after_);
    report.details()["sizes"] = {{"x", x.size()}, {"y", y.size()}, {"a", a.size()}, {"b", b.size()}};
  }

 private:
  std::string before_, after_, tags_, x_words_, y_words_, attr_a_, attr_b_;
  WeatConfig weat_;
};

class KnnBiasCommand : public Command {
 public:
  const char* name() const override { return "knnbias"; }
  const char* description() const override { return "Correlate word bias with the gender of its nearest neighbors"; }

  void define(OptionSet& o) override {
    o.add("tags", tags_, "Tag file from tagbias", true);
    o.add("before", before_, "Original vector file", true);
    o.add("after", after_, "Vector file after erasure");
    o.add("k-neighbors", config_.k_neighbors, "Neighbors per tagged word");
    o.add_flag("neighbors-among-tagged", config_.neighbors_among_tagged, "Search neighbors among tagged words only");
    o.add("bias-space", bias_space_, "Space whose gender projection is the bias: original or evaluated")
        ->check(CLI::IsMember({"original", "evaluated"}));
    o.add("pairs", pairs_, "Gendered pair file; needed with --bias-space evaluated");
  }

  void execute(Report& report, const OptionSet&) override {
    Diagnostics diag;
    if (bias_space_ == "evaluated" && pairs_.empty()) throw UsageError("--bias-space evaluated needs --pairs");
    report.add_input("tags", tags_);
    const auto tags = read_tags(tags_);
    std::vector<std::pair<std::string, std::string>> pairs;
    if (!pairs_.empty()) {
      report.add_input("pairs", pairs_);
      pairs = read_pairs(pairs_);
    }
    KnnBiasConfig config = config_;
    config.threads = common.threads;

    auto evaluate = [&](const std::string& label, const std::string& path) {
      const auto space = load_space(report, label, path);
      auto bias = tags.projections();
      if (bias_space_ == "evaluated") {
        const auto dir = gender_direction(space, pairs, &diag);
        for (auto& [key, value] : bias) value = space.vector(space.index_of(key)).dot(dir.direction);
      }
      const auto r = knn_bias_correlation(space, tags, bias, config);
      report.add_metric("knn_r." + label, r.correlation.r, r.correlation.p_value);
      report.details()[label] = {{"r", r.correlation.r}, {"p_value", r.correlation.p_value}, {"n", r.correlation.n}};
    };
    evaluate("before", before_);
    if (!after_.empty()) evaluate("after", after_);
    finish(report, diag);
  }

 private:
  std::string tags_, before_, after_, pairs_;
  std::string bias_space_ = "original";
  KnnBiasConfig config_;
};

class DeodGenCommand : public Command {
 public:
  const char* name() const override { return "deod_gen"; }
  const char* description() const override { return "Generate double-edged outlier quadruples"; }

  void define(OptionSet& o) override {
    o.add("lexicon", lexicon_, "UniMorph lexicon", true);
    o.add("static", static_, "Static (type-level) vector file used for similarity", true);
    o.add("n", n_, "Number of quadruples");
    o.add("dissimilar-percentile", config_.dissimilar_percentile, "Bottom cosine fraction for semantic outliers");
    o.add_flag("include-same-lemma", include_same_lemma_, "Allow forms of the anchor's lemma as similar words");
    o.add("retry-budget", config_.retry_budget, "Candidate draws before giving up (0: automatic)");
    o.add("quadruples-out", quadruples_out_, "Quadruple TSV to write", true);
  }

  void execute(Report& report, const OptionSet&) override {
    Diagnostics diag;
    report.add_input("lexicon", lexicon_);
    const auto lexicon = parse_unimorph(lexicon_, &diag);
    const auto space = load_space(report, "static", static_);
    GenerationConfig config = config_;
    config.seed = common.seed;
    config.exclude_same_lemma = !include_same_lemma_;
    const auto quads = generate_quadruples(lexicon, space, n_, config);
    write_quadruples(quads, quadruples_out_);
    report.add_metric("n", static_cast<double>(quads.size()));
    finish(report, diag);
  }

 private:
  std::string lexicon_, static_, quadruples_out_;
  std::size_t n_ = 2000;
  bool include_same_lemma_ = false;
  GenerationConfig config_;
};

class DeodEvalCommand : public Command {
 public:
  const char* name() const override { return "deod_eval"; }
  const char* description() const override { return "Score outlier quadruples on an embedding space"; }

  void define(OptionSet& o) override {
    o.add("quadruples", quadruples_, "Quadruple TSV", true);
    o.add("vectors", vectors_, "Vector file; occurrences are averaged per word", true);
    o.add("projection", projection_, "Optional projection applied first");
    o.add("lexicon", lexicon_, "UniMorph lexicon; adds the lemma skyline");
  }

  void execute(Report& report, const OptionSet&) override {
    Diagnostics diag;
    report.add_input("quadruples", quadruples_);
    const auto quads = read_quadruples(quadruples_);
    const auto space = average_by_type(maybe_project(report, load_space(report, "vectors", vectors_), projection_));

    auto emit = [&](const std::string& prefix, const DeodScore& s) {
      report.add_metric(prefix + "sem_hard", s.sem_hard);
      report.add_metric(prefix + "morph_hard", s.morph_hard);
      report.add_metric(prefix + "sem_opp", s.sem_opp);
      report.add_metric(prefix + "morph_opp", s.morph_opp);
      report.add_metric(prefix + "n", static_cast<double>(s.n));
      report.add_metric(prefix + "skipped", static_cast<double>(s.skipped));
    };
    emit("", score_dataset(quads, space));
    if (!lexicon_.empty()) {
      report.add_input("lexicon", lexicon_);
      const auto lexicon = parse_unimorph(lexicon_, &diag);
      emit("skyline.", lemma_skyline(quads, space, lexicon, &diag));
    }
    finish(report, diag);
  }

 private:
  std::string quadruples_, vectors_, projection_, lexicon_;
};

class ApplyCommand : public Command {
 public:
  const char* name() const override { return "apply"; }
  const char* description() const override { return "Apply a projection file (e.g. an external eraser) to vectors"; }

  void define(OptionSet& o) override {
    o.add("vectors", vectors_, "Vector file", true);
    o.add("projection", projection_, "Projection file", true);
    o.add("output", output_, "Projected vector file to write", true);
  }

  void execute(Report& report, const OptionSet&) override {
    const auto space = maybe_project(report, load_space(report, "vectors", vectors_), projection_);
    write_vectors(space, output_);
    report.add_metric("entries", static_cast<double>(space.size()));
  }

 private:
  std::string vectors_, projection_, output_;
};

}  // namespace

std::vector<std::unique_ptr<Command>> make_commands() {
  std::vector<std::unique_ptr<Command>> commands;
  commands.push_back(std::make_unique<EraseCommand>());
  commands.push_back(std::make_unique<ProbeCommand>());
  commands.push_back(std::make_unique<TagBiasCommand>());
  commands.push_back(std::make_unique<WeatCommand>());
  commands.push_back(std::make_unique<KnnBiasCommand>());
  commands.push_back(std::make_unique<DeodGenCommand>());
  commands.push_back(std::make_unique<DeodEvalCommand>());
  commands.push_back(std::make_unique<ApplyCommand>());
  return commands;
}

}  // namespace erasekit::cli
