#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "trampoline/catalog.hpp"
#include "trampoline/classifier.hpp"
#include "trampoline/error.hpp"
#include "trampoline/io.hpp"
#include "trampoline/rng.hpp"

namespace tramp {

struct EvalConfig {
  int references_per_skill = 5;  // S_r
  int tests_per_skill = 5;       // S_t
  int subset_size = 10;
  int iterations = 20;
  int min_examples = 10;  // skills with fewer examples are left out
  std::uint64_t seed = 1;
  unsigned threads = 1;  // results do not depend on this

  void validate() const {
    if (references_per_skill <= 0 || tests_per_skill <= 0 || subset_size <= 0 || iterations <= 0 || min_examples <= 0)
      throw InputError("evaluation parameters must be positive");
    if (references_per_skill + tests_per_skill > subset_size)
      throw InputError("references + tests per skill exceed the subset size");
  }
};

struct LabelledTrajectory {
  SkillCode code;
  FeatureTrajectory trajectory;
};

class InsufficientExamplesError : public InputError {
public:
  InsufficientExamplesError(const std::string& code, std::size_t have, int need)
      : InputError("skill " + code + " has " + std::to_string(have) + " examples, needs " + std::to_string(need)),
        code_(code) {}
  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

/// Rows are ground truth, columns predictions.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<long>> counts;

  explicit ConfusionMatrix(std::vector<std::string> l = {})
      : labels(std::move(l)), counts(labels.size(), std::vector<long>(labels.size(), 0)) {}

  std::size_t index_of(const std::string& code) const {
    auto it = std::find(labels.begin(), labels.end(), code);
    if (it == labels.end()) throw InputError("label " + code + " is not in the confusion matrix");
    return static_cast<std::size_t>(it - labels.begin());
  }
  void add(const std::string& truth, const std::string& predicted, long n = 1) {
    counts[index_of(truth)][index_of(predicted)] += n;
  }
  long total() const {
    long s = 0;
    for (const auto& r : counts) s = std::accumulate(r.begin(), r.end(), s);
    return s;
  }
  long trace() const {
    long s = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) s += counts[i][i];
    return s;
  }
  long row_sum(std::size_t i) const { return std::accumulate(counts[i].begin(), counts[i].end(), 0L); }
  std::vector<std::vector<double>> row_rates() const {
    std::vector<std::vector<double>> r(counts.size(), std::vector<double>(counts.size(), 0.0));
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const long s = row_sum(i);
      if (s == 0) continue;
      for (std::size_t j = 0; j < counts.size(); ++j) r[i][j] = static_cast<double>(counts[i][j]) / static_cast<double>(s);
    }
    return r;
  }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// trace / total.
inline double accuracy(const ConfusionMatrix& cm) {
  const long total = cm.total();
  if (total <= 0) throw InputError("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

struct ErrorCell {
  std::string truth;
  std::string predicted;
  long count = 0;
};

/// Largest off-diagonal cell (first in row-major order on ties).
inline ErrorCell dominant_error(const ConfusionMatrix& cm) {
  ErrorCell best;
  for (std::size_t i = 0; i < cm.labels.size(); ++i)
    for (std::size_t j = 0; j < cm.labels.size(); ++j)
      if (i != j && cm.counts[i][j] > best.count) best = {cm.labels[i], cm.labels[j], cm.counts[i][j]};
  return best;
}

struct EvaluationResult {
  double mean_accuracy = 0.0;
  std::vector<double> per_iteration;
  ConfusionMatrix confusion;
  long examples_tested = 0;
  long examples_correct = 0;  // counted per example, independently of the matrix
};

struct IterationSplit {
  std::vector<std::size_t> references;  // dataset indices
  std::vector<std::size_t> tests;
};

namespace detail {

inline std::vector<std::string> included_labels(const std::map<std::string, std::vector<std::size_t>>& groups,
                                                const EvalConfig& cfg) {
  std::vector<std::string> labels;
  for (const auto& [code, idx] : groups) {
    if (static_cast<int>(idx.size()) < cfg.min_examples) continue;
    if (static_cast<int>(idx.size()) < cfg.subset_size) throw InsufficientExamplesError(code, idx.size(), cfg.subset_size);
    labels.push_back(code);
  }
  std::stable_sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
    auto rank = [](const std::string& s) {
      auto c = try_parse_code(s);
      return c ? catalog_rank(*c) : load_catalog().size();
    };
    return rank(a) < rank(b);
  });
  return labels;
}

}  // namespace detail

/// Draws one iteration's reference/test split: per label, a subset sampled
/// without replacement (partial Fisher-Yates) then split S_r / S_t.
inline IterationSplit draw_split(const std::map<std::string, std::vector<std::size_t>>& groups,
                                 const std::vector<std::string>& labels, const EvalConfig& cfg, std::uint64_t seed) {
  SplitMix64 rng(seed);
  IterationSplit split;
  for (const auto& code : labels) {
    std::vector<std::size_t> pool = groups.at(code);
    const std::size_t n = pool.size();
    for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.subset_size); ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
      std::swap(pool[k], pool[j]);
    }
    for (int k = 0; k < cfg.references_per_skill; ++k) split.references.push_back(pool[k]);
    for (int k = 0; k < cfg.tests_per_skill; ++k) split.tests.push_back(pool[cfg.references_per_skill + k]);
  }
  return split;
}

/// Repeated random sub-sampling: each iteration samples `subset_size`
/// examples per included skill, uses S_r of them as the reference set and
/// classifies the other S_t. Per-iteration seeds are drawn up front, so
/// running iterations on several threads gives the same result.
inline EvaluationResult run_evaluation(const std::vector<LabelledTrajectory>& dataset, const EvalConfig& cfg) {
  cfg.validate();
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.size(); ++i) groups[dataset[i].code.str()].push_back(i);
  const std::vector<std::string> labels = detail::included_labels(groups, cfg);
  if (labels.empty()) throw InputError("no skill has enough examples for evaluation");

  SplitMix64 master(cfg.seed);
  std::vector<std::uint64_t> seeds(cfg.iterations);
  for (auto& s : seeds) s = master.next();

  struct IterationOutcome {
    std::vector<std::pair<std::size_t, std::size_t>> cells;  // (truth, predicted) label indices
    long correct = 0;
  };
  std::vector<IterationOutcome> outcomes(cfg.iterations);

  auto run_one = [&](int it) {
    const IterationSplit split = draw_split(groups, labels, cfg, seeds[it]);
    for (std::size_t r : split.references)
      if (std::find(split.tests.begin(), split.tests.end(), r) != split.tests.end())
        throw std::logic_error("reference and test sets overlap");
    ReferenceSet refs;
    for (std::size_t r : split.references) {
      ReferenceSkill e;
      e.id = "ex-" + std::to_string(r);
      e.code = dataset[r].code;
      e.trajectory = dataset[r].trajectory;
      refs.entries.push_back(std::move(e));
    }
    IterationOutcome& out = outcomes[it];
    for (std::size_t t : split.tests) {
      const ClassificationResult res = classify(dataset[t].trajectory, refs);
      const std::size_t truth = static_cast<std::size_t>(
          std::find(labels.begin(), labels.end(), dataset[t].code.str()) - labels.begin());
      const std::size_t pred =
          static_cast<std::size_t>(std::find(labels.begin(), labels.end(), res.best.str()) - labels.begin());
      out.cells.emplace_back(truth, pred);
      if (res.best == dataset[t].code) ++out.correct;
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.iterations)));
  if (workers == 1) {
    for (int it = 0; it < cfg.iterations; ++it) run_one(it);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int it = static_cast<int>(w); it < cfg.iterations; it += static_cast<int>(workers)) run_one(it);
      });
    for (auto& th : pool) th.join();
  }

  EvaluationResult res;
  res.confusion = ConfusionMatrix(labels);
  const long per_iter = static_cast<long>(labels.size()) * cfg.tests_per_skill;
  double acc_sum = 0.0;
  for (const auto& o : outcomes) {
    for (auto [t, p] : o.cells) ++res.confusion.counts[t][p];
    const double a = static_cast<double>(o.correct) / static_cast<double>(per_iter);
    res.per_iteration.push_back(a);
    acc_sum += a;
    res.examples_correct += o.correct;
    res.examples_tested += static_cast<long>(o.cells.size());
  }
  res.mean_accuracy = acc_sum / static_cast<double>(cfg.iterations);
  return res;
}

inline std::string confusion_csv(const ConfusionMatrix& cm, bool normalised = false) {
  std::ostringstream out;
  out << "truth/pred";
  for (const auto& l : cm.labels) out << ',' << l;
  out << '\n';
  const auto rates = cm.row_rates();
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    out << cm.labels[i];
    for (std::size_t j = 0; j < cm.labels.size(); ++j) {
      out << ',';
      if (normalised) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", rates[i][j]);
        out << buf;
      } else {
        out << cm.counts[i][j];
      }
    }
    out << '\n';
  }
  return out.str();
}

inline ConfusionMatrix parse_confusion_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty confusion CSV");
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!s.empty() && s.back() == ',') f.emplace_back();
    return f;
  };
  auto header = split(line);
  if (header.empty() || header[0] != "truth/pred") throw InputError("confusion CSV header must start with truth/pred");
  ConfusionMatrix cm(std::vector<std::string>(header.begin() + 1, header.end()));
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    if (!std::getline(in, line)) throw InputError("confusion CSV is missing rows");
    auto f = split(line);
    if (f.size() != cm.labels.size() + 1 || f[0] != cm.labels[i]) throw InputError("malformed confusion CSV row");
    for (std::size_t j = 0; j < cm.labels.size(); ++j) {
      std::size_t used = 0;
      cm.counts[i][j] = std::stol(f[j + 1], &used);
      if (used != f[j + 1].size() || cm.counts[i][j] < 0) throw InputError("confusion counts must be non-negative integers");
    }
  }
  return cm;
}

inline std::filesystem::path normalised_path(const std::filesystem::path& counts_path) {
  std::filesystem::path p = counts_path;
  p.replace_filename(counts_path.stem().string() + "_normalized" + counts_path.extension().string());
  return p;
}

/// Writes the integer counts to `path` and the row-normalised rates next to
/// it as <stem>_normalized<ext>.
inline void export_confusion(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  write_file_atomic(path, confusion_csv(cm, false));
  write_file_atomic(normalised_path(path), confusion_csv(cm, true));
}

inline ConfusionMatrix read_confusion(const std::filesystem::path& path) { return parse_confusion_csv(read_file(path)); }

inline nlohmann::json to_json(const EvalConfig& c) {
  return {{"references_per_skill", c.references_per_skill},
          {"tests_per_skill", c.tests_per_skill},
          {"subset_size", c.subset_size},
          {"iterations", c.iterations},
          {"min_examples", c.min_examples},
          {"seed", c.seed}};
}

inline nlohmann::json evaluation_report(const EvaluationResult& r, const EvalConfig& cfg, const std::string& confusion_path) {
  const ErrorCell dom = dominant_error(r.confusion);
  return {{"protocol", "repeated random sub-sampling (per skill: sample subset, split references/tests)"},
          {"mean_accuracy", r.mean_accuracy},
          {"per_iteration", r.per_iteration},
          {"examples_tested", r.examples_tested},
          {"examples_correct", r.examples_correct},
          {"labels", r.confusion.labels},
          {"dominant_error", {{"truth", dom.truth}, {"predicted", dom.predicted}, {"count", dom.count}}},
          {"confusion_csv_path", confusion_path},
          {"config", to_json(cfg)}};
}

}  // namespace tramp
