#include "sensel/knapsack.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "sensel/errors.hpp"

namespace sensel::knapsack {
namespace {

// Strict "a is preferred over b": lighter, or equally heavy with a
// lexicographically smaller index list.
bool preferred(double weight_a, const std::vector<std::size_t>& a, double weight_b,
               const std::vector<std::size_t>& b) {
  if (weight_a != weight_b) return weight_a < weight_b;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<std::size_t> all_items(Eigen::Index n) {
  std::vector<std::size_t> out(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = j;
  return out;
}

std::vector<std::size_t> mask_items(std::uint64_t mask, Eigen::Index n) {
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (mask >> j & 1U) out.push_back(static_cast<std::size_t>(j));
  }
  return out;
}

Selection solve_exhaustive(const Instance& inst, ExactStats& stats) {
  const auto n = inst.items();
  const auto d = inst.resources();
  const std::uint64_t count = std::uint64_t{1} << n;

  double best_weight = std::numeric_limits<double>::infinity();
  bool found = false;
  std::vector<std::size_t> best;
  std::vector<std::size_t> current;
  Vector sums(d);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    ++stats.nodes;
    double weight = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (mask >> j & 1U) weight += inst.weights(j);
    }
    if (weight > best_weight) continue;
    sums.setZero();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (mask >> j & 1U) sums += inst.values.col(j);
    }
    if (((inst.thresholds - sums).array() > 0.0).any()) continue;
    current = mask_items(mask, n);
    if (!found || preferred(weight, current, best_weight, best)) {
      found = true;
      best_weight = weight;
      best = std::move(current);
    }
  }
  return evaluate(inst, best);
}

class BranchAndBound {
 public:
  BranchAndBound(const Instance& inst, std::optional<std::size_t> budget, ExactStats& stats)
      : inst_(inst), budget_(budget), stats_(stats) {
    const auto n = inst.items();
    const auto d = inst.resources();
    suffix_values_ = Matrix::Zero(d, n + 1);
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      suffix_values_.col(j) = suffix_values_.col(j + 1) + inst.values.col(j);
    }
    incumbent_ = all_items(n);
    incumbent_weight_ = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) incumbent_weight_ += inst.weights(j);
  }

  Selection run() {
    Vector sums = Vector::Zero(inst_.resources());
    std::vector<std::size_t> chosen;
    descend(0, 0.0, sums, chosen);
    return evaluate(inst_, incumbent_);
  }

 private:
  void descend(Eigen::Index next, double weight, const Vector& sums,
               std::vector<std::size_t>& chosen) {
    if (budget_ && stats_.nodes >= *budget_) {
      stats_.budget_exhausted = true;
      return;
    }
    ++stats_.nodes;
    if (weight > incumbent_weight_) return;

    const Vector residual = inst_.thresholds - sums;
    if ((residual.array() <= 0.0).all()) {
      if (preferred(weight, chosen, incumbent_weight_, incumbent_)) {
        incumbent_weight_ = weight;
        incumbent_ = chosen;
      }
    }
    if (next == inst_.items()) return;
    // Even taking every remaining item cannot close some open deficiency.
    if (((residual - suffix_values_.col(next)).array() > 0.0).any()) return;

    chosen.push_back(static_cast<std::size_t>(next));
    descend(next + 1, weight + inst_.weights(next), sums + inst_.values.col(next), chosen);
    chosen.pop_back();
    descend(next + 1, weight, sums, chosen);
  }

  const Instance& inst_;
  std::optional<std::size_t> budget_;
  ExactStats& stats_;
  Matrix suffix_values_;
  std::vector<std::size_t> incumbent_;
  double incumbent_weight_ = 0.0;
};

}  // namespace

void validate(const Instance& inst) {
  if (inst.values.rows() != inst.resources() || inst.values.cols() != inst.items()) {
    throw InvalidInput("knapsack: values must be d x n_s");
  }
  if (!inst.weights.allFinite() || (inst.weights.array() < 0.0).any()) {
    throw InvalidInput("knapsack: weights must be finite and nonnegative");
  }
  if (!inst.values.allFinite() || (inst.values.array() < 0.0).any()) {
    throw InvalidInput("knapsack: values must be finite and nonnegative");
  }
  if (!inst.thresholds.allFinite()) {
    throw InvalidInput("knapsack: thresholds must be finite");
  }
}

Selection evaluate(const Instance& inst, std::vector<std::size_t> chosen) {
  std::sort(chosen.begin(), chosen.end());
  Selection out;
  Vector sums = Vector::Zero(inst.resources());
  for (auto j : chosen) {
    const auto col = static_cast<Eigen::Index>(j);
    out.total_weight += inst.weights(col);
    sums += inst.values.col(col);
  }
  out.residual_deficiency = inst.thresholds - sums;
  out.satisfied = (out.residual_deficiency.array() <= 0.0).all();
  out.chosen = std::move(chosen);
  return out;
}

Selection greedy_solve(const Instance& inst, std::vector<GreedyStep>* trace) {
  validate(inst);
  const auto n = inst.items();
  if ((inst.thresholds.array() <= 0.0).all()) return evaluate(inst, {});
  // The loop only stops early once every deficiency is covered, so an
  // unsatisfiable instance always ends with the full item set.
  Selection full = evaluate(inst, all_items(n));
  if (!full.satisfied) return full;

  const Vector floor_sq =
      inst.thresholds.array().max(kDeficiencyFloor).square().matrix();
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  std::vector<std::size_t> chosen;
  Selection current = evaluate(inst, {});

  while (static_cast<Eigen::Index>(chosen.size()) < n) {
    const Vector relative =
        (current.residual_deficiency.array().max(0.0) / floor_sq.array()).matrix();
    Vector efficiency =
        Vector::Constant(n, -std::numeric_limits<double>::infinity());
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      const double gain = relative.dot(inst.values.col(j));
      const double w = inst.weights(j);
      double e;
      if (w > 0.0) {
        e = gain / w;
      } else {
        e = gain > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      }
      efficiency(j) = e;
      if (best < 0 || e > efficiency(best)) best = j;
    }
    if (trace != nullptr) {
      trace->push_back({current.residual_deficiency, efficiency,
                        static_cast<std::size_t>(best)});
    }
    taken[static_cast<std::size_t>(best)] = true;
    chosen.push_back(static_cast<std::size_t>(best));
    current = evaluate(inst, chosen);
    if (current.satisfied) break;
  }
  return current;
}

Selection exact_solve(const Instance& inst, std::optional<std::size_t> node_budget,
                      ExactMode mode, ExactStats* stats) {
  validate(inst);
  ExactStats local;
  ExactStats& st = stats != nullptr ? *stats : local;
  st = {};

  if ((inst.thresholds.array() <= 0.0).all()) return evaluate(inst, {});
  Selection full = evaluate(inst, all_items(inst.items()));
  if (!full.satisfied) return full;

  if (mode == ExactMode::kAuto) {
    mode = inst.items() <= kExhaustiveLimit ? ExactMode::kExhaustive
                                            : ExactMode::kBranchAndBound;
  }
  if (mode == ExactMode::kExhaustive) {
    if (inst.items() > 62) throw InvalidInput("exact_solve: too many items to enumerate");
    return solve_exhaustive(inst, st);
  }
  return BranchAndBound(inst, node_budget, st).run();
}

Instance build_instance(const Matrix& prior_info, std::span<const SensorModel> onboard,
                        std::span<const SensorModel> external, const Vector& thresholds) {
  const auto n = prior_info.rows();
  if (prior_info.cols() != n || thresholds.size() != n) {
    throw InvalidInput("build_instance: prior_info and thresholds must agree in dimension");
  }
  for (const auto& s : onboard) validate_sensor(s, n);
  for (const auto& s : external) validate_sensor(s, n);

  const Matrix base = information_update(prior_info, onboard);
  Instance inst;
  inst.thresholds = thresholds - base.diagonal();
  inst.weights.resize(static_cast<Eigen::Index>(external.size()));
  inst.values.resize(n, static_cast<Eigen::Index>(external.size()));
  for (std::size_t j = 0; j < external.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    inst.weights(col) = external[j].cost;
    inst.values.col(col) = info_contribution(external[j]).diagonal();
  }
  return inst;
}

namespace {

class Tokenizer {
 public:
  explicit Tokenizer(std::string_view text) : text_(text) {}

  std::size_t offset() const { return pos_; }

  std::optional<std::string_view> next() {
    skip();
    if (pos_ >= text_.size()) return std::nullopt;
    const auto start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '#') {
      ++pos_;
    }
    start_ = start;
    return text_.substr(start, pos_ - start);
  }

  std::size_t token_start() const { return start_; }

  template <typename T>
  T number(const char* what) {
    auto tok = next();
    if (!tok) throw ParseError(std::string("unexpected end of input, expected ") + what, pos_);
    T value{};
    const auto* first = tok->data();
    const auto* last = first + tok->size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
      throw ParseError("invalid " + std::string(what) + " '" + std::string(*tok) + "'", start_);
    }
    return value;
  }

 private:
  void skip() {
    while (pos_ < text_.size()) {
      if (text_[pos_] == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t start_ = 0;
};

}  // namespace

Instance parse_instance(std::string_view text) {
  Tokenizer tok(text);
  const auto d = tok.number<long long>("resource count d");
  const auto d_at = tok.token_start();
  const auto n = tok.number<long long>("item count n_s");
  if (d < 1) throw ParseError("resource count must be >= 1", d_at);
  if (n < 0) throw ParseError("item count must be >= 0", tok.token_start());

  Instance inst;
  inst.thresholds.resize(d);
  inst.weights.resize(n);
  inst.values.resize(d, n);
  for (long long i = 0; i < d; ++i) inst.thresholds(i) = tok.number<double>("threshold");
  for (long long j = 0; j < n; ++j) {
    inst.weights(j) = tok.number<double>("weight");
    if (!(inst.weights(j) >= 0.0) || !std::isfinite(inst.weights(j))) {
      throw ParseError("weight must be finite and nonnegative", tok.token_start());
    }
    for (long long i = 0; i < d; ++i) {
      inst.values(i, j) = tok.number<double>("value");
      if (!(inst.values(i, j) >= 0.0) || !std::isfinite(inst.values(i, j))) {
        throw ParseError("value must be finite and nonnegative", tok.token_start());
      }
    }
  }
  if (tok.next()) throw ParseError("trailing data after last item", tok.token_start());
  return inst;
}

std::string format_instance(const Instance& inst) {
  std::ostringstream os;
  os.precision(17);
  os << inst.resources() << ' ' << inst.items() << '\n';
  for (Eigen::Index i = 0; i < inst.resources(); ++i) {
    os << (i ? " " : "") << inst.thresholds(i);
  }
  os << '\n';
  for (Eigen::Index j = 0; j < inst.items(); ++j) {
    os << inst.weights(j);
    for (Eigen::Index i = 0; i < inst.resources(); ++i) os << ' ' << inst.values(i, j);
    os << '\n';
  }
  return os.str();
}

}  // namespace sensel::knapsack
