#include "coserec/evaluator.hpp"

#include <iomanip>
#include <limits>
#include <ostream>
#include <unordered_set>

#include "coserec/error.hpp"

namespace coserec::evaluator {

std::string to_string(Split split) { return split == Split::Validation ? "validation" : "test"; }

Split parse_split(std::string_view text) {
  if (text == "validation" || text == "valid" || text == "val") return Split::Validation;
  if (text == "test") return Split::Test;
  throw ConfigError("unknown split '" + std::string(text) + "' (expected validation or test)");
}

namespace {

std::size_t cutoff_index(int k) {
  for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
    if (kCutoffs[i] == k) return i;
  }
  throw ConfigError("unsupported cutoff @" + std::to_string(k) + " (use 5, 10 or 20)");
}

}  // namespace

double MetricReport::hr_at(int k) const { return hr[cutoff_index(k)]; }
double MetricReport::ndcg_at(int k) const { return ndcg[cutoff_index(k)]; }

double MetricReport::metric(std::string_view name) const {
  const auto at = name.find('@');
  if (at == std::string_view::npos) throw ConfigError("metric must look like ndcg@20");
  const std::string kind(name.substr(0, at));
  const int k = std::stoi(std::string(name.substr(at + 1)));
  if (kind == "hr") return hr_at(k);
  if (kind == "ndcg") return ndcg_at(k);
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

std::string MetricReport::condition_label() const {
  std::string label;
  for (const auto& [key, value] : condition) {
    if (!label.empty()) label += ';';
    label += key + '=' + value;
  }
  return label.empty() ? to_string(split) : label;
}

std::size_t rank_target(const encoder::Encoder<float>& model, std::span<const ItemId> input,
                        ItemId target, const EvalOptions& options) {
  if (target == kPaddingId || target > model.config().item_count) {
    throw ConfigError("target item outside 1..|V|");
  }
  const auto ids = model.pad(input);
  const auto states = model.encode(ids);
  Eigen::VectorXf scores = model.score_items(states.hidden.row(states.hidden.rows() - 1));
  if (options.filter_history) {
    for (ItemId v : input) {
      if (v != target && v >= 1 && v <= model.config().item_count) {
        scores[v - 1] = -std::numeric_limits<float>::infinity();
      }
    }
  }
  return rank_target<float>({scores.data(), static_cast<std::size_t>(scores.size())}, target);
}

MetricReport report_from_ranks(std::span<const std::size_t> ranks, Split split) {
  if (ranks.empty()) throw InvalidCorpusError("cannot evaluate an empty split");
  MetricReport r;
  r.split = split;
  r.users = ranks.size();
  for (std::size_t rank : ranks) {
    for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
      r.hr[i] += hr_at_k(rank, kCutoffs[i]);
      r.ndcg[i] += ndcg_at_k(rank, kCutoffs[i]);
    }
  }
  for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
    r.hr[i] /= static_cast<double>(ranks.size());
    r.ndcg[i] /= static_cast<double>(ranks.size());
  }
  return r;
}

MetricReport evaluate(const encoder::Encoder<float>& model, const corpus::SequenceCorpus& corpus,
                      Split split, const EvalOptions& options) {
  std::vector<std::size_t> ranks(corpus.user_count());
  for (std::size_t u = 0; u < corpus.user_count(); ++u) {
    if (split == Split::Validation) {
      ranks[u] = rank_target(model, corpus.validation_input(u), corpus.validation_target(u), options);
    } else {
      ranks[u] = rank_target(model, corpus.test_input(u), corpus.test_target(u), options);
    }
  }
  return report_from_ranks(ranks, split);
}

void write_metrics_csv(std::ostream& out, std::span<const MetricReport> reports) {
  out << "condition,metric,k,value\n";
  out << std::setprecision(10);
  for (const auto& r : reports) {
    const std::string label = r.condition_label();
    for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
      out << label << ",HR," << kCutoffs[i] << ',' << r.hr[i] << '\n';
    }
    for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
      out << label << ",NDCG," << kCutoffs[i] << ',' << r.ndcg[i] << '\n';
    }
  }
}

void print_metrics_table(std::ostream& out, std::span<const MetricReport> reports) {
  out << std::left << std::setw(40) << "condition";
  for (int k : kCutoffs) out << std::setw(10) << ("HR@" + std::to_string(k));
  for (int k : kCutoffs) out << std::setw(10) << ("NDCG@" + std::to_string(k));
  out << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& r : reports) {
    out << std::setw(40) << r.condition_label();
    for (double v : r.hr) out << std::setw(10) << v;
    for (double v : r.ndcg) out << std::setw(10) << v;
    out << '\n';
  }
  out << std::defaultfloat;
}

}  // namespace coserec::evaluator
