#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nl2api/api_executor.hpp"
#include "nl2api/corpus.hpp"
#include "nl2api/query_model.hpp"
#include "nl2api/strategies.hpp"

namespace nl2api {

/// |a ∩ b| / |a ∪ b|; two empty sets agree perfectly (1.0).
template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

struct AttributeConfusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tp_values = 0;

  AttributeConfusion& operator+=(const AttributeConfusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tp_values += o.tp_values;
    return *this;
  }
  friend bool operator==(const AttributeConfusion&, const AttributeConfusion&) = default;
};

/// Matches on attribute name; tp_values counts matched attributes whose
/// normalized value sets are equal.
AttributeConfusion attribute_confusion(const std::vector<Filter>& ref, const std::vector<Filter>& gen);

struct SampleScores {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double value_score = 0.0;
};

/// Fractions in [0, 1]. A 0/0 ratio is 1.0 when the confusion is all zero
/// (both filter sets empty), 0.0 otherwise.
SampleScores sample_scores(const AttributeConfusion& c);

struct EvalOutcome {
  std::string entry_id;
  Strategy strategy = Strategy::PromptEngineering;
  std::string model;
  Dialect dialect = Dialect::Rest;

  bool scored = true;
  std::string unscored_reason;  // set when !scored
  bool syntax_valid = false;
  std::optional<double> result_jaccard;
  std::optional<AttributeConfusion> confusion;
  bool parser_gap = false;
  double query_jaccard = 0.0;  // filter-pair overlap with the expert query; 0 when invalid
  std::optional<std::string> generated_query;
  std::string trace_digest;
  std::vector<std::string> warnings;

  nlohmann::ordered_json to_json() const;
  static EvalOutcome from_json(const nlohmann::json& j);
};

/// Executes the generated and the expert query and scores the pair. Upstream
/// failures (gateway errors, executor transport errors, cassette misses)
/// produce an unscored outcome instead of throwing.
EvalOutcome evaluate_sample(const CorpusEntry& entry, const GenerationTrace& trace, const ApiExecutor& executor);

struct ReportRow {
  std::string strategy;
  std::string model;
  Dialect dialect = Dialect::Rest;
  std::size_t n_samples = 0;  // scored samples
  std::size_t n_valid = 0;
  std::size_t n_unscored = 0;
  std::size_t n_parser_gap = 0;
  double valid_query_rate = 0.0;  // percentages, 0..100
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;
  std::optional<double> f1;
  std::optional<double> value_score;
  double valid_result = 0.0;
  double query_jaccard = 0.0;
  AttributeConfusion totals;
};

struct AggregateOptions {
  bool macro = false;              // average per-sample scores instead of summing confusions
  bool valid_result_valid_only = false;
};

/// Grouped by (strategy, model, dialect), rows in lexicographic order. The
/// result does not depend on the order of `outcomes`.
std::vector<ReportRow> aggregate(const std::vector<EvalOutcome>& outcomes, const AggregateOptions& options = {});

enum class ReportFormat { Markdown, Csv };

struct RenderOptions {
  int decimals = 0;  // markdown percentages; csv always uses 2
};

/// Half-up rounding used by the reports: 66.666 -> "67".
std::string format_percent(double value, int decimals);

std::string render_report(const std::vector<ReportRow>& rows, ReportFormat format, const RenderOptions& options = {});

inline constexpr const char* kReportCsvHeader =
    "strategy,model,dialect,n_samples,n_valid,n_unscored,valid_query_rate,precision,recall,accuracy,f1,value_score,"
    "valid_result,query_jaccard";

}  // namespace nl2api
