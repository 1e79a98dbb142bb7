#include "nl2api/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include "nl2api/error.hpp"

namespace nl2api {

using nlohmann::json;
using nlohmann::ordered_json;

AttributeConfusion attribute_confusion(const std::vector<Filter>& ref, const std::vector<Filter>& gen) {
  std::map<std::string_view, const Filter*> ref_by_name;
  std::map<std::string_view, const Filter*> gen_by_name;
  for (const auto& f : ref) ref_by_name.emplace(f.attribute(), &f);
  for (const auto& f : gen) gen_by_name.emplace(f.attribute(), &f);

  AttributeConfusion c;
  for (const auto& [name, f] : ref_by_name) {
    auto it = gen_by_name.find(name);
    if (it == gen_by_name.end()) {
      ++c.fn;
      continue;
    }
    ++c.tp;
    if (f->same_values(*it->second)) ++c.tp_values;
  }
  for (const auto& [name, f] : gen_by_name)
    if (!ref_by_name.count(name)) ++c.fp;
  return c;
}

SampleScores sample_scores(const AttributeConfusion& c) {
  const bool all_zero = c.tp == 0 && c.fp == 0 && c.fn == 0;
  auto ratio = [&](double num, double den) { return den == 0.0 ? (all_zero ? 1.0 : 0.0) : num / den; };
  const double tp = static_cast<double>(c.tp);
  SampleScores s;
  s.precision = ratio(tp, tp + static_cast<double>(c.fp));
  s.recall = ratio(tp, tp + static_cast<double>(c.fn));
  s.accuracy = ratio(tp, tp + static_cast<double>(c.fp) + static_cast<double>(c.fn));
  s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
  s.value_score = ratio(static_cast<double>(c.tp_values), tp + static_cast<double>(c.fn));
  return s;
}

// ---------------------------------------------------------------------------
// Outcomes

ordered_json EvalOutcome::to_json() const {
  ordered_json j;
  j["entry_id"] = entry_id;
  j["strategy"] = std::string(to_string(strategy));
  j["model"] = model;
  j["dialect"] = std::string(to_string(dialect));
  j["scored"] = scored;
  if (!scored) j["unscored_reason"] = unscored_reason;
  j["syntax_valid"] = syntax_valid;
  j["result_jaccard"] = result_jaccard ? ordered_json(*result_jaccard) : ordered_json(nullptr);
  if (confusion) {
    j["confusion"] = {{"tp", confusion->tp}, {"fp", confusion->fp}, {"fn", confusion->fn},
                      {"tp_values", confusion->tp_values}};
  } else {
    j["confusion"] = nullptr;
  }
  j["parser_gap"] = parser_gap;
  j["query_jaccard"] = query_jaccard;
  j["generated_query"] = generated_query ? ordered_json(*generated_query) : ordered_json(nullptr);
  j["trace_digest"] = trace_digest;
  j["warnings"] = warnings;
  return j;
}

EvalOutcome EvalOutcome::from_json(const json& j) {
  try {
    EvalOutcome o;
    o.entry_id = j.at("entry_id").get<std::string>();
    o.strategy = parse_strategy(j.at("strategy").get<std::string>());
    o.model = j.at("model").get<std::string>();
    o.dialect = parse_dialect(j.at("dialect").get<std::string>());
    o.scored = j.at("scored").get<bool>();
    o.unscored_reason = j.value("unscored_reason", std::string{});
    o.syntax_valid = j.at("syntax_valid").get<bool>();
    if (auto it = j.find("result_jaccard"); it != j.end() && !it->is_null()) o.result_jaccard = it->get<double>();
    if (auto it = j.find("confusion"); it != j.end() && !it->is_null()) {
      o.confusion = AttributeConfusion{it->at("tp").get<std::size_t>(), it->at("fp").get<std::size_t>(),
                                       it->at("fn").get<std::size_t>(), it->at("tp_values").get<std::size_t>()};
    }
    o.parser_gap = j.value("parser_gap", false);
    o.query_jaccard = j.value("query_jaccard", 0.0);
    if (auto it = j.find("generated_query"); it != j.end() && !it->is_null())
      o.generated_query = it->get<std::string>();
    o.trace_digest = j.value("trace_digest", std::string{});
    o.warnings = j.value("warnings", std::vector<std::string>{});
    return o;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("bad outcome record: ") + e.what());
  }
}

namespace {

bool is_upstream(ErrorKind k) {
  switch (k) {
    case ErrorKind::CassetteMiss:
    case ErrorKind::Transport:
    case ErrorKind::Timeout:
    case ErrorKind::RateLimited:
    case ErrorKind::Unauthorized:
    case ErrorKind::UpstreamError:
    case ErrorKind::BackendUnavailable:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::MissingCredential:
      return true;
    default:
      return false;
  }
}

std::set<std::string> filter_pairs(const std::vector<Filter>& filters) {
  std::set<std::string> out;
  for (const auto& f : filters)
    for (const auto& v : f.values())
      out.insert(f.attribute() + '\x1f' + std::string(to_string(v.kind)) + '\x1f' + v.match_key());
  return out;
}

EvalOutcome unscored(EvalOutcome o, std::string reason) {
  o.scored = false;
  o.unscored_reason = std::move(reason);
  o.syntax_valid = false;
  o.result_jaccard.reset();
  o.confusion.reset();
  return o;
}

}  // namespace

EvalOutcome evaluate_sample(const CorpusEntry& entry, const GenerationTrace& trace, const ApiExecutor& executor) {
  const auto& ref_text = entry.query(trace.dialect);
  if (!ref_text)
    throw Error(ErrorKind::InvalidArgument,
                "entry " + entry.id + " has no " + std::string(to_string(trace.dialect)) + " query", entry.id);

  EvalOutcome o;
  o.entry_id = entry.id;
  o.strategy = trace.strategy;
  o.model = trace.model;
  o.dialect = trace.dialect;
  o.generated_query = trace.extracted_query;
  o.trace_digest = trace.digest();
  o.warnings = trace.warnings;

  if (trace.error && trace.error->kind != ErrorKind::NoQueryFound)
    return unscored(std::move(o), "generation: " + std::string(to_string(trace.error->kind)) + ": " + trace.error->message);

  ExecutionResult ref_result;
  try {
    ref_result = executor.execute(*ref_text, trace.dialect);
  } catch (const Error& e) {
    if (!is_upstream(e.kind())) throw;
    return unscored(std::move(o), "expert query: " + std::string(to_string(e.kind())) + ": " + e.what());
  }
  if (!ref_result.valid) o.warnings.push_back("expert query did not execute successfully");

  if (!trace.extracted_query || trace.extracted_query->empty()) {
    if (trace.error) o.warnings.push_back(trace.error->message);
    o.syntax_valid = false;
    return o;
  }

  ExecutionResult gen_result;
  try {
    gen_result = executor.execute(*trace.extracted_query, trace.dialect);
  } catch (const Error& e) {
    if (!is_upstream(e.kind())) throw;
    return unscored(std::move(o), "generated query: " + std::string(to_string(e.kind())) + ": " + e.what());
  }
  for (const auto& w : gen_result.warnings) o.warnings.push_back(w);

  o.syntax_valid = gen_result.valid;
  if (!o.syntax_valid) return o;

  o.result_jaccard = jaccard(gen_result.result_ids, ref_result.result_ids);

  CanonicalQuery gen_q;
  try {
    gen_q = parse_query(*trace.extracted_query, trace.dialect);
  } catch (const Error& e) {
    o.parser_gap = true;
    o.warnings.push_back(std::string("ParserGap: ") + e.what());
    return o;
  }
  auto ref_q = parse_query(*ref_text, trace.dialect);
  o.confusion = attribute_confusion(ref_q.filters, gen_q.filters);
  o.query_jaccard = jaccard(filter_pairs(ref_q.filters), filter_pairs(gen_q.filters));
  return o;
}

// ---------------------------------------------------------------------------
// Aggregation

std::vector<ReportRow> aggregate(const std::vector<EvalOutcome>& outcomes, const AggregateOptions& options) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<const EvalOutcome*>> groups;
  for (const auto& o : outcomes)
    groups[{std::string(to_string(o.strategy)), o.model, std::string(to_string(o.dialect))}].push_back(&o);

  std::vector<ReportRow> rows;
  for (auto& [key, members] : groups) {
    // Fold in a fixed order so floating-point sums do not depend on input order.
    std::sort(members.begin(), members.end(), [](const EvalOutcome* a, const EvalOutcome* b) {
      return std::tie(a->entry_id, a->trace_digest) < std::tie(b->entry_id, b->trace_digest);
    });

    ReportRow row;
    row.strategy = std::get<0>(key);
    row.model = std::get<1>(key);
    row.dialect = members.front()->dialect;

    double result_sum = 0.0;
    double query_sum = 0.0;
    std::size_t n_confusions = 0;
    SampleScores macro_sum;
    for (const auto* o : members) {
      if (!o->scored) {
        ++row.n_unscored;
        continue;
      }
      ++row.n_samples;
      query_sum += o->query_jaccard;
      if (!o->syntax_valid) continue;
      ++row.n_valid;
      result_sum += o->result_jaccard.value_or(0.0);
      if (o->parser_gap) ++row.n_parser_gap;
      if (!o->confusion) continue;
      ++n_confusions;
      row.totals += *o->confusion;
      auto s = sample_scores(*o->confusion);
      macro_sum.precision += s.precision;
      macro_sum.recall += s.recall;
      macro_sum.accuracy += s.accuracy;
      macro_sum.f1 += s.f1;
      macro_sum.value_score += s.value_score;
    }

    if (row.n_samples > 0) {
      const double n = static_cast<double>(row.n_samples);
      row.valid_query_rate = 100.0 * static_cast<double>(row.n_valid) / n;
      row.query_jaccard = 100.0 * query_sum / n;
      const double result_den = options.valid_result_valid_only ? static_cast<double>(row.n_valid) : n;
      row.valid_result = result_den > 0 ? 100.0 * result_sum / result_den : 0.0;
    }
    if (n_confusions > 0) {
      SampleScores s;
      if (options.macro) {
        const double m = static_cast<double>(n_confusions);
        s = {macro_sum.precision / m, macro_sum.recall / m, macro_sum.accuracy / m, macro_sum.f1 / m,
             macro_sum.value_score / m};
      } else {
        s = sample_scores(row.totals);
      }
      row.precision = 100.0 * s.precision;
      row.recall = 100.0 * s.recall;
      row.accuracy = 100.0 * s.accuracy;
      row.f1 = 100.0 * s.f1;
      row.value_score = 100.0 * s.value_score;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Rendering

std::string format_percent(double value, int decimals) {
  decimals = std::clamp(decimals, 0, 6);
  const double scale = std::pow(10.0, decimals);
  const double rounded = std::floor(value * scale + 0.5 + 1e-9) / scale;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  return buf;
}

namespace {

struct ComboCells {
  const ReportRow* rest = nullptr;
  const ReportRow* graphql = nullptr;
};

// (strategy, model) pairs in row order.
std::vector<std::pair<std::pair<std::string, std::string>, ComboCells>> by_combo(const std::vector<ReportRow>& rows) {
  std::map<std::pair<std::string, std::string>, ComboCells> cells;
  for (const auto& r : rows) {
    auto& c = cells[{r.strategy, r.model}];
    (r.dialect == Dialect::Rest ? c.rest : c.graphql) = &r;
  }
  return {cells.begin(), cells.end()};
}

std::string pct(const std::optional<double>& v, int decimals) {
  return v ? format_percent(*v, decimals) + "%" : "-";
}

std::string rate_cell(const ReportRow* r, double ReportRow::*field, int decimals) {
  if (!r || r->n_samples == 0) return "-";
  return format_percent(r->*field, decimals) + "%";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void filter_table(std::ostringstream& out, const std::vector<ReportRow>& rows, Dialect dialect, int decimals) {
  out << "| Approach | LLM | Precision | Recall | Accuracy | F1-score | Value-score |\n";
  out << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    if (r.dialect != dialect) continue;
    out << "| " << r.strategy << " | " << r.model << " | " << pct(r.precision, decimals) << " | "
        << pct(r.recall, decimals) << " | " << pct(r.accuracy, decimals) << " | " << pct(r.f1, decimals) << " | "
        << pct(r.value_score, decimals) << " |\n";
  }
}

}  // namespace

std::string render_report(const std::vector<ReportRow>& rows, ReportFormat format, const RenderOptions& options) {
  std::ostringstream out;
  if (format == ReportFormat::Csv) {
    out << kReportCsvHeader << "\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_percent(*v, 2) : std::string(); };
    for (const auto& r : rows) {
      out << csv_field(r.strategy) << ',' << csv_field(r.model) << ',' << to_string(r.dialect) << ',' << r.n_samples
          << ',' << r.n_valid << ',' << r.n_unscored << ',' << format_percent(r.valid_query_rate, 2) << ','
          << opt(r.precision) << ',' << opt(r.recall) << ',' << opt(r.accuracy) << ',' << opt(r.f1) << ','
          << opt(r.value_score) << ',' << format_percent(r.valid_result, 2) << ','
          << format_percent(r.query_jaccard, 2) << "\n";
    }
    return out.str();
  }

  const int d = options.decimals;
  const auto combos = by_combo(rows);

  out << "## Query validity\n\n";
  out << "| Approach | LLM | Valid Query for REST | Valid Query for GraphQL |\n";
  out << "|---|---|---|---|\n";
  for (const auto& [combo, c] : combos) {
    out << "| " << combo.first << " | " << combo.second << " | " << rate_cell(c.rest, &ReportRow::valid_query_rate, d)
        << " | " << rate_cell(c.graphql, &ReportRow::valid_query_rate, d) << " |\n";
  }

  out << "\n## Filter accuracy for REST\n\n";
  filter_table(out, rows, Dialect::Rest, d);
  out << "\n## Filter accuracy for GraphQL\n\n";
  filter_table(out, rows, Dialect::GraphQL, d);

  out << "\n## Returned data\n\n";
  out << "| Approach | LLM | Valid Result for REST | Valid Result for GraphQL |\n";
  out << "|---|---|---|---|\n";
  for (const auto& [combo, c] : combos) {
    out << "| " << combo.first << " | " << combo.second << " | " << rate_cell(c.rest, &ReportRow::valid_result, d)
        << " | " << rate_cell(c.graphql, &ReportRow::valid_result, d) << " |\n";
  }

  std::size_t unscored = 0;
  std::size_t gaps = 0;
  for (const auto& r : rows) {
    unscored += r.n_unscored;
    gaps += r.n_parser_gap;
  }
  if (unscored > 0 || gaps > 0) {
    out << "\n";
    if (unscored > 0) out << "Unscored samples (upstream failures, excluded): " << unscored << "\n";
    if (gaps > 0) out << "Valid queries the local parser could not read (no filter scores): " << gaps << "\n";
  }
  return out.str();
}

}  // namespace nl2api
