#include "nl2api/templates.hpp"

#include <array>

#include "nl2api/error.hpp"
#include "nl2api/util.hpp"

namespace nl2api {

namespace {

constexpr std::array<std::string_view, 6> kPlaceholders = {"question", "schema", "rules",
                                                           "examples", "values_fragment", "dialect"};

constexpr std::string_view kInstruction =
    "You are a {dialect} specialist for the Land Matrix database API. You write meaningful, executable {dialect} "
    "requests that retrieve exactly the land deals a user asks for. Answer with the {dialect} request only, without "
    "explanations.";

constexpr std::string_view kContextPromptEngineering =
    "## Database schema\n{schema}\n\n"
    "## Attributes and their possible values\n{values_fragment}\n\n"
    "## Example questions and {dialect} requests\n{examples}\n\n"
    "## API rules\n{rules}";

constexpr std::string_view kContextRag =
    "## Database schema\n{schema}\n\n"
    "## Attributes and their possible values\n{values_fragment}\n\n"
    "## Similar questions and their {dialect} requests\n{examples}\n\n"
    "## API rules\n{rules}";

constexpr std::string_view kExtractorInstruction =
    "You extract the filters a user wants to apply to the Land Matrix database. Name each filter with one of the "
    "known attributes and copy the value as the user expressed it.";

constexpr std::string_view kExtractorContext =
    "## Known attributes\n{values_fragment}\n\n"
    "Answer with one line per filter, formatted exactly as [entity: value]. Answer with nothing else. If the "
    "question contains no filter, answer with an empty reply.";

constexpr std::string_view kContextAgentic =
    "## Database schema\n{schema}\n\n"
    "## Filters identified in the question\n{values_fragment}\n\n"
    "## Similar questions and their {dialect} requests\n{examples}\n\n"
    "## API rules\n{rules}";

}  // namespace

std::string substitute(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto name = text.substr(i + 1, close - i - 1);
        bool known = false;
        for (auto p : kPlaceholders) known = known || p == name;
        if (known) {
          auto it = values.find(std::string(name));
          if (it != values.end()) out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.set("instruction", std::string(kInstruction));
  t.set("context_prompt_engineering", std::string(kContextPromptEngineering));
  t.set("context_rag", std::string(kContextRag));
  t.set("extractor_instruction", std::string(kExtractorInstruction));
  t.set("extractor_context", std::string(kExtractorContext));
  t.set("context_agentic", std::string(kContextAgentic));
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  auto t = defaults();
  for (const auto& [name, _] : defaults().templates_) {
    auto file = dir / (name + ".txt");
    if (std::filesystem::exists(file)) {
      auto text = read_file(file);
      while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
      t.set(name, text);
    }
  }
  return t;
}

const std::string& PromptTemplates::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error(ErrorKind::InvalidArgument, "unknown prompt template '" + std::string(name) + "'");
  return it->second;
}

void PromptTemplates::set(std::string name, std::string text) { templates_.insert_or_assign(std::move(name), std::move(text)); }

std::string PromptTemplates::render(std::string_view name, const std::map<std::string, std::string>& values) const {
  return substitute(get(name), values);
}

}  // namespace nl2api
