#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace nl2api {

/// Prompt templates with `{placeholder}` substitution. Recognised
/// placeholders: question, schema, rules, examples, values_fragment, dialect.
/// Any other brace text is left untouched, so GraphQL snippets are safe.
///
/// Template names (file `<name>.txt` in a template directory):
///   instruction, context_prompt_engineering, context_rag,
///   extractor_instruction, extractor_context, context_agentic
class PromptTemplates {
 public:
  /// Built-in wording.
  static PromptTemplates defaults();
  /// Built-in wording overridden by every `<name>.txt` present in `dir`.
  static PromptTemplates load(const std::filesystem::path& dir);

  const std::string& get(std::string_view name) const;
  void set(std::string name, std::string text);

  std::string render(std::string_view name, const std::map<std::string, std::string>& values) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

std::string substitute(std::string_view text, const std::map<std::string, std::string>& values);

}  // namespace nl2api
