#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace dotrag {

using PromptVars = std::map<std::string, std::string, std::less<>>;

/// Prompt templates loaded from `<dir>/<name>.txt`. Placeholders are written
/// `{{name}}`; rendering fails on any placeholder without a value.
class PromptLibrary {
 public:
  explicit PromptLibrary(std::filesystem::path dir);

  /// Directory baked in at build time (the repository's prompts/ folder).
  static std::filesystem::path default_dir();

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::string render(std::string_view name, const PromptVars& vars) const;

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace dotrag
