#include "dotrag/prompts.hpp"

#include <fstream>
#include <sstream>

#include "dotrag/common.hpp"

#ifndef DOTRAG_PROMPT_DIR
#define DOTRAG_PROMPT_DIR "prompts"
#endif

namespace dotrag {

PromptLibrary::PromptLibrary(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir_, ec)) {
    throw ConfigError("prompt template directory '" + dir_.string() + "' does not exist");
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::stringstream ss;
    ss << in.rdbuf();
    templates_.emplace(entry.path().stem().string(), ss.str());
  }
}

std::filesystem::path PromptLibrary::default_dir() { return DOTRAG_PROMPT_DIR; }

std::string PromptLibrary::render(std::string_view name, const PromptVars& vars) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw ConfigError("prompt template '" + std::string(name) + "' not found in " + dir_.string());
  }
  const std::string& tpl = it->second;
  std::string out;
  out.reserve(tpl.size() * 2);
  std::size_t pos = 0;
  while (true) {
    auto open = tpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tpl, pos, std::string::npos);
      break;
    }
    auto close = tpl.find("}}", open + 2);
    if (close == std::string::npos) throw ConfigError("prompt '" + std::string(name) + "': unterminated placeholder");
    out.append(tpl, pos, open - pos);
    const std::string key = text::trim(std::string_view(tpl).substr(open + 2, close - open - 2));
    auto v = vars.find(key);
    if (v == vars.end()) {
      throw ConfigError("prompt '" + std::string(name) + "': no value for placeholder '" + key + "'");
    }
    out += v->second;
    pos = close + 2;
  }
  return out;
}

}  // namespace dotrag
