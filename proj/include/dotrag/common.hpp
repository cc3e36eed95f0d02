#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dotrag {

// Error hierarchy. Everything thrown by the library derives from Error so the
// CLI can map failures to exit codes without catching std::exception blindly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ReferentialError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

class TransportError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

// Structured response could not be parsed after the configured retries.
// The last raw response is kept for logging.
class ResponseParseError : public ProviderError {
 public:
  ResponseParseError(const std::string& what, std::string raw)
      : ProviderError(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// Dense position of an entity inside a GraphIndex. Entities are stored sorted
// by id, so ordering on EntityIndex coincides with ordering on ids.
struct EntityIndex {
  std::uint32_t value = 0;
  auto operator<=>(const EntityIndex&) const = default;
};

struct RelationIndex {
  std::uint32_t value = 0;
  auto operator<=>(const RelationIndex&) const = default;
};

struct ChunkIndex {
  std::uint32_t value = 0;
  auto operator<=>(const ChunkIndex&) const = default;
};

namespace text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
// Case-folded, whitespace-collapsed form used for dedup and name matching.
std::string normalize(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool contains(std::string_view haystack, std::string_view needle);
// Lowercased alphanumeric runs.
std::vector<std::string> tokenize(std::string_view s);

}  // namespace text

}  // namespace dotrag

template <>
struct std::hash<dotrag::EntityIndex> {
  std::size_t operator()(dotrag::EntityIndex e) const noexcept { return std::hash<std::uint32_t>{}(e.value); }
};
