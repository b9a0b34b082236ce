#pragma once

// Line-oriented key/value text used for parameter files, scenarios,
// synthesis reports, controller configs and run manifests.
//
//   # comment
//   key = value
//   key = 1.0 2.0, 3.0        (numeric lists: whitespace and/or commas)
//
// Keys may repeat (scenario breakpoints); order is preserved.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace segway {

/// Malformed input text. `what()` is prefixed with "source:line: ".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& message);

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

class KeyValueDocument {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
  };

  KeyValueDocument() = default;
  explicit KeyValueDocument(std::string source) : source_(std::move(source)) {}

  static KeyValueDocument parse(std::string_view text, std::string source = "<text>");
  static KeyValueDocument load(const std::string& path);

  const std::string& source() const { return source_; }
  const std::vector<Entry>& entries() const { return entries_; }

  bool contains(std::string_view key) const;
  /// Last entry for `key`, if any.
  const Entry* find(std::string_view key) const;
  std::vector<const Entry*> find_all(std::string_view key) const;

  std::string get_string(std::string_view key) const;
  std::string get_string(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;
  long long get_int(std::string_view key, long long fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  /// Numeric list; throws ParseError if `expected_size` is given and differs.
  std::vector<double> get_doubles(std::string_view key,
                                  std::optional<std::size_t> expected_size = std::nullopt) const;

  /// Rejects keys not in `allowed` (typos in config files should not pass silently).
  void require_known_keys(std::span<const std::string_view> allowed) const;

  [[noreturn]] void fail(const Entry& entry, const std::string& message) const;
  [[noreturn]] void fail_missing(std::string_view key) const;

  void add(std::string key, std::string value);
  void add(std::string key, double value);
  void add(std::string key, std::span<const double> values);
  void add_comment(std::string text);

  std::string to_string() const;
  void save(const std::string& path) const;

 private:
  std::string source_ = "<text>";
  std::vector<Entry> entries_;
  // Comment lines for serialization, keyed by the entry index they precede.
  std::vector<std::pair<std::size_t, std::string>> comments_;
};

/// Shortest "%.17g" rendering that reads back bit-exactly.
std::string format_exact(double value);
/// "%.9g" rendering used by trace CSVs.
std::string format_sig9(double value);

double parse_double(std::string_view token, const std::string& source, std::size_t line);
std::vector<double> parse_doubles(std::string_view text, const std::string& source, std::size_t line);

}  // namespace segway
