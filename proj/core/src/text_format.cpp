#include "segway/text_format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace segway {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
  });
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + message),
      source_(source),
      line_(line) {}

double parse_double(std::string_view token, const std::string& source, std::size_t line) {
  token = trim(token);
  double value = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(source, line, "expected a number, got '" + std::string(token) + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(source, line, "non-finite number '" + std::string(token) + "'");
  }
  return value;
}

std::vector<double> parse_doubles(std::string_view text, const std::string& source,
                                  std::size_t line) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() &&
           (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == ',')) {
      ++i;
    }
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) &&
           text[j] != ',') {
      ++j;
    }
    if (j > i) out.push_back(parse_double(text.substr(i, j - i), source, line));
    i = j;
  }
  return out;
}

KeyValueDocument KeyValueDocument::parse(std::string_view text, std::string source) {
  KeyValueDocument doc(std::move(source));
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const auto raw = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = trim(line.substr(0, hash));

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(doc.source_, line_no, "expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (!valid_key(key)) {
      throw ParseError(doc.source_, line_no, "invalid key '" + std::string(key) + "'");
    }
    doc.entries_.push_back({std::string(key), std::string(value), line_no});
  }
  return doc;
}

KeyValueDocument KeyValueDocument::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

bool KeyValueDocument::contains(std::string_view key) const { return find(key) != nullptr; }

const KeyValueDocument::Entry* KeyValueDocument::find(std::string_view key) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->key == key) return &*it;
  }
  return nullptr;
}

std::vector<const KeyValueDocument::Entry*> KeyValueDocument::find_all(std::string_view key) const {
  std::vector<const Entry*> out;
  for (const auto& e : entries_) {
    if (e.key == key) out.push_back(&e);
  }
  return out;
}

void KeyValueDocument::fail(const Entry& entry, const std::string& message) const {
  throw ParseError(source_, entry.line, entry.key + ": " + message);
}

void KeyValueDocument::fail_missing(std::string_view key) const {
  throw ParseError(source_, 0, "missing required key '" + std::string(key) + "'");
}

std::string KeyValueDocument::get_string(std::string_view key) const {
  const auto* e = find(key);
  if (e == nullptr) fail_missing(key);
  return e->value;
}

std::string KeyValueDocument::get_string(std::string_view key, std::string fallback) const {
  const auto* e = find(key);
  return e == nullptr ? std::move(fallback) : e->value;
}

double KeyValueDocument::get_double(std::string_view key) const {
  const auto* e = find(key);
  if (e == nullptr) fail_missing(key);
  return parse_double(e->value, source_, e->line);
}

double KeyValueDocument::get_double(std::string_view key, double fallback) const {
  const auto* e = find(key);
  return e == nullptr ? fallback : parse_double(e->value, source_, e->line);
}

long long KeyValueDocument::get_int(std::string_view key, long long fallback) const {
  const auto* e = find(key);
  if (e == nullptr) return fallback;
  long long value = 0;
  const auto& s = e->value;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail(*e, "expected an integer");
  return value;
}

bool KeyValueDocument::get_bool(std::string_view key, bool fallback) const {
  const auto* e = find(key);
  if (e == nullptr) return fallback;
  if (e->value == "true" || e->value == "on" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "off" || e->value == "0" || e->value == "no") return false;
  fail(*e, "expected a boolean (true/false)");
}

std::vector<double> KeyValueDocument::get_doubles(std::string_view key,
                                                  std::optional<std::size_t> expected_size) const {
  const auto* e = find(key);
  if (e == nullptr) fail_missing(key);
  auto values = parse_doubles(e->value, source_, e->line);
  if (expected_size && values.size() != *expected_size) {
    fail(*e, "expected " + std::to_string(*expected_size) + " numbers, got " +
                 std::to_string(values.size()));
  }
  return values;
}

void KeyValueDocument::require_known_keys(std::span<const std::string_view> allowed) const {
  for (const auto& e : entries_) {
    if (std::find(allowed.begin(), allowed.end(), e.key) == allowed.end()) {
      fail(e, "unknown key");
    }
  }
}

void KeyValueDocument::add(std::string key, std::string value) {
  entries_.push_back({std::move(key), std::move(value), entries_.size() + 1});
}

void KeyValueDocument::add(std::string key, double value) { add(std::move(key), format_exact(value)); }

void KeyValueDocument::add(std::string key, std::span<const double> values) {
  std::string joined;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) joined += ' ';
    joined += format_exact(values[i]);
  }
  add(std::move(key), std::move(joined));
}

void KeyValueDocument::add_comment(std::string text) {
  comments_.emplace_back(entries_.size(), std::move(text));
}

std::string KeyValueDocument::to_string() const {
  std::string out;
  std::size_t c = 0;
  for (std::size_t i = 0; i <= entries_.size(); ++i) {
    while (c < comments_.size() && comments_[c].first == i) {
      out += "# " + comments_[c].second + "\n";
      ++c;
    }
    if (i < entries_.size()) out += entries_[i].key + " = " + entries_[i].value + "\n";
  }
  return out;
}

void KeyValueDocument::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_string();
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string format_exact(double value) {
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, value);
    double back = 0.0;
    std::from_chars(buf, buf + std::char_traits<char>::length(buf), back);
    if (back == value) break;
  }
  return buf;
}

std::string format_sig9(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

}  // namespace segway
