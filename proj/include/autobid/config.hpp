#pragma once
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "autobid/market.hpp"

namespace autobid {

// Flat `key = value` text with `#` comments. Keys use dotted section
// prefixes (scenario.requests, control.kp, ...). Typed getters throw
// ValidationError naming the key.
class Config {
public:
  static Config parse(const std::string& text);
  // Throws IoError when the file cannot be read.
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  bool has_section(const std::string& prefix) const;
  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // "1.5, 2, 3"
  std::vector<double> get_doubles(const std::string& key) const;
  // "0:10, 1:20"
  std::map<ValueClass, double> get_class_map(const std::string& key) const;

private:
  std::map<std::string, std::string> entries_;
};

// Shortest text that reads back to exactly the same double.
std::string format_double(double x);

double parse_double(const std::string& text, const std::string& key);
std::vector<double> parse_doubles(const std::string& text, const std::string& key);
std::map<ValueClass, double> parse_class_map(const std::string& text, const std::string& key);

} // namespace autobid
