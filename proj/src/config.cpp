#include "autobid/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "autobid/error.hpp"

namespace autobid {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, sep)) {
    parts.push_back(trim(part));
  }
  return parts;
}

} // namespace

Config Config::parse(const std::string& text) {
  Config config;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("", "line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ValidationError("", "line " + std::to_string(number) + ": empty key");
    }
    if (config.has(key)) {
      throw ValidationError(key, "given twice");
    }
    config.entries_[key] = trim(line.substr(eq + 1));
  }
  return config;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read config " + path);
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

bool Config::has_section(const std::string& prefix) const {
  const std::string dotted = prefix + ".";
  auto it = entries_.lower_bound(dotted);
  return it != entries_.end() && it->first.compare(0, dotted.size(), dotted) == 0;
}

std::string Config::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw ValidationError(key, "missing");
  }
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
  return parse_double(get_string(key), key);
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long Config::get_int(const std::string& key) const {
  const std::string text = get_string(key);
  long long value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ValidationError(key, "not an integer: '" + text + "'");
  }
  return value;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) {
    return fallback;
  }
  const std::string text = get_string(key);
  if (text == "true" || text == "1" || text == "yes") {
    return true;
  }
  if (text == "false" || text == "0" || text == "no") {
    return false;
  }
  throw ValidationError(key, "not a boolean: '" + text + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  return parse_doubles(get_string(key), key);
}

std::map<ValueClass, double> Config::get_class_map(const std::string& key) const {
  return parse_class_map(get_string(key), key);
}

std::string format_double(double x) {
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, x);
  if (ec != std::errc()) {
    throw Error("format_double: conversion failed");
  }
  return std::string(buffer, end);
}

double parse_double(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  double value = 0.0;
  const char* begin = t.data();
  if (!t.empty() && t.front() == '+') {
    ++begin;
  }
  const auto [end, ec] = std::from_chars(begin, t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || end != t.data() + t.size() || !std::isfinite(value)) {
    throw ValidationError(key, "not a finite number: '" + text + "'");
  }
  return value;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& key) {
  std::vector<double> out;
  if (trim(text).empty()) {
    return out;
  }
  for (const auto& part : split(text, ',')) {
    out.push_back(parse_double(part, key));
  }
  return out;
}

std::map<ValueClass, double> parse_class_map(const std::string& text, const std::string& key) {
  std::map<ValueClass, double> out;
  if (trim(text).empty()) {
    return out;
  }
  for (const auto& part : split(text, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw ValidationError(key, "expected class:value pairs, got '" + part + "'");
    }
    const std::string h = trim(part.substr(0, colon));
    ValueClass cls = 0;
    const auto [end, ec] = std::from_chars(h.data(), h.data() + h.size(), cls);
    if (h.empty() || ec != std::errc() || end != h.data() + h.size()) {
      throw ValidationError(key, "bad value class '" + h + "'");
    }
    if (!out.emplace(cls, parse_double(part.substr(colon + 1), key)).second) {
      throw ValidationError(key, "value class " + h + " repeated");
    }
  }
  return out;
}

} // namespace autobid
