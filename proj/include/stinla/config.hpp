#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stinla {

// Flat "key = value" configuration; '#' starts a comment. Later assignments
// (including command-line overrides) replace earlier ones.
class Config {
 public:
  static Config read(std::istream& in);
  static Config read_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool contains(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma- or whitespace-separated list.
  std::vector<std::string> get_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  void write(std::ostream& out) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace stinla
