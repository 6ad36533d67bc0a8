#pragma once

#include <map>
#include <string>
#include <vector>

namespace retypelab {

/// key=value configuration text. Lines starting with '#' and blank lines
/// are ignored; keys are unique (duplicates are an error).
class KvConfig {
 public:
  static KvConfig parse(const std::string& text);
  static KvConfig load(const std::string& path);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Canonical rendering, keys sorted; used for provenance echoes.
  std::string render() const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace retypelab
