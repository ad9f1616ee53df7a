#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace vecsac {

/// Ordered `key = value` text records. Blank lines and `#` comments are
/// skipped; later duplicates override earlier ones.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text);
  static KeyValueFile read(const std::filesystem::path& path);

  void write(const std::filesystem::path& path) const;
  std::string to_string() const;

  void set(const std::string& key, const std::string& value);
  bool contains(const std::string& key) const;
  /// Throws ConfigError naming the key when absent.
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace vecsac
