#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace segmict {

/// Ordered `key = value` record, one entry per line, `#` starts a comment.
/// Used for run configurations and run reports.
class KeyValueRecord {
public:
  void set(const std::string &key, const std::string &value);
  void set(const std::string &key, const char *value) { set(key, std::string(value)); }
  void set(const std::string &key, double value);
  void set(const std::string &key, int value);
  void set(const std::string &key, bool value);
  void set(const std::string &key, const std::vector<double> &values);

  std::optional<std::string> get(const std::string &key) const;
  bool contains(const std::string &key) const { return get(key).has_value(); }
  const std::vector<std::pair<std::string, std::string>> &entries() const { return entries_; }

  void write(std::ostream &out) const;
  void save(const std::filesystem::path &path) const;

  /// Throws std::runtime_error naming the offending line.
  static KeyValueRecord parse(std::istream &in);
  static KeyValueRecord load(const std::filesystem::path &path);

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest round-trip decimal rendering ("%.17g").
std::string format_double(double value);

std::vector<double> parse_double_list(const std::string &text);

} // namespace segmict
