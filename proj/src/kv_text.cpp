#include "segmict/kv_text.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace segmict {

namespace {

std::string trim(const std::string &text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos)
    return {};
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

} // namespace

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::vector<double> parse_double_list(const std::string &text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (item.empty())
      continue;
    std::size_t used = 0;
    const double value = std::stod(item, &used);
    if (used != item.size())
      throw std::invalid_argument("not a number: '" + item + "'");
    values.push_back(value);
  }
  return values;
}

void KeyValueRecord::set(const std::string &key, const std::string &value) {
  for (auto &entry : entries_) {
    if (entry.first == key) {
      entry.second = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValueRecord::set(const std::string &key, double value) { set(key, format_double(value)); }
void KeyValueRecord::set(const std::string &key, int value) { set(key, std::to_string(value)); }
void KeyValueRecord::set(const std::string &key, bool value) {
  set(key, std::string(value ? "true" : "false"));
}

void KeyValueRecord::set(const std::string &key, const std::vector<double> &values) {
  std::string joined;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0)
      joined += ',';
    joined += format_double(values[i]);
  }
  set(key, joined);
}

std::optional<std::string> KeyValueRecord::get(const std::string &key) const {
  for (const auto &entry : entries_)
    if (entry.first == key)
      return entry.second;
  return std::nullopt;
}

void KeyValueRecord::write(std::ostream &out) const {
  for (const auto &[key, value] : entries_)
    out << key << " = " << value << '\n';
}

void KeyValueRecord::save(const std::filesystem::path &path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  write(out);
}

KeyValueRecord KeyValueRecord::parse(std::istream &in) {
  KeyValueRecord record;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto equals = line.find('=');
    if (equals == std::string::npos)
      throw std::runtime_error("line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, equals));
    if (key.empty())
      throw std::runtime_error("line " + std::to_string(number) + ": empty key");
    record.set(key, trim(line.substr(equals + 1)));
  }
  return record;
}

KeyValueRecord KeyValueRecord::load(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  return parse(in);
}

} // namespace segmict
