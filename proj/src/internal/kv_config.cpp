#include "internal/kv_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <sstream>

#include "dtbsm/error.hpp"

namespace dtbsm::kv {

std::vector<std::pair<std::string, std::string>> read(std::istream& in, const char* what) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::Parse, std::string(what) + ": " + e.what());
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, node] : tree) {
    if (!node.empty())
      throw Error(ErrorCode::Parse, std::string(what) + ": sections are not supported (`" + key + "`)");
    out.emplace_back(key, trim(node.data()));
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::Parse, "config key `" + key + "`: expected " + expected + ", got `" + value + "`");
}

double real(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(text, &used);
  } catch (const std::exception&) {
    bad_value(key, text, "a number");
  }
  if (used != text.size() || !std::isfinite(x)) bad_value(key, text, "a finite number");
  return x;
}

std::uint64_t count(const std::string& key, const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
    bad_value(key, text, "a nonnegative integer");
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    bad_value(key, text, "a nonnegative integer");
  }
}

std::vector<double> reals(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(real(key, item));
  return out;
}

std::vector<std::uint32_t> counts(const std::string& key, const std::string& text) {
  std::vector<std::uint32_t> out;
  for (const auto& item : split(text, ',')) {
    const auto v = count(key, item);
    if (v > UINT32_MAX) bad_value(key, item, "a 32-bit count");
    out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

}  // namespace dtbsm::kv
