#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <utility>
#include <vector>

namespace dtbsm::kv {

/// `key = value` pairs in file order. Throws Parse on sections, duplicate
/// keys or lines without `=`; `what` names the file kind in messages.
std::vector<std::pair<std::string, std::string>> read(std::istream& in, const char* what);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected);

double real(const std::string& key, const std::string& text);
std::uint64_t count(const std::string& key, const std::string& text);
std::vector<double> reals(const std::string& key, const std::string& text);
std::vector<std::uint32_t> counts(const std::string& key, const std::string& text);

}  // namespace dtbsm::kv
