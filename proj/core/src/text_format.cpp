#include "domaingcn/text_format.hpp"

#include <charconv>
#include <cmath>

namespace domaingcn {

namespace {

template <typename T>
std::string FormatShortest(T v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::optional<T> ParseWhole(std::string_view text) {
  text = Trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  T value{};
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

}  // namespace

std::string FormatDouble(double v) { return FormatShortest(v); }
std::string FormatFloat(float v) { return FormatShortest(v); }

std::optional<double> ParseDouble(std::string_view text) { return ParseWhole<double>(text); }
std::optional<float> ParseFloat(std::string_view text) { return ParseWhole<float>(text); }
std::optional<long long> ParseInt(std::string_view text) { return ParseWhole<long long>(text); }
std::optional<std::uint64_t> ParseUint(std::string_view text) {
  return ParseWhole<std::uint64_t>(text);
}

std::optional<bool> ParseBool(std::string_view text) {
  text = Trim(text);
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  return std::nullopt;
}

std::string_view Trim(std::string_view text) {
  const char* ws = " \t\r\n";
  const auto first = text.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(ws);
  return text.substr(first, last - first + 1);
}

std::vector<std::string_view> Split(std::string_view text, char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(delimiter, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace domaingcn
