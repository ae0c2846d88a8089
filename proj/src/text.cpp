#include "border_rdd/text.hpp"
#include "border_rdd/error.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace border_rdd {

std::string
format_number(double value)
{
  if (std::isnan(value))
    return "NA";
  if (value == 0.0)
    return "0"; // also folds -0
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

std::string
format_number(std::int64_t value)
{
  return std::to_string(value);
}

std::optional<double>
parse_double(std::string_view text)
{
  text = trim(text);
  if (text.empty())
    return std::nullopt;
  if (text == "NA" || text == "nan" || text == "NaN")
    return std::nan("");
  if (text.front() == '+')
    text.remove_prefix(1);
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    return std::nullopt;
  return value;
}

std::optional<std::int64_t>
parse_int(std::string_view text)
{
  text = trim(text);
  if (text.empty())
    return std::nullopt;
  if (text.front() == '+')
    text.remove_prefix(1);
  std::int64_t value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    return std::nullopt;
  return value;
}

std::string_view
trim(std::string_view text)
{
  const char* ws = " \t\r\n";
  auto b = text.find_first_not_of(ws);
  if (b == std::string_view::npos)
    return {};
  auto e = text.find_last_not_of(ws);
  return text.substr(b, e - b + 1);
}

std::vector<std::string>
split(std::string_view text, char sep)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      break;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string>
split_whitespace(std::string_view text)
{
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
      ++j;
    if (j > i)
      out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

void
write_file_atomic(const std::string& path, const std::string& contents)
{
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path())
    fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error("cannot open for writing: " + tmp.string());
    out << contents;
    if (!out)
      throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string
read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace border_rdd
