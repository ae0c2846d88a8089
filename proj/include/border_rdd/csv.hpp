#pragma once

#include <map>
#include <string>
#include <vector>

namespace border_rdd {

//! Minimal header-keyed CSV reader. Fields never contain commas or quotes in
//! the formats this project reads and writes.
class CsvTable
{
public:
  static CsvTable parse(const std::string& text, const std::string& source);
  static CsvTable load(const std::string& path);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t size() const { return rows_.size(); }
  bool has_column(const std::string& name) const { return index_.count(name) > 0; }

  //! Throws StructuralError naming the column when absent.
  std::size_t column(const std::string& name) const;
  const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }

  double number(std::size_t row, std::size_t col) const;
  long long integer(std::size_t row, std::size_t col) const;

  const std::string& source() const { return source_; }

private:
  std::string source_;
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

class CsvWriter
{
public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& add(std::vector<std::string> row);
  std::string str() const { return out_; }

private:
  std::size_t width_;
  std::string out_;
};

} // namespace border_rdd
