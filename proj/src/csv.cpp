#include "border_rdd/csv.hpp"
#include "border_rdd/error.hpp"
#include "border_rdd/text.hpp"

namespace border_rdd {

CsvTable
CsvTable::parse(const std::string& text, const std::string& source)
{
  CsvTable t;
  t.source_ = source;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos)
      end = text.size();
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (trim(line).empty())
      continue;
    auto fields = split(line, ',');
    for (auto& f : fields)
      f = std::string(trim(f));
    if (t.header_.empty()) {
      t.header_ = fields;
      for (std::size_t i = 0; i < fields.size(); ++i)
        t.index_[fields[i]] = i;
      continue;
    }
    if (fields.size() != t.header_.size())
      throw ParseError(source, lineno,
                       "expected " + std::to_string(t.header_.size()) + " fields, found " +
                         std::to_string(fields.size()));
    t.rows_.push_back(std::move(fields));
  }
  if (t.header_.empty())
    throw ParseError(source, 1, "missing header row");
  return t;
}

CsvTable
CsvTable::load(const std::string& path)
{
  return parse(read_file(path), path);
}

std::size_t
CsvTable::column(const std::string& name) const
{
  auto it = index_.find(name);
  if (it == index_.end())
    throw StructuralError(source_ + ": missing column '" + name + "'");
  return it->second;
}

double
CsvTable::number(std::size_t row, std::size_t col) const
{
  auto v = parse_double(rows_[row][col]);
  if (!v)
    throw ParseError(source_, row + 2, "column '" + header_[col] + "': bad number '" + rows_[row][col] + "'");
  return *v;
}

long long
CsvTable::integer(std::size_t row, std::size_t col) const
{
  auto v = parse_int(rows_[row][col]);
  if (!v)
    throw ParseError(source_, row + 2, "column '" + header_[col] + "': bad integer '" + rows_[row][col] + "'");
  return *v;
}

CsvWriter::CsvWriter(std::vector<std::string> header)
  : width_(header.size())
{
  add(std::move(header));
}

CsvWriter&
CsvWriter::add(std::vector<std::string> row)
{
  if (row.size() != width_)
    throw StructuralError("CsvWriter: row width " + std::to_string(row.size()) + " != " + std::to_string(width_));
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i)
      out_ += ',';
    out_ += row[i];
  }
  out_ += '\n';
  return *this;
}

} // namespace border_rdd
