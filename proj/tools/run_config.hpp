#pragma once

#include "border_rdd/outcomes.hpp"
#include "border_rdd/raster.hpp"
#include "border_rdd/rdd.hpp"
#include "border_rdd/synth.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace border_rdd::cli {

//! Flat `key = value` file. Keys are dotted lower-case names, `#` starts a
//! comment, lists are comma separated. Relative paths resolve against the
//! directory holding the file. Every accessor that rejects a value names the
//! offending key.
class Config
{
public:
  static Config load(const std::string& path);
  static Config parse(std::string_view text, const std::string& source, const std::filesystem::path& base_dir);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }

  std::string text(const std::string& key, const std::string& fallback) const;
  std::string required_text(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::optional<double> optional_number(const std::string& key) const;
  long long integer(const std::string& key, long long fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::vector<std::string> list(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;

  //! Resolved path; the key must be present.
  std::filesystem::path path(const std::string& key) const;
  //! Resolved path that must name an existing file.
  std::filesystem::path input_path(const std::string& key) const;
  std::filesystem::path path_or(const std::string& key, const std::filesystem::path& fallback) const;

  //! Rejects keys that no command understands (typos would otherwise be
  //! silently ignored).
  void check_known_keys() const;

  //! Overrides or adds a key, as if it were written in the file.
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

private:
  std::string source_;
  std::filesystem::path base_dir_;
  std::map<std::string, std::string> values_;

  const std::string* find(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
};

FishnetSpec fishnet_from(const Config& config);
CellTableOptions table_options_from(const Config& config);
//! rdd.* keys; the outcome and covariates are filled in by each study.
RddSpec rdd_spec_from(const Config& config);
//! synth.* keys plus the top-level seed.
SyntheticWorldConfig world_config_from(const Config& config);

} // namespace border_rdd::cli
