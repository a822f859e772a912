#pragma once

#include <map>
#include <string>
#include <vector>

namespace spectra {

/// Minimal TOML subset used by the config files: comments, [section] headers,
/// and `key = value` lines with strings, numbers, booleans, and single-line
/// arrays of those. Keys flatten to "section.key".
struct TomlValue {
    enum class Kind { string, number, boolean, array };
    Kind kind = Kind::string;
    std::string str;
    double num = 0.0;
    bool boolean = false;
    std::vector<TomlValue> array;

    std::string as_string(const std::string& key) const;
    double as_number(const std::string& key) const;
    std::int64_t as_int(const std::string& key) const;
    bool as_bool(const std::string& key) const;
    std::vector<std::string> as_string_array(const std::string& key) const;
    std::vector<double> as_number_array(const std::string& key) const;
};

using TomlTable = std::map<std::string, TomlValue>;

TomlTable parse_toml_string(const std::string& text, const std::string& origin = "<string>");
TomlTable parse_toml_file(const std::string& path);

}  // namespace spectra
