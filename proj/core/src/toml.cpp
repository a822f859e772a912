#include "spectra/toml.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spectra/error.hpp"

namespace spectra {

std::string TomlValue::as_string(const std::string& key) const {
    if (kind != Kind::string) fail_config("config key '" + key + "' must be a string");
    return str;
}

double TomlValue::as_number(const std::string& key) const {
    if (kind != Kind::number) fail_config("config key '" + key + "' must be a number");
    return num;
}

std::int64_t TomlValue::as_int(const std::string& key) const {
    const double v = as_number(key);
    if (v != std::floor(v)) fail_config("config key '" + key + "' must be an integer");
    return static_cast<std::int64_t>(v);
}

bool TomlValue::as_bool(const std::string& key) const {
    if (kind != Kind::boolean) fail_config("config key '" + key + "' must be a boolean");
    return boolean;
}

std::vector<std::string> TomlValue::as_string_array(const std::string& key) const {
    if (kind != Kind::array) fail_config("config key '" + key + "' must be an array");
    std::vector<std::string> out;
    for (const auto& v : array) out.push_back(v.as_string(key));
    return out;
}

std::vector<double> TomlValue::as_number_array(const std::string& key) const {
    if (kind != Kind::array) fail_config("config key '" + key + "' must be an array");
    std::vector<double> out;
    for (const auto& v : array) out.push_back(v.as_number(key));
    return out;
}

namespace {

struct Cursor {
    const std::string& text;
    std::size_t pos = 0;
    const std::string& origin;
    int line = 1;

    [[noreturn]] void fail(const std::string& msg) const {
        fail_config(origin + ":" + std::to_string(line) + ": " + msg);
    }
};

void skip_spaces(Cursor& c) {
    while (c.pos < c.text.size() && (c.text[c.pos] == ' ' || c.text[c.pos] == '\t')) ++c.pos;
}

TomlValue parse_scalar(Cursor& c);

TomlValue parse_array(Cursor& c) {
    TomlValue value;
    value.kind = TomlValue::Kind::array;
    ++c.pos;  // consume '['
    skip_spaces(c);
    if (c.pos < c.text.size() && c.text[c.pos] == ']') {
        ++c.pos;
        return value;
    }
    while (true) {
        skip_spaces(c);
        value.array.push_back(parse_scalar(c));
        skip_spaces(c);
        if (c.pos >= c.text.size()) c.fail("unterminated array");
        if (c.text[c.pos] == ',') {
            ++c.pos;
            continue;
        }
        if (c.text[c.pos] == ']') {
            ++c.pos;
            return value;
        }
        c.fail("expected ',' or ']' in array");
    }
}

TomlValue parse_scalar(Cursor& c) {
    if (c.pos >= c.text.size()) c.fail("missing value");
    const char first = c.text[c.pos];
    if (first == '[') return parse_array(c);
    TomlValue value;
    if (first == '"') {
        value.kind = TomlValue::Kind::string;
        ++c.pos;
        while (c.pos < c.text.size() && c.text[c.pos] != '"') {
            if (c.text[c.pos] == '\n') c.fail("unterminated string");
            if (c.text[c.pos] == '\\' && c.pos + 1 < c.text.size()) {
                const char esc = c.text[c.pos + 1];
                if (esc == 'n') value.str += '\n';
                else if (esc == 't') value.str += '\t';
                else value.str += esc;
                c.pos += 2;
                continue;
            }
            value.str += c.text[c.pos++];
        }
        if (c.pos >= c.text.size()) c.fail("unterminated string");
        ++c.pos;
        return value;
    }
    // bare word: number or boolean
    std::string word;
    while (c.pos < c.text.size() && c.text[c.pos] != ',' && c.text[c.pos] != ']' &&
           c.text[c.pos] != '\n' && c.text[c.pos] != '#' && c.text[c.pos] != ' ' &&
           c.text[c.pos] != '\t' && c.text[c.pos] != '\r') {
        word += c.text[c.pos++];
    }
    if (word == "true" || word == "false") {
        value.kind = TomlValue::Kind::boolean;
        value.boolean = word == "true";
        return value;
    }
    try {
        std::size_t used = 0;
        value.num = std::stod(word, &used);
        if (used != word.size()) throw std::invalid_argument(word);
        value.kind = TomlValue::Kind::number;
        return value;
    } catch (const std::exception&) {
        c.fail("cannot parse value '" + word + "'");
    }
}

}  // namespace

TomlTable parse_toml_string(const std::string& text, const std::string& origin) {
    TomlTable table;
    Cursor c{text, 0, origin, 1};
    std::string section;
    while (c.pos < text.size()) {
        skip_spaces(c);
        if (c.pos >= text.size()) break;
        const char ch = text[c.pos];
        if (ch == '\n') {
            ++c.pos;
            ++c.line;
            continue;
        }
        if (ch == '\r') {
            ++c.pos;
            continue;
        }
        if (ch == '#') {
            while (c.pos < text.size() && text[c.pos] != '\n') ++c.pos;
            continue;
        }
        if (ch == '[') {
            const auto end = text.find(']', c.pos);
            if (end == std::string::npos) c.fail("unterminated section header");
            section = text.substr(c.pos + 1, end - c.pos - 1);
            if (section.empty()) c.fail("empty section name");
            c.pos = end + 1;
            continue;
        }
        // key = value
        std::string key;
        while (c.pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[c.pos])) ||
                                       text[c.pos] == '_' || text[c.pos] == '.')) {
            key += text[c.pos++];
        }
        if (key.empty()) c.fail(std::string("unexpected character '") + ch + "'");
        skip_spaces(c);
        if (c.pos >= text.size() || text[c.pos] != '=') c.fail("expected '=' after key '" + key + "'");
        ++c.pos;
        skip_spaces(c);
        TomlValue value = parse_scalar(c);
        const std::string full_key = section.empty() ? key : section + "." + key;
        if (table.count(full_key)) c.fail("duplicate key '" + full_key + "'");
        table[full_key] = std::move(value);
        skip_spaces(c);
        if (c.pos < text.size() && text[c.pos] == '#') {
            while (c.pos < text.size() && text[c.pos] != '\n') ++c.pos;
        }
        if (c.pos < text.size() && text[c.pos] == '\r') ++c.pos;
        if (c.pos < text.size() && text[c.pos] != '\n') c.fail("trailing characters after value of '" + key + "'");
    }
    return table;
}

TomlTable parse_toml_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_io("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_toml_string(ss.str(), path);
}

}  // namespace spectra
