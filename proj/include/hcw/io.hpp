#pragma once

// Input plumbing shared by the loaders: delimited tables with line tracking,
// YAML documents with line-precise diagnostics, and duration literals.

#include <hcw/error.hpp>

#include <yaml-cpp/yaml.h>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hcw::io
{

struct CsvRow
{
    std::size_t line = 0; // 1-based source line
    std::vector<std::string> cells;
};

struct CsvTable
{
    std::string source;
    std::vector<std::string> header;
    std::vector<CsvRow> rows;

    /// Index of a header column; throws ConfigError when absent.
    std::size_t
    column(std::string_view name) const;
};

/// Comma-separated table. Blank lines and lines starting with '#' are
/// skipped; cells are trimmed. Every row must match the header width.
CsvTable
parse_csv(std::string_view text, std::string source);
CsvTable
read_csv(const std::filesystem::path& path);

std::string
read_text(const std::filesystem::path& path);

/// Number cell; a trailing '%' divides by 100.
double
parse_number(std::string_view cell, const std::string& source, std::size_t line);

/// Seconds from "300", "300s", "30min", "8h", "2d".
double
parse_duration(std::string_view text);

/// A YAML document plus the name used in diagnostics.
class Document
{
public:
    static Document
    load(const std::filesystem::path& path);
    static Document
    parse(std::string_view text, std::string source);

    const YAML::Node&
    root() const
    {
        return m_root;
    }
    const std::string&
    source() const
    {
        return m_source;
    }
    const std::filesystem::path&
    directory() const
    {
        return m_dir;
    }

    [[noreturn]] void
    fail(const YAML::Node& at, const std::string& what) const;

    YAML::Node
    required(const YAML::Node& map, const char* key) const;

    std::string
    string(const YAML::Node& map, const char* key) const;
    std::optional<std::string>
    optional_string(const YAML::Node& map, const char* key) const;
    double
    number(const YAML::Node& map, const char* key) const;
    double
    number_or(const YAML::Node& map, const char* key, double fallback) const;
    long long
    integer(const YAML::Node& map, const char* key) const;
    long long
    integer_or(const YAML::Node& map, const char* key, long long fallback) const;
    bool
    boolean_or(const YAML::Node& map, const char* key, bool fallback) const;
    /// Scalar interpreted through parse_duration.
    double
    duration(const YAML::Node& map, const char* key) const;
    double
    duration_or(const YAML::Node& map, const char* key, double fallback) const;

    double
    as_number(const YAML::Node& node) const;
    std::string
    as_string(const YAML::Node& node) const;

    /// Path relative to this document's directory.
    std::filesystem::path
    resolve(const std::string& relative) const;

private:
    YAML::Node m_root;
    std::string m_source;
    std::filesystem::path m_dir;
};

/// 1-based line of a node, 0 when unknown.
std::size_t
line_of(const YAML::Node& node);

} // namespace hcw::io
