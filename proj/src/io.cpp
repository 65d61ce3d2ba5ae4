#include <hcw/io.hpp>

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace hcw::io
{

namespace
{

std::string_view
trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string>
split_cells(std::string_view line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true)
    {
        const auto comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos)
        {
            break;
        }
        start = comma + 1;
    }
    return out;
}

bool
parse_double(std::string_view text, double& out)
{
    text = trim(text);
    if (text.empty())
    {
        return false;
    }
    if (text.front() == '+')
    {
        text.remove_prefix(1);
    }
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

} // namespace

std::size_t
CsvTable::column(std::string_view name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
    {
        if (header[i] == name)
        {
            return i;
        }
    }
    throw ConfigError(source, 0, "missing column '" + std::string(name) + "'");
}

CsvTable
parse_csv(std::string_view text, std::string source)
{
    CsvTable table;
    table.source = std::move(source);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size())
    {
        const auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
        {
            line.remove_suffix(1);
        }
        const auto stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#')
        {
            continue;
        }
        auto cells = split_cells(stripped);
        if (table.header.empty())
        {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size())
        {
            throw ConfigError(table.source, line_no,
                              "expected " + std::to_string(table.header.size()) + " cells, found "
                                  + std::to_string(cells.size()));
        }
        table.rows.push_back({line_no, std::move(cells)});
    }
    if (table.header.empty())
    {
        throw ConfigError(table.source, 0, "empty table (no header row)");
    }
    return table;
}

std::string
read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw ConfigError(path.string(), 0, "cannot open file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CsvTable
read_csv(const std::filesystem::path& path)
{
    return parse_csv(read_text(path), path.string());
}

double
parse_number(std::string_view cell, const std::string& source, std::size_t line)
{
    auto text = trim(cell);
    bool percent = false;
    if (!text.empty() && text.back() == '%')
    {
        percent = true;
        text.remove_suffix(1);
    }
    double v = 0.0;
    if (!parse_double(text, v))
    {
        throw ConfigError(source, line, "not a number: '" + std::string(cell) + "'");
    }
    return percent ? v / 100.0 : v;
}

double
parse_duration(std::string_view text)
{
    text = trim(text);
    std::size_t split = text.size();
    while (split > 0 && std::isalpha(static_cast<unsigned char>(text[split - 1])))
    {
        --split;
    }
    const auto unit = text.substr(split);
    double v = 0.0;
    if (!parse_double(text.substr(0, split), v))
    {
        throw ConfigError("invalid duration '" + std::string(text) + "'");
    }
    if (unit.empty() || unit == "s")
    {
        return v;
    }
    if (unit == "min")
    {
        return v * 60.0;
    }
    if (unit == "h")
    {
        return v * 3600.0;
    }
    if (unit == "d")
    {
        return v * 86400.0;
    }
    throw ConfigError("invalid duration unit '" + std::string(unit) + "' (s|min|h|d)");
}

std::size_t
line_of(const YAML::Node& node)
{
    const auto mark = node.Mark();
    return mark.line < 0 ? 0 : static_cast<std::size_t>(mark.line) + 1;
}

Document
Document::load(const std::filesystem::path& path)
{
    auto doc = parse(read_text(path), path.string());
    doc.m_dir = path.parent_path();
    return doc;
}

Document
Document::parse(std::string_view text, std::string source)
{
    Document doc;
    doc.m_source = std::move(source);
    try
    {
        doc.m_root = YAML::Load(std::string(text));
    }
    catch (const YAML::Exception& e)
    {
        throw ConfigError(doc.m_source, e.mark.line < 0 ? 0 : std::size_t(e.mark.line) + 1, e.msg);
    }
    if (!doc.m_root.IsMap())
    {
        throw ConfigError(doc.m_source, 1, "document root must be a mapping");
    }
    return doc;
}

void
Document::fail(const YAML::Node& at, const std::string& what) const
{
    throw ConfigError(m_source, line_of(at), what);
}

YAML::Node
Document::required(const YAML::Node& map, const char* key) const
{
    if (!map.IsMap())
    {
        fail(map, std::string("expected a mapping containing '") + key + "'");
    }
    auto node = map[key];
    if (!node)
    {
        fail(map, std::string("missing required key '") + key + "'");
    }
    return node;
}

double
Document::as_number(const YAML::Node& node) const
{
    if (!node.IsScalar())
    {
        fail(node, "expected a number");
    }
    return parse_number(node.Scalar(), m_source, line_of(node));
}

std::string
Document::as_string(const YAML::Node& node) const
{
    if (!node.IsScalar())
    {
        fail(node, "expected a scalar");
    }
    return node.Scalar();
}

std::string
Document::string(const YAML::Node& map, const char* key) const
{
    return as_string(required(map, key));
}

std::optional<std::string>
Document::optional_string(const YAML::Node& map, const char* key) const
{
    auto node = map[key];
    if (!node)
    {
        return std::nullopt;
    }
    return as_string(node);
}

double
Document::number(const YAML::Node& map, const char* key) const
{
    return as_number(required(map, key));
}

double
Document::number_or(const YAML::Node& map, const char* key, double fallback) const
{
    auto node = map[key];
    return node ? as_number(node) : fallback;
}

long long
Document::integer(const YAML::Node& map, const char* key) const
{
    const auto node = required(map, key);
    const double v = as_number(node);
    if (v != static_cast<double>(static_cast<long long>(v)))
    {
        fail(node, std::string("'") + key + "' must be an integer");
    }
    return static_cast<long long>(v);
}

long long
Document::integer_or(const YAML::Node& map, const char* key, long long fallback) const
{
    return map[key] ? integer(map, key) : fallback;
}

bool
Document::boolean_or(const YAML::Node& map, const char* key, bool fallback) const
{
    auto node = map[key];
    if (!node)
    {
        return fallback;
    }
    const auto s = as_string(node);
    if (s == "true" || s == "yes")
    {
        return true;
    }
    if (s == "false" || s == "no")
    {
        return false;
    }
    fail(node, std::string("'") + key + "' must be true or false");
}

double
Document::duration(const YAML::Node& map, const char* key) const
{
    const auto node = required(map, key);
    try
    {
        return parse_duration(as_string(node));
    }
    catch (const ConfigError& e)
    {
        fail(node, e.what());
    }
}

double
Document::duration_or(const YAML::Node& map, const char* key, double fallback) const
{
    return map[key] ? duration(map, key) : fallback;
}

std::filesystem::path
Document::resolve(const std::string& relative) const
{
    std::filesystem::path p(relative);
    return p.is_absolute() ? p : m_dir / p;
}

} // namespace hcw::io
