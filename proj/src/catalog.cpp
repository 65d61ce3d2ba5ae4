#include <hcw/catalog.hpp>
#include <hcw/io.hpp>

namespace hcw::photonics
{

FiberCatalog
FiberCatalog::parse(std::string_view text, std::string source)
{
    const auto table = io::parse_csv(text, std::move(source));
    const auto c_id = table.column("id");
    const auto c_a = table.column("endpoint_a");
    const auto c_b = table.column("endpoint_b");
    const auto c_len = table.column("length_km");
    const auto c_loss = table.column("loss_db");
    const auto c_env = table.column("environment");

    FiberCatalog cat;
    for (const auto& row : table.rows)
    {
        CatalogEntry e;
        e.channel.id = row.cells[c_id];
        e.endpoint_a = row.cells[c_a];
        e.endpoint_b = row.cells[c_b];
        e.channel.length_km = io::parse_number(row.cells[c_len], table.source, row.line);
        e.channel.loss_db = io::parse_number(row.cells[c_loss], table.source, row.line);
        try
        {
            e.channel.environment = environment_from_string(row.cells[c_env]);
        }
        catch (const ParameterError& err)
        {
            throw ConfigError(table.source, row.line, err.what());
        }
        if (e.channel.loss_db > 0.0 || e.channel.length_km < 0.0)
        {
            throw ConfigError(table.source, row.line, "loss_db must be <= 0 and length_km >= 0");
        }
        if (e.channel.id.empty() || cat.find(e.channel.id) != nullptr)
        {
            throw ConfigError(table.source, row.line, "empty or duplicate link id '" + e.channel.id + "'");
        }
        cat.m_entries.push_back(std::move(e));
    }
    return cat;
}

FiberCatalog
FiberCatalog::load(const std::filesystem::path& path)
{
    return parse(io::read_text(path), path.string());
}

const CatalogEntry*
FiberCatalog::find(std::string_view id) const
{
    for (const auto& e : m_entries)
    {
        if (e.channel.id == id)
        {
            return &e;
        }
    }
    return nullptr;
}

const CatalogEntry&
FiberCatalog::at(std::string_view id) const
{
    if (const auto* e = find(id))
    {
        return *e;
    }
    throw ConfigError("unknown fiber link '" + std::string(id) + "'");
}

} // namespace hcw::photonics
