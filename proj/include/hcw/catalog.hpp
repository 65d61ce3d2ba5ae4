#pragma once

#include <hcw/photonics.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hcw::photonics
{

struct CatalogEntry
{
    FiberChannel channel;
    std::string endpoint_a;
    std::string endpoint_b;
};

/// Installed fibre spans, read from a table with columns
/// id, endpoint_a, endpoint_b, length_km, loss_db, environment.
class FiberCatalog
{
public:
    static FiberCatalog
    parse(std::string_view text, std::string source);
    static FiberCatalog
    load(const std::filesystem::path& path);

    const std::vector<CatalogEntry>&
    entries() const
    {
        return m_entries;
    }

    /// nullptr when absent.
    const CatalogEntry*
    find(std::string_view id) const;
    const CatalogEntry&
    at(std::string_view id) const;

private:
    std::vector<CatalogEntry> m_entries;
};

} // namespace hcw::photonics
