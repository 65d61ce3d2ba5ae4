#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hcw
{

/// Base of every error raised by the library. `kind()` is a stable,
/// machine-parsable tag used by the CLI error prefix.
class Error : public std::runtime_error
{
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what)
        , m_kind(std::move(kind))
    {
    }

    const std::string&
    kind() const noexcept
    {
        return m_kind;
    }

private:
    std::string m_kind;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : Error
{
    explicit DomainError(const std::string& what)
        : Error("domain", what)
    {
    }
};

/// Physically or protocol-inconsistent parameter set.
struct ParameterError : Error
{
    explicit ParameterError(const std::string& what)
        : Error("parameter", what)
    {
    }
};

struct UndefinedQberError : Error
{
    explicit UndefinedQberError(const std::string& what)
        : Error("undefined-qber", what)
    {
    }
};

struct FabricConflictError : Error
{
    explicit FabricConflictError(const std::string& what)
        : Error("fabric-conflict", what)
    {
    }
};

struct UnknownStateError : Error
{
    explicit UnknownStateError(const std::string& what)
        : Error("unknown-state", what)
    {
    }
};

struct ShapeError : Error
{
    explicit ShapeError(const std::string& what)
        : Error("shape", what)
    {
    }
};

struct EventError : Error
{
    explicit EventError(const std::string& what)
        : Error("event", what)
    {
    }
};

/// Raised when a pool, card or relay hop cannot cover a request. Nothing is
/// debited when this is thrown.
class InsufficientKeyError : public Error
{
public:
    InsufficientKeyError(std::string where, std::size_t requested, std::size_t available)
        : Error("insufficient-key",
                where + ": requested " + std::to_string(requested) + " bits, "
                    + std::to_string(available) + " available")
        , m_where(std::move(where))
        , m_requested(requested)
        , m_available(available)
    {
    }

    /// Pool, hop or session that ran short.
    const std::string&
    where() const noexcept
    {
        return m_where;
    }
    std::size_t
    requested() const noexcept
    {
        return m_requested;
    }
    std::size_t
    available() const noexcept
    {
        return m_available;
    }

private:
    std::string m_where;
    std::size_t m_requested;
    std::size_t m_available;
};

/// Malformed or inconsistent input document. Carries the source location
/// when known (line is 1-based, 0 when unknown).
class ConfigError : public Error
{
public:
    ConfigError(const std::string& source, std::size_t line, const std::string& what)
        : Error("config", format(source, line, what))
        , m_source(source)
        , m_line(line)
    {
    }

    explicit ConfigError(const std::string& what)
        : Error("config", what)
        , m_line(0)
    {
    }

    const std::string&
    source() const noexcept
    {
        return m_source;
    }
    std::size_t
    line() const noexcept
    {
        return m_line;
    }

private:
    static std::string
    format(const std::string& source, std::size_t line, const std::string& what)
    {
        std::string out = source;
        if (line > 0)
        {
            out += ":" + std::to_string(line);
        }
        return out + ": " + what;
    }

    std::string m_source;
    std::size_t m_line;
};

} // namespace hcw
