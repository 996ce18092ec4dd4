#pragma once

#include <stdexcept>
#include <string>

namespace diagd
{

enum class ErrorKind
{
    Config,
    Bounds,
    Domain,
    Resource,
    Unsupported,
    Format,
    Internal,
};

// Base for every exception thrown by the library. The kind selects the CLI exit code.
class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, std::string const& what)
        : std::runtime_error(what)
        , mKind(kind)
    {
    }

    [[nodiscard]] ErrorKind kind() const noexcept
    {
        return mKind;
    }

private:
    ErrorKind mKind;
};

struct ConfigError : Error
{
    explicit ConfigError(std::string const& what)
        : Error(ErrorKind::Config, what)
    {
    }
};

struct BoundsError : Error
{
    explicit BoundsError(std::string const& what)
        : Error(ErrorKind::Bounds, what)
    {
    }
};

struct DomainError : Error
{
    explicit DomainError(std::string const& what)
        : Error(ErrorKind::Domain, what)
    {
    }
};

struct ResourceError : Error
{
    explicit ResourceError(std::string const& what)
        : Error(ErrorKind::Resource, what)
    {
    }
};

struct UnsupportedError : Error
{
    explicit UnsupportedError(std::string const& what)
        : Error(ErrorKind::Unsupported, what)
    {
    }
};

struct FormatError : Error
{
    explicit FormatError(std::string const& what)
        : Error(ErrorKind::Format, what)
    {
    }
};

struct InternalError : Error
{
    explicit InternalError(std::string const& what)
        : Error(ErrorKind::Internal, what)
    {
    }
};

#define DIAGD_CHECK(cond, ExceptionType, msg)                                                                          \
    do                                                                                                                 \
    {                                                                                                                  \
        if (!(cond))                                                                                                   \
        {                                                                                                              \
            throw ExceptionType(msg);                                                                                  \
        }                                                                                                              \
    } while (0)

} // namespace diagd
