#pragma once

#include "diagd/error.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace diagd
{

using Count = std::int64_t;
using TokenId = std::int32_t;

// Token grid shape. Generated frames are indexed [0, frames); prompt frames [-prompt_frames, 0).
struct GridGeometry
{
    Count frames{1};
    Count height{1};
    Count width{1};
    Count prompt_frames{0};
    Count vocab{2};

    [[nodiscard]] constexpr Count tokens_per_frame() const noexcept
    {
        return height * width;
    }

    [[nodiscard]] constexpr Count generated_tokens() const noexcept
    {
        return frames * height * width;
    }

    [[nodiscard]] constexpr Count prompt_tokens() const noexcept
    {
        return prompt_frames * height * width;
    }

    // Sequence length including prompt frames.
    [[nodiscard]] constexpr Count total_positions() const noexcept
    {
        return (prompt_frames + frames) * height * width;
    }

    friend constexpr bool operator==(GridGeometry const&, GridGeometry const&) = default;
};

inline void validate_geometry(GridGeometry const& geom)
{
    DIAGD_CHECK(geom.frames >= 1, ConfigError, "frames must be >= 1, got " + std::to_string(geom.frames));
    DIAGD_CHECK(geom.height >= 1, ConfigError, "height must be >= 1, got " + std::to_string(geom.height));
    DIAGD_CHECK(geom.width >= 1, ConfigError, "width must be >= 1, got " + std::to_string(geom.width));
    DIAGD_CHECK(geom.prompt_frames >= 0, ConfigError,
        "prompt_frames must be >= 0, got " + std::to_string(geom.prompt_frames));
    DIAGD_CHECK(geom.vocab >= 2, ConfigError, "vocab must be >= 2, got " + std::to_string(geom.vocab));
}

struct Coordinate
{
    std::int32_t frame{0};
    std::int32_t row{0};
    std::int32_t col{0};

    friend constexpr auto operator<=>(Coordinate const&, Coordinate const&) = default;
    friend constexpr bool operator==(Coordinate const&, Coordinate const&) = default;

    [[nodiscard]] constexpr bool is_prompt() const noexcept
    {
        return frame < 0;
    }
};

inline std::ostream& operator<<(std::ostream& os, Coordinate const& c)
{
    return os << '(' << c.frame << ',' << c.row << ',' << c.col << ')';
}

// Which already-available token seeds the query for a new token.
enum class PredecessorPolicy
{
    Raster,
    Temporal,
};

inline std::string_view to_string(PredecessorPolicy policy)
{
    return policy == PredecessorPolicy::Raster ? "raster" : "temporal";
}

inline PredecessorPolicy parse_policy(std::string_view name)
{
    if (name == "raster")
    {
        return PredecessorPolicy::Raster;
    }
    if (name == "temporal")
    {
        return PredecessorPolicy::Temporal;
    }
    throw ConfigError("unknown predecessor policy '" + std::string(name) + "' (expected raster|temporal)");
}

// Spatial window k and temporal delay d. With temporal == false the delay field is ignored and
// frames are decoded back to back (effective d = s_spa).
struct DiagConfig
{
    Count k{1};
    Count d{1};
    bool temporal{true};
    PredecessorPolicy policy{PredecessorPolicy::Raster};

    friend constexpr bool operator==(DiagConfig const&, DiagConfig const&) = default;
};

// Steps needed for one frame: (h - 1) * k + w.
[[nodiscard]] constexpr Count spatial_steps(GridGeometry const& geom, Count k) noexcept
{
    return (geom.height - 1) * k + geom.width;
}

struct ConfigCheck
{
    Count spatial_steps{0};
    Count effective_delay{0};
};

inline ConfigCheck validate_config(GridGeometry const& geom, DiagConfig const& cfg)
{
    validate_geometry(geom);
    DIAGD_CHECK(cfg.k >= 1, ConfigError, "k must be >= 1, got " + std::to_string(cfg.k));
    DIAGD_CHECK(cfg.k <= geom.width, ConfigError,
        "k must be <= width (" + std::to_string(geom.width) + "), got " + std::to_string(cfg.k));
    auto const sSpa = spatial_steps(geom, cfg.k);
    if (!cfg.temporal)
    {
        return {sSpa, sSpa};
    }
    DIAGD_CHECK(cfg.d >= 1, ConfigError, "d must be >= 1, got " + std::to_string(cfg.d));
    DIAGD_CHECK(cfg.d <= sSpa, ConfigError,
        "d must be <= s_spa (" + std::to_string(sSpa) + "), got " + std::to_string(cfg.d));
    return {sSpa, cfg.d};
}

// k = w with d = s_spa reproduces raster order exactly.
[[nodiscard]] inline DiagConfig raster_equivalent_config(
    GridGeometry const& geom, PredecessorPolicy policy = PredecessorPolicy::Raster)
{
    return DiagConfig{geom.width, spatial_steps(geom, geom.width), true, policy};
}

[[nodiscard]] inline bool in_bounds(GridGeometry const& geom, Coordinate const& c) noexcept
{
    return c.frame >= -geom.prompt_frames && c.frame < geom.frames && c.row >= 0 && c.row < geom.height && c.col >= 0
        && c.col < geom.width;
}

inline void check_bounds(GridGeometry const& geom, Coordinate const& c)
{
    if (!in_bounds(geom, c))
    {
        throw BoundsError("coordinate (" + std::to_string(c.frame) + "," + std::to_string(c.row) + ","
            + std::to_string(c.col) + ") is outside the grid");
    }
}

// Raster index over generated frames only: t*h*w + i*w + j.
inline Count raster_index(GridGeometry const& geom, Coordinate const& c)
{
    check_bounds(geom, c);
    DIAGD_CHECK(c.frame >= 0, BoundsError, "raster_index is defined for generated frames only");
    return c.frame * geom.tokens_per_frame() + c.row * geom.width + c.col;
}

inline Coordinate raster_coord(GridGeometry const& geom, Count index)
{
    DIAGD_CHECK(index >= 0 && index < geom.generated_tokens(), BoundsError,
        "raster index " + std::to_string(index) + " out of range");
    auto const n = geom.tokens_per_frame();
    return Coordinate{static_cast<std::int32_t>(index / n), static_cast<std::int32_t>((index % n) / geom.width),
        static_cast<std::int32_t>(index % geom.width)};
}

// Sequence position including prompt frames; prompt frames occupy [0, P*h*w).
inline Count sequence_position(GridGeometry const& geom, Coordinate const& c)
{
    check_bounds(geom, c);
    return (c.frame + geom.prompt_frames) * geom.tokens_per_frame() + c.row * geom.width + c.col;
}

inline Coordinate sequence_coord(GridGeometry const& geom, Count position)
{
    DIAGD_CHECK(position >= 0 && position < geom.total_positions(), BoundsError,
        "sequence position " + std::to_string(position) + " out of range");
    auto const n = geom.tokens_per_frame();
    return Coordinate{static_cast<std::int32_t>(position / n - geom.prompt_frames),
        static_cast<std::int32_t>((position % n) / geom.width), static_cast<std::int32_t>(position % geom.width)};
}

enum class CellState : std::uint8_t
{
    Empty,
    Prompt,
    Generated,
};

// Vocabulary ids over every position of the sequence, prompt frames included.
class TokenGrid
{
public:
    TokenGrid() = default;

    explicit TokenGrid(GridGeometry geom)
        : mGeom(geom)
    {
        validate_geometry(geom);
        auto const m = static_cast<std::size_t>(geom.total_positions());
        mValues.assign(m, 0);
        mState.assign(m, CellState::Empty);
    }

    [[nodiscard]] GridGeometry const& geometry() const noexcept
    {
        return mGeom;
    }

    [[nodiscard]] TokenId at(Coordinate const& c) const
    {
        return mValues[index(c)];
    }

    [[nodiscard]] CellState state(Coordinate const& c) const
    {
        return mState[index(c)];
    }

    [[nodiscard]] bool filled(Coordinate const& c) const
    {
        return state(c) != CellState::Empty;
    }

    void set_prompt(Coordinate const& c, TokenId value)
    {
        DIAGD_CHECK(c.is_prompt(), DomainError, "set_prompt on a generated frame");
        store(c, value, CellState::Prompt);
    }

    // Write-once for generated cells.
    void set_generated(Coordinate const& c, TokenId value)
    {
        DIAGD_CHECK(!c.is_prompt(), DomainError, "set_generated on a prompt frame");
        DIAGD_CHECK(state(c) == CellState::Empty, InternalError, "coordinate written twice during decode");
        store(c, value, CellState::Generated);
    }

    // Clears generated cells, keeps the prompt.
    void clear_generated()
    {
        for (std::size_t p = static_cast<std::size_t>(mGeom.prompt_tokens()); p < mState.size(); ++p)
        {
            mState[p] = CellState::Empty;
            mValues[p] = 0;
        }
    }

    [[nodiscard]] bool prompt_complete() const noexcept
    {
        for (std::size_t p = 0; p < static_cast<std::size_t>(mGeom.prompt_tokens()); ++p)
        {
            if (mState[p] != CellState::Prompt)
            {
                return false;
            }
        }
        return true;
    }

    [[nodiscard]] bool complete() const noexcept
    {
        for (auto s : mState)
        {
            if (s == CellState::Empty)
            {
                return false;
            }
        }
        return true;
    }

    // Values in sequence-position order.
    [[nodiscard]] std::vector<TokenId> const& values() const noexcept
    {
        return mValues;
    }

    friend bool operator==(TokenGrid const& a, TokenGrid const& b)
    {
        return a.mGeom == b.mGeom && a.mValues == b.mValues && a.mState == b.mState;
    }

private:
    [[nodiscard]] std::size_t index(Coordinate const& c) const
    {
        return static_cast<std::size_t>(sequence_position(mGeom, c));
    }

    void store(Coordinate const& c, TokenId value, CellState s)
    {
        DIAGD_CHECK(value >= 0 && value < mGeom.vocab, DomainError,
            "token id " + std::to_string(value) + " outside vocabulary of size " + std::to_string(mGeom.vocab));
        auto const idx = index(c);
        mValues[idx] = value;
        mState[idx] = s;
    }

    GridGeometry mGeom{};
    std::vector<TokenId> mValues;
    std::vector<CellState> mState;
};

} // namespace diagd
