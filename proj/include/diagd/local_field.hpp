#pragma once

#include "diagd/mixer.hpp"
#include "diagd/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace diagd
{

// Relative position of a parent token. dt <= 0.
struct Offset
{
    std::int32_t dt{0};
    std::int32_t di{0};
    std::int32_t dj{0};

    friend constexpr bool operator==(Offset const&, Offset const&) = default;
};

[[nodiscard]] constexpr Coordinate operator+(Coordinate const& c, Offset const& o) noexcept
{
    return Coordinate{c.frame + o.dt, c.row + o.di, c.col + o.dj};
}

// Accepts left, up, prev, upleft, upright or an explicit "dt:di:dj".
inline Offset parse_offset(std::string_view name)
{
    if (name == "left")
    {
        return {0, 0, -1};
    }
    if (name == "up")
    {
        return {0, -1, 0};
    }
    if (name == "prev")
    {
        return {-1, 0, 0};
    }
    if (name == "upleft")
    {
        return {0, -1, -1};
    }
    if (name == "upright")
    {
        return {0, -1, 1};
    }
    Offset o;
    char c1 = 0;
    char c2 = 0;
    std::istringstream in{std::string(name)};
    if (!(in >> o.dt >> c1 >> o.di >> c2 >> o.dj) || c1 != ':' || c2 != ':' || !in.eof())
    {
        throw ConfigError("cannot parse parent offset '" + std::string(name) + "'");
    }
    return o;
}

inline std::vector<Offset> parse_offsets(std::string_view list)
{
    std::vector<Offset> out;
    std::size_t start = 0;
    while (start <= list.size())
    {
        auto const comma = list.find(',', start);
        auto const piece = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        if (!piece.empty())
        {
            out.push_back(parse_offset(piece));
        }
        if (comma == std::string_view::npos)
        {
            break;
        }
        start = comma + 1;
    }
    return out;
}

// Full-prefix (raster-causal) visibility used by next-token prediction.
struct RasterVisibility
{
    GridGeometry const* geom;
    Coordinate target;

    [[nodiscard]] bool operator()(Coordinate const& q) const
    {
        return sequence_position(*geom, q) < sequence_position(*geom, target);
    }
};

// Visibility of `target` under a diagonal schedule.
struct ScheduleVisibility
{
    Schedule const* sched;
    Coordinate target;

    [[nodiscard]] bool operator()(Coordinate const& q) const
    {
        return is_visible(*sched, target, q);
    }
};

// Oracle grid process whose conditional at p depends only on p and the values of its declared
// parents. Parents that are out of the grid or not visible read as the sentinel id `vocab`.
class LocalFieldModel
{
public:
    LocalFieldModel(Count vocab, std::vector<Offset> parents, std::uint64_t seed, double logit_scale = 1.0,
        std::vector<double> logit_bias = {})
        : mVocab(vocab)
        , mParents(std::move(parents))
        , mSeed(seed)
        , mLogitScale(logit_scale)
        , mLogitBias(std::move(logit_bias))
    {
        DIAGD_CHECK(vocab >= 2, ConfigError, "local field model needs vocab >= 2");
        for (auto const& o : mParents)
        {
            DIAGD_CHECK(o.dt <= 0, ConfigError, "parent offsets must not look into future frames");
            DIAGD_CHECK(!(o.dt == 0 && o.di == 0 && o.dj == 0), ConfigError, "a token cannot be its own parent");
        }
        DIAGD_CHECK(mLogitBias.empty() || static_cast<Count>(mLogitBias.size()) == vocab, ConfigError,
            "logit bias must have one entry per vocabulary id");
    }

    [[nodiscard]] Count vocab() const noexcept
    {
        return mVocab;
    }

    [[nodiscard]] std::vector<Offset> const& parents() const noexcept
    {
        return mParents;
    }

    [[nodiscard]] std::uint64_t seed() const noexcept
    {
        return mSeed;
    }

    [[nodiscard]] double logit_scale() const noexcept
    {
        return mLogitScale;
    }

    [[nodiscard]] TokenId sentinel() const noexcept
    {
        return static_cast<TokenId>(mVocab);
    }

    // Parent values of p in declared order, sentinel where unavailable.
    template <class Visible>
    [[nodiscard]] std::vector<TokenId> parent_values(TokenGrid const& grid, Coordinate const& p, Visible&& visible) const
    {
        auto const& geom = grid.geometry();
        std::vector<TokenId> values;
        values.reserve(mParents.size());
        for (auto const& o : mParents)
        {
            auto const q = p + o;
            if (!in_bounds(geom, q) || !visible(q))
            {
                values.push_back(sentinel());
                continue;
            }
            DIAGD_CHECK(grid.filled(q), InternalError, "visible parent has not been generated");
            values.push_back(grid.at(q));
        }
        return values;
    }

    [[nodiscard]] std::vector<double> distribution(Coordinate const& p, std::vector<TokenId> const& parentValues) const
    {
        std::uint64_t h = hash_words(mSeed,
            {kLocalFieldTag, static_cast<std::uint64_t>(static_cast<std::int64_t>(p.frame)),
                static_cast<std::uint64_t>(p.row), static_cast<std::uint64_t>(p.col)});
        for (auto v : parentValues)
        {
            h = mix64(h ^ mix64(static_cast<std::uint64_t>(v) + kGolden));
        }
        std::vector<double> logits(static_cast<std::size_t>(mVocab));
        for (Count v = 0; v < mVocab; ++v)
        {
            logits[static_cast<std::size_t>(v)] = mLogitScale * to_unit(mix64(h ^ mix64(static_cast<std::uint64_t>(v))));
            if (!mLogitBias.empty())
            {
                logits[static_cast<std::size_t>(v)] += mLogitBias[static_cast<std::size_t>(v)];
            }
        }
        return softmax(logits);
    }

    template <class Visible>
    [[nodiscard]] std::vector<double> conditional(TokenGrid const& grid, Coordinate const& p, Visible&& visible) const
    {
        check_bounds(grid.geometry(), p);
        DIAGD_CHECK(grid.geometry().vocab == mVocab, ConfigError, "grid vocabulary does not match the model");
        return distribution(p, parent_values(grid, p, std::forward<Visible>(visible)));
    }

    static std::vector<double> softmax(std::vector<double> const& logits)
    {
        auto const mx = *std::max_element(logits.begin(), logits.end());
        std::vector<double> out(logits.size());
        double total = 0.0;
        for (std::size_t v = 0; v < logits.size(); ++v)
        {
            out[v] = std::isinf(logits[v]) && logits[v] < 0 ? 0.0 : std::exp(logits[v] - mx);
            total += out[v];
        }
        for (auto& x : out)
        {
            x /= total;
        }
        return out;
    }

private:
    Count mVocab;
    std::vector<Offset> mParents;
    std::uint64_t mSeed;
    double mLogitScale;
    std::vector<double> mLogitBias;
};

template <class Visible>
std::vector<double> lfm_conditional(LocalFieldModel const& model, TokenGrid const& grid, Coordinate const& p, Visible&& visible)
{
    return model.conditional(grid, p, std::forward<Visible>(visible));
}

// True when every in-grid parent of every generated coordinate has the same visibility under sched
// as under raster order, i.e. diagonal decoding sees exactly the parents next-token prediction sees.
inline bool parent_visibility_agrees(LocalFieldModel const& model, Schedule const& sched)
{
    auto const& geom = sched.geometry();
    for (Count r = 0; r < geom.generated_tokens(); ++r)
    {
        auto const p = raster_coord(geom, r);
        for (auto const& o : model.parents())
        {
            auto const q = p + o;
            if (!in_bounds(geom, q))
            {
                continue;
            }
            bool const rasterVisible = RasterVisibility{&geom, p}(q);
            if (rasterVisible != is_visible(sched, p, q))
            {
                return false;
            }
        }
    }
    return true;
}

} // namespace diagd
