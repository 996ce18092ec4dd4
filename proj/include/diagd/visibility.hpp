#pragma once

#include "diagd/scheduler.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

namespace diagd
{

inline constexpr Count kDefaultMaxMaskPositions = Count{1} << 16;

// Whether q may be attended to while generating p. Prompt tokens are always visible to generated
// tokens and causal among themselves; generated tokens need a strictly earlier step, so tokens
// of the same wavefront never see each other.
[[nodiscard]] inline bool is_visible(Schedule const& sched, Coordinate const& p, Coordinate const& q)
{
    auto const& geom = sched.geometry();
    if (p.is_prompt())
    {
        return q.is_prompt() && sequence_position(geom, q) < sequence_position(geom, p);
    }
    if (q.is_prompt())
    {
        check_bounds(geom, q);
        return true;
    }
    return sched.step_of(q) < sched.step_of(p);
}

// Sorted by sequence position.
inline std::vector<Coordinate> visible_set(Schedule const& sched, Coordinate const& p)
{
    auto const& geom = sched.geometry();
    check_bounds(geom, p);
    DIAGD_CHECK(!p.is_prompt(), DomainError, "visible_set is defined for generated coordinates only");
    std::vector<Coordinate> out;
    auto const stepP = sched.step_of(p);
    for (Count pos = 0; pos < geom.total_positions(); ++pos)
    {
        auto const q = sequence_coord(geom, pos);
        if (q.is_prompt() || sched.step_of(q) < stepP)
        {
            out.push_back(q);
        }
    }
    return out;
}

// The token whose value seeds the query for p. Empty only for the very first generated token of
// a grid without prompt frames.
inline std::optional<Coordinate> predecessor(Schedule const& sched, Coordinate const& p, PredecessorPolicy policy)
{
    auto const& geom = sched.geometry();
    check_bounds(geom, p);
    DIAGD_CHECK(!p.is_prompt(), DomainError, "predecessor is defined for generated coordinates only");

    if (policy == PredecessorPolicy::Temporal && p.frame > 0)
    {
        Coordinate const prev{p.frame - 1, p.row, p.col};
        if (sched.step_of(prev) < sched.step_of(p))
        {
            return prev;
        }
    }
    if (p.col > 0)
    {
        return Coordinate{p.frame, p.row, p.col - 1};
    }
    if (p.row > 0)
    {
        // Latest strictly-earlier token of the previous row.
        return Coordinate{p.frame, p.row - 1, static_cast<std::int32_t>(sched.config().k - 1)};
    }
    if (p.frame > 0)
    {
        // Frame start: the raster-last token of the immediately preceding step.
        auto const wf = sched.wavefront(sched.step_of(p) - 1);
        return wf.back();
    }
    if (geom.prompt_frames > 0)
    {
        return Coordinate{-1, static_cast<std::int32_t>(geom.height - 1), static_cast<std::int32_t>(geom.width - 1)};
    }
    return std::nullopt;
}

// Dense boolean attention matrix over sequence positions. Row p, column q set iff q is visible
// to p or q == p.
class VisibilityMask
{
public:
    VisibilityMask() = default;

    explicit VisibilityMask(Count size)
        : mSize(size)
        , mWordsPerRow(static_cast<std::size_t>((size + 63) / 64))
        , mBits(static_cast<std::size_t>(size) * mWordsPerRow, 0)
    {
    }

    [[nodiscard]] Count size() const noexcept
    {
        return mSize;
    }

    [[nodiscard]] bool get(Count row, Count col) const noexcept
    {
        auto const word = mBits[static_cast<std::size_t>(row) * mWordsPerRow + static_cast<std::size_t>(col / 64)];
        return (word >> (col % 64)) & 1U;
    }

    void set(Count row, Count col) noexcept
    {
        mBits[static_cast<std::size_t>(row) * mWordsPerRow + static_cast<std::size_t>(col / 64)]
            |= std::uint64_t{1} << (col % 64);
    }

    [[nodiscard]] Count popcount() const noexcept
    {
        Count total = 0;
        for (auto w : mBits)
        {
            total += std::popcount(w);
        }
        return total;
    }

    friend bool operator==(VisibilityMask const&, VisibilityMask const&) = default;

private:
    Count mSize{0};
    std::size_t mWordsPerRow{0};
    std::vector<std::uint64_t> mBits;
};

inline VisibilityMask causal_mask(Count size)
{
    VisibilityMask mask(size);
    for (Count p = 0; p < size; ++p)
    {
        for (Count q = 0; q <= p; ++q)
        {
            mask.set(p, q);
        }
    }
    return mask;
}

inline VisibilityMask build_finetune_mask(Schedule const& sched, Count max_positions = kDefaultMaxMaskPositions)
{
    auto const& geom = sched.geometry();
    auto const m = geom.total_positions();
    if (m > max_positions)
    {
        throw ResourceError("mask would have " + std::to_string(m) + " positions, cap is "
            + std::to_string(max_positions));
    }
    std::vector<Count> step(static_cast<std::size_t>(m));
    for (Count pos = 0; pos < m; ++pos)
    {
        step[static_cast<std::size_t>(pos)] = sched.step_of(sequence_coord(geom, pos));
    }
    auto const promptEnd = geom.prompt_tokens();
    VisibilityMask mask(m);
    for (Count p = 0; p < m; ++p)
    {
        if (p < promptEnd)
        {
            for (Count q = 0; q <= p; ++q)
            {
                mask.set(p, q);
            }
            continue;
        }
        auto const sp = step[static_cast<std::size_t>(p)];
        for (Count q = 0; q < m; ++q)
        {
            if (q == p || step[static_cast<std::size_t>(q)] < sp)
            {
                mask.set(p, q);
            }
        }
    }
    return mask;
}

enum class MaskOrder
{
    Raster,
    Schedule,
};

inline MaskOrder parse_mask_order(std::string_view name)
{
    if (name == "raster")
    {
        return MaskOrder::Raster;
    }
    if (name == "schedule")
    {
        return MaskOrder::Schedule;
    }
    throw ConfigError("unknown mask order '" + std::string(name) + "' (expected raster|schedule)");
}

// Sequence positions listed in the requested order: prompt first in raster order, then generated
// positions sorted by (step, frame, row, col).
inline std::vector<Count> position_order(Schedule const& sched, MaskOrder order)
{
    auto const& geom = sched.geometry();
    std::vector<Count> perm(static_cast<std::size_t>(geom.total_positions()));
    std::iota(perm.begin(), perm.end(), Count{0});
    if (order == MaskOrder::Schedule)
    {
        std::stable_sort(perm.begin(), perm.end(), [&](Count a, Count b) {
            auto const sa = sched.step_of(sequence_coord(geom, a));
            auto const sb = sched.step_of(sequence_coord(geom, b));
            return sa != sb ? sa < sb : a < b;
        });
    }
    return perm;
}

// Re-indexes rows and columns by `order` (entry r names the original position placed at r).
inline VisibilityMask permute(VisibilityMask const& mask, std::vector<Count> const& order)
{
    VisibilityMask out(mask.size());
    for (Count r = 0; r < mask.size(); ++r)
    {
        for (Count c = 0; c < mask.size(); ++c)
        {
            if (mask.get(order[static_cast<std::size_t>(r)], order[static_cast<std::size_t>(c)]))
            {
                out.set(r, c);
            }
        }
    }
    return out;
}

[[nodiscard]] inline bool is_lower_triangular(VisibilityMask const& mask)
{
    for (Count r = 0; r < mask.size(); ++r)
    {
        for (Count c = r + 1; c < mask.size(); ++c)
        {
            if (mask.get(r, c))
            {
                return false;
            }
        }
    }
    return true;
}

} // namespace diagd
