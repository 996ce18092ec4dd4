#pragma once

#include "diagd/grid.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace diagd
{

// 1-based step at which generated coordinate c is produced: t*d + k*i + j + 1.
[[nodiscard]] constexpr Count diagonal_step(Count k, Count delay, Coordinate const& c) noexcept
{
    return c.frame * delay + k * c.row + c.col + 1;
}

// Total step count without materializing the schedule: (T - 1) * d + (h - 1) * k + w.
inline Count step_count(GridGeometry const& geom, DiagConfig const& cfg)
{
    auto const check = validate_config(geom, cfg);
    return (geom.frames - 1) * check.effective_delay + check.spatial_steps;
}

// Bijection between generated coordinates and 1-based steps, grouped into wavefronts.
class Schedule
{
public:
    Schedule(GridGeometry const& geom, DiagConfig const& cfg)
        : mGeom(geom)
        , mConfig(cfg)
    {
        auto const check = validate_config(geom, cfg);
        mSpatialSteps = check.spatial_steps;
        mDelay = check.effective_delay;

        mStepOf.resize(static_cast<std::size_t>(geom.generated_tokens()));
        Count maxStep = 0;
        for (std::int32_t t = 0; t < geom.frames; ++t)
        {
            for (std::int32_t i = 0; i < geom.height; ++i)
            {
                for (std::int32_t j = 0; j < geom.width; ++j)
                {
                    Coordinate const c{t, i, j};
                    auto const s = diagonal_step(cfg.k, mDelay, c);
                    mStepOf[static_cast<std::size_t>(raster_index(geom, c))] = s;
                    if (static_cast<std::size_t>(s) > mWavefronts.size())
                    {
                        mWavefronts.resize(static_cast<std::size_t>(s));
                    }
                    // Loop order (t, i, j) appends each step's members in (frame, row) order.
                    mWavefronts[static_cast<std::size_t>(s - 1)].push_back(c);
                    maxStep = std::max(maxStep, s);
                }
            }
        }
        for (std::size_t s = 0; s < mWavefronts.size(); ++s)
        {
            DIAGD_CHECK(!mWavefronts[s].empty(), InternalError, "empty wavefront at step " + std::to_string(s + 1));
        }
        mTotalSteps = maxStep;
    }

    [[nodiscard]] GridGeometry const& geometry() const noexcept
    {
        return mGeom;
    }

    [[nodiscard]] DiagConfig const& config() const noexcept
    {
        return mConfig;
    }

    [[nodiscard]] Count spatial_steps() const noexcept
    {
        return mSpatialSteps;
    }

    [[nodiscard]] Count delay() const noexcept
    {
        return mDelay;
    }

    [[nodiscard]] Count total_steps() const noexcept
    {
        return mTotalSteps;
    }

    // Step of c; prompt coordinates report step 0 (available before decoding starts).
    [[nodiscard]] Count step_of(Coordinate const& c) const
    {
        check_bounds(mGeom, c);
        if (c.is_prompt())
        {
            return 0;
        }
        return mStepOf[static_cast<std::size_t>(raster_index(mGeom, c))];
    }

    [[nodiscard]] std::span<Coordinate const> wavefront(Count step) const
    {
        DIAGD_CHECK(step >= 1 && step <= mTotalSteps, BoundsError, "step " + std::to_string(step) + " out of range");
        return mWavefronts[static_cast<std::size_t>(step - 1)];
    }

    [[nodiscard]] std::vector<std::vector<Coordinate>> const& wavefronts() const noexcept
    {
        return mWavefronts;
    }

    [[nodiscard]] Count max_width() const noexcept
    {
        std::size_t best = 0;
        for (auto const& wf : mWavefronts)
        {
            best = std::max(best, wf.size());
        }
        return static_cast<Count>(best);
    }

private:
    GridGeometry mGeom;
    DiagConfig mConfig;
    Count mSpatialSteps{0};
    Count mDelay{0};
    Count mTotalSteps{0};
    std::vector<Count> mStepOf;
    std::vector<std::vector<Coordinate>> mWavefronts;
};

inline Schedule build_schedule(GridGeometry const& geom, DiagConfig const& cfg)
{
    return Schedule(geom, cfg);
}

// Exact non-negative fraction, kept unreduced so num/den stay the literal step counts.
struct Ratio
{
    Count num{0};
    Count den{1};

    [[nodiscard]] double value() const noexcept
    {
        return static_cast<double>(num) / static_cast<double>(den);
    }

    [[nodiscard]] Ratio reduced() const noexcept
    {
        auto const g = std::gcd(num, den);
        return g == 0 ? *this : Ratio{num / g, den / g};
    }

    friend bool operator==(Ratio const& a, Ratio const& b) noexcept
    {
        auto const x = a.reduced();
        auto const y = b.reduced();
        return x.num == y.num && x.den == y.den;
    }
};

struct SpeedupReport
{
    Count steps_ntp{0};
    Count steps_diag{0};
    Ratio ratio_exact;         // T*h*w / S
    Ratio ratio_spatial_exact; // h*w / s_spa
    double approx_spatial_main{0.0};     // min(h, w) / (k + 1)
    double approx_spatial_height_first{0.0}; // h / ((h / w) * k + 1), assumes h = min(h, w)
    bool height_is_short_side{true};
    std::optional<double> approx_diag;   // w / (1 + (w - 1) / (T * h)), only for k = 1, d = h
};

inline SpeedupReport speedup(GridGeometry const& geom, DiagConfig const& cfg)
{
    auto const check = validate_config(geom, cfg);
    auto const h = static_cast<double>(geom.height);
    auto const w = static_cast<double>(geom.width);
    auto const k = static_cast<double>(cfg.k);

    SpeedupReport r;
    r.steps_ntp = geom.generated_tokens();
    r.steps_diag = (geom.frames - 1) * check.effective_delay + check.spatial_steps;
    r.ratio_exact = Ratio{r.steps_ntp, r.steps_diag};
    r.ratio_spatial_exact = Ratio{geom.tokens_per_frame(), check.spatial_steps};
    r.approx_spatial_main = static_cast<double>(std::min(geom.height, geom.width)) / (k + 1.0);
    r.approx_spatial_height_first = h / ((h / w) * k + 1.0);
    r.height_is_short_side = geom.height <= geom.width;
    if (cfg.k == 1 && check.effective_delay == geom.height)
    {
        r.approx_diag = w / (1.0 + (w - 1.0) / (static_cast<double>(geom.frames) * h));
    }
    return r;
}

} // namespace diagd
