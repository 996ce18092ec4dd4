#pragma once

#include "diagd/local_field.hpp"
#include "diagd/mixer.hpp"
#include "diagd/transformer.hpp"

#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

namespace diagd
{

enum class Sampling
{
    Greedy,
    Stochastic,
};

inline std::string_view to_string(Sampling s)
{
    return s == Sampling::Greedy ? "greedy" : "stochastic";
}

inline Sampling parse_sampling(std::string_view name)
{
    if (name == "greedy")
    {
        return Sampling::Greedy;
    }
    if (name == "stochastic")
    {
        return Sampling::Stochastic;
    }
    throw ConfigError("unknown sampling '" + std::string(name) + "' (expected greedy|stochastic)");
}

// Greedy takes the lowest-index argmax; stochastic inverts the CDF at the coordinate's own uniform draw.
inline TokenId sample_token(std::span<double const> probs, Sampling sampling, std::uint64_t seed, Coordinate const& p)
{
    if (sampling == Sampling::Greedy)
    {
        std::size_t best = 0;
        for (std::size_t v = 1; v < probs.size(); ++v)
        {
            if (probs[v] > probs[best])
            {
                best = v;
            }
        }
        return static_cast<TokenId>(best);
    }
    auto const u = sample_stream(seed, p);
    double cumulative = 0.0;
    std::size_t lastPositive = 0;
    for (std::size_t v = 0; v < probs.size(); ++v)
    {
        if (probs[v] <= 0.0)
        {
            continue;
        }
        lastPositive = v;
        cumulative += probs[v];
        if (u < cumulative)
        {
            return static_cast<TokenId>(v);
        }
    }
    // Rounding left the total just below u.
    return static_cast<TokenId>(lastPositive);
}

struct DecodeReport
{
    Count steps{0};
    std::vector<Count> widths;
    Count model_calls{0};
};

struct DecodeResult
{
    TokenGrid grid;
    DecodeReport report;
};

namespace detail
{

inline void check_prompt(TokenGrid const& prompt, Count modelVocab)
{
    DIAGD_CHECK(prompt.geometry().vocab == modelVocab, ConfigError,
        "model vocabulary (" + std::to_string(modelVocab) + ") does not match grid vocabulary ("
            + std::to_string(prompt.geometry().vocab) + ")");
    DIAGD_CHECK(prompt.prompt_complete(), DomainError, "prompt frames are not fully populated");
}

// Feeds the prompt frames into the cache in raster order and returns the output of the last one.
inline std::vector<double> prefill(TinyTransformer const& model, KVCache& cache, TokenGrid const& grid)
{
    auto const& geom = grid.geometry();
    std::vector<double> last;
    for (Count pos = 0; pos < geom.prompt_tokens(); ++pos)
    {
        auto const c = sequence_coord(geom, pos);
        last = model.step(cache, pos, TokenAt{c, grid.at(c)}, RasterVisibility{&geom, c}, true);
    }
    return last;
}

} // namespace detail

// Next-token prediction: one generated token per step in raster order.
inline DecodeResult decode_ntp(LocalFieldModel const& model, TokenGrid prompt, Sampling sampling, std::uint64_t seed)
{
    detail::check_prompt(prompt, model.vocab());
    prompt.clear_generated();
    auto const geom = prompt.geometry();
    DecodeResult out{std::move(prompt), {}};
    for (Count r = 0; r < geom.generated_tokens(); ++r)
    {
        auto const p = raster_coord(geom, r);
        auto const probs = model.conditional(out.grid, p, RasterVisibility{&geom, p});
        out.grid.set_generated(p, sample_token(probs, sampling, seed, p));
        ++out.report.model_calls;
    }
    out.report.steps = geom.generated_tokens();
    out.report.widths.assign(static_cast<std::size_t>(out.report.steps), 1);
    return out;
}

inline DecodeResult decode_ntp(TinyTransformer const& model, TokenGrid prompt, Sampling sampling, std::uint64_t seed)
{
    detail::check_prompt(prompt, model.config().vocab);
    prompt.clear_generated();
    auto const geom = prompt.geometry();
    DecodeResult out{std::move(prompt), {}};
    KVCache cache;
    auto probs = detail::prefill(model, cache, out.grid);
    for (Count r = 0; r < geom.generated_tokens(); ++r)
    {
        auto const p = raster_coord(geom, r);
        auto const pos = sequence_position(geom, p);
        if (pos == 0)
        {
            probs = model.step(cache, pos, TokenAt{p, model.bos()}, RasterVisibility{&geom, p}, false);
            ++out.report.model_calls;
        }
        auto const token = sample_token(probs, sampling, seed, p);
        out.grid.set_generated(p, token);
        // Logits at position q predict the raster successor of q.
        probs = model.step(cache, pos, TokenAt{p, token}, RasterVisibility{&geom, p}, true);
        ++out.report.model_calls;
    }
    out.report.steps = geom.generated_tokens();
    out.report.widths.assign(static_cast<std::size_t>(out.report.steps), 1);
    return out;
}

// Stepwise diagonal decode. Step s first feeds the true tokens of wavefront s - 1 (transformer
// backend only; the oracle reads the grid directly), then samples every token of wavefront s from
// queries that cannot see each other.
template <class Model>
class DecodeSession
{
public:
    static_assert(std::is_same_v<Model, LocalFieldModel> || std::is_same_v<Model, TinyTransformer>);

    DecodeSession(Model const& model, TokenGrid prompt, Schedule const& sched, PredecessorPolicy policy,
        Sampling sampling, std::uint64_t seed)
        : mModel(&model)
        , mSched(&sched)
        , mGrid(std::move(prompt))
        , mPolicy(policy)
        , mSampling(sampling)
        , mSeed(seed)
    {
        DIAGD_CHECK(mGrid.geometry() == sched.geometry(), ConfigError, "prompt grid does not match the schedule");
        if constexpr (std::is_same_v<Model, LocalFieldModel>)
        {
            detail::check_prompt(mGrid, model.vocab());
        }
        else
        {
            detail::check_prompt(mGrid, model.config().vocab);
        }
        mGrid.clear_generated();
        if constexpr (std::is_same_v<Model, TinyTransformer>)
        {
            detail::prefill(model, mCache, mGrid);
        }
    }

    [[nodiscard]] bool done() const noexcept
    {
        return mStep >= mSched->total_steps();
    }

    [[nodiscard]] Count steps_taken() const noexcept
    {
        return mStep;
    }

    [[nodiscard]] TokenGrid const& grid() const noexcept
    {
        return mGrid;
    }

    [[nodiscard]] DecodeReport const& report() const noexcept
    {
        return mReport;
    }

    void step()
    {
        DIAGD_CHECK(!done(), DomainError, "decode session already finished");
        auto const s = mStep + 1;
        auto const& geom = mGrid.geometry();

        if constexpr (std::is_same_v<Model, TinyTransformer>)
        {
            if (s > 1)
            {
                for (auto const& x : mSched->wavefront(s - 1))
                {
                    mModel->step(mCache, sequence_position(geom, x), TokenAt{x, mGrid.at(x)},
                        ScheduleVisibility{mSched, x}, true);
                    ++mReport.model_calls;
                }
            }
        }

        auto const wf = mSched->wavefront(s);
        std::vector<TokenId> sampled;
        sampled.reserve(wf.size());
        for (auto const& p : wf)
        {
            sampled.push_back(sample_token(query(p), mSampling, mSeed, p));
            ++mReport.model_calls;
        }
        for (std::size_t n = 0; n < wf.size(); ++n)
        {
            mGrid.set_generated(wf[n], sampled[n]);
        }
        mReport.widths.push_back(static_cast<Count>(wf.size()));
        mStep = s;
        mReport.steps = s;
    }

    DecodeResult run()
    {
        while (!done())
        {
            step();
        }
        DIAGD_CHECK(mGrid.complete(), InternalError, "schedule finished with empty coordinates");
        return DecodeResult{mGrid, mReport};
    }

private:
    std::vector<double> query(Coordinate const& p)
    {
        auto const& geom = mGrid.geometry();
        if constexpr (std::is_same_v<Model, LocalFieldModel>)
        {
            return mModel->conditional(mGrid, p, ScheduleVisibility{mSched, p});
        }
        else
        {
            auto const pos = sequence_position(geom, p);
            auto const pred = predecessor(*mSched, p, mPolicy);
            if (!pred)
            {
                return mModel->step(mCache, pos, TokenAt{p, mModel->bos()}, ScheduleVisibility{mSched, p}, false);
            }
            DIAGD_CHECK(mGrid.filled(*pred) && is_visible(*mSched, p, *pred), InternalError,
                "predecessor is not available when its successor is queried");
            // The query sits at the raster predecessor's position and carries the policy-chosen token.
            auto const queryPos = pos - 1;
            auto const queryCoord = sequence_coord(geom, queryPos);
            return mModel->step(
                mCache, queryPos, TokenAt{queryCoord, mGrid.at(*pred)}, ScheduleVisibility{mSched, p}, false);
        }
    }

    Model const* mModel;
    Schedule const* mSched;
    TokenGrid mGrid;
    PredecessorPolicy mPolicy;
    Sampling mSampling;
    std::uint64_t mSeed;
    KVCache mCache;
    Count mStep{0};
    DecodeReport mReport;
};

template <class Model>
DecodeResult decode_diagd(Model const& model, TokenGrid prompt, Schedule const& sched, PredecessorPolicy policy,
    Sampling sampling, std::uint64_t seed)
{
    return DecodeSession<Model>(model, std::move(prompt), sched, policy, sampling, seed).run();
}

// Prompt frames filled from a seeded stream; generated frames left empty.
inline TokenGrid seeded_prompt(GridGeometry const& geom, std::uint64_t seed)
{
    TokenGrid grid(geom);
    for (Count pos = 0; pos < geom.prompt_tokens(); ++pos)
    {
        auto const c = sequence_coord(geom, pos);
        auto const h = hash_words(seed, {kPromptTag, static_cast<std::uint64_t>(pos)});
        grid.set_prompt(c, static_cast<TokenId>(h % static_cast<std::uint64_t>(geom.vocab)));
    }
    return grid;
}

} // namespace diagd
