#pragma once

#include "diagd/decoder.hpp"
#include "diagd/presets.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace diagd
{

// Affine per-step cost: every forward pass pays `overhead_per_step`, plus `cost_per_token` for each
// query slot it carries. Durations are in seconds.
struct CostModel
{
    double overhead_per_step{0.0};
    double cost_per_token{0.0};
    Count tokens_per_frame{0};
};

struct ThroughputEstimate
{
    Count steps{0};
    double total_time{0.0};
    double fps{0.0};
    double tokens_per_second{0.0};
};

namespace detail
{

inline ThroughputEstimate finish_estimate(CostModel const& cost, GridGeometry const& geom, Count steps, double time)
{
    DIAGD_CHECK(cost.overhead_per_step >= 0.0 && cost.cost_per_token >= 0.0, ConfigError, "costs must be >= 0");
    DIAGD_CHECK(time > 0.0, ConfigError, "cost model yields zero total time");
    return ThroughputEstimate{steps, time, static_cast<double>(geom.frames) / time,
        static_cast<double>(geom.generated_tokens()) / time};
}

} // namespace detail

inline ThroughputEstimate throughput_estimate(CostModel const& cost, GridGeometry const& geom, DiagConfig const& cfg)
{
    auto const sched = build_schedule(geom, cfg);
    double time = 0.0;
    for (auto const& wf : sched.wavefronts())
    {
        time += cost.overhead_per_step + cost.cost_per_token * static_cast<double>(wf.size());
    }
    return detail::finish_estimate(cost, geom, sched.total_steps(), time);
}

// One token per forward pass.
inline ThroughputEstimate throughput_estimate_ntp(CostModel const& cost, GridGeometry const& geom)
{
    validate_geometry(geom);
    auto const n = geom.generated_tokens();
    double time = 0.0;
    for (Count s = 0; s < n; ++s)
    {
        time += cost.overhead_per_step + cost.cost_per_token;
    }
    return detail::finish_estimate(cost, geom, n, time);
}

// Solves the two cost parameters so that NTP and the given diagonal config hit the target fps.
// Both decoders process every token exactly once, so
//   T / fps_ntp  = N * (overhead + per_token)
//   T / fps_diag = S * overhead + N * per_token.
inline CostModel calibrate_cost_model(GridGeometry const& geom, DiagConfig const& cfg, double fps_ntp, double fps_diag)
{
    DIAGD_CHECK(fps_ntp > 0.0 && fps_diag > 0.0, ConfigError, "target fps must be positive");
    auto const n = static_cast<double>(geom.generated_tokens());
    auto const s = static_cast<double>(step_count(geom, cfg));
    DIAGD_CHECK(s < n, ConfigError, "calibration needs a config with fewer steps than next-token prediction");
    auto const frames = static_cast<double>(geom.frames);
    auto const timeNtp = frames / fps_ntp;
    auto const timeDiag = frames / fps_diag;
    auto const overhead = (timeNtp - timeDiag) / (n - s);
    auto const perToken = timeNtp / n - overhead;
    DIAGD_CHECK(overhead >= 0.0 && perToken >= 0.0, ConfigError,
        "target fps values admit no non-negative affine cost model");
    return CostModel{overhead, perToken, geom.tokens_per_frame()};
}

struct FrameDivergence
{
    std::int32_t frame{0};
    double agreement{0.0};
    double mean_kl{0.0};
};

struct DivergenceReport
{
    double agreement{1.0};
    double mean_positionwise_kl{0.0};
    Count rollouts{0};
    std::vector<FrameDivergence> per_frame;
};

// KL(p || q) in nats.
inline double kl_divergence(std::vector<double> const& p, std::vector<double> const& q)
{
    double total = 0.0;
    for (std::size_t v = 0; v < p.size(); ++v)
    {
        if (p[v] > 0.0)
        {
            total += p[v] * std::log(p[v] / q[v]);
        }
    }
    return std::max(total, 0.0);
}

inline std::uint64_t rollout_seed(std::uint64_t seed, Count rollout)
{
    return hash_words(seed, {0x726f6c6c6f7574ULL, static_cast<std::uint64_t>(rollout)});
}

// Diagonal decoding vs next-token prediction on the oracle model with shared sample streams.
// The KL term compares, on each NTP rollout's realized grid, the full-prefix conditional against
// the conditional restricted to diagonal visibility.
inline DivergenceReport divergence(LocalFieldModel const& model, GridGeometry const& geom, DiagConfig const& cfg,
    PredecessorPolicy policy, Count n_rollouts, std::uint64_t seed)
{
    DIAGD_CHECK(n_rollouts >= 1, ConfigError, "need at least one rollout");
    auto const sched = build_schedule(geom, cfg);
    auto const frames = static_cast<std::size_t>(geom.frames);
    std::vector<Count> matches(frames, 0);
    std::vector<double> klSum(frames, 0.0);

    for (Count r = 0; r < n_rollouts; ++r)
    {
        auto const rs = rollout_seed(seed, r);
        auto const prompt = seeded_prompt(geom, rs);
        auto const ntp = decode_ntp(model, prompt, Sampling::Stochastic, rs);
        auto const diag = decode_diagd(model, prompt, sched, policy, Sampling::Stochastic, rs);
        for (Count idx = 0; idx < geom.generated_tokens(); ++idx)
        {
            auto const p = raster_coord(geom, idx);
            auto const f = static_cast<std::size_t>(p.frame);
            if (ntp.grid.at(p) == diag.grid.at(p))
            {
                ++matches[f];
            }
            auto const full = model.conditional(ntp.grid, p, RasterVisibility{&geom, p});
            auto const restricted = model.conditional(ntp.grid, p, ScheduleVisibility{&sched, p});
            klSum[f] += kl_divergence(full, restricted);
        }
    }

    DivergenceReport report;
    report.rollouts = n_rollouts;
    auto const perFrame = static_cast<double>(geom.tokens_per_frame() * n_rollouts);
    Count totalMatches = 0;
    double totalKl = 0.0;
    for (std::size_t f = 0; f < frames; ++f)
    {
        report.per_frame.push_back(FrameDivergence{static_cast<std::int32_t>(f),
            static_cast<double>(matches[f]) / perFrame, klSum[f] / perFrame});
        totalMatches += matches[f];
        totalKl += klSum[f];
    }
    auto const all = static_cast<double>(geom.generated_tokens() * n_rollouts);
    report.agreement = static_cast<double>(totalMatches) / all;
    report.mean_positionwise_kl = totalKl / all;
    return report;
}

// Exact conditionals are only available from the oracle.
inline DivergenceReport divergence(TinyTransformer const&, GridGeometry const&, DiagConfig const&, PredecessorPolicy,
    Count, std::uint64_t)
{
    throw UnsupportedError("divergence requires the local-field oracle backend");
}

struct TableRow
{
    std::string preset;
    std::string variant; // "ntp" or "diagd"
    DiagConfig config;
    Count steps_ntp{0};
    Count steps_diag{0};
    Ratio ratio_exact;
    std::string published_steps;
    std::string reproduced_steps; // steps / 1000 rounded like the published value
    bool matches_published{false};
};

inline TableRow make_row(Preset const& p, std::string variant, DiagConfig const& cfg, std::string const& published)
{
    TableRow row;
    row.preset = p.name;
    row.variant = std::move(variant);
    row.config = cfg;
    row.steps_ntp = p.geometry.generated_tokens();
    row.steps_diag = step_count(p.geometry, cfg);
    row.ratio_exact = Ratio{row.steps_ntp, row.steps_diag};
    row.published_steps = published;
    row.reproduced_steps = steps_in_thousands(row.steps_diag, decimals_of(published));
    row.matches_published = row.reproduced_steps == published;
    return row;
}

// One NTP row (the raster-equivalent config) followed by one row per published variant.
inline std::vector<TableRow> report_tables(std::vector<std::string> const& presetNames)
{
    std::vector<TableRow> rows;
    for (auto const& name : presetNames)
    {
        auto const p = preset(name);
        auto ntp = raster_equivalent_config(p.geometry);
        ntp.temporal = false;
        rows.push_back(make_row(p, "ntp", ntp, p.published_ntp_steps));
        for (auto const& v : p.variants)
        {
            rows.push_back(make_row(p, "diagd", v.config, v.published_steps));
        }
    }
    return rows;
}

} // namespace diagd
