#pragma once

#include "diagd/scheduler.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace diagd
{

// One published decoding variant of a preset together with its reported STEP value
// (thousands of forward passes, as printed).
struct PresetVariant
{
    DiagConfig config;
    std::string published_steps;
    std::optional<double> published_fps;
};

struct Preset
{
    std::string name;
    GridGeometry geometry;
    std::string published_ntp_steps;
    std::optional<double> published_ntp_fps;
    std::vector<PresetVariant> variants;
    std::string note;
};

inline constexpr std::array<std::string_view, 3> kPresetNames{"cosmos", "wham", "mcar"};

namespace detail
{

inline PresetVariant temporal_variant(Count k, Count d, std::string steps, std::optional<double> fps = std::nullopt)
{
    return PresetVariant{DiagConfig{k, d, true, PredecessorPolicy::Raster}, std::move(steps), fps};
}

inline PresetVariant spatial_variant(GridGeometry const& geom, Count k, std::string steps)
{
    return PresetVariant{DiagConfig{k, spatial_steps(geom, k), false, PredecessorPolicy::Raster}, std::move(steps), {}};
}

} // namespace detail

inline Preset preset(std::string_view name)
{
    if (name == "cosmos")
    {
        // 40x64 latent tokens per frame, 2 prompt latent frames (5,120 tokens), 3 generated (7,680 tokens).
        Preset p{"cosmos", GridGeometry{3, 40, 64, 2, 16000}, "7.68", 0.15, {},
            "frame count inferred as 7680 / 2560 generated tokens"};
        p.variants = {
            detail::temporal_variant(1, 1, "0.11", 1.71),
            detail::temporal_variant(1, 5, "0.11", 1.71),
            detail::temporal_variant(1, 9, "0.12", 1.61),
            detail::temporal_variant(1, 40, "0.18", 1.62),
            detail::temporal_variant(2, 2, "0.15", 1.60),
            detail::temporal_variant(2, 10, "0.16", 1.60),
            detail::temporal_variant(2, 18, "0.18", 1.50),
            detail::temporal_variant(2, 80, "0.30", 1.21),
            detail::temporal_variant(4, 4, "0.24", 1.26),
            detail::temporal_variant(4, 12, "0.24", 1.26),
            detail::temporal_variant(4, 20, "0.26", 1.20),
            detail::temporal_variant(4, 36, "0.29", 1.09),
        };
        return p;
    }
    if (name == "wham")
    {
        // 18x30 tokens per frame, 100 generated frames; action tokens are not counted.
        GridGeometry const geom{100, 18, 30, 1, 4096};
        Preset p{"wham", geom, "54", std::nullopt, {},
            "published STEP values imply 100 generated frames although prompts are described as ten frames"};
        p.variants = {detail::spatial_variant(geom, 2, "6.4"), detail::spatial_variant(geom, 1, "4.7")};
        return p;
    }
    if (name == "mcar")
    {
        GridGeometry const geom{15, 14, 24, 1, 8192};
        Preset p{"mcar", geom, "5.04", std::nullopt, {}, ""};
        p.variants = {detail::spatial_variant(geom, 4, "1.14"), detail::spatial_variant(geom, 2, "0.75"),
            detail::spatial_variant(geom, 1, "0.56")};
        return p;
    }
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected cosmos|wham|mcar)");
}

// steps / 1000 rounded half-up to `decimals` places, formatted like the published tables.
inline std::string steps_in_thousands(Count steps, int decimals)
{
    Count scale = 1;
    for (int i = 0; i < decimals; ++i)
    {
        scale *= 10;
    }
    // round(steps * scale / 1000) with half-up, in integers.
    auto const scaled = (steps * scale * 2 + 1000) / 2000;
    if (decimals == 0)
    {
        return std::to_string(scaled);
    }
    auto frac = std::to_string(scaled % scale);
    frac.insert(0, static_cast<std::size_t>(decimals) - frac.size(), '0');
    return std::to_string(scaled / scale) + "." + frac;
}

inline int decimals_of(std::string_view printed)
{
    auto const dot = printed.find('.');
    return dot == std::string_view::npos ? 0 : static_cast<int>(printed.size() - dot - 1);
}

// True when the exact step count rounds to the printed value.
inline bool matches_published(Count steps, std::string_view printed)
{
    return steps_in_thousands(steps, decimals_of(printed)) == printed;
}

} // namespace diagd
