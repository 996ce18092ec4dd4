#pragma once

#include "diagd/analysis.hpp"

#include <nlohmann/json.hpp>

#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace diagd
{

using Json = nlohmann::ordered_json;

// Flat header embedded in every exported artifact.
inline Json config_header(GridGeometry const& geom, DiagConfig const& cfg)
{
    return Json{{"frames", geom.frames}, {"height", geom.height}, {"width", geom.width},
        {"prompt_frames", geom.prompt_frames}, {"vocab", geom.vocab}, {"k", cfg.k}, {"d", cfg.d},
        {"temporal", cfg.temporal}, {"policy", std::string(to_string(cfg.policy))}};
}

inline std::pair<GridGeometry, DiagConfig> parse_config_header(Json const& j)
{
    try
    {
        GridGeometry geom{j.at("frames").get<Count>(), j.at("height").get<Count>(), j.at("width").get<Count>(),
            j.at("prompt_frames").get<Count>(), j.at("vocab").get<Count>()};
        DiagConfig cfg{j.at("k").get<Count>(), j.at("d").get<Count>(), j.at("temporal").get<bool>(),
            parse_policy(j.at("policy").get<std::string>())};
        return {geom, cfg};
    }
    catch (Json::exception const& e)
    {
        throw FormatError(std::string("malformed config header: ") + e.what());
    }
}

inline Json coordinate_json(Coordinate const& c)
{
    return Json::array({c.frame, c.row, c.col});
}

inline Json schedule_to_json(Schedule const& sched)
{
    Json wavefronts = Json::array();
    for (auto const& wf : sched.wavefronts())
    {
        Json step = Json::array();
        for (auto const& c : wf)
        {
            step.push_back(coordinate_json(c));
        }
        wavefronts.push_back(std::move(step));
    }
    return Json{{"config", config_header(sched.geometry(), sched.config())}, {"total_steps", sched.total_steps()},
        {"wavefronts", std::move(wavefronts)}};
}

// Rebuilds the schedule from the embedded config and checks the stored wavefronts against it.
inline Schedule schedule_from_json(Json const& j)
{
    auto const [geom, cfg] = parse_config_header(j.at("config"));
    Schedule sched(geom, cfg);
    try
    {
        DIAGD_CHECK(j.at("total_steps").get<Count>() == sched.total_steps(), FormatError,
            "stored total_steps does not match the config");
        auto const& wfs = j.at("wavefronts");
        DIAGD_CHECK(static_cast<Count>(wfs.size()) == sched.total_steps(), FormatError, "wavefront count mismatch");
        for (std::size_t s = 0; s < wfs.size(); ++s)
        {
            auto const expected = sched.wavefronts()[s];
            DIAGD_CHECK(wfs[s].size() == expected.size(), FormatError,
                "wavefront " + std::to_string(s + 1) + " has the wrong width");
            for (std::size_t n = 0; n < expected.size(); ++n)
            {
                auto const& c = wfs[s][n];
                Coordinate const got{c.at(0).get<std::int32_t>(), c.at(1).get<std::int32_t>(), c.at(2).get<std::int32_t>()};
                DIAGD_CHECK(got == expected[n], FormatError,
                    "wavefront " + std::to_string(s + 1) + " differs from the rebuilt schedule");
            }
        }
    }
    catch (Json::exception const& e)
    {
        throw FormatError(std::string("malformed schedule: ") + e.what());
    }
    return sched;
}

// Config header plus one flat row-major id array per frame.
inline Json grid_to_json(TokenGrid const& grid, DiagConfig const& cfg)
{
    auto const& geom = grid.geometry();
    auto frameArray = [&](std::int32_t t) {
        Json ids = Json::array();
        for (std::int32_t i = 0; i < geom.height; ++i)
        {
            for (std::int32_t j = 0; j < geom.width; ++j)
            {
                Coordinate const c{t, i, j};
                ids.push_back(grid.filled(c) ? Json(grid.at(c)) : Json(nullptr));
            }
        }
        return ids;
    };
    Json prompt = Json::array();
    for (auto t = static_cast<std::int32_t>(-geom.prompt_frames); t < 0; ++t)
    {
        prompt.push_back(frameArray(t));
    }
    Json frames = Json::array();
    for (std::int32_t t = 0; t < geom.frames; ++t)
    {
        frames.push_back(frameArray(t));
    }
    return Json{{"config", config_header(geom, cfg)}, {"prompt", std::move(prompt)}, {"frames", std::move(frames)}};
}

inline TokenGrid grid_from_json(Json const& j)
{
    auto const [geom, cfg] = parse_config_header(j.at("config"));
    validate_geometry(geom);
    TokenGrid grid(geom);
    try
    {
        auto load = [&](Json const& arr, std::int32_t t, bool prompt) {
            DIAGD_CHECK(static_cast<Count>(arr.size()) == geom.tokens_per_frame(), FormatError,
                "frame " + std::to_string(t) + " has the wrong number of tokens");
            for (Count n = 0; n < geom.tokens_per_frame(); ++n)
            {
                auto const& v = arr[static_cast<std::size_t>(n)];
                if (v.is_null())
                {
                    continue;
                }
                Coordinate const c{t, static_cast<std::int32_t>(n / geom.width), static_cast<std::int32_t>(n % geom.width)};
                if (prompt)
                {
                    grid.set_prompt(c, v.get<TokenId>());
                }
                else
                {
                    grid.set_generated(c, v.get<TokenId>());
                }
            }
        };
        auto const& prompt = j.at("prompt");
        DIAGD_CHECK(static_cast<Count>(prompt.size()) == geom.prompt_frames, FormatError, "prompt frame count mismatch");
        for (std::size_t f = 0; f < prompt.size(); ++f)
        {
            load(prompt[f], static_cast<std::int32_t>(f) - static_cast<std::int32_t>(geom.prompt_frames), true);
        }
        auto const& frames = j.at("frames");
        DIAGD_CHECK(static_cast<Count>(frames.size()) == geom.frames, FormatError, "frame count mismatch");
        for (std::size_t f = 0; f < frames.size(); ++f)
        {
            load(frames[f], static_cast<std::int32_t>(f), false);
        }
    }
    catch (Json::exception const& e)
    {
        throw FormatError(std::string("malformed grid: ") + e.what());
    }
    return grid;
}

inline Json offsets_json(std::vector<Offset> const& offsets)
{
    Json out = Json::array();
    for (auto const& o : offsets)
    {
        out.push_back(Json::array({o.dt, o.di, o.dj}));
    }
    return out;
}

inline Json model_json(LocalFieldModel const& model)
{
    return Json{{"kind", "lfm"}, {"seed", model.seed()}, {"vocab", model.vocab()},
        {"parents", offsets_json(model.parents())}, {"logit_scale", model.logit_scale()}};
}

inline Json model_json(TinyTransformer const& model)
{
    auto const& c = model.config();
    return Json{{"kind", "tt"}, {"seed", c.weight_seed}, {"vocab", c.vocab},
        {"dims",
            {{"layers", c.layers}, {"model_dim", c.model_dim}, {"heads", c.heads}, {"mlp_dim", c.mlp_dim},
                {"max_frames", c.max_frames}, {"max_rows", c.max_rows}, {"max_cols", c.max_cols},
                {"uniform_attention", c.uniform_attention}}}};
}

inline LocalFieldModel lfm_from_json(Json const& j)
{
    try
    {
        DIAGD_CHECK(j.at("kind") == "lfm", FormatError, "model description is not a local field model");
        std::vector<Offset> parents;
        for (auto const& o : j.at("parents"))
        {
            parents.push_back(Offset{o.at(0).get<std::int32_t>(), o.at(1).get<std::int32_t>(), o.at(2).get<std::int32_t>()});
        }
        return LocalFieldModel(j.at("vocab").get<Count>(), std::move(parents), j.at("seed").get<std::uint64_t>(),
            j.value("logit_scale", 1.0));
    }
    catch (Json::exception const& e)
    {
        throw FormatError(std::string("malformed model description: ") + e.what());
    }
}

inline TinyTransformer tt_from_json(Json const& j)
{
    try
    {
        DIAGD_CHECK(j.at("kind") == "tt", FormatError, "model description is not a transformer");
        auto const& dims = j.at("dims");
        TransformerConfig c;
        c.vocab = j.at("vocab").get<Count>();
        c.weight_seed = j.at("seed").get<std::uint64_t>();
        c.layers = dims.at("layers").get<Count>();
        c.model_dim = dims.at("model_dim").get<Count>();
        c.heads = dims.at("heads").get<Count>();
        c.mlp_dim = dims.value("mlp_dim", Count{0});
        c.max_frames = dims.value("max_frames", c.max_frames);
        c.max_rows = dims.value("max_rows", c.max_rows);
        c.max_cols = dims.value("max_cols", c.max_cols);
        c.uniform_attention = dims.value("uniform_attention", false);
        return TinyTransformer(c);
    }
    catch (Json::exception const& e)
    {
        throw FormatError(std::string("malformed model description: ") + e.what());
    }
}

// Plain (P1) bitmap, one text line per mask row, rows and columns listed in `order`.
inline void write_pbm(std::ostream& os, VisibilityMask const& mask, std::vector<Count> const& order)
{
    DIAGD_CHECK(static_cast<Count>(order.size()) == mask.size(), ConfigError, "order does not cover the mask");
    os << "P1\n" << mask.size() << ' ' << mask.size() << '\n';
    std::string line(static_cast<std::size_t>(mask.size()), '0');
    for (auto r : order)
    {
        for (std::size_t c = 0; c < order.size(); ++c)
        {
            line[c] = mask.get(r, order[c]) ? '1' : '0';
        }
        os << line << '\n';
    }
}

inline VisibilityMask read_pbm(std::istream& is)
{
    std::string magic;
    is >> magic;
    DIAGD_CHECK(magic == "P1", FormatError, "not a plain PBM file");
    auto skipComments = [&is]() {
        is >> std::ws;
        while (is.peek() == '#')
        {
            is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
            is >> std::ws;
        }
    };
    Count w = 0;
    Count h = 0;
    skipComments();
    is >> w;
    skipComments();
    is >> h;
    DIAGD_CHECK(is && w == h && w > 0, FormatError, "PBM mask must be square");
    VisibilityMask mask(w);
    for (Count r = 0; r < h; ++r)
    {
        for (Count c = 0; c < w; ++c)
        {
            char bit = 0;
            is >> bit;
            DIAGD_CHECK(is && (bit == '0' || bit == '1'), FormatError, "truncated PBM data");
            if (bit == '1')
            {
                mask.set(r, c);
            }
        }
    }
    return mask;
}

inline std::string format_double(double x)
{
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline void write_table_csv(std::ostream& os, std::vector<TableRow> const& rows, bool withPublished)
{
    os << "preset,k,d,temporal,steps_ntp,steps_diag,ratio_exact";
    if (withPublished)
    {
        os << ",variant,published_step_k,repro_step_k,match";
    }
    os << '\n';
    for (auto const& r : rows)
    {
        os << r.preset << ',' << r.config.k << ',' << r.config.d << ',' << (r.config.temporal ? "true" : "false") << ','
           << r.steps_ntp << ',' << r.steps_diag << ',' << format_double(r.ratio_exact.value());
        if (withPublished)
        {
            os << ',' << r.variant << ',' << r.published_steps << ',' << r.reproduced_steps << ','
               << (r.matches_published ? "yes" : "no");
        }
        os << '\n';
    }
}

inline Json table_json(std::vector<TableRow> const& rows, bool withPublished)
{
    Json out = Json::array();
    for (auto const& r : rows)
    {
        auto const p = preset(r.preset);
        Json row{{"config", config_header(p.geometry, r.config)}, {"preset", r.preset}, {"variant", r.variant},
            {"steps_ntp", r.steps_ntp}, {"steps_diag", r.steps_diag}, {"ratio_exact", r.ratio_exact.value()}};
        if (withPublished)
        {
            row["published_step_k"] = r.published_steps;
            row["repro_step_k"] = r.reproduced_steps;
            row["match"] = r.matches_published;
        }
        out.push_back(std::move(row));
    }
    return out;
}

inline Json divergence_json(DivergenceReport const& r)
{
    Json frames = Json::array();
    for (auto const& f : r.per_frame)
    {
        frames.push_back(Json{{"frame", f.frame}, {"agreement", f.agreement}, {"mean_kl", f.mean_kl}});
    }
    return Json{{"agreement", r.agreement}, {"mean_positionwise_kl", r.mean_positionwise_kl},
        {"rollouts", r.rollouts}, {"per_frame", std::move(frames)},
        {"metric_note", "token agreement and conditional KL on the oracle model; not a perceptual video metric"}};
}

inline void write_attention_csv(std::ostream& os, AttentionDump const& dump)
{
    os << "query";
    for (auto c : dump.column_positions)
    {
        os << ',' << c;
    }
    os << '\n';
    for (std::size_t r = 0; r < dump.matrix.size(); ++r)
    {
        os << dump.row_positions[r];
        for (auto x : dump.matrix[r])
        {
            os << ',' << format_double(x);
        }
        os << '\n';
    }
}

} // namespace diagd
