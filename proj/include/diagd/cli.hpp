#pragma once

#include "diagd/serialize.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace diagd::cli
{

enum ExitCode : int
{
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kInvalidConfig = 3,
    kResource = 4,
    kInternal = 70,
};

inline int exit_code_for(ErrorKind kind)
{
    switch (kind)
    {
    case ErrorKind::Resource: return kResource;
    case ErrorKind::Internal: return kInternal;
    default: return kInvalidConfig;
    }
}

// Dense masks above this many positions are refused. DIAGD_MAX_POSITIONS overrides the default.
inline Count max_positions_from_env()
{
    if (auto const* v = std::getenv("DIAGD_MAX_POSITIONS"))
    {
        try
        {
            auto const n = std::stoll(v);
            DIAGD_CHECK(n > 0, ConfigError, "DIAGD_MAX_POSITIONS must be positive");
            return n;
        }
        catch (std::logic_error const&)
        {
            throw ConfigError(std::string("DIAGD_MAX_POSITIONS is not a number: ") + v);
        }
    }
    return kDefaultMaxMaskPositions;
}

struct GeometryOptions
{
    std::string preset;
    Count height{0};
    Count width{0};
    Count frames{0};
    Count prompt{-1};
    Count vocab{0};
    Count k{1};
    std::string d; // integer, "h" (= k*h), "spa" (= s_spa, spatial only); empty picks the default
    bool spatialOnly{false};
    std::string policy{"raster"};
};

inline void add_geometry_options(CLI::App& sub, GeometryOptions& o)
{
    auto* preset = sub.add_option("--preset", o.preset, "Preset geometry")->check(CLI::IsMember({"cosmos", "wham", "mcar"}));
    auto* h = sub.add_option("--height", o.height, "Token rows per frame");
    auto* w = sub.add_option("--width", o.width, "Token columns per frame");
    auto* t = sub.add_option("--frames", o.frames, "Generated frames");
    preset->excludes(h)->excludes(w)->excludes(t);
    sub.add_option("--prompt-frames", o.prompt, "Prompt frames");
    sub.add_option("--vocab", o.vocab, "Vocabulary size");
    sub.add_option("--k", o.k, "Spatial window k");
    sub.add_option("--d", o.d, "Temporal delay: integer, 'h' (= k*h) or 'spa' (spatial only)");
    sub.add_flag("--spatial-only", o.spatialOnly, "Disable cross-frame overlap (d = s_spa)");
    sub.add_option("--policy", o.policy, "Predecessor policy")->check(CLI::IsMember({"raster", "temporal"}));
}

inline std::pair<GridGeometry, DiagConfig> resolve(GeometryOptions const& o, GridGeometry fallback = {3, 4, 6, 1, 16})
{
    GridGeometry geom = fallback;
    bool spatialByDefault = false;
    if (!o.preset.empty())
    {
        auto const p = preset(o.preset);
        geom = p.geometry;
        spatialByDefault = !p.variants.empty() && !p.variants.front().config.temporal;
    }
    else
    {
        if (o.height > 0)
        {
            geom.height = o.height;
        }
        if (o.width > 0)
        {
            geom.width = o.width;
        }
        if (o.frames > 0)
        {
            geom.frames = o.frames;
        }
    }
    if (o.prompt >= 0)
    {
        geom.prompt_frames = o.prompt;
    }
    if (o.vocab > 0)
    {
        geom.vocab = o.vocab;
    }
    validate_geometry(geom);

    DiagConfig cfg;
    cfg.k = o.k;
    cfg.policy = parse_policy(o.policy);
    auto const sSpa = spatial_steps(geom, cfg.k);
    std::string d = o.d;
    if (d.empty())
    {
        d = (o.spatialOnly || spatialByDefault) ? "spa" : "h";
    }
    if (o.spatialOnly || d == "spa")
    {
        cfg.temporal = false;
        cfg.d = sSpa;
    }
    else if (d == "h")
    {
        cfg.d = cfg.k * geom.height;
    }
    else
    {
        try
        {
            std::size_t used = 0;
            cfg.d = std::stoll(d, &used);
            DIAGD_CHECK(used == d.size(), ConfigError, "bad --d value '" + d + "'");
        }
        catch (std::logic_error const&)
        {
            throw ConfigError("bad --d value '" + d + "' (expected integer, h or spa)");
        }
    }
    validate_config(geom, cfg);
    return {geom, cfg};
}

inline void emit(std::string const& path, std::string const& text, std::ostream& out)
{
    if (path.empty() || path == "-")
    {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f)
    {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    f << text;
}

inline Json read_json_file(std::string const& path)
{
    std::ifstream f(path);
    if (!f)
    {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    try
    {
        return Json::parse(f);
    }
    catch (Json::exception const& e)
    {
        throw FormatError("cannot parse '" + path + "': " + e.what());
    }
}

struct ModelOptions
{
    std::string kind{"lfm"};
    std::string parents{"left,up,prev"};
    std::uint64_t modelSeed{1};
    double logitScale{1.0};
    Count layers{2};
    Count dim{64};
    Count heads{4};
};

inline void add_model_options(CLI::App& sub, ModelOptions& m)
{
    sub.add_option("--model", m.kind, "Model backend")->check(CLI::IsMember({"lfm", "tt"}));
    sub.add_option("--parents", m.parents, "Oracle parent offsets: left,up,prev,upleft,upright or dt:di:dj");
    sub.add_option("--model-seed", m.modelSeed, "Seed for oracle conditionals / transformer weights");
    sub.add_option("--logit-scale", m.logitScale, "Oracle logit scale");
    sub.add_option("--layers", m.layers, "Transformer layers");
    sub.add_option("--dim", m.dim, "Transformer model dimension");
    sub.add_option("--heads", m.heads, "Transformer heads");
}

inline TinyTransformer make_transformer(ModelOptions const& m, GridGeometry const& geom)
{
    TransformerConfig c;
    c.vocab = geom.vocab;
    c.layers = m.layers;
    c.model_dim = m.dim;
    c.heads = m.heads;
    c.weight_seed = m.modelSeed;
    c.max_frames = std::max<Count>(64, geom.frames + geom.prompt_frames + 1);
    c.max_rows = std::max<Count>(64, geom.height);
    c.max_cols = std::max<Count>(64, geom.width);
    return TinyTransformer(c);
}

inline LocalFieldModel make_lfm(ModelOptions const& m, GridGeometry const& geom)
{
    return LocalFieldModel(geom.vocab, parse_offsets(m.parents), m.modelSeed, m.logitScale);
}

// Entry point shared by the executable and the tests.
inline int run(int argc, char const* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Diagonal decoding schedules, masks and decode loops for token grids", "diagd"};
    app.require_subcommand(1, 1);

    GeometryOptions geo;
    ModelOptions mdl;
    std::string format;
    std::string outPath;
    std::uint64_t seed{0};
    bool withPublished{false};

    auto* steps = app.add_subcommand("steps", "Print the diagonal step count");
    add_geometry_options(*steps, geo);
    steps->add_option("--format", format, "text|json|csv")->check(CLI::IsMember({"text", "json", "csv"}));

    std::string tablePreset;
    auto* table = app.add_subcommand("table", "Step counts of the published configurations");
    table->add_option("--preset", tablePreset, "Preset (all when omitted)")->check(CLI::IsMember({"cosmos", "wham", "mcar"}));
    table->add_flag("--paper-compare", withPublished, "Append the published STEP values");
    table->add_option("--format", format, "csv|json")->check(CLI::IsMember({"json", "csv"}));
    table->add_option("--out", outPath, "Output file");

    std::string checkPath;
    auto* schedule = app.add_subcommand("schedule", "Export (or verify) a wavefront schedule");
    add_geometry_options(*schedule, geo);
    schedule->add_option("--out", outPath, "Output JSON file");
    schedule->add_option("--check", checkPath, "Reload a schedule JSON and verify it against its config");

    std::string order{"raster"};
    auto* mask = app.add_subcommand("mask", "Export the finetuning attention mask as PBM");
    add_geometry_options(*mask, geo);
    mask->add_option("--order", order, "Row/column order")->check(CLI::IsMember({"raster", "schedule"}));
    mask->add_option("--out", outPath, "Output PBM file (JSON sidecar written next to it)");

    std::string mode{"diagd"};
    std::string sampling{"greedy"};
    auto* decode = app.add_subcommand("decode", "Decode a grid with NTP or diagonal decoding");
    add_geometry_options(*decode, geo);
    add_model_options(*decode, mdl);
    decode->add_option("--mode", mode, "ntp|diagd")->check(CLI::IsMember({"ntp", "diagd"}));
    decode->add_option("--sampling", sampling, "greedy|stochastic")->check(CLI::IsMember({"greedy", "stochastic"}));
    decode->add_option("--seed", seed, "Sampling / prompt seed");
    decode->add_option("--out", outPath, "Output grid JSON");

    Count rollouts{64};
    auto* compare = app.add_subcommand("compare", "Diagonal vs next-token divergence on the oracle model");
    add_geometry_options(*compare, geo);
    add_model_options(*compare, mdl);
    compare->add_option("--rollouts", rollouts, "Number of seeded rollouts");
    compare->add_option("--seed", seed, "Base seed");
    compare->add_option("--out", outPath, "Output JSON");

    double overhead{1.0};
    double perToken{0.0};
    std::vector<double> calibrate;
    auto* bench = app.add_subcommand("bench", "Throughput estimate under an affine cost model");
    add_geometry_options(*bench, geo);
    bench->add_option("--overhead", overhead, "Seconds per forward pass");
    bench->add_option("--per-token", perToken, "Seconds per query slot");
    bench->add_option("--calibrate-fps", calibrate, "Fit the cost model to NTP_FPS,DIAG_FPS")->expected(2)->delimiter(',');
    bench->add_flag("--paper-compare", withPublished, "Include published fps for preset configurations");
    bench->add_option("--out", outPath, "Output JSON");

    std::int32_t frame{0};
    auto* attn = app.add_subcommand("attn", "Dump mean attention of one frame (transformer backend)");
    add_geometry_options(*attn, geo);
    add_model_options(*attn, mdl);
    attn->add_option("--frame", frame, "Generated frame index");
    attn->add_option("--seed", seed, "Prompt / sampling seed");
    attn->add_option("--out", outPath, "Output CSV");

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::CallForHelp const&)
    {
        out << app.help();
        return kOk;
    }
    catch (CLI::CallForAllHelp const&)
    {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    }
    catch (CLI::ParseError const& e)
    {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    try
    {
        if (steps->parsed())
        {
            auto const [geom, cfg] = resolve(geo);
            auto const s = step_count(geom, cfg);
            if (format == "json")
            {
                emit("", Json{{"config", config_header(geom, cfg)}, {"steps_ntp", geom.generated_tokens()},
                              {"steps_diag", s}}.dump(2) + "\n", out);
            }
            else if (format == "csv")
            {
                out << "frames,height,width,k,d,temporal,steps_ntp,steps_diag\n"
                    << geom.frames << ',' << geom.height << ',' << geom.width << ',' << cfg.k << ',' << cfg.d << ','
                    << (cfg.temporal ? "true" : "false") << ',' << geom.generated_tokens() << ',' << s << '\n';
            }
            else
            {
                out << s << '\n';
            }
        }
        else if (table->parsed())
        {
            std::vector<std::string> names;
            if (tablePreset.empty())
            {
                names.assign(kPresetNames.begin(), kPresetNames.end());
            }
            else
            {
                names.push_back(tablePreset);
            }
            auto const rows = report_tables(names);
            std::ostringstream text;
            if (format == "json")
            {
                text << table_json(rows, withPublished).dump(2) << '\n';
            }
            else
            {
                write_table_csv(text, rows, withPublished);
            }
            emit(outPath, text.str(), out);
        }
        else if (schedule->parsed())
        {
            if (!checkPath.empty())
            {
                auto const sched = schedule_from_json(read_json_file(checkPath));
                out << Json{{"config", config_header(sched.geometry(), sched.config())}, {"valid", true},
                           {"total_steps", sched.total_steps()}}.dump(2)
                    << '\n';
            }
            else
            {
                auto const [geom, cfg] = resolve(geo);
                emit(outPath, schedule_to_json(build_schedule(geom, cfg)).dump() + "\n", out);
            }
        }
        else if (mask->parsed())
        {
            auto const [geom, cfg] = resolve(geo);
            auto const sched = build_schedule(geom, cfg);
            auto const m = build_finetune_mask(sched, max_positions_from_env());
            auto const ord = parse_mask_order(order);
            std::ostringstream pbm;
            write_pbm(pbm, m, position_order(sched, ord));
            emit(outPath, pbm.str(), out);
            if (!outPath.empty() && outPath != "-")
            {
                Json side{{"config", config_header(geom, cfg)}, {"order", order}, {"size", m.size()},
                    {"popcount", m.popcount()}, {"total_steps", sched.total_steps()}};
                emit(outPath + ".json", side.dump(2) + "\n", out);
            }
        }
        else if (decode->parsed())
        {
            auto const [geom, cfg] = resolve(geo);
            auto const samp = parse_sampling(sampling);
            auto const prompt = seeded_prompt(geom, seed);
            auto const sched = build_schedule(geom, cfg);
            DecodeResult result;
            Json modelJson;
            if (mdl.kind == "lfm")
            {
                auto const model = make_lfm(mdl, geom);
                modelJson = model_json(model);
                result = mode == "ntp" ? decode_ntp(model, prompt, samp, seed)
                                       : decode_diagd(model, prompt, sched, cfg.policy, samp, seed);
            }
            else
            {
                auto const model = make_transformer(mdl, geom);
                modelJson = model_json(model);
                result = mode == "ntp" ? decode_ntp(model, prompt, samp, seed)
                                       : decode_diagd(model, prompt, sched, cfg.policy, samp, seed);
            }
            auto j = grid_to_json(result.grid, cfg);
            j["model"] = modelJson;
            j["report"] = Json{{"mode", mode}, {"sampling", sampling}, {"seed", seed}, {"steps", result.report.steps},
                {"model_calls", result.report.model_calls}};
            emit(outPath, j.dump() + "\n", out);
        }
        else if (compare->parsed())
        {
            auto const [geom, cfg] = resolve(geo, GridGeometry{4, 6, 8, 1, 8});
            Json j{{"config", config_header(geom, cfg)}};
            if (mdl.kind == "tt")
            {
                auto const model = make_transformer(mdl, geom);
                divergence(model, geom, cfg, cfg.policy, rollouts, seed);
            }
            auto const model = make_lfm(mdl, geom);
            auto const sched = build_schedule(geom, cfg);
            j["model"] = model_json(model);
            j["parents_visible"] = parent_visibility_agrees(model, sched);
            j["divergence"] = divergence_json(divergence(model, geom, cfg, cfg.policy, rollouts, seed));
            emit(outPath, j.dump(2) + "\n", out);
        }
        else if (bench->parsed())
        {
            auto const [geom, cfg] = resolve(geo);
            CostModel cost{overhead, perToken, geom.tokens_per_frame()};
            if (!calibrate.empty())
            {
                cost = calibrate_cost_model(geom, cfg, calibrate[0], calibrate[1]);
            }
            auto const ntp = throughput_estimate_ntp(cost, geom);
            auto const diag = throughput_estimate(cost, geom, cfg);
            auto est = [](ThroughputEstimate const& e) {
                return Json{{"steps", e.steps}, {"total_time", e.total_time}, {"fps", e.fps},
                    {"tokens_per_second", e.tokens_per_second}};
            };
            Json j{{"config", config_header(geom, cfg)},
                {"cost_model",
                    {{"overhead_per_step", cost.overhead_per_step}, {"cost_per_token", cost.cost_per_token},
                        {"tokens_per_frame", cost.tokens_per_frame}}},
                {"ntp", est(ntp)}, {"diagd", est(diag)}, {"fps_ratio", diag.fps / ntp.fps},
                {"step_ratio", static_cast<double>(ntp.steps) / static_cast<double>(diag.steps)},
                {"note", "schedule-induced cost only; model size and kernel effects are not modeled"}};
            if (withPublished && !geo.preset.empty())
            {
                auto const p = preset(geo.preset);
                if (p.published_ntp_fps)
                {
                    j["published_fps_ntp"] = *p.published_ntp_fps;
                }
                for (auto const& v : p.variants)
                {
                    if (v.config.k == cfg.k && v.config.d == cfg.d && v.published_fps)
                    {
                        j["published_fps_diagd"] = *v.published_fps;
                    }
                }
            }
            emit(outPath, j.dump(2) + "\n", out);
        }
        else if (attn->parsed())
        {
            auto const [geom, cfg] = resolve(geo, GridGeometry{2, 4, 6, 1, 16});
            auto const model = make_transformer(mdl, geom);
            auto const sched = build_schedule(geom, cfg);
            auto const decoded
                = decode_diagd(model, seeded_prompt(geom, seed), sched, cfg.policy, Sampling::Stochastic, seed);
            std::ostringstream csv;
            write_attention_csv(csv, attention_dump(model, decoded.grid, sched, frame, max_positions_from_env()));
            emit(outPath, csv.str(), out);
        }
    }
    catch (Error const& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    }
    catch (std::exception const& e)
    {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}

} // namespace diagd::cli
