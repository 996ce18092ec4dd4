// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the number of failures.

#include "diagd/diagd.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace diagd;

namespace
{

constexpr double kIdentityTol = 1e-12;    // floating forms of exact ratios
constexpr double kKvRelTol = 1e-5;        // incremental vs batched transformer outputs
constexpr double kCalibrationTol = 0.05;  // relative fps error after calibration
constexpr double kStepBudget = 1.0;       // seconds, criterion 1
constexpr double kPropertyBudget = 10.0;  // seconds, criterion 3
constexpr double kOracleBudget = 30.0;    // seconds, criterion 5
constexpr int kFormulaTuples = 10000;
constexpr int kPropertyCases = 3000;
constexpr Count kOracleRollouts = 128;

struct Verdict
{
    bool ok{true};
    std::ostringstream detail;

    void fail(std::string const& why)
    {
        if (ok)
        {
            detail << why;
        }
        ok = false;
    }
};

struct Criterion
{
    int id;
    std::string name;
    double budget; // seconds, 0 = none
    std::function<void(Verdict&)> body;
};

// Pinned integers, not derived from the library.
struct Expected
{
    std::string preset;
    Count k;
    Count d;
    Count steps;
};

void step_counts(Verdict& v)
{
    std::vector<Expected> const pinned{
        {"cosmos", 0, 0, 7680},
        {"cosmos", 1, 1, 105},
        {"cosmos", 1, 5, 113},
        {"cosmos", 1, 9, 121},
        {"cosmos", 1, 40, 183},
        {"cosmos", 2, 2, 146},
        {"cosmos", 2, 10, 162},
        {"cosmos", 2, 18, 178},
        {"cosmos", 2, 80, 302},
        {"cosmos", 4, 4, 228},
        {"cosmos", 4, 12, 244},
        {"cosmos", 4, 20, 260},
        {"cosmos", 4, 36, 292},
        {"wham", 0, 0, 54000},
        {"wham", 2, 0, 6400},
        {"wham", 1, 0, 4700},
        {"mcar", 0, 0, 5040},
        {"mcar", 4, 0, 1140},
        {"mcar", 2, 0, 750},
        {"mcar", 1, 0, 555},
    };
    auto const rows = report_tables({"cosmos", "wham", "mcar"});
    std::size_t checked = 0;
    for (auto const& e : pinned)
    {
        bool found = false;
        for (auto const& r : rows)
        {
            bool const isNtp = e.k == 0;
            if (r.preset != e.preset || (r.variant == "ntp") != isNtp)
            {
                continue;
            }
            if (!isNtp && (r.config.k != e.k || (e.d != 0 && r.config.d != e.d)))
            {
                continue;
            }
            found = true;
            ++checked;
            if (r.steps_diag != e.steps)
            {
                v.fail(e.preset + " k=" + std::to_string(e.k) + ": got " + std::to_string(r.steps_diag) + " want "
                    + std::to_string(e.steps));
            }
            bool const knownRounding = r.steps_diag == 228 && r.published_steps == "0.24";
            if (!r.matches_published && !knownRounding)
            {
                v.fail(e.preset + " rounded " + r.reproduced_steps + " vs published " + r.published_steps);
            }
        }
        if (!found)
        {
            v.fail("no table row for " + e.preset + " k=" + std::to_string(e.k));
        }
    }
    v.detail << checked << " counts exact; 228 -> 0.23 vs published 0.24 is the one known rounding gap";
}

void formula_identities(Verdict& v)
{
    oracle::Sweep sweep(2024);
    double worst = 0.0;
    for (int n = 0; n < kFormulaTuples && v.ok; ++n)
    {
        GridGeometry const g{sweep.uniform(1, 3), sweep.uniform(1, 128), sweep.uniform(1, 128), 0, 2};
        auto const k = sweep.uniform(1, g.width);
        bool const temporal = sweep.uniform(0, 4) != 0;
        DiagConfig const cfg{k, temporal ? sweep.uniform(1, spatial_steps(g, k)) : 0, temporal, {}};
        // Enumerated length: last populated wavefront, and the largest per-token step.
        auto const sched = build_schedule(g, cfg);
        Count maxStep = 0;
        for (Count r = 0; r < g.generated_tokens(); ++r)
        {
            maxStep = std::max(maxStep, sched.step_of(raster_coord(g, r)));
        }
        auto const closed = step_count(g, cfg);
        if (closed != sched.total_steps() || closed != maxStep)
        {
            v.fail("closed form " + std::to_string(closed) + " vs enumerated " + std::to_string(maxStep));
        }
        if (!(Ratio{g.generated_tokens(), maxStep} == speedup(g, cfg).ratio_exact))
        {
            v.fail("exact ratio mismatch");
        }

        // k = 1, d = h middle form.
        auto const T = static_cast<double>(g.frames);
        auto const h = static_cast<double>(g.height);
        auto const w = static_cast<double>(g.width);
        Count const den = (g.frames - 1) * g.height + g.height + g.width - 1;
        if (step_count(g, DiagConfig{1, g.height, true, {}}) != den)
        {
            v.fail("k=1 d=h step count");
        }
        double const exact = static_cast<double>(g.frames * g.height * g.width) / static_cast<double>(den);
        double const middle = w / (1.0 + (w - 1.0) / (T * h));
        worst = std::max(worst, std::abs(middle - exact) / exact);
    }
    if (worst > kIdentityTol)
    {
        v.fail("middle form off by " + std::to_string(worst));
    }
    v.detail << kFormulaTuples << " tuples; worst middle-form rel err " << worst;
}

void schedule_properties(Verdict& v)
{
    oracle::Sweep sweep(77);
    for (int n = 0; n < kPropertyCases && v.ok; ++n)
    {
        GridGeometry const g{sweep.uniform(1, 4), sweep.uniform(1, 16), sweep.uniform(1, 16), sweep.uniform(0, 2), 2};
        auto const k = sweep.uniform(1, g.width);
        DiagConfig const cfg{k, sweep.uniform(1, spatial_steps(g, k)), sweep.uniform(0, 3) != 0, {}};
        auto const sched = build_schedule(g, cfg);

        std::vector<char> seen(static_cast<std::size_t>(g.generated_tokens()), 0);
        for (auto const& wf : sched.wavefronts())
        {
            if (wf.empty())
            {
                v.fail("empty wavefront");
            }
            for (auto const& c : wf)
            {
                auto& flag = seen[static_cast<std::size_t>(raster_index(g, c))];
                if (flag != 0)
                {
                    v.fail("coordinate scheduled twice");
                }
                flag = 1;
            }
        }
        if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        {
            v.fail("coordinate never scheduled");
        }

        for (Count r = 0; r < g.generated_tokens(); ++r)
        {
            auto const c = raster_coord(g, r);
            auto const s = sched.step_of(c);
            if (c.col > 0 && sched.step_of({c.frame, c.row, c.col - 1}) >= s)
            {
                v.fail("left neighbour not earlier");
            }
            if (c.row > 0)
            {
                auto const last = std::min<Count>(c.col + k - 1, g.width - 1);
                for (Count jj = 0; jj <= last; ++jj)
                {
                    if (sched.step_of({c.frame, c.row - 1, static_cast<std::int32_t>(jj)}) >= s)
                    {
                        v.fail("previous-row dependency not earlier");
                    }
                }
            }
            if (c.frame > 0 && s - sched.step_of({c.frame - 1, c.row, c.col}) < sched.delay())
            {
                v.fail("cross-frame offset below d");
            }
        }

        auto const raster = build_schedule(g, raster_equivalent_config(g));
        for (Count r = 0; r < g.generated_tokens(); ++r)
        {
            if (raster.step_of(raster_coord(g, r)) != r + 1)
            {
                v.fail("degenerate config is not raster order");
                break;
            }
        }
    }
    v.detail << kPropertyCases << " random configs, zero violations required";
}

void mask_correctness(Verdict& v)
{
    Count schedules = 0;
    for (Count t = 1; t <= 4 && v.ok; ++t)
    {
        for (Count h = 1; h <= 8 && v.ok; ++h)
        {
            for (Count w = 1; w <= 8 && v.ok; ++w)
            {
                GridGeometry const g{t, h, w, 1, 2};
                auto const degenerate = build_finetune_mask(build_schedule(g, raster_equivalent_config(g)));
                if (!(degenerate == causal_mask(g.total_positions())))
                {
                    v.fail("degenerate mask differs from causal");
                }
                for (Count k = 1; k <= w; ++k)
                {
                    std::set<Count> delays{1, h, k * h, spatial_steps(g, k)};
                    for (auto d : delays)
                    {
                        auto const sched = build_schedule(g, DiagConfig{k, d, true, {}});
                        auto const mask = build_finetune_mask(sched);
                        ++schedules;
                        if (!is_lower_triangular(permute(mask, position_order(sched, MaskOrder::Schedule))))
                        {
                            v.fail("schedule order not lower-triangular");
                        }
                        std::vector<char> vis(static_cast<std::size_t>(mask.size()));
                        for (Count r = 0; r < g.generated_tokens(); ++r)
                        {
                            auto const p = raster_coord(g, r);
                            auto const pp = sequence_position(g, p);
                            std::fill(vis.begin(), vis.end(), 0);
                            for (auto const& q : visible_set(sched, p))
                            {
                                vis[static_cast<std::size_t>(sequence_position(g, q))] = 1;
                            }
                            for (Count q = 0; q < mask.size(); ++q)
                            {
                                if ((mask.get(pp, q) && q != pp) != (vis[static_cast<std::size_t>(q)] != 0))
                                {
                                    v.fail("mask/visible_set disagreement");
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    v.detail << schedules << " schedules on every grid up to 8x8x4";
}

void oracle_equivalence(Verdict& v)
{
    GridGeometry const g{4, 6, 8, 1, 8};
    LocalFieldModel const local(g.vocab, parse_offsets("left,up,prev"), 31);
    DiagConfig const cfg{1, g.height, true, PredecessorPolicy::Temporal};
    auto const same = divergence(local, g, cfg, PredecessorPolicy::Temporal, kOracleRollouts, 5);
    if (same.agreement != 1.0 || same.mean_positionwise_kl != 0.0)
    {
        v.fail("left/up/prev grids differ");
    }
    for (Count r = 0; r < 4; ++r)
    {
        auto const prompt = seeded_prompt(g, static_cast<std::uint64_t>(r));
        if (!(decode_ntp(local, prompt, Sampling::Greedy, 0).grid
                == decode_diagd(local, prompt, build_schedule(g, cfg), cfg.policy, Sampling::Greedy, 0).grid))
        {
            v.fail("greedy grids differ");
        }
    }

    LocalFieldModel const diag(g.vocab, parse_offsets("upright"), 32);
    auto const k1 = divergence(diag, g, cfg, PredecessorPolicy::Temporal, kOracleRollouts, 6);
    auto const k2 = divergence(diag, g, DiagConfig{2, 2 * g.height, true, PredecessorPolicy::Temporal},
        PredecessorPolicy::Temporal, kOracleRollouts, 6);
    if (!(k1.agreement < 1.0))
    {
        v.fail("up-right parent did not diverge at k=1");
    }
    if (k2.agreement != 1.0 || k2.mean_positionwise_kl != 0.0)
    {
        v.fail("k=2 does not restore identity");
    }
    v.detail << kOracleRollouts << " rollouts on 6x8x4; up-right agreement k=1 " << k1.agreement << ", k=2 "
             << k2.agreement;
}

void transformer_mechanics(Verdict& v)
{
    oracle::Sweep sweep(606);
    double worst = 0.0;
    int shapes = 0;
    for (int trial = 0; trial < 20; ++trial)
    {
        GridGeometry const g{sweep.uniform(1, 3), sweep.uniform(1, 4), sweep.uniform(1, 5), sweep.uniform(0, 1),
            sweep.uniform(2, 12)};
        TransformerConfig tc;
        tc.vocab = g.vocab;
        tc.layers = sweep.uniform(1, 3);
        tc.heads = sweep.uniform(1, 4);
        tc.model_dim = tc.heads * 2 * sweep.uniform(1, 4);
        tc.weight_seed = static_cast<std::uint64_t>(trial);
        TinyTransformer const model(tc);
        auto const k = sweep.uniform(1, g.width);
        auto const sched = build_schedule(g, DiagConfig{k, sweep.uniform(1, spatial_steps(g, k)), true, {}});
        auto const mask = build_finetune_mask(sched);
        std::vector<TokenAt> tokens;
        for (Count pos = 0; pos < g.total_positions(); ++pos)
        {
            tokens.push_back(TokenAt{sequence_coord(g, pos), static_cast<TokenId>(sweep.uniform(0, g.vocab - 1))});
        }
        auto const full = model.forward(g, tokens, mask);
        KVCache cache;
        for (auto pos : position_order(sched, MaskOrder::Schedule))
        {
            auto const out = model.step(cache, pos, tokens[static_cast<std::size_t>(pos)],
                [&](Coordinate const& q) { return mask.get(pos, sequence_position(g, q)); }, true);
            auto const& ref = full.probabilities[static_cast<std::size_t>(pos)];
            for (std::size_t x = 0; x < ref.size(); ++x)
            {
                worst = std::max(worst, std::abs(out[x] - ref[x]) / std::max(std::abs(ref[x]), 1e-300));
            }
        }
        ++shapes;
    }
    if (worst > kKvRelTol)
    {
        v.fail("kv cache rel err " + std::to_string(worst));
    }

    int degenerate = 0;
    for (int trial = 0; trial < 8; ++trial)
    {
        GridGeometry const g{sweep.uniform(1, 3), sweep.uniform(1, 4), sweep.uniform(1, 4), sweep.uniform(0, 1), 16};
        TransformerConfig tc;
        tc.weight_seed = 100 + static_cast<std::uint64_t>(trial);
        tc.model_dim = 32;
        TinyTransformer const model(tc);
        auto const prompt = seeded_prompt(g, static_cast<std::uint64_t>(trial));
        auto const sched = build_schedule(g, raster_equivalent_config(g));
        if (!(decode_ntp(model, prompt, Sampling::Greedy, 0).grid
                == decode_diagd(model, prompt, sched, PredecessorPolicy::Raster, Sampling::Greedy, 0).grid))
        {
            v.fail("degenerate diagonal decode differs from NTP");
        }
        ++degenerate;
    }
    v.detail << shapes << " shapes, worst rel err " << worst << "; " << degenerate << " degenerate decodes identical";
}

void throughput(Verdict& v)
{
    auto const p = preset("cosmos");
    DiagConfig const cfg{1, 40, true, {}};
    CostModel const overheadOnly{1.0, 0.0, p.geometry.tokens_per_frame()};
    double const ratio = throughput_estimate(overheadOnly, p.geometry, cfg).fps
        / throughput_estimate_ntp(overheadOnly, p.geometry).fps;
    if (std::abs(ratio - 7680.0 / 183.0) > kIdentityTol)
    {
        v.fail("fps ratio " + std::to_string(ratio));
    }
    auto const cost = calibrate_cost_model(p.geometry, cfg, 0.15, 1.62);
    double const ntp = throughput_estimate_ntp(cost, p.geometry).fps;
    double const diag = throughput_estimate(cost, p.geometry, cfg).fps;
    if (std::abs(ntp - 0.15) / 0.15 > kCalibrationTol || std::abs(diag - 1.62) / 1.62 > kCalibrationTol)
    {
        v.fail("calibrated fps " + std::to_string(ntp) + " / " + std::to_string(diag));
    }
    v.detail << std::setprecision(6) << "ratio " << ratio << "; overhead " << cost.overhead_per_step << " s/step, "
             << cost.cost_per_token << " s/token -> " << ntp << " / " << diag << " fps";
}

} // namespace

int main()
{
    std::vector<Criterion> const criteria{
        {1, "step-count reproduction", kStepBudget, step_counts},
        {2, "formula identities", 0.0, formula_identities},
        {3, "schedule validity properties", kPropertyBudget, schedule_properties},
        {4, "mask correctness", 0.0, mask_correctness},
        {5, "oracle equivalence", kOracleBudget, oracle_equivalence},
        {6, "transformer mechanics", 0.0, transformer_mechanics},
        {7, "throughput arithmetic", 0.0, throughput},
    };
    int failures = 0;
    for (auto const& c : criteria)
    {
        Verdict v;
        auto const start = std::chrono::steady_clock::now();
        try
        {
            c.body(v);
        }
        catch (std::exception const& e)
        {
            v.fail(std::string("exception: ") + e.what());
        }
        double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget > 0.0 && secs > c.budget)
        {
            v.fail("over time budget");
        }
        failures += v.ok ? 0 : 1;
        std::cout << (v.ok ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " (" << std::fixed
                  << std::setprecision(3) << secs << " s) " << std::defaultfloat << v.detail.str() << '\n';
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed\n";
    return failures;
}
