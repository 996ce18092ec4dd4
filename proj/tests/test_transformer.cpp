#include "diagd/decoder.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace diagd;

namespace
{

TransformerConfig small(std::uint64_t seed, Count vocab = 6)
{
    TransformerConfig c;
    c.vocab = vocab;
    c.layers = 2;
    c.model_dim = 16;
    c.heads = 2;
    c.weight_seed = seed;
    return c;
}

std::vector<TokenAt> random_tokens(GridGeometry const& g, oracle::Sweep& sweep)
{
    std::vector<TokenAt> tokens;
    for (Count pos = 0; pos < g.total_positions(); ++pos)
    {
        tokens.push_back(TokenAt{sequence_coord(g, pos), static_cast<TokenId>(sweep.uniform(0, g.vocab - 1))});
    }
    return tokens;
}

double max_rel(std::vector<double> const& a, std::vector<double> const& b)
{
    double worst = 0.0;
    for (std::size_t v = 0; v < a.size(); ++v)
    {
        worst = std::max(worst, std::abs(a[v] - b[v]) / std::max(std::abs(b[v]), 1e-12));
    }
    return worst;
}

} // namespace

TEST(Transformer, WeightsDeterministic)
{
    TinyTransformer const a(small(3));
    TinyTransformer const b(small(3));
    TinyTransformer const c(small(4));
    EXPECT_EQ(a.flat_weights(), b.flat_weights());
    EXPECT_NE(a.flat_weights(), c.flat_weights());
}

TEST(Transformer, BadShapes)
{
    auto c = small(1);
    c.heads = 3;
    EXPECT_THROW(TinyTransformer{c}, ConfigError);
    c = small(1);
    c.vocab = 1;
    EXPECT_THROW(TinyTransformer{c}, ConfigError);
}

TEST(Transformer, OutputsAreDistributions)
{
    GridGeometry const g{2, 2, 3, 1, 6};
    TinyTransformer const m(small(7));
    oracle::Sweep sweep(1);
    auto const tokens = random_tokens(g, sweep);
    auto const res = m.forward(g, tokens, causal_mask(g.total_positions()), true);
    for (std::size_t i = 0; i < tokens.size(); ++i)
    {
        auto const& p = res.probabilities[i];
        ASSERT_EQ(p.size(), 6U);
        ASSERT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-6);
        ASSERT_NEAR(std::accumulate(res.attention[i].begin(), res.attention[i].end(), 0.0), 1.0, 1e-9);
        for (std::size_t j = i + 1; j < tokens.size(); ++j)
        {
            ASSERT_EQ(res.attention[i][j], 0.0);
        }
    }
}

TEST(Transformer, UniformAttentionSpreadsEvenly)
{
    auto cfg = small(2);
    cfg.uniform_attention = true;
    TinyTransformer const m(cfg);
    GridGeometry const g{1, 2, 2, 0, 6};
    oracle::Sweep sweep(2);
    auto const tokens = random_tokens(g, sweep);
    auto const res = m.forward(g, tokens, causal_mask(4), true);
    for (std::size_t j = 0; j < 4; ++j)
    {
        EXPECT_NEAR(res.attention[3][j], 0.25, 1e-12);
    }
}

TEST(Transformer, ForwardErrors)
{
    GridGeometry const g{1, 2, 2, 0, 6};
    TinyTransformer const m(small(2));
    std::vector<TokenAt> dup{TokenAt{{0, 0, 0}, 1}, TokenAt{{0, 0, 0}, 2}};
    EXPECT_THROW(m.forward(g, dup, causal_mask(4)), DomainError);
    std::vector<TokenAt> one{TokenAt{{0, 0, 0}, 1}};
    EXPECT_THROW(m.forward(g, one, causal_mask(3)), ConfigError);
    KVCache cache;
    EXPECT_THROW(m.step(cache, 0, TokenAt{{0, 70, 0}, 1}, [](Coordinate const&) { return true; }, false), BoundsError);
}

TEST(Transformer, FeedOrderIndependent)
{
    GridGeometry const g{2, 3, 3, 1, 6};
    TinyTransformer const m(small(11));
    oracle::Sweep sweep(3);
    auto tokens = random_tokens(g, sweep);
    auto const sched = build_schedule(g, DiagConfig{1, 2, true, {}});
    auto const mask = build_finetune_mask(sched);
    auto const base = m.forward(g, tokens, mask);
    std::reverse(tokens.begin(), tokens.end());
    auto const rev = m.forward(g, tokens, mask);
    for (std::size_t i = 0; i < tokens.size(); ++i)
    {
        ASSERT_EQ(base.probabilities[i], rev.probabilities[tokens.size() - 1 - i]);
    }
}

TEST(KVCache, WriteOnce)
{
    KVCache cache;
    cache.insert(3, KVCache::Entry{});
    EXPECT_TRUE(cache.contains(3));
    EXPECT_THROW(cache.insert(3, KVCache::Entry{}), InternalError);
    EXPECT_EQ(cache.size(), 1U);
}

// Feeding tokens one at a time under a mask must reproduce the batched forward pass.
TEST(KVCache, IncrementalMatchesRecompute)
{
    oracle::Sweep sweep(17);
    for (int trial = 0; trial < 25; ++trial)
    {
        GridGeometry const g{sweep.uniform(1, 3), sweep.uniform(1, 4), sweep.uniform(1, 4), sweep.uniform(0, 1),
            sweep.uniform(2, 9)};
        auto cfg = small(static_cast<std::uint64_t>(trial), g.vocab);
        cfg.layers = sweep.uniform(1, 3);
        cfg.heads = sweep.uniform(1, 2) * 2;
        cfg.model_dim = cfg.heads * 4 * sweep.uniform(1, 2);
        TinyTransformer const m(cfg);
        auto const k = sweep.uniform(1, g.width);
        auto const sched = build_schedule(g, DiagConfig{k, sweep.uniform(1, spatial_steps(g, k)), true, {}});
        auto const mask = build_finetune_mask(sched);
        auto const tokens = random_tokens(g, sweep);
        auto const full = m.forward(g, tokens, mask);

        // Feed in schedule order so every visible key is already cached.
        KVCache cache;
        auto const order = position_order(sched, MaskOrder::Schedule);
        for (auto pos : order)
        {
            auto const out = m.step(cache, pos, tokens[static_cast<std::size_t>(pos)],
                [&](Coordinate const& q) { return mask.get(pos, sequence_position(g, q)); }, true);
            ASSERT_LT(max_rel(out, full.probabilities[static_cast<std::size_t>(pos)]), 1e-5) << "trial " << trial;
        }
        ASSERT_EQ(cache.size(), static_cast<std::size_t>(g.total_positions()));
    }
}
