#pragma once

#include "diagd/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace diagd
{

struct TransformerConfig
{
    Count vocab{16};
    Count layers{2};
    Count model_dim{64};
    Count heads{4};
    Count mlp_dim{0}; // 0 selects 4 * model_dim
    Count max_frames{64};
    Count max_rows{64};
    Count max_cols{64};
    std::uint64_t weight_seed{0};
    // Zeroes the query/key projections so every attention row is uniform over its visible keys.
    bool uniform_attention{false};

    friend bool operator==(TransformerConfig const&, TransformerConfig const&) = default;
};

// A token placed at a grid coordinate.
struct TokenAt
{
    Coordinate coord;
    TokenId token{0};
};

// Per-position keys and values for every layer, written once when the token is fed.
class KVCache
{
public:
    struct Entry
    {
        Coordinate coord;
        std::vector<std::vector<double>> keys;   // [layer][model_dim]
        std::vector<std::vector<double>> values; // [layer][model_dim]
    };

    [[nodiscard]] bool contains(Count position) const
    {
        return mEntries.contains(position);
    }

    [[nodiscard]] std::size_t size() const noexcept
    {
        return mEntries.size();
    }

    void insert(Count position, Entry entry)
    {
        auto const [it, inserted] = mEntries.emplace(position, std::move(entry));
        DIAGD_CHECK(inserted, InternalError, "KV cache entry for position " + std::to_string(position) + " written twice");
    }

    // Ascending position order.
    [[nodiscard]] std::map<Count, Entry> const& entries() const noexcept
    {
        return mEntries;
    }

    void clear() noexcept
    {
        mEntries.clear();
    }

private:
    std::map<Count, Entry> mEntries;
};

// Small pre-norm decoder-only transformer with seeded weights and factorized sinusoidal positions
// over (frame, row, col). Token id `vocab` is a begin-of-sequence embedding.
class TinyTransformer
{
public:
    using Matrix = std::vector<double>; // row-major [out][in]

    struct ForwardResult
    {
        std::vector<std::vector<double>> probabilities;
        // Attention weights [query][key] over input indices, mean over heads and layers.
        std::vector<std::vector<double>> attention;
    };

    explicit TinyTransformer(TransformerConfig config)
        : mCfg(config)
    {
        DIAGD_CHECK(mCfg.vocab >= 2, ConfigError, "transformer vocab must be >= 2");
        DIAGD_CHECK(mCfg.layers >= 1, ConfigError, "transformer needs at least one layer");
        DIAGD_CHECK(mCfg.heads >= 1 && mCfg.model_dim % mCfg.heads == 0, ConfigError,
            "model_dim must be a positive multiple of heads");
        DIAGD_CHECK(mCfg.model_dim % 2 == 0, ConfigError, "model_dim must be even for sinusoidal positions");
        if (mCfg.mlp_dim == 0)
        {
            mCfg.mlp_dim = 4 * mCfg.model_dim;
        }
        init_weights();
    }

    [[nodiscard]] TransformerConfig const& config() const noexcept
    {
        return mCfg;
    }

    [[nodiscard]] TokenId bos() const noexcept
    {
        return static_cast<TokenId>(mCfg.vocab);
    }

    // All parameters concatenated in a fixed order.
    [[nodiscard]] std::vector<double> flat_weights() const
    {
        std::vector<double> out(mEmbedding);
        for (auto const& l : mLayers)
        {
            for (auto const* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2})
            {
                out.insert(out.end(), m->begin(), m->end());
            }
        }
        out.insert(out.end(), mHead.begin(), mHead.end());
        return out;
    }

    // Runs one token through the stack. Its attention keys are the cache entries accepted by
    // `visible` (excluding any entry at the token's own position) plus the token itself, in
    // ascending position order. With `store` the token's keys/values are written to the cache.
    template <class Visible>
    std::vector<double> step(KVCache& cache, Count position, TokenAt const& in, Visible&& visible, bool store,
        std::vector<double>* attentionOut = nullptr) const
    {
        auto const d = static_cast<std::size_t>(mCfg.model_dim);
        std::vector<KVCache::Entry const*> keyEntries;
        std::size_t selfIndex = 0;
        bool selfPlaced = false;
        for (auto const& [pos, entry] : cache.entries())
        {
            if (pos == position || !visible(entry.coord))
            {
                continue;
            }
            if (!selfPlaced && pos > position)
            {
                selfIndex = keyEntries.size();
                keyEntries.push_back(nullptr);
                selfPlaced = true;
            }
            keyEntries.push_back(&entry);
        }
        if (!selfPlaced)
        {
            selfIndex = keyEntries.size();
            keyEntries.push_back(nullptr);
        }

        auto x = embed(in);
        KVCache::Entry own{in.coord, {}, {}};
        std::vector<double> attnSum(keyEntries.size(), 0.0);
        for (std::size_t l = 0; l < mLayers.size(); ++l)
        {
            auto const& layer = mLayers[l];
            auto const a = layer_norm(x);
            auto q = matvec(layer.wq, a, d, d);
            auto k = matvec(layer.wk, a, d, d);
            auto v = matvec(layer.wv, a, d, d);
            std::vector<std::vector<double> const*> ks(keyEntries.size());
            std::vector<std::vector<double> const*> vs(keyEntries.size());
            for (std::size_t e = 0; e < keyEntries.size(); ++e)
            {
                ks[e] = e == selfIndex ? &k : &keyEntries[e]->keys[l];
                vs[e] = e == selfIndex ? &v : &keyEntries[e]->values[l];
            }
            auto const attended = attend(q, ks, vs, attnSum);
            auto const o = matvec(layer.wo, attended, d, d);
            for (std::size_t c = 0; c < d; ++c)
            {
                x[c] += o[c];
            }
            mlp(layer, x);
            own.keys.push_back(std::move(k));
            own.values.push_back(std::move(v));
        }
        if (store)
        {
            cache.insert(position, std::move(own));
        }
        if (attentionOut != nullptr)
        {
            auto const denom = static_cast<double>(mCfg.layers * mCfg.heads);
            attentionOut->assign(keyEntries.size(), 0.0);
            for (std::size_t e = 0; e < attnSum.size(); ++e)
            {
                (*attentionOut)[e] = attnSum[e] / denom;
            }
        }
        return head(x);
    }

    // Full recomputation over a token set. mask is indexed by sequence position of geom; token i
    // attends to token j iff mask(pos_i, pos_j). Results do not depend on the order of `tokens`.
    ForwardResult forward(GridGeometry const& geom, std::span<TokenAt const> tokens, VisibilityMask const& mask,
        bool withAttention = false) const
    {
        DIAGD_CHECK(mask.size() == geom.total_positions(), ConfigError, "mask size does not match geometry");
        auto const n = tokens.size();
        auto const d = static_cast<std::size_t>(mCfg.model_dim);
        std::vector<Count> pos(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            pos[i] = sequence_position(geom, tokens[i].coord);
        }
        std::vector<std::size_t> byPos(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            byPos[i] = i;
        }
        std::sort(byPos.begin(), byPos.end(), [&](std::size_t a, std::size_t b) { return pos[a] < pos[b]; });
        for (std::size_t i = 1; i < n; ++i)
        {
            DIAGD_CHECK(pos[byPos[i - 1]] != pos[byPos[i]], DomainError, "duplicate coordinate in forward input");
        }

        std::vector<std::vector<double>> xs(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            xs[i] = embed(tokens[i]);
        }
        ForwardResult result;
        if (withAttention)
        {
            result.attention.assign(n, std::vector<double>(n, 0.0));
        }
        for (auto const& layer : mLayers)
        {
            std::vector<std::vector<double>> qs(n);
            std::vector<std::vector<double>> ks(n);
            std::vector<std::vector<double>> vs(n);
            for (std::size_t i = 0; i < n; ++i)
            {
                auto const a = layer_norm(xs[i]);
                qs[i] = matvec(layer.wq, a, d, d);
                ks[i] = matvec(layer.wk, a, d, d);
                vs[i] = matvec(layer.wv, a, d, d);
            }
            for (std::size_t i = 0; i < n; ++i)
            {
                std::vector<std::vector<double> const*> keyK;
                std::vector<std::vector<double> const*> keyV;
                std::vector<std::size_t> keyIdx;
                for (auto j : byPos)
                {
                    if (j == i || mask.get(pos[i], pos[j]))
                    {
                        keyK.push_back(&ks[j]);
                        keyV.push_back(&vs[j]);
                        keyIdx.push_back(j);
                    }
                }
                std::vector<double> attnSum(keyK.size(), 0.0);
                auto const attended = attend(qs[i], keyK, keyV, attnSum);
                auto const o = matvec(layer.wo, attended, d, d);
                for (std::size_t c = 0; c < d; ++c)
                {
                    xs[i][c] += o[c];
                }
                mlp(layer, xs[i]);
                if (withAttention)
                {
                    for (std::size_t e = 0; e < keyIdx.size(); ++e)
                    {
                        result.attention[i][keyIdx[e]] += attnSum[e];
                    }
                }
            }
        }
        result.probabilities.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            result.probabilities.push_back(head(xs[i]));
        }
        if (withAttention)
        {
            auto const denom = static_cast<double>(mCfg.layers * mCfg.heads);
            for (auto& row : result.attention)
            {
                for (auto& x : row)
                {
                    x /= denom;
                }
            }
        }
        return result;
    }

private:
    struct Layer
    {
        Matrix wq, wk, wv, wo, w1, w2;
    };

    static std::vector<double> matvec(Matrix const& w, std::vector<double> const& x, std::size_t rows, std::size_t cols)
    {
        std::vector<double> y(rows, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
        {
            double acc = 0.0;
            auto const* row = &w[r * cols];
            for (std::size_t c = 0; c < cols; ++c)
            {
                acc += row[c] * x[c];
            }
            y[r] = acc;
        }
        return y;
    }

    static std::vector<double> layer_norm(std::vector<double> const& x)
    {
        double mean = 0.0;
        for (auto v : x)
        {
            mean += v;
        }
        mean /= static_cast<double>(x.size());
        double var = 0.0;
        for (auto v : x)
        {
            var += (v - mean) * (v - mean);
        }
        var /= static_cast<double>(x.size());
        auto const inv = 1.0 / std::sqrt(var + 1e-5);
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            y[i] = (x[i] - mean) * inv;
        }
        return y;
    }

    static double gelu(double x)
    {
        constexpr double kC = 0.7978845608028654; // sqrt(2 / pi)
        return 0.5 * x * (1.0 + std::tanh(kC * (x + 0.044715 * x * x * x)));
    }

    // Multi-head attention of one query over the given keys; accumulates per-key weights summed
    // over heads into attnSum.
    std::vector<double> attend(std::vector<double> const& q, std::vector<std::vector<double> const*> const& ks,
        std::vector<std::vector<double> const*> const& vs, std::vector<double>& attnSum) const
    {
        auto const d = static_cast<std::size_t>(mCfg.model_dim);
        auto const dh = d / static_cast<std::size_t>(mCfg.heads);
        auto const scale = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<double> out(d, 0.0);
        std::vector<double> scores(ks.size());
        for (std::size_t h = 0; h < static_cast<std::size_t>(mCfg.heads); ++h)
        {
            auto const off = h * dh;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t e = 0; e < ks.size(); ++e)
            {
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c)
                {
                    s += q[off + c] * (*ks[e])[off + c];
                }
                scores[e] = s * scale;
                mx = std::max(mx, scores[e]);
            }
            double total = 0.0;
            for (auto& s : scores)
            {
                s = std::exp(s - mx);
                total += s;
            }
            for (std::size_t e = 0; e < ks.size(); ++e)
            {
                auto const p = scores[e] / total;
                attnSum[e] += p;
                for (std::size_t c = 0; c < dh; ++c)
                {
                    out[off + c] += p * (*vs[e])[off + c];
                }
            }
        }
        return out;
    }

    void mlp(Layer const& layer, std::vector<double>& x) const
    {
        auto const d = static_cast<std::size_t>(mCfg.model_dim);
        auto const f = static_cast<std::size_t>(mCfg.mlp_dim);
        auto hidden = matvec(layer.w1, layer_norm(x), f, d);
        for (auto& v : hidden)
        {
            v = gelu(v);
        }
        auto const y = matvec(layer.w2, hidden, d, f);
        for (std::size_t c = 0; c < d; ++c)
        {
            x[c] += y[c];
        }
    }

    std::vector<double> embed(TokenAt const& in) const
    {
        DIAGD_CHECK(in.token >= 0 && in.token <= mCfg.vocab, BoundsError,
            "token id " + std::to_string(in.token) + " outside transformer vocabulary");
        auto const& c = in.coord;
        DIAGD_CHECK(std::abs(c.frame) < mCfg.max_frames && c.row >= 0 && c.row < mCfg.max_rows && c.col >= 0
                && c.col < mCfg.max_cols,
            BoundsError, "position overflow: coordinate exceeds the transformer's position table");
        auto const d = static_cast<std::size_t>(mCfg.model_dim);
        std::vector<double> x(mEmbedding.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(in.token) * d),
            mEmbedding.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(in.token + 1) * d));
        add_sinusoid(x, c.frame, 10000.0, 0.0);
        add_sinusoid(x, c.row, 1000.0, std::numbers::pi / 3.0);
        add_sinusoid(x, c.col, 100.0, 2.0 * std::numbers::pi / 3.0);
        return x;
    }

    // Each axis gets its own wavelength base and phase so (t, i, j) permutations do not collide.
    static void add_sinusoid(std::vector<double>& x, std::int32_t value, double base, double phase)
    {
        auto const d = x.size();
        for (std::size_t m = 0; m < d / 2; ++m)
        {
            auto const freq = std::pow(base, -2.0 * static_cast<double>(m) / static_cast<double>(d));
            auto const angle = static_cast<double>(value) * freq + phase;
            x[2 * m] += std::sin(angle) / 3.0;
            x[2 * m + 1] += std::cos(angle) / 3.0;
        }
    }

    std::vector<double> head(std::vector<double> const& x) const
    {
        auto const d = static_cast<std::size_t>(mCfg.model_dim);
        auto const logits = matvec(mHead, layer_norm(x), static_cast<std::size_t>(mCfg.vocab), d);
        auto const mx = *std::max_element(logits.begin(), logits.end());
        std::vector<double> p(logits.size());
        double total = 0.0;
        for (std::size_t v = 0; v < logits.size(); ++v)
        {
            p[v] = std::exp(logits[v] - mx);
            total += p[v];
        }
        for (auto& v : p)
        {
            v /= total;
        }
        return p;
    }

    void init_weights()
    {
        auto const d = static_cast<std::size_t>(mCfg.model_dim);
        auto const f = static_cast<std::size_t>(mCfg.mlp_dim);
        std::mt19937_64 rng(mCfg.weight_seed);
        // Symmetric uniform with the given standard deviation; built from raw engine output so the
        // sequence is identical across standard library implementations.
        auto fill = [&rng](Matrix& m, std::size_t count, double stddev) {
            m.resize(count);
            auto const a = stddev * std::sqrt(3.0);
            for (auto& w : m)
            {
                w = (2.0 * to_unit01(rng()) - 1.0) * a;
            }
        };
        fill(mEmbedding, (static_cast<std::size_t>(mCfg.vocab) + 1) * d, 1.0);
        mLayers.resize(static_cast<std::size_t>(mCfg.layers));
        auto const attnStd = 1.0 / std::sqrt(static_cast<double>(d));
        for (auto& l : mLayers)
        {
            fill(l.wq, d * d, attnStd * 2.0);
            fill(l.wk, d * d, attnStd * 2.0);
            fill(l.wv, d * d, attnStd);
            fill(l.wo, d * d, attnStd);
            fill(l.w1, f * d, attnStd);
            fill(l.w2, d * f, 1.0 / std::sqrt(static_cast<double>(f)));
            if (mCfg.uniform_attention)
            {
                std::fill(l.wq.begin(), l.wq.end(), 0.0);
                std::fill(l.wk.begin(), l.wk.end(), 0.0);
            }
        }
        fill(mHead, static_cast<std::size_t>(mCfg.vocab) * d, 2.0 / std::sqrt(static_cast<double>(d)));
    }

    static double to_unit01(std::uint64_t x) noexcept
    {
        return static_cast<double>(x >> 11) * 0x1.0p-53;
    }

    TransformerConfig mCfg;
    Matrix mEmbedding;
    std::vector<Layer> mLayers;
    Matrix mHead;
};

// Mean attention (over heads and layers) of one frame's positions when the completed grid is run
// through the model under the schedule's visibility mask.
struct AttentionDump
{
    std::int32_t frame{0};
    std::vector<Count> row_positions;    // sequence positions of the frame's tokens
    std::vector<Count> column_positions; // every sequence position, ascending
    std::vector<std::vector<double>> matrix;
};

inline AttentionDump attention_dump(TinyTransformer const& model, TokenGrid const& grid, Schedule const& sched,
    std::int32_t frame, Count max_positions = kDefaultMaxMaskPositions)
{
    auto const& geom = grid.geometry();
    DIAGD_CHECK(geom == sched.geometry(), ConfigError, "grid does not match the schedule");
    DIAGD_CHECK(frame >= 0 && frame < geom.frames, BoundsError,
        "frame " + std::to_string(frame) + " out of range [0, " + std::to_string(geom.frames) + ")");
    DIAGD_CHECK(grid.complete(), DomainError, "attention dump needs a completed grid");

    auto const mask = build_finetune_mask(sched, max_positions);
    std::vector<TokenAt> tokens;
    tokens.reserve(static_cast<std::size_t>(geom.total_positions()));
    for (Count pos = 0; pos < geom.total_positions(); ++pos)
    {
        auto const c = sequence_coord(geom, pos);
        tokens.push_back(TokenAt{c, grid.at(c)});
    }
    auto const result = model.forward(geom, tokens, mask, true);

    AttentionDump dump;
    dump.frame = frame;
    for (Count pos = 0; pos < geom.total_positions(); ++pos)
    {
        dump.column_positions.push_back(pos);
    }
    auto const first = sequence_position(geom, Coordinate{frame, 0, 0});
    for (Count r = 0; r < geom.tokens_per_frame(); ++r)
    {
        dump.row_positions.push_back(first + r);
        dump.matrix.push_back(result.attention[static_cast<std::size_t>(first + r)]);
    }
    return dump;
}

} // namespace diagd
