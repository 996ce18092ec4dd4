#include "diagd/grid.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace diagd;

TEST(RasterIndex, Examples)
{
    GridGeometry const g{2, 2, 3, 0, 4};
    EXPECT_EQ(raster_index(g, {0, 0, 0}), 0);
    EXPECT_EQ(raster_index(g, {1, 1, 2}), 11);
    GridGeometry const cosmos{3, 40, 64, 0, 16000};
    EXPECT_EQ(raster_index(cosmos, {0, 39, 63}), 2559);
}

TEST(RasterIndex, OutOfBoundsThrows)
{
    GridGeometry const g{2, 2, 3, 1, 4};
    EXPECT_THROW(raster_index(g, {2, 0, 0}), BoundsError);
    EXPECT_THROW(raster_index(g, {0, 2, 0}), BoundsError);
    EXPECT_THROW(raster_index(g, {0, 0, 3}), BoundsError);
    EXPECT_THROW(raster_index(g, {0, -1, 0}), BoundsError);
    // Prompt frames are in bounds but have no raster index.
    EXPECT_THROW(raster_index(g, {-1, 0, 0}), BoundsError);
    EXPECT_THROW(raster_coord(g, 12), BoundsError);
}

TEST(RasterIndex, RoundTripProperty)
{
    oracle::Sweep sweep(11);
    for (int trial = 0; trial < 300; ++trial)
    {
        GridGeometry const g{sweep.uniform(1, 5), sweep.uniform(1, 20), sweep.uniform(1, 20), sweep.uniform(0, 2), 8};
        for (Count r = 0; r < g.generated_tokens(); ++r)
        {
            auto const c = raster_coord(g, r);
            ASSERT_EQ(raster_index(g, c), r);
            ASSERT_EQ(sequence_coord(g, sequence_position(g, c)), c);
        }
        for (Count p = 0; p < g.total_positions(); ++p)
        {
            ASSERT_EQ(sequence_position(g, sequence_coord(g, p)), p);
        }
    }
}

TEST(ValidateConfig, Examples)
{
    GridGeometry const cosmos{3, 40, 64, 2, 16000};
    auto const ok = validate_config(cosmos, DiagConfig{1, 40, true, PredecessorPolicy::Raster});
    EXPECT_EQ(ok.spatial_steps, 103);
    EXPECT_EQ(ok.effective_delay, 40);

    GridGeometry const small{1, 4, 5, 0, 4};
    EXPECT_THROW(validate_config(small, DiagConfig{6, 1, true, {}}), ConfigError);
    EXPECT_THROW(validate_config(small, DiagConfig{1, 9, true, {}}), ConfigError);
    EXPECT_THROW(validate_config(small, DiagConfig{0, 1, true, {}}), ConfigError);
    EXPECT_THROW(validate_config(small, DiagConfig{1, 0, true, {}}), ConfigError);
    EXPECT_NO_THROW(validate_config(small, DiagConfig{1, 8, true, {}}));
}

TEST(ValidateConfig, SpatialOnlyIgnoresDelay)
{
    GridGeometry const g{3, 4, 5, 0, 4};
    auto const check = validate_config(g, DiagConfig{2, 0, false, {}});
    EXPECT_EQ(check.spatial_steps, 11);
    EXPECT_EQ(check.effective_delay, 11);
}

TEST(ValidateConfig, BadGeometry)
{
    EXPECT_THROW(validate_config(GridGeometry{0, 1, 1, 0, 2}, DiagConfig{}), ConfigError);
    EXPECT_THROW(validate_config(GridGeometry{1, 1, 1, 0, 1}, DiagConfig{}), ConfigError);
    EXPECT_THROW(validate_config(GridGeometry{1, 1, 1, -1, 2}, DiagConfig{}), ConfigError);
}

TEST(ValidateConfig, SpatialStepsFormulaExhaustive)
{
    for (Count h = 1; h <= 256; ++h)
    {
        for (Count w = 1; w <= 256; w += (w < 16 ? 1 : 7))
        {
            GridGeometry const g{1, h, w, 0, 2};
            for (Count k = 1; k <= w; ++k)
            {
                ASSERT_EQ(validate_config(g, DiagConfig{k, 1, true, {}}).spatial_steps, (h - 1) * k + w);
            }
        }
    }
}

TEST(TokenGrid, StatesAndWriteOnce)
{
    GridGeometry const g{2, 2, 2, 1, 3};
    TokenGrid grid(g);
    EXPECT_FALSE(grid.prompt_complete());
    for (std::int32_t i = 0; i < 2; ++i)
    {
        for (std::int32_t j = 0; j < 2; ++j)
        {
            grid.set_prompt({-1, i, j}, 1);
        }
    }
    EXPECT_TRUE(grid.prompt_complete());
    EXPECT_FALSE(grid.complete());
    EXPECT_THROW(grid.set_prompt({0, 0, 0}, 1), DomainError);
    EXPECT_THROW(grid.set_generated({0, 0, 0}, 3), DomainError);
    grid.set_generated({0, 0, 0}, 2);
    EXPECT_THROW(grid.set_generated({0, 0, 0}, 1), InternalError);
    EXPECT_EQ(grid.state({0, 0, 0}), CellState::Generated);
    EXPECT_EQ(grid.state({-1, 0, 0}), CellState::Prompt);
    grid.clear_generated();
    EXPECT_EQ(grid.state({0, 0, 0}), CellState::Empty);
    EXPECT_TRUE(grid.prompt_complete());
}
