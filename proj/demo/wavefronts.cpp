// Prints the generation step of every token of a small grid, frame by frame.

#include "diagd/diagd.hpp"

#include <iomanip>
#include <iostream>

int main()
{
    using namespace diagd;
    GridGeometry const geom{2, 4, 6, 0, 16};
    DiagConfig const cfg{1, 4, true, PredecessorPolicy::Temporal};
    auto const sched = build_schedule(geom, cfg);

    std::cout << "h=" << geom.height << " w=" << geom.width << " T=" << geom.frames << " k=" << cfg.k
              << " d=" << cfg.d << " -> " << sched.total_steps() << " steps (NTP: " << geom.generated_tokens()
              << ")\n";
    for (std::int32_t t = 0; t < geom.frames; ++t)
    {
        std::cout << "frame " << t << '\n';
        for (std::int32_t i = 0; i < geom.height; ++i)
        {
            for (std::int32_t j = 0; j < geom.width; ++j)
            {
                std::cout << std::setw(4) << sched.step_of({t, i, j});
            }
            std::cout << '\n';
        }
    }
    auto const report = speedup(geom, cfg);
    std::cout << "speedup " << report.ratio_exact.value() << "x, widest step " << sched.max_width() << " tokens\n";
}
