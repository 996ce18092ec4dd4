#pragma once

#include "diagd/analysis.hpp"
#include "diagd/decoder.hpp"
#include "diagd/error.hpp"
#include "diagd/grid.hpp"
#include "diagd/local_field.hpp"
#include "diagd/mixer.hpp"
#include "diagd/presets.hpp"
#include "diagd/scheduler.hpp"
#include "diagd/serialize.hpp"
#include "diagd/transformer.hpp"
#include "diagd/visibility.hpp"
