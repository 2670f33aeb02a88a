#pragma once

// Umbrella header. image.hpp is kept separate because it pulls in libpng.

#include "courtreg/court.hpp"
#include "courtreg/heatmap.hpp"
#include "courtreg/homography.hpp"
#include "courtreg/io.hpp"
#include "courtreg/pipeline.hpp"
#include "courtreg/rng.hpp"
#include "courtreg/synth.hpp"
