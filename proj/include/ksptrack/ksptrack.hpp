#pragma once

#include "ksptrack/annotations.hpp"
#include "ksptrack/binary_io.hpp"
#include "ksptrack/config.hpp"
#include "ksptrack/errors.hpp"
#include "ksptrack/features.hpp"
#include "ksptrack/forest.hpp"
#include "ksptrack/graph.hpp"
#include "ksptrack/hoof.hpp"
#include "ksptrack/image_io.hpp"
#include "ksptrack/ksp.hpp"
#include "ksptrack/lfda.hpp"
#include "ksptrack/metrics.hpp"
#include "ksptrack/network.hpp"
#include "ksptrack/optical_flow.hpp"
#include "ksptrack/overlay.hpp"
#include "ksptrack/rng.hpp"
#include "ksptrack/superpixels.hpp"
#include "ksptrack/synth.hpp"
#include "ksptrack/tracker.hpp"
#include "ksptrack/types.hpp"
