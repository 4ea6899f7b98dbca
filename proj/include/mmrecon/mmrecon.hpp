#pragma once

#include "mmrecon/error.hpp"
#include "mmrecon/geometry.hpp"
#include "mmrecon/mesh_io.hpp"
#include "mmrecon/kdtree.hpp"
#include "mmrecon/visibility.hpp"
#include "mmrecon/radar.hpp"
#include "mmrecon/grid.hpp"
#include "mmrecon/backprojection.hpp"
#include "mmrecon/partial_synth.hpp"
#include "mmrecon/surface_proposal.hpp"
#include "mmrecon/completion.hpp"
#include "mmrecon/selection.hpp"
#include "mmrecon/metrics.hpp"
#include "mmrecon/config.hpp"
#include "mmrecon/pipeline.hpp"
#include "mmrecon/fixtures.hpp"
#include "mmrecon/corpus.hpp"
#include "mmrecon/benchmark.hpp"
