#pragma once

#include "certhe/baseline.hpp"
#include "certhe/constraints.hpp"
#include "certhe/errors.hpp"
#include "certhe/experiment.hpp"
#include "certhe/geometry.hpp"
#include "certhe/io.hpp"
#include "certhe/problem.hpp"
#include "certhe/sdp.hpp"
#include "certhe/synth.hpp"
