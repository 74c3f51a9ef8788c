#pragma once

// Everything in one include.

#include "matcha/errors.hpp"
#include "matcha/so3.hpp"
#include "matcha/wigner.hpp"
#include "matcha/fft.hpp"
#include "matcha/volume.hpp"
#include "matcha/phantom.hpp"
#include "matcha/ball_harmonics.hpp"
#include "matcha/correlation.hpp"
#include "matcha/coarse_search.hpp"
#include "matcha/refine.hpp"
#include "matcha/translation.hpp"
#include "matcha/diagnostics.hpp"
#include "matcha/io.hpp"
#include "matcha/bench.hpp"
