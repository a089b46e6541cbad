#pragma once

#include "sfpa/diagnostics.hpp"
#include "sfpa/error.hpp"
#include "sfpa/io.hpp"
#include "sfpa/matrix.hpp"
#include "sfpa/pa.hpp"
#include "sfpa/parallel.hpp"
#include "sfpa/random.hpp"
#include "sfpa/report.hpp"
#include "sfpa/sim.hpp"
#include "sfpa/spectral_law.hpp"
