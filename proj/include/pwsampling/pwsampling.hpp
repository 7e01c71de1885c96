#pragma once

#include "pwsampling/errors.hpp"
#include "pwsampling/heisenberg.hpp"
#include "pwsampling/grid.hpp"
#include "pwsampling/operator.hpp"
#include "pwsampling/sample_set.hpp"
#include "pwsampling/spectral.hpp"
#include "pwsampling/graded_qr.hpp"
#include "pwsampling/uniqueness.hpp"
#include "pwsampling/splines.hpp"
#include "pwsampling/inequality_lab.hpp"
#include "pwsampling/matrix_market.hpp"
#include "pwsampling/serialization.hpp"
#include "pwsampling/experiment.hpp"
