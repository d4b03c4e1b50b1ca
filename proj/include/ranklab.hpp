#pragma once

#include "ranklab/errors.hpp"
#include "ranklab/parallel.hpp"
#include "ranklab/symm.hpp"
#include "ranklab/matrixkit.hpp"
#include "ranklab/operators.hpp"
#include "ranklab/pde.hpp"
#include "ranklab/verify.hpp"
#include "ranklab/experiment.hpp"
