// Everything: numerical core plus the experiment runner.
#pragma once

#include "qbd/core.hpp"
#include "qbd/dynsys.hpp"
#include "qbd/evolve.hpp"
#include "qbd/operators.hpp"
#include "qbd/perturbation.hpp"
#include "qbd/spectral.hpp"
#include "qbd/transfer.hpp"

#include "qbd/runner/acceptance.hpp"
#include "qbd/runner/config.hpp"
#include "qbd/runner/io.hpp"
#include "qbd/runner/run.hpp"
#include "qbd/runner/tasks.hpp"
