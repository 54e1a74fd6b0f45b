#pragma once

#include "dftphys/error.hpp"
#include "dftphys/normal.hpp"
#include "dftphys/dft.hpp"
#include "dftphys/rng.hpp"
#include "dftphys/parallel.hpp"
#include "dftphys/csv.hpp"
#include "dftphys/dataset.hpp"
#include "dftphys/params.hpp"
#include "dftphys/mnl.hpp"
#include "dftphys/link.hpp"
#include "dftphys/model.hpp"
#include "dftphys/optimize.hpp"
#include "dftphys/estimation.hpp"
#include "dftphys/simulate.hpp"
#include "dftphys/signal.hpp"
#include "dftphys/report.hpp"
