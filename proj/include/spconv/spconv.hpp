#pragma once

#include "spconv/convergence.hpp"
#include "spconv/data_model.hpp"
#include "spconv/econometrics.hpp"
#include "spconv/error.hpp"
#include "spconv/esda.hpp"
#include "spconv/report.hpp"
#include "spconv/weights.hpp"
