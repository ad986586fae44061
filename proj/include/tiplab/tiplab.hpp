#pragma once

#include "tiplab/analysis.hpp"
#include "tiplab/io.hpp"
#include "tiplab/models.hpp"
#include "tiplab/ode.hpp"
#include "tiplab/roots.hpp"
#include "tiplab/tipping.hpp"
