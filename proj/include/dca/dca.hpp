#pragma once

#include "dca/admittance.hpp"
#include "dca/boundary.hpp"
#include "dca/engine.hpp"
#include "dca/errors.hpp"
#include "dca/grid.hpp"
#include "dca/jfng.hpp"
#include "dca/partition.hpp"
#include "dca/powerflow.hpp"
#include "dca/protocol.hpp"
#include "dca/screening.hpp"
#include "dca/session.hpp"
#include "dca/transport.hpp"
