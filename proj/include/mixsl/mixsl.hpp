#pragma once

#include "mixsl/errors.hpp"
#include "mixsl/parallel.hpp"
#include "mixsl/grid.hpp"
#include "mixsl/snapshot.hpp"
#include "mixsl/geometry.hpp"
#include "mixsl/hweno.hpp"
#include "mixsl/transport.hpp"
#include "mixsl/elliptic.hpp"
#include "mixsl/models.hpp"
#include "mixsl/diagnostics.hpp"
#include "mixsl/app/config.hpp"
#include "mixsl/app/scenarios.hpp"
