#pragma once

// Everything: geometry and nets, partitions of unity, fiber calculus,
// oscillating fields, cell problems, the P1 solver and the studies.

#include "homog/core.hpp"
#include "homog/elliptic.hpp"
#include "homog/expression.hpp"
#include "homog/fiber.hpp"
#include "homog/geometry.hpp"
#include "homog/homogenize.hpp"
#include "homog/krylov.hpp"
#include "homog/nets.hpp"
#include "homog/oscillate.hpp"
#include "homog/partition.hpp"
#include "homog/study.hpp"
#include "homog/suite.hpp"
#include "homog/two_scale.hpp"
