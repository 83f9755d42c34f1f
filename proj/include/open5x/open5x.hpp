#pragma once

#include "open5x/collision.hpp"
#include "open5x/config.hpp"
#include "open5x/demo.hpp"
#include "open5x/error.hpp"
#include "open5x/gcode.hpp"
#include "open5x/geometry.hpp"
#include "open5x/jobs.hpp"
#include "open5x/kinematics.hpp"
#include "open5x/mesh.hpp"
#include "open5x/motion.hpp"
#include "open5x/program.hpp"
#include "open5x/simcheck.hpp"
#include "open5x/toolpath.hpp"
