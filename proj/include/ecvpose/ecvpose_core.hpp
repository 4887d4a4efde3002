#pragma once

// Library surface without the CLI front end.

#include "ecvpose/color.hpp"
#include "ecvpose/config.hpp"
#include "ecvpose/descriptor.hpp"
#include "ecvpose/error.hpp"
#include "ecvpose/evaluation.hpp"
#include "ecvpose/extract.hpp"
#include "ecvpose/frame.hpp"
#include "ecvpose/geometry.hpp"
#include "ecvpose/icp.hpp"
#include "ecvpose/io.hpp"
#include "ecvpose/kdtree.hpp"
#include "ecvpose/matching.hpp"
#include "ecvpose/monogenic.hpp"
#include "ecvpose/ransac.hpp"
#include "ecvpose/synth.hpp"
#include "ecvpose/util.hpp"
