#pragma once

#include "ecvpose/cli.hpp"
#include "ecvpose/ecvpose_core.hpp"
