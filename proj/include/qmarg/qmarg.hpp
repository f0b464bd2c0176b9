#pragma once

#include "qmarg/errors.hpp"
#include "qmarg/shape.hpp"
#include "qmarg/operator.hpp"
#include "qmarg/marginals.hpp"
#include "qmarg/imposition.hpp"
#include "qmarg/sampling.hpp"
#include "qmarg/reconstruct.hpp"
#include "qmarg/experiments.hpp"
#include "qmarg/io.hpp"
