#pragma once

#include "fastloo/model.hpp"
#include "fastloo/parallel.hpp"
#include "fastloo/datagen.hpp"
#include "fastloo/lasso.hpp"
#include "fastloo/amp.hpp"
#include "fastloo/fast_loo.hpp"
#include "fastloo/naive_cv.hpp"
#include "fastloo/metrics.hpp"
#include "fastloo/special_functions.hpp"
#include "fastloo/replica.hpp"
#include "fastloo/io.hpp"
