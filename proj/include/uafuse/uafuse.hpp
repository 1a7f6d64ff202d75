#pragma once

// Umbrella header for the whole library.

#include "checkpoint.hpp"
#include "config.hpp"
#include "conv3d.hpp"
#include "dataset.hpp"
#include "fusion.hpp"
#include "gradcheck.hpp"
#include "inference.hpp"
#include "metrics.hpp"
#include "nifti.hpp"
#include "nn.hpp"
#include "ops.hpp"
#include "patches.hpp"
#include "phantom.hpp"
#include "rng.hpp"
#include "slices.hpp"
#include "tensor.hpp"
#include "train.hpp"
#include "volume.hpp"
