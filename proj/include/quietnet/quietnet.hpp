#pragma once

#include "quietnet/archive.hpp"
#include "quietnet/checkpoint.hpp"
#include "quietnet/config.hpp"
#include "quietnet/error.hpp"
#include "quietnet/evaluation.hpp"
#include "quietnet/idx.hpp"
#include "quietnet/network.hpp"
#include "quietnet/noise.hpp"
#include "quietnet/optim.hpp"
#include "quietnet/pdf.hpp"
#include "quietnet/regularizers.hpp"
#include "quietnet/rng.hpp"
#include "quietnet/training.hpp"
#include "quietnet/version.hpp"
