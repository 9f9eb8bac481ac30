#pragma once

#include "gruface/adam.hpp"
#include "gruface/backward.hpp"
#include "gruface/cells.hpp"
#include "gruface/checkpoint.hpp"
#include "gruface/dataset.hpp"
#include "gruface/error.hpp"
#include "gruface/feature_io.hpp"
#include "gruface/features.hpp"
#include "gruface/loss.hpp"
#include "gruface/mesh.hpp"
#include "gruface/mesh_io.hpp"
#include "gruface/mfcc.hpp"
#include "gruface/model.hpp"
#include "gruface/synthetic.hpp"
#include "gruface/training.hpp"
