#pragma once

#include "mgccn/adam.hpp"
#include "mgccn/checkpoint.hpp"
#include "mgccn/config.hpp"
#include "mgccn/dataset_io.hpp"
#include "mgccn/encoder.hpp"
#include "mgccn/errors.hpp"
#include "mgccn/gradcheck.hpp"
#include "mgccn/graph.hpp"
#include "mgccn/kmeans.hpp"
#include "mgccn/losses.hpp"
#include "mgccn/metrics.hpp"
#include "mgccn/run_io.hpp"
#include "mgccn/sparse.hpp"
#include "mgccn/tape.hpp"
#include "mgccn/trainer.hpp"
