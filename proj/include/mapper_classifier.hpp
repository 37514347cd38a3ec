#pragma once

#include "mapper_classifier/archive.hpp"
#include "mapper_classifier/committee.hpp"
#include "mapper_classifier/common.hpp"
#include "mapper_classifier/config.hpp"
#include "mapper_classifier/dataset.hpp"
#include "mapper_classifier/distance.hpp"
#include "mapper_classifier/filter_bank.hpp"
#include "mapper_classifier/knn_embed.hpp"
#include "mapper_classifier/mapper.hpp"
#include "mapper_classifier/mlp.hpp"
#include "mapper_classifier/noise.hpp"
#include "mapper_classifier/parallel.hpp"
#include "mapper_classifier/pipeline.hpp"
#include "mapper_classifier/robustness.hpp"
