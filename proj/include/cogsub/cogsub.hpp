#pragma once

// Umbrella header.

#include "cogsub/classifiers/classifier.hpp"
#include "cogsub/classifiers/cross_validation.hpp"
#include "cogsub/cohort.hpp"
#include "cogsub/common.hpp"
#include "cogsub/embedding.hpp"
#include "cogsub/evaluation.hpp"
#include "cogsub/pipeline.hpp"
#include "cogsub/profile.hpp"
#include "cogsub/segmentation.hpp"
#include "cogsub/selection.hpp"
#include "cogsub/statistics.hpp"
