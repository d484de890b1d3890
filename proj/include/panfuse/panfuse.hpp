#pragma once

// Depth-driven instance mask refinement and panoptic TSDF fusion.

#include "panfuse/bandwidth.hpp"
#include "panfuse/camera.hpp"
#include "panfuse/color.hpp"
#include "panfuse/dataset.hpp"
#include "panfuse/depth_fill.hpp"
#include "panfuse/eval.hpp"
#include "panfuse/frame.hpp"
#include "panfuse/grid.hpp"
#include "panfuse/image.hpp"
#include "panfuse/kde.hpp"
#include "panfuse/map_io.hpp"
#include "panfuse/mask.hpp"
#include "panfuse/png_io.hpp"
#include "panfuse/refine.hpp"
#include "panfuse/synthetic.hpp"
#include "panfuse/voxel_map.hpp"
