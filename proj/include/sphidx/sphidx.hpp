#pragma once

#include "sphidx/grid.hpp"
#include "sphidx/cell_geometry.hpp"
#include "sphidx/offset_table.hpp"
#include "sphidx/sphere_tables.hpp"
#include "sphidx/table_cache.hpp"
#include "sphidx/object_store.hpp"
#include "sphidx/query.hpp"
