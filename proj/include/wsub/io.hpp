#pragma once

#include "wsub/measures.hpp"

#include <iosfwd>
#include <string>

namespace wsub {

// CSV formats (numbers printed with 17 significant digits):
//   grid 1D      x,mass          one row per cell center
//   grid 2D      x1,x2,mass      axis-0 major
//   point cloud  x1,...,xd,weight

void write_grid_csv(std::ostream& os, const GridMeasure1D& mu);
void write_grid_csv(std::ostream& os, const GridMeasure2D& mu);
void write_cloud_csv(std::ostream& os, const PointCloud& cloud);

/// Throws ParseError (with the 1-based line) on malformed rows, non-uniform
/// centers, negative masses or a total that is not 1 within 1e-6.
GridMeasure1D read_grid_csv(std::istream& is);
GridMeasure2D read_grid2d_csv(std::istream& is);
PointCloud read_cloud_csv(std::istream& is);

void save(const std::string& path, const GridMeasure1D& mu);
void save(const std::string& path, const GridMeasure2D& mu);
void save(const std::string& path, const PointCloud& cloud);
GridMeasure1D load_grid(const std::string& path);
GridMeasure2D load_grid2d(const std::string& path);
PointCloud load_cloud(const std::string& path);

/// "%.17g"
std::string format_double(double v);

}  // namespace wsub
