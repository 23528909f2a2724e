//! Planar geometry on the pixel grid: polygons, hulls, calipers,
//! rasterization and boundary tracing.

mod hull;
mod polygon;
mod raster;
mod trace;

pub use hull::{convex_hull, edge_distance, ring_area, rotating_calipers, Calipers};
pub use polygon::{orient, Point, Polygon};
pub use raster::{rasterize, Mask};
pub use trace::{components, fill_holes, trace_outer};
