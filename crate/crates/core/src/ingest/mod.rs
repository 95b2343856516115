//! Dataset ingestion, tiling and the per-class evaluation harness.

mod dataset;
mod eval;
mod tiling;

pub use dataset::{
    discover_pairs, is_dataset_root, list_rasters, load_class_map, load_dataset, load_raster,
    save_class_map, save_raster, PairSource, MANIFEST_FILE, RASTER_EXTENSION,
};
pub use eval::{confusion, evaluate, ClassScores, ConfusionCounts, EvalAccumulator};
pub use tiling::{stitch, stitch_instances, tile, tile_class_map, TileGrid, TilePosition};
