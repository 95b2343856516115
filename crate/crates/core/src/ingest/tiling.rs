//! Non-overlapping tiling of large pairs and stitching of per-tile results.

use crate::error::{Error, Result};
use crate::model::{BiTemporalPair, BinaryMask, ClassMap, InstanceMask, MaskSet, MaskSource};

/// Row-major grid of `tile_size` squares covering an image, zero-padded at
/// the bottom and right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    pub tile_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub pad_bottom: usize,
    pub pad_right: usize,
}

impl TileGrid {
    pub fn new(height: usize, width: usize, tile_size: usize) -> Result<Self> {
        if tile_size == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidValue(format!(
                "cannot tile {height}x{width} with size {tile_size}"
            )));
        }
        let rows = height.div_ceil(tile_size);
        let cols = width.div_ceil(tile_size);
        Ok(Self {
            tile_size,
            rows,
            cols,
            pad_bottom: rows * tile_size - height,
            pad_right: cols * tile_size - width,
        })
    }

    /// Unpadded image height.
    pub fn height(&self) -> usize {
        self.rows * self.tile_size - self.pad_bottom
    }

    pub fn width(&self) -> usize {
        self.cols * self.tile_size - self.pad_right
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tile positions in row-major order.
    pub fn positions(&self) -> impl Iterator<Item = TilePosition> + '_ {
        (0..self.rows).flat_map(move |row| (0..self.cols).map(move |col| TilePosition { row, col }))
    }

    /// Top-left pixel of the tile at `pos`.
    pub fn origin(&self, pos: TilePosition) -> (usize, usize) {
        (pos.col * self.tile_size, pos.row * self.tile_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TilePosition {
    pub row: usize,
    pub col: usize,
}

/// Splits a pair into row-major tiles; each tile's id is
/// `<pair_id>_r<row>_c<col>`.
pub fn tile(
    pair: &BiTemporalPair,
    tile_size: usize,
) -> Result<(Vec<(BiTemporalPair, TilePosition)>, TileGrid)> {
    let grid = TileGrid::new(pair.height(), pair.width(), tile_size)?;
    let tiles = grid
        .positions()
        .map(|pos| {
            let (x0, y0) = grid.origin(pos);
            let tile = BiTemporalPair {
                pair_id: format!("{}_r{}_c{}", pair.pair_id, pos.row, pos.col),
                image_t1: pair.image_t1.window(x0, y0, tile_size),
                image_t2: pair.image_t2.window(x0, y0, tile_size),
            };
            (tile, pos)
        })
        .collect();
    Ok((tiles, grid))
}

/// Splits a class map along `grid`, zero-padding like [`tile`].
pub fn tile_class_map(map: &ClassMap, grid: &TileGrid) -> Result<Vec<(ClassMap, TilePosition)>> {
    if map.height() != grid.height() || map.width() != grid.width() {
        return Err(Error::ShapeMismatch(format!(
            "class map is {}x{}, grid covers {}x{}",
            map.height(),
            map.width(),
            grid.height(),
            grid.width()
        )));
    }
    Ok(grid
        .positions()
        .map(|pos| {
            let (x0, y0) = grid.origin(pos);
            (map.window(x0, y0, grid.tile_size), pos)
        })
        .collect())
}

fn check_position(grid: &TileGrid, pos: TilePosition, seen: &mut [bool]) -> Result<()> {
    if pos.row >= grid.rows || pos.col >= grid.cols {
        return Err(Error::InvalidValue(format!(
            "tile ({}, {}) lies outside a {}x{} grid",
            pos.row, pos.col, grid.rows, grid.cols
        )));
    }
    let slot = &mut seen[pos.row * grid.cols + pos.col];
    if *slot {
        return Err(Error::InvalidValue(format!(
            "tile ({}, {}) given twice",
            pos.row, pos.col
        )));
    }
    *slot = true;
    Ok(())
}

fn check_complete(grid: &TileGrid, seen: &[bool]) -> Result<()> {
    match seen.iter().position(|s| !s) {
        Some(i) => Err(Error::MissingTile {
            row: i / grid.cols,
            col: i % grid.cols,
        }),
        None => Ok(()),
    }
}

/// Reassembles per-tile class maps and crops the padding away.
pub fn stitch(results: &[(ClassMap, TilePosition)], grid: &TileGrid) -> Result<ClassMap> {
    let s = grid.tile_size;
    let mut seen = vec![false; grid.len()];
    let mut out = ClassMap::zeros(grid.height(), grid.width());
    for (map, pos) in results {
        check_position(grid, *pos, &mut seen)?;
        if map.height() != s || map.width() != s {
            return Err(Error::ShapeMismatch(format!(
                "tile ({}, {}) is {}x{}, expected {s}x{s}",
                pos.row,
                pos.col,
                map.height(),
                map.width()
            )));
        }
        let (x0, y0) = grid.origin(*pos);
        for y in 0..s.min(out.height() - y0) {
            for x in 0..s.min(out.width() - x0) {
                out.set(x0 + x, y0 + y, map.get(x, y));
            }
        }
    }
    check_complete(grid, &seen)?;
    Ok(out)
}

/// Moves per-tile instances into full-image coordinates. Instances lying
/// entirely in the padding are dropped.
pub fn stitch_instances(tiles: &[(MaskSet, TilePosition)], grid: &TileGrid) -> Result<MaskSet> {
    let (h, w) = (grid.height(), grid.width());
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    for (set, pos) in tiles {
        check_position(grid, *pos, &mut seen)?;
        let (x0, y0) = grid.origin(*pos);
        for inst in set.iter() {
            let mut mask = BinaryMask::new(h, w);
            for (x, y) in inst.mask().foreground() {
                if x0 + x < w && y0 + y < h {
                    mask.set(x0 + x, y0 + y, true);
                }
            }
            if mask.area() == 0 {
                continue;
            }
            let mut moved = InstanceMask::new(mask, inst.quality(), inst.temporal())?;
            if let Some(label) = inst.class_label() {
                moved = moved.with_class_label(label);
            }
            if let Some(score) = inst.change_score() {
                moved = moved.with_change_score(score)?;
            }
            out.push(moved);
        }
    }
    check_complete(grid, &seen)?;
    Ok(MaskSet::new(out, MaskSource::Final))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Raster;

    fn pair(h: usize, w: usize) -> BiTemporalPair {
        let data: Vec<u8> = (0..h * w).map(|i| (i % 251) as u8 + 1).collect();
        let a = Raster::new(h, w, 1, data.clone()).unwrap();
        let b = Raster::new(h, w, 1, data.iter().map(|v| 255 - v).collect()).unwrap();
        BiTemporalPair::new("p", a, b).unwrap()
    }

    #[test]
    fn exact_fit_is_one_tile() {
        let (tiles, grid) = tile(&pair(256, 256), 256).unwrap();
        assert_eq!(tiles.len(), 1);
        assert_eq!((grid.pad_bottom, grid.pad_right), (0, 0));
        assert_eq!(tiles[0].0.image_t1, pair(256, 256).image_t1);
    }

    #[test]
    fn four_tiles_row_major() {
        let (tiles, _) = tile(&pair(512, 512), 256).unwrap();
        let pos: Vec<_> = tiles.iter().map(|(_, p)| (p.row, p.col)).collect();
        assert_eq!(pos, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(tiles[1].0.pair_id, "p_r0_c1");
    }

    #[test]
    fn padding_arithmetic() {
        let (tiles, grid) = tile(&pair(300, 300), 256).unwrap();
        assert_eq!(tiles.len(), 4);
        assert_eq!((grid.pad_bottom, grid.pad_right), (212, 212));
        // padded area is zero
        assert_eq!(tiles[3].0.image_t1.pixel(100, 100), &[0]);
        assert_ne!(tiles[3].0.image_t1.pixel(10, 10), &[0]);
    }

    #[test]
    fn stitch_inverts_tile() {
        let map = ClassMap::from_data(7, 5, (0..35).map(|i| i as u8).collect()).unwrap();
        let grid = TileGrid::new(7, 5, 3).unwrap();
        let tiles = tile_class_map(&map, &grid).unwrap();
        assert_eq!(stitch(&tiles, &grid).unwrap(), map);
    }

    #[test]
    fn missing_tile_is_reported() {
        let map = ClassMap::zeros(4, 4);
        let grid = TileGrid::new(4, 4, 2).unwrap();
        let mut tiles = tile_class_map(&map, &grid).unwrap();
        tiles.remove(2);
        assert!(matches!(
            stitch(&tiles, &grid),
            Err(Error::MissingTile { row: 1, col: 0 })
        ));
    }

    #[test]
    fn instances_are_shifted_and_cropped() {
        let grid = TileGrid::new(5, 5, 4).unwrap();
        let tile_mask = BinaryMask::from_fn(4, 4, |x, y| x < 2 && y < 2);
        let padded_only = BinaryMask::from_fn(4, 4, |x, y| x == 3 && y == 3);
        let inst = |m: BinaryMask| {
            InstanceMask::new(m, 1.0, crate::model::Temporal::T2)
                .unwrap()
                .with_class_label("b")
        };
        let empty = || MaskSet::empty(MaskSource::Final);
        let tiles = vec![
            (empty(), TilePosition { row: 0, col: 0 }),
            (empty(), TilePosition { row: 0, col: 1 }),
            (empty(), TilePosition { row: 1, col: 0 }),
            (
                MaskSet::new(vec![inst(tile_mask), inst(padded_only)], MaskSource::Final),
                TilePosition { row: 1, col: 1 },
            ),
        ];
        let out = stitch_instances(&tiles, &grid).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.masks[0].area(), 1);
        assert!(out.masks[0].mask().get(4, 4));
        assert_eq!(out.masks[0].class_label(), Some("b"));
    }
}
