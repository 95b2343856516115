//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use ovcd::cli::RunConfig;
use ovcd::components::{BackendContext, Components, Registry};
use ovcd::ingest::save_raster;
use ovcd::model::{BBox, BiTemporalPair, ClassMap, Raster};

pub const GRASS: [u8; 3] = [20, 200, 20];
pub const BUILDING: [u8; 3] = [230, 230, 230];
/// Just below the identifier's building range, feature-wise close to BUILDING.
pub const PALE_BUILDING: [u8; 3] = [195, 195, 195];
pub const RED: [u8; 3] = [230, 20, 20];

pub const SIZE: usize = 64;
pub const PLANTED: BBox = BBox {
    x_min: 24,
    y_min: 16,
    x_max: 40,
    y_max: 32,
};

pub const MCI_TOML: &str = include_str!("../../configs/mci_synthetic.toml");
pub const IMC_TOML: &str = include_str!("../../configs/imc_synthetic.toml");

pub fn mci_config() -> RunConfig {
    RunConfig::from_toml(MCI_TOML).unwrap()
}

pub fn imc_config() -> RunConfig {
    RunConfig::from_toml(IMC_TOML).unwrap()
}

pub fn components(cfg: &RunConfig) -> Components {
    Components::from_config(
        &cfg.pipeline,
        &Registry::with_builtin(),
        &BackendContext::new(cfg.pipeline.seed),
    )
    .unwrap()
}

pub fn grass(h: usize, w: usize) -> Raster {
    Raster::filled(h, w, &GRASS).unwrap()
}

/// Grass at t1, one building at `PLANTED` at t2.
pub fn planted_pair() -> BiTemporalPair {
    let t1 = grass(SIZE, SIZE);
    let t2 = t1.with_rect(PLANTED, &BUILDING).unwrap();
    BiTemporalPair::new("planted", t1, t2).unwrap()
}

pub fn identical_pair() -> BiTemporalPair {
    let img = grass(SIZE, SIZE)
        .with_rect(PLANTED, &BUILDING)
        .unwrap()
        .with_rect(BBox::new(0, 40, 16, 56), &RED)
        .unwrap();
    BiTemporalPair::new("identical", img.clone(), img).unwrap()
}

pub fn footprint(h: usize, w: usize, rects: &[(BBox, u8)]) -> ClassMap {
    let mut m = ClassMap::zeros(h, w);
    for &(r, v) in rects {
        for y in r.y_min..r.y_max {
            for x in r.x_min..r.x_max {
                m.set(x, y, v);
            }
        }
    }
    m
}

/// Writes `pairs` as `A/<id>.png`, `B/<id>.png` under `root`.
pub fn write_pairs(root: &Path, pairs: &[BiTemporalPair]) {
    for sub in ["A", "B"] {
        std::fs::create_dir_all(root.join(sub)).unwrap();
    }
    for p in pairs {
        save_raster(
            &p.image_t1,
            &root.join("A").join(format!("{}.png", p.pair_id)),
        )
        .unwrap();
        save_raster(
            &p.image_t2,
            &root.join("B").join(format!("{}.png", p.pair_id)),
        )
        .unwrap();
    }
}

/// A handful of 64x64 pairs: appearances, disappearances, distractors.
pub fn fixture_suite() -> Vec<BiTemporalPair> {
    let base = grass(SIZE, SIZE);
    let two = base
        .with_rect(BBox::new(8, 8, 24, 24), &BUILDING)
        .unwrap()
        .with_rect(BBox::new(40, 40, 56, 56), &BUILDING)
        .unwrap();
    let gone = base.with_rect(BBox::new(8, 40, 32, 56), &BUILDING).unwrap();
    let red = base.with_rect(BBox::new(32, 8, 48, 24), &RED).unwrap();
    vec![
        planted_pair(),
        identical_pair(),
        BiTemporalPair::new("appear_two", base.clone(), two).unwrap(),
        BiTemporalPair::new("disappear", gone, base.clone()).unwrap(),
        BiTemporalPair::new("distractor", base, red).unwrap(),
    ]
}
