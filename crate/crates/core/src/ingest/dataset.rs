//! Raster I/O and discovery of bi-temporal pairs on disk.
//!
//! A dataset root holds `A/` (first temporal), `B/` (second temporal) and an
//! optional `label/`, with matching file names across them. A
//! `manifest.toml` at the root replaces that convention:
//!
//! ```toml
//! [[pairs]]
//! id = "tile_001"
//! t1 = "2019/tile_001.png"
//! t2 = "2021/tile_001.png"
//! label = "gt/tile_001.png"   # optional
//! ```
//!
//! Relative manifest paths resolve against the root.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, GrayImage};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{ClassMap, Raster};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const RASTER_EXTENSION: &str = "png";

/// 8-bit raster; grayscale files load with one channel, everything else is
/// converted to RGB.
pub fn load_raster(path: &Path) -> Result<Raster> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img.color() {
        ColorType::L8 | ColorType::L16 | ColorType::La8 | ColorType::La16 => {
            Raster::new(h, w, 1, img.to_luma8().into_raw())
        }
        _ => Raster::new(h, w, 3, img.to_rgb8().into_raw()),
    }
}

/// Single-channel 8-bit raster of class indices.
pub fn load_class_map(path: &Path) -> Result<ClassMap> {
    let img = open(path)?;
    if img.color() != ColorType::L8 {
        return Err(Error::InvalidRaster(format!(
            "{}: class maps must be 8-bit single-channel, found {:?}",
            path.display(),
            img.color()
        )));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    ClassMap::from_data(h, w, img.into_luma8().into_raw())
}

pub fn save_class_map(map: &ClassMap, path: &Path) -> Result<()> {
    let img = GrayImage::from_raw(map.width() as u32, map.height() as u32, map.data().to_vec())
        .ok_or_else(|| Error::InvalidRaster("class map buffer does not match its extent".into()))?;
    img.save(path)?;
    Ok(())
}

pub fn save_raster(raster: &Raster, path: &Path) -> Result<()> {
    let (w, h) = (raster.width() as u32, raster.height() as u32);
    let data = raster.data().to_vec();
    let img = if raster.channels() == 1 {
        GrayImage::from_raw(w, h, data).map(DynamicImage::ImageLuma8)
    } else {
        image::RgbImage::from_raw(w, h, data).map(DynamicImage::ImageRgb8)
    };
    img.ok_or_else(|| Error::InvalidRaster("raster buffer does not match its extent".into()))?
        .save(path)?;
    Ok(())
}

fn open(path: &Path) -> Result<DynamicImage> {
    if !path.is_file() {
        return Err(Error::Io(io::Error::new(
            io::ErrorKind::NotFound,
            format!("{} not found", path.display()),
        )));
    }
    Ok(image::open(path)?)
}

/// Paths of one bi-temporal pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSource {
    pub pair_id: String,
    pub t1: PathBuf,
    pub t2: PathBuf,
    pub label: Option<PathBuf>,
}

/// Sorted `.png` files directly under `dir`.
pub fn list_rasters(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let is_raster = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case(RASTER_EXTENSION));
        if path.is_file() && is_raster {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::InvalidValue(format!("no usable file name in {}", path.display())))
}

fn not_found(path: &Path) -> Error {
    Error::Io(io::Error::new(
        io::ErrorKind::NotFound,
        format!("{} not found", path.display()),
    ))
}

/// Pairs from two files, or from two directories matched by file name.
pub fn discover_pairs(t1: &Path, t2: &Path) -> Result<Vec<PairSource>> {
    for p in [t1, t2] {
        if !p.exists() {
            return Err(not_found(p));
        }
    }
    match (t1.is_dir(), t2.is_dir()) {
        (false, false) => Ok(vec![PairSource {
            pair_id: stem(t1)?,
            t1: t1.to_path_buf(),
            t2: t2.to_path_buf(),
            label: None,
        }]),
        (true, true) => {
            let mut out = Vec::new();
            for a in list_rasters(t1)? {
                let name = a.file_name().expect("listed files have names");
                let b = t2.join(name);
                if !b.is_file() {
                    return Err(not_found(&b));
                }
                out.push(PairSource {
                    pair_id: stem(&a)?,
                    t1: a,
                    t2: b,
                    label: None,
                });
            }
            Ok(out)
        }
        _ => Err(Error::InvalidValue(
            "t1 and t2 must both be files or both be directories".into(),
        )),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    pairs: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    id: String,
    t1: PathBuf,
    t2: PathBuf,
    label: Option<PathBuf>,
}

/// Pairs of a dataset root, from its manifest when present and from the
/// `A/`, `B/`, `label/` layout otherwise.
pub fn load_dataset(root: &Path) -> Result<Vec<PairSource>> {
    let manifest = root.join(MANIFEST_FILE);
    if manifest.is_file() {
        let text = fs::read_to_string(&manifest)?;
        let m: Manifest = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", manifest.display())))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { root.join(p) };
        let mut out = Vec::with_capacity(m.pairs.len());
        for e in m.pairs {
            if out.iter().any(|p: &PairSource| p.pair_id == e.id) {
                return Err(Error::Config(format!(
                    "duplicate pair id `{}` in manifest",
                    e.id
                )));
            }
            out.push(PairSource {
                pair_id: e.id,
                t1: resolve(e.t1),
                t2: resolve(e.t2),
                label: e.label.map(resolve),
            });
        }
        return Ok(out);
    }

    let mut pairs = discover_pairs(&root.join("A"), &root.join("B"))?;
    let labels = root.join("label");
    if labels.is_dir() {
        for p in &mut pairs {
            let l = labels.join(p.t1.file_name().expect("listed files have names"));
            if !l.is_file() {
                return Err(not_found(&l));
            }
            p.label = Some(l);
        }
    }
    Ok(pairs)
}

/// True when `dir` looks like a dataset root rather than a plain image folder.
pub fn is_dataset_root(dir: &Path) -> bool {
    dir.join(MANIFEST_FILE).is_file() || (dir.join("A").is_dir() && dir.join("B").is_dir())
}
