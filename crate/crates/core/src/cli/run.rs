use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use super::{exit_code, thread_pool, RunArgs, RunConfig, EXIT_OK};
use crate::components::{BackendContext, Components, Registry};
use crate::error::{Error, Result};
use crate::geometry::{encode_rle, RleMask};
use crate::ingest::{
    discover_pairs, is_dataset_root, load_dataset, load_raster, save_class_map, PairSource,
};
use crate::model::{BBox, BiTemporalPair, ClassMap};
use crate::pipeline::run_tiled;

/// One line of a `<pair_id>.jsonl` instance file.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct InstanceRecord {
    pub pair_id: String,
    pub class: String,
    pub change_score: f64,
    pub bbox: BBox,
    pub rle: RleMask,
}

pub fn cmd_run(args: &RunArgs, registry: &Registry) -> i32 {
    match run(args, registry) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run(args: &RunArgs, registry: &Registry) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.pipeline.seed = seed;
    }
    let components = Components::from_config(
        &cfg.pipeline,
        registry,
        &BackendContext::from_env(cfg.pipeline.seed),
    )?;
    let pairs = match &args.t2 {
        Some(t2) => discover_pairs(&args.t1, t2)?,
        None if is_dataset_root(&args.t1) => load_dataset(&args.t1)?,
        None => {
            return Err(Error::Config(
                "--t2 is required unless --t1 is a dataset root".into(),
            ))
        }
    };
    if pairs.is_empty() {
        log::warn!("no image pairs found under {}", args.t1.display());
    }

    let created_out = !args.out.exists();
    fs::create_dir_all(&args.out)?;
    let workers = if components.requires_serial_access() {
        Some(1)
    } else {
        args.workers
    };
    let pool = thread_pool(workers)?;
    let written = Mutex::new(Vec::new());
    let outcome = pool.install(|| {
        pairs
            .par_iter()
            .try_for_each(|p| process_pair(p, &cfg, &components, &args.out, &written))
    });
    if let Err(e) = outcome {
        remove_outputs(
            &written.into_inner().unwrap_or_default(),
            created_out,
            &args.out,
        );
        return Err(e);
    }
    Ok(())
}

fn process_pair(
    source: &PairSource,
    cfg: &RunConfig,
    components: &Components,
    out: &Path,
    written: &Mutex<Vec<PathBuf>>,
) -> Result<()> {
    let pair = BiTemporalPair::new(
        &source.pair_id,
        load_raster(&source.t1)?,
        load_raster(&source.t2)?,
    )?;
    let vocab = &cfg.vocabulary;
    let mut combined = ClassMap::zeros(pair.height(), pair.width());
    let mut records = Vec::new();
    let mut conflicts = 0usize;

    for (ci, class) in vocab.foreground.iter().enumerate() {
        let single = vocab.single_class(ci)?;
        let result = run_tiled(&pair, &single, &cfg.pipeline, components)?;
        let index = (ci + 1) as u8;
        for (dst, &src) in combined.data_mut().iter_mut().zip(result.class_map.data()) {
            if src == 0 {
                continue;
            }
            if *dst == 0 {
                *dst = index;
            } else {
                conflicts += 1;
            }
        }
        for inst in result.instances.iter() {
            records.push(InstanceRecord {
                pair_id: source.pair_id.clone(),
                class: class.name.clone(),
                change_score: inst.change_score().unwrap_or(0.0),
                bbox: inst.bbox(),
                rle: encode_rle(inst.mask()),
            });
        }
    }
    if conflicts > 0 {
        log::warn!(
            "{}: {conflicts} pixels claimed by more than one class kept their first label",
            source.pair_id
        );
    }
    log::info!("{}: {} changed instances", source.pair_id, records.len());

    let map_path = out.join(format!("{}.png", source.pair_id));
    let jsonl_path = out.join(format!("{}.jsonl", source.pair_id));
    {
        let mut w = written.lock().expect("output list lock");
        w.push(map_path.clone());
        w.push(jsonl_path.clone());
    }
    save_class_map(&combined, &map_path)?;
    let mut f = BufWriter::new(fs::File::create(&jsonl_path)?);
    for r in &records {
        serde_json::to_writer(&mut f, r).map_err(std::io::Error::from)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

fn remove_outputs(paths: &[PathBuf], created_out: bool, out: &Path) {
    for p in paths {
        if p.exists() {
            if let Err(e) = fs::remove_file(p) {
                log::warn!("could not remove partial output {}: {e}", p.display());
            }
        }
    }
    if created_out {
        // only succeeds when nothing else was put there
        let _ = fs::remove_dir(out);
    }
}
