//! Framework dispatch and tiled execution.

use rayon::prelude::*;

use crate::components::Components;
use crate::error::Result;
use crate::imc::run_imc;
use crate::ingest::{stitch, stitch_instances, tile};
use crate::mci::run_mci;
use crate::model::{BiTemporalPair, ChangeResult, Framework, PipelineConfig, Vocabulary};

/// Runs the configured framework on the whole pair.
pub fn run_pipeline(
    pair: &BiTemporalPair,
    vocabulary: &Vocabulary,
    cfg: &PipelineConfig,
    components: &Components,
) -> Result<ChangeResult> {
    match cfg.framework {
        Framework::Mci => run_mci(pair, vocabulary, cfg, components),
        Framework::Imc => run_imc(pair, vocabulary, cfg, components),
    }
}

/// Runs the configured framework per tile when `cfg.tile_size` is set and
/// stitches the results; otherwise the same as [`run_pipeline`].
pub fn run_tiled(
    pair: &BiTemporalPair,
    vocabulary: &Vocabulary,
    cfg: &PipelineConfig,
    components: &Components,
) -> Result<ChangeResult> {
    let Some(size) = cfg.tile_size else {
        return run_pipeline(pair, vocabulary, cfg, components);
    };
    let (tiles, grid) = tile(pair, size)?;
    let run = |(t, pos): &(BiTemporalPair, _)| {
        run_pipeline(t, vocabulary, cfg, components).map(|r| (r, *pos))
    };
    let results: Vec<_> = if components.requires_serial_access() {
        tiles.iter().map(run).collect::<Result<_>>()?
    } else {
        tiles.par_iter().map(run).collect::<Result<_>>()?
    };
    let maps: Vec<_> = results
        .iter()
        .map(|(r, p)| (r.class_map.clone(), *p))
        .collect();
    let sets: Vec<_> = results.into_iter().map(|(r, p)| (r.instances, p)).collect();
    Ok(ChangeResult {
        class_map: stitch(&maps, &grid)?,
        instances: stitch_instances(&sets, &grid)?.sorted(),
    })
}
