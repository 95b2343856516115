use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{exit_code, thread_pool, EvalArgs, EXIT_OK};
use crate::error::{Error, Result};
use crate::ingest::{list_rasters, load_class_map, ClassScores, EvalAccumulator};

pub const REPORT_TEXT: &str = "eval_report.txt";
pub const REPORT_JSON: &str = "eval_report.json";

/// Dataset-level scores as written to [`REPORT_JSON`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub images: usize,
    pub classes: Vec<ClassScores>,
    /// Means over the classes that are not absent.
    pub mean_iou: f64,
    pub mean_f1: f64,
}

impl EvalReport {
    pub fn new(acc: &EvalAccumulator) -> Self {
        let classes = acc.scores();
        let present: Vec<_> = classes.iter().filter(|c| !c.absent).collect();
        let mean = |f: fn(&ClassScores) -> f64| {
            if present.is_empty() {
                0.0
            } else {
                present.iter().map(|c| f(c)).sum::<f64>() / present.len() as f64
            }
        };
        Self {
            images: acc.images(),
            mean_iou: mean(|c| c.iou),
            mean_f1: mean(|c| c.f1),
            classes,
        }
    }

    /// Fixed-width table with scores in percent.
    pub fn table(&self) -> String {
        let width = self
            .classes
            .iter()
            .map(|c| c.class_name.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:>7}  {:>7}  {:>12}  {:>12}  {:>12}",
            "class", "IoU", "F1", "tp", "fp", "fn"
        );
        for c in &self.classes {
            let _ = write!(
                s,
                "{:<width$}  {:>7.2}  {:>7.2}  {:>12}  {:>12}  {:>12}",
                c.class_name,
                100.0 * c.iou,
                100.0 * c.f1,
                c.tp,
                c.fp,
                c.fn_
            );
            if c.absent {
                s.push_str("  (absent)");
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "{:<width$}  {:>7.2}  {:>7.2}  ({} images)",
            "mean",
            100.0 * self.mean_iou,
            100.0 * self.mean_f1,
            self.images
        );
        s
    }
}

pub fn cmd_eval(args: &EvalArgs) -> i32 {
    match eval(args) {
        Ok(report) => {
            print!("{}", report.table());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn missing(path: &Path) -> Error {
    Error::Io(io::Error::new(
        io::ErrorKind::NotFound,
        format!("{} not found", path.display()),
    ))
}

/// `(prediction, reference)` paths; directories must hold the same file names.
fn matched_files(pred: &Path, gt: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    for p in [pred, gt] {
        if !p.exists() {
            return Err(missing(p));
        }
    }
    if pred.is_file() && gt.is_file() {
        return Ok(vec![(pred.to_path_buf(), gt.to_path_buf())]);
    }
    if !(pred.is_dir() && gt.is_dir()) {
        return Err(Error::InvalidValue(
            "--pred and --gt must both be files or both be directories".into(),
        ));
    }
    let gts = list_rasters(gt)?;
    for p in list_rasters(pred)? {
        let counterpart = gt.join(p.file_name().expect("listed files have names"));
        if !gts.contains(&counterpart) {
            return Err(missing(&counterpart));
        }
    }
    gts.into_iter()
        .map(|g| {
            let p = pred.join(g.file_name().expect("listed files have names"));
            if p.is_file() {
                Ok((p, g))
            } else {
                Err(missing(&p))
            }
        })
        .collect()
}

fn eval(args: &EvalArgs) -> Result<EvalReport> {
    if args.classes.iter().any(|c| c.trim().is_empty()) {
        return Err(Error::Config("empty class name in --classes".into()));
    }
    let files = matched_files(&args.pred, &args.gt)?;
    let classes = args.classes.clone();
    let pool = thread_pool(args.workers)?;
    let acc = pool.install(|| {
        files
            .par_iter()
            .map(|(p, g)| {
                let mut acc = EvalAccumulator::new(classes.clone());
                acc.add(&load_class_map(p)?, &load_class_map(g)?)?;
                Ok(acc)
            })
            .try_reduce(
                || EvalAccumulator::new(classes.clone()),
                EvalAccumulator::merge,
            )
    })?;
    let report = EvalReport::new(&acc);

    let out_dir = match &args.out {
        Some(d) => d.clone(),
        None if args.pred.is_dir() => args.pred.clone(),
        None => args
            .pred
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join(REPORT_TEXT), report.table())?;
    let json = serde_json::to_string_pretty(&report).map_err(io::Error::from)?;
    fs::write(out_dir.join(REPORT_JSON), json + "\n")?;
    Ok(report)
}
