//! Directory-level steps: synth, fields, segment, eval, and the pipeline
//! that chains them.
//!
//! Files are processed in parallel and results are gathered in file-name
//! order, so outputs do not depend on scheduling. A file that fails is
//! recorded in the [`Summary`] and does not stop the others.

use std::ffi::OsStr;
use std::path::{Path, PathBuf};

use cellfield_core::diffusion::{run_diffusion, DiffusionConfig};
use cellfield_core::edt::edt_field_map;
use cellfield_core::grid::extract_regions;
use cellfield_core::metrics::{aggregate, evaluate, MetricsReport};
use cellfield_core::poisson::{poisson_field_map, PoissonConfig};
use cellfield_core::synth::{generate, SynthSpec};
use cellfield_core::watershed::{segment, WatershedParams};
use cellfield_core::{Connectivity, FieldMap, LabelImage, Segmentation};
use rayon::prelude::*;

use crate::error::{AtPath, Error, Result};
use crate::fmap;
use crate::raster_io::{self, write_atomic};
use crate::report::{fields_csv, metrics_csv, InstanceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Poisson,
    Diffusion,
    Edt,
}

#[derive(Debug, Clone, Default)]
pub struct FieldOptions {
    pub method: Method,
    pub poisson: PoissonConfig,
    pub diffusion: DiffusionConfig,
}

impl FieldOptions {
    pub fn new(method: Method) -> Self {
        FieldOptions {
            method,
            ..FieldOptions::default()
        }
    }
}

/// What a batch step did. `failures` holds one error per file that could not
/// be processed; the step as a whole succeeded only if it is empty.
#[derive(Debug, Default)]
pub struct Summary {
    pub processed: usize,
    pub warnings: Vec<String>,
    pub failures: Vec<Error>,
}

impl Summary {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }

    fn absorb(&mut self, other: Summary) {
        self.processed += other.processed;
        self.warnings.extend(other.warnings);
        self.failures.extend(other.failures);
    }
}

/// Field map of `labels` by the chosen method, with per-instance diagnostics.
pub fn compute_field(
    labels: &LabelImage,
    options: &FieldOptions,
) -> cellfield_core::Result<(FieldMap, Vec<InstanceRecord>)> {
    let regions = extract_regions(labels)?;
    let mut records: Vec<InstanceRecord> = regions
        .iter()
        .map(|r| InstanceRecord {
            instance_id: r.instance_id(),
            area: r.area(),
            max_residual: None,
            iterations: None,
            has_holes: r.has_holes(),
        })
        .collect();
    let field = match options.method {
        Method::Poisson => {
            let out = poisson_field_map(labels, &options.poisson)?;
            for (rec, rep) in records.iter_mut().zip(&out.reports) {
                rec.max_residual = Some(rep.max_residual);
            }
            out.field
        }
        Method::Diffusion => {
            let out = run_diffusion(labels, &options.diffusion)?;
            for (rec, inst) in records.iter_mut().zip(&out.report.instances) {
                rec.iterations = Some(inst.iterations);
            }
            out.field
        }
        Method::Edt => edt_field_map(labels)?,
    };
    Ok((field, records))
}

/// Files in `dir` with extension `ext`, sorted by name.
pub fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        if path.is_file() && path.extension() == Some(OsStr::new(ext)) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).at(dir)
}

fn empty_warning(dir: &Path, ext: &str) -> String {
    format!("no .{ext} files in {}", dir.display())
}

/// Writes `count` generated images as `images/NNNN.png` (8-bit) and
/// `labels/NNNN.png` (16-bit) under `out_dir`. Image `i` uses
/// `spec.for_image(i)`.
pub fn synth(spec: &SynthSpec, count: usize, out_dir: &Path) -> Result<Summary> {
    spec.validate().at(out_dir)?;
    let images = out_dir.join("images");
    let labels = out_dir.join("labels");
    create_dir(&images)?;
    create_dir(&labels)?;
    let results: Vec<Result<()>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let name = format!("{i:04}.png");
            let label_path = labels.join(&name);
            let img = generate(&spec.for_image(i as u64)).at(&label_path)?;
            raster_io::write_labels(&label_path, &img.labels)?;
            raster_io::write_gray(&images.join(&name), &img.image)
        })
        .collect();
    Ok(collect(results))
}

fn collect(results: Vec<Result<()>>) -> Summary {
    let mut summary = Summary::default();
    for r in results {
        match r {
            Ok(()) => summary.processed += 1,
            Err(e) => summary.failures.push(e),
        }
    }
    summary
}

/// One FMAP per label PNG in `labels_dir`, named after it, plus
/// `report.csv` with per-instance residuals or iteration counts. With
/// `viz`, 8-bit previews go to `viz/` under `out_dir`.
pub fn fields(
    labels_dir: &Path,
    out_dir: &Path,
    options: &FieldOptions,
    viz: bool,
) -> Result<Summary> {
    options.diffusion.validate().at(labels_dir)?;
    let inputs = list_files(labels_dir, "png")?;
    create_dir(out_dir)?;
    let viz_dir = out_dir.join("viz");
    if viz {
        create_dir(&viz_dir)?;
    }
    let mut summary = Summary::default();
    if inputs.is_empty() {
        summary.warnings.push(empty_warning(labels_dir, "png"));
    }
    let results: Vec<Result<(Vec<InstanceRecord>, Vec<String>)>> = inputs
        .par_iter()
        .map(|path| {
            let mut warnings = Vec::new();
            let raw = raster_io::read_labels(path)?;
            let labels = raw.compacted();
            if labels != raw {
                warnings.push(format!(
                    "{}: instance ids are not 1..n; renumbered for the solve",
                    path.display()
                ));
            }
            let (field, records) = compute_field(&labels, options).at(path)?;
            let split: Vec<String> = extract_regions(&labels)
                .at(path)?
                .iter()
                .filter(|r| !r.is_connected(Connectivity::Four))
                .map(|r| r.instance_id().to_string())
                .collect();
            if !split.is_empty() {
                warnings.push(format!(
                    "{}: instances not 4-connected: {}",
                    path.display(),
                    split.join(", ")
                ));
            }
            let name = stem(path);
            fmap::write(&out_dir.join(format!("{name}.fmap")), &field)?;
            if viz {
                let preview = raster_io::field_preview(&field);
                raster_io::write_gray(&viz_dir.join(format!("{name}.png")), &preview)?;
            }
            Ok((records, warnings))
        })
        .collect();
    let mut rows = Vec::new();
    for (path, result) in inputs.iter().zip(results) {
        match result {
            Ok((records, warnings)) => {
                summary.processed += 1;
                summary.warnings.extend(warnings);
                rows.push((file_name(path), records));
            }
            Err(e) => summary.failures.push(e),
        }
    }
    write_atomic(&out_dir.join("report.csv"), &fields_csv(&rows))?;
    Ok(summary)
}

/// One 16-bit instance PNG per FMAP in `fields_dir`. With `viz`, colored
/// previews go to `viz/` under `out_dir`.
pub fn segment_dir(
    fields_dir: &Path,
    out_dir: &Path,
    params: &WatershedParams,
    viz: bool,
) -> Result<Summary> {
    params.validate().at(fields_dir)?;
    let inputs = list_files(fields_dir, "fmap")?;
    create_dir(out_dir)?;
    let viz_dir = out_dir.join("viz");
    if viz {
        create_dir(&viz_dir)?;
    }
    let results: Vec<Result<()>> = inputs
        .par_iter()
        .map(|path| {
            let field = fmap::read(path)?;
            let labels = segment(&field, params).at(path)?.into_label_image();
            let name = stem(path);
            raster_io::write_labels(&out_dir.join(format!("{name}.png")), &labels)?;
            if viz {
                let preview = raster_io::encode_label_preview(&labels);
                write_atomic(&viz_dir.join(format!("{name}.png")), &preview)?;
            }
            Ok(())
        })
        .collect();
    let mut summary = collect(results);
    if inputs.is_empty() {
        summary.warnings.push(empty_warning(fields_dir, "fmap"));
    }
    Ok(summary)
}

#[derive(Debug)]
pub struct Evaluation {
    /// Per image, by file name.
    pub rows: Vec<(String, MetricsReport)>,
    pub mean: MetricsReport,
    pub summary: Summary,
}

impl Evaluation {
    pub fn to_csv(&self) -> Vec<u8> {
        metrics_csv(&self.rows)
    }
}

/// Scores every prediction PNG in `pred_dir` against the same-named
/// ground-truth PNG in `gt_dir`. File names must match one to one.
pub fn eval(gt_dir: &Path, pred_dir: &Path) -> Result<Evaluation> {
    let gt = list_files(gt_dir, "png")?;
    let pred = list_files(pred_dir, "png")?;
    let gt_names: Vec<String> = gt.iter().map(|p| file_name(p)).collect();
    let pred_names: Vec<String> = pred.iter().map(|p| file_name(p)).collect();
    if gt_names != pred_names {
        let only = |a: &[String], b: &[String]| -> Vec<String> {
            a.iter().filter(|n| !b.contains(n)).cloned().collect()
        };
        return Err(Error::Orphans {
            left: gt_dir.to_owned(),
            right: pred_dir.to_owned(),
            only_left: only(&gt_names, &pred_names),
            only_right: only(&pred_names, &gt_names),
        });
    }
    let results: Vec<Result<MetricsReport>> = gt
        .par_iter()
        .zip(&pred)
        .map(|(g, p)| {
            let truth = raster_io::read_labels(g)?;
            let guess = raster_io::read_labels(p)?;
            let guess = Segmentation::from_instance_map(guess.into_raster());
            evaluate(&truth, &guess).at(p)
        })
        .collect();
    let mut summary = Summary::default();
    let mut rows = Vec::new();
    for (name, r) in gt_names.into_iter().zip(results) {
        match r {
            Ok(report) => {
                summary.processed += 1;
                rows.push((name, report));
            }
            Err(e) => summary.failures.push(e),
        }
    }
    if rows.is_empty() && summary.failures.is_empty() {
        summary.warnings.push(empty_warning(gt_dir, "png"));
    }
    let mean = aggregate(&rows.iter().map(|(_, r)| r.clone()).collect::<Vec<_>>());
    Ok(Evaluation {
        rows,
        mean,
        summary,
    })
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub synth: SynthSpec,
    pub n_images: usize,
    pub fields: FieldOptions,
    pub watershed: WatershedParams,
    pub viz: bool,
}

/// synth → fields → segment → eval under `out_dir`:
/// `images/`, `labels/`, `fields/`, `segments/` and `metrics.csv`.
pub fn pipeline(options: &PipelineOptions, out_dir: &Path) -> Result<(Evaluation, Summary)> {
    let mut summary = synth(&options.synth, options.n_images, out_dir)?;
    let fields_dir = out_dir.join("fields");
    let segments_dir = out_dir.join("segments");
    summary.absorb(fields(
        &out_dir.join("labels"),
        &fields_dir,
        &options.fields,
        options.viz,
    )?);
    summary.absorb(segment_dir(
        &fields_dir,
        &segments_dir,
        &options.watershed,
        options.viz,
    )?);
    let mut evaluation = eval(&out_dir.join("labels"), &segments_dir)?;
    write_atomic(&out_dir.join("metrics.csv"), &evaluation.to_csv())?;
    summary.absorb(std::mem::take(&mut evaluation.summary));
    Ok((evaluation, summary))
}
