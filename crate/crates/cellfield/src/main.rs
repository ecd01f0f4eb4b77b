use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use cellfield::commands::{self, FieldOptions, Method, PipelineOptions, Summary};
use cellfield_core::diffusion::{BoundaryRule, DiffusionConfig};
use cellfield_core::synth::{ShapeKind, SynthSpec};
use cellfield_core::watershed::WatershedParams;
use cellfield_core::Connectivity;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Field-map cell segmentation: generate synthetic data, compute Poisson,
/// diffusion or distance fields, segment them by h-minima watershed, and
/// score the result.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic images/NNNN.png and labels/NNNN.png
    Synth {
        out: PathBuf,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Compute one FMAP field per label PNG
    Fields {
        labels: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        field: FieldArgs,
        /// Also write 8-bit previews to OUT/viz
        #[arg(long)]
        viz: bool,
    },
    /// Segment every FMAP into a 16-bit instance PNG
    Segment {
        fields: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        watershed: WatershedArgs,
        /// Also write colored previews to OUT/viz
        #[arg(long)]
        viz: bool,
    },
    /// Score predicted instance PNGs against same-named ground truth
    Eval {
        gt: PathBuf,
        pred: PathBuf,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// synth, fields, segment and eval in one go, all under OUT
    Pipeline {
        out: PathBuf,
        #[command(flatten)]
        synth: SynthArgs,
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        watershed: WatershedArgs,
        #[arg(long)]
        viz: bool,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    n_images: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    /// Instances per image
    #[arg(long, default_value_t = 8)]
    n_instances: usize,
    #[arg(long, value_enum, default_value_t = Shape::Mixed)]
    shape: Shape,
    #[arg(long, default_value_t = 5.0)]
    radius_min: f64,
    #[arg(long, default_value_t = 12.0)]
    radius_max: f64,
    /// Background pixels kept between instances not placed touching
    #[arg(long, default_value_t = 2)]
    min_gap: usize,
    #[arg(long, default_value_t = 0.0)]
    touching_fraction: f64,
    /// Standard deviation of the image noise, as a fraction of full range
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
}

impl SynthArgs {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            width: self.width,
            height: self.height,
            n_instances: self.n_instances,
            shape_kind: match self.shape {
                Shape::Disk => ShapeKind::Disk,
                Shape::Ellipse => ShapeKind::Ellipse,
                Shape::Blob => ShapeKind::Blob,
                Shape::Mixed => ShapeKind::Mixed,
            },
            radius_range: (self.radius_min, self.radius_max),
            min_gap: self.min_gap,
            touching_fraction: self.touching_fraction,
            noise_amplitude: self.noise,
            ..SynthSpec::default()
        }
    }
}

#[derive(Args)]
struct FieldArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Poisson)]
    method: MethodArg,
    /// Diffusion stops once a cell's ℓ₂ change drops below this
    #[arg(long, default_value_t = 0.01)]
    diffusion_eps: f64,
    #[arg(long, value_enum, default_value_t = Rule::Renormalized)]
    boundary_rule: Rule,
    /// Solve Poisson cells larger than this iteratively instead of directly
    #[arg(long)]
    iterative_above: Option<usize>,
}

impl FieldArgs {
    fn options(&self) -> FieldOptions {
        let mut o = FieldOptions::new(match self.method {
            MethodArg::Poisson => Method::Poisson,
            MethodArg::Diffusion => Method::Diffusion,
            MethodArg::Edt => Method::Edt,
        });
        o.poisson.iterative_threshold = self.iterative_above;
        o.diffusion = DiffusionConfig {
            convergence_epsilon: self.diffusion_eps,
            boundary_rule: match self.boundary_rule {
                Rule::Leaky => BoundaryRule::LeakyDenominator9,
                Rule::Renormalized => BoundaryRule::Renormalized,
            },
            ..DiffusionConfig::default()
        };
        o
    }
}

#[derive(Args)]
struct WatershedArgs {
    /// Field values below this are background
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Minimum depth of a surviving minimum
    #[arg(long, default_value_t = 0.30)]
    h: f64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u8).range(4..=8))]
    connectivity: u8,
}

impl WatershedArgs {
    fn params(&self) -> anyhow::Result<WatershedParams> {
        Ok(WatershedParams {
            background_epsilon: self.epsilon,
            h: self.h,
            connectivity: Connectivity::try_from(self.connectivity)?,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Disk,
    Ellipse,
    Blob,
    Mixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Poisson,
    Diffusion,
    Edt,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Leaky,
    Renormalized,
}

fn report(what: &str, summary: &Summary) -> bool {
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    for e in &summary.failures {
        eprintln!("error: {e}");
    }
    eprintln!(
        "{what}: {} ok, {} failed",
        summary.processed,
        summary.failures.len()
    );
    summary.is_success()
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    Ok(match cli.command {
        Command::Synth { out, synth } => {
            let s = commands::synth(&synth.spec(), synth.n_images, &out)?;
            report("synth", &s)
        }
        Command::Fields {
            labels,
            out,
            field,
            viz,
        } => {
            let s = commands::fields(&labels, &out, &field.options(), viz)?;
            report("fields", &s)
        }
        Command::Segment {
            fields,
            out,
            watershed,
            viz,
        } => {
            let s = commands::segment_dir(&fields, &out, &watershed.params()?, viz)?;
            report("segment", &s)
        }
        Command::Eval { gt, pred, out } => {
            let e = commands::eval(&gt, &pred)?;
            let csv = e.to_csv();
            match out {
                Some(path) => cellfield::raster_io::write_atomic(&path, &csv)?,
                None => {
                    use std::io::Write;
                    std::io::stdout()
                        .write_all(&csv)
                        .context("writing CSV to stdout")?;
                }
            }
            report("eval", &e.summary)
        }
        Command::Pipeline {
            out,
            synth,
            field,
            watershed,
            viz,
        } => {
            let options = PipelineOptions {
                synth: synth.spec(),
                n_images: synth.n_images,
                fields: field.options(),
                watershed: watershed.params()?,
                viz,
            };
            let (e, s) = commands::pipeline(&options, &out)?;
            eprintln!(
                "mean pq {:.4} sq {:.4} rq {:.4} iou {:.4}",
                e.mean.pq, e.mean.sq, e.mean.rq, e.mean.mean_iou
            );
            report("pipeline", &s)
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
