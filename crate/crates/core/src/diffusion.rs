//! Diffusion fields: unit heat injected at each cell's source pixel every
//! step, then spread by a 3×3 average masked to the cell.
//!
//! When several pixels tie for the source (a centroid coordinate ending in
//! exactly .5, see [`Region::source_pixels`]) the unit is split evenly among
//! them, which keeps the field equivariant under flips and rotations.
//!
//! Cells never exchange heat, so each one is iterated on its own until the
//! ℓ₂ change of its values drops below the convergence threshold, then
//! frozen. Updates are synchronous within a cell.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{extract_regions, FieldMap, LabelImage, Region};
use crate::poisson::paint_normalized;
use crate::{Error, Result};

/// How the masked 3×3 average treats neighbors outside the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryRule {
    /// Outside neighbors contribute zero and the divisor stays 9. Heat
    /// leaks at the border, which balances the injection and gives a true
    /// fixed point. Its normalized profile decays like a discrete Green's
    /// function, so the rim of a cell wider than a few pixels drops below
    /// typical background thresholds.
    LeakyDenominator9,
    /// Average over in-cell neighbors only (zero flux). Raw values grow
    /// without bound, so convergence is judged on `u / max(u)`.
    #[default]
    Renormalized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionConfig {
    pub convergence_epsilon: f64,
    pub max_iterations: usize,
    pub boundary_rule: BoundaryRule,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            convergence_epsilon: 0.01,
            max_iterations: 100_000,
            boundary_rule: BoundaryRule::Renormalized,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.convergence_epsilon > 0.0 && self.convergence_epsilon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "convergence_epsilon",
                value: self.convergence_epsilon,
                expected: "a positive finite value",
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                value: 0.0,
                expected: "at least 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDiffusion {
    pub instance_id: u32,
    pub iterations: usize,
    pub converged: bool,
    /// ℓ₂ change of the last step taken.
    pub last_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiffusionReport {
    pub instances: Vec<InstanceDiffusion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionField {
    /// Each cell scaled to a maximum of 1.
    pub field: FieldMap,
    /// Values at convergence, before scaling.
    pub raw: FieldMap,
    pub report: DiffusionReport,
}

/// Precomputed in-cell 3×3 neighborhoods of one cell.
struct CellStencil {
    neighbors: Vec<u32>,
    spans: Vec<u32>,
    sources: Vec<usize>,
    rule: BoundaryRule,
}

impl CellStencil {
    fn new(region: &Region, rule: BoundaryRule) -> Self {
        let index = region.local_index();
        let mut neighbors = Vec::with_capacity(region.area() * 9);
        let mut spans = Vec::with_capacity(region.area() + 1);
        spans.push(0);
        for &p in region.pixels() {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(j) = index.offset(p, (dx, dy)) {
                        neighbors.push(j as u32);
                    }
                }
            }
            spans.push(neighbors.len() as u32);
        }
        let sources = region
            .source_pixels()
            .iter()
            .map(|&p| region.position(p).expect("source pixel lies in its region"))
            .collect();
        CellStencil {
            neighbors,
            spans,
            sources,
            rule,
        }
    }

    /// One inject-then-average step from `current` into `next`.
    fn step(&self, current: &[f64], half: &mut [f64], next: &mut [f64]) {
        half.copy_from_slice(current);
        let share = 1.0 / self.sources.len() as f64;
        for &s in &self.sources {
            half[s] += share;
        }
        for (i, out) in next.iter_mut().enumerate() {
            let span = self.spans[i] as usize..self.spans[i + 1] as usize;
            let sum: f64 = self.neighbors[span.clone()]
                .iter()
                .map(|&j| half[j as usize])
                .sum();
            let denom = match self.rule {
                BoundaryRule::LeakyDenominator9 => 9.0,
                BoundaryRule::Renormalized => span.len() as f64,
            };
            *out = sum / denom;
        }
    }

    fn delta(&self, before: &[f64], after: &[f64]) -> f64 {
        match self.rule {
            BoundaryRule::LeakyDenominator9 => l2_distance(before, after, 1.0, 1.0),
            BoundaryRule::Renormalized => {
                let scale = |v: &[f64]| {
                    let m = v.iter().copied().fold(0.0, f64::max);
                    if m > 0.0 {
                        1.0 / m
                    } else {
                        0.0
                    }
                };
                l2_distance(before, after, scale(before), scale(after))
            }
        }
    }
}

fn l2_distance(a: &[f64], b: &[f64], sa: f64, sb: f64) -> f64 {
    libm::sqrt(
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let d = y * sb - x * sa;
                d * d
            })
            .sum(),
    )
}

/// One synchronous step for each of `regions`: add 1 at the source pixel
/// (split evenly over tied source pixels), then replace every cell pixel by its masked 3×3 average. Pixels outside
/// the given regions are copied unchanged.
pub fn diffusion_step(
    field: &FieldMap,
    regions: &[Region],
    config: &DiffusionConfig,
) -> Result<FieldMap> {
    let mut out = field.clone();
    for region in regions {
        let bbox = region.bounding_box();
        if bbox.x1 >= field.width() || bbox.y1 >= field.height() {
            return Err(Error::DimensionMismatch {
                expected: field.dims(),
                found: (bbox.x1 + 1, bbox.y1 + 1),
            });
        }
        let stencil = CellStencil::new(region, config.boundary_rule);
        let current: Vec<f64> = region
            .pixels()
            .iter()
            .map(|p| *field.get(p.x, p.y))
            .collect();
        let mut half = vec![0.0; current.len()];
        let mut next = vec![0.0; current.len()];
        stencil.step(&current, &mut half, &mut next);
        for (p, v) in region.pixels().iter().zip(next) {
            out.set(p.x, p.y, v);
        }
    }
    Ok(out)
}

/// Iterates one cell from zero until its change drops below the threshold.
fn diffuse_cell(region: &Region, config: &DiffusionConfig) -> (Vec<f64>, InstanceDiffusion) {
    let stencil = CellStencil::new(region, config.boundary_rule);
    let n = region.area();
    let mut current = vec![0.0; n];
    let mut half = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut last_delta = f64::INFINITY;
    for t in 1..=config.max_iterations {
        stencil.step(&current, &mut half, &mut next);
        last_delta = stencil.delta(&current, &next);
        core::mem::swap(&mut current, &mut next);
        if last_delta < config.convergence_epsilon {
            return (
                current,
                InstanceDiffusion {
                    instance_id: region.instance_id(),
                    iterations: t,
                    converged: true,
                    last_delta,
                },
            );
        }
    }
    (
        current,
        InstanceDiffusion {
            instance_id: region.instance_id(),
            iterations: config.max_iterations,
            converged: false,
            last_delta,
        },
    )
}

/// Diffusion field of every cell, normalized per cell to a maximum of 1.
///
/// Fails with [`Error::NotConverged`] if any cell is still changing after
/// `max_iterations` steps.
pub fn run_diffusion(labels: &LabelImage, config: &DiffusionConfig) -> Result<DiffusionField> {
    config.validate()?;
    let regions = extract_regions(labels)?;
    let mut raw = FieldMap::filled(labels.width(), labels.height(), 0.0);
    let mut field = raw.clone();
    let mut report = DiffusionReport::default();
    let mut stuck = Vec::new();
    for region in &regions {
        let (values, stats) = diffuse_cell(region, config);
        if !stats.converged {
            stuck.push((stats.instance_id, stats.last_delta));
        }
        for (p, &v) in region.pixels().iter().zip(&values) {
            raw.set(p.x, p.y, v);
        }
        if stuck.is_empty() {
            paint_normalized(&mut field, region, &values)?;
        }
        report.instances.push(stats);
    }
    if !stuck.is_empty() {
        return Err(Error::NotConverged {
            max_iterations: config.max_iterations,
            instances: stuck,
        });
    }
    Ok(DiffusionField { field, raw, report })
}
