//! Poisson potential fields.
//!
//! Every cell is treated as a membrane clamped just outside its pixels and
//! loaded uniformly: the five-point Laplacian restricted to the cell gives
//! `A·u = -1`, with out-of-cell neighbors held at zero. `-A` is symmetric
//! positive definite, so each system is factored directly and the solution is
//! strictly positive inside the cell.

use alloc::vec::Vec;

use crate::grid::{extract_regions, Connectivity, FieldMap, LabelImage, Region};
use crate::sparse::{conjugate_gradient, CsrMatrix, EnvelopeCholesky};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStrategy {
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonConfig {
    /// Cells with more unknowns than this use conjugate gradients. `None`
    /// always factors directly.
    pub iterative_threshold: Option<usize>,
    /// Relative residual target for conjugate gradients.
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        PoissonConfig {
            iterative_threshold: None,
            cg_tolerance: 1e-10,
            cg_max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolveReport {
    pub instance_id: u32,
    pub unknowns: usize,
    /// `‖A·u + 1‖∞` after substituting the solution.
    pub max_residual: f64,
    pub strategy: SolveStrategy,
    /// Set for cells enclosing background; hole pixels are clamped to zero
    /// like the rest of the outside.
    pub has_holes: bool,
}

/// The discrete Laplacian of one cell over its pixels, in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianSystem {
    matrix: CsrMatrix,
    rhs: Vec<f64>,
}

impl LaplacianSystem {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Non-zeros of row `i` as `(column, value)`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.matrix.row(i)
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// `A·u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(u)
    }

    /// `‖A·u - rhs‖∞`.
    pub fn max_residual(&self, u: &[f64]) -> f64 {
        self.apply(u)
            .iter()
            .zip(&self.rhs)
            .map(|(au, b)| libm::fabs(au - b))
            .fold(0.0, f64::max)
    }

    fn negated(&self) -> CsrMatrix {
        CsrMatrix::from_rows(
            (0..self.dim())
                .map(|i| self.row(i).map(|(c, v)| (c, -v)).collect())
                .collect(),
        )
    }
}

/// Row `x`: `-4` on the diagonal, `+1` per 4-neighbor inside the cell,
/// right-hand side `-1`.
pub fn assemble_laplacian(region: &Region) -> LaplacianSystem {
    let index = region.local_index();
    let rows = region
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut row = Vec::with_capacity(5);
            row.push((i, -4.0));
            for &off in Connectivity::Four.offsets() {
                if let Some(j) = index.offset(p, off) {
                    row.push((j, 1.0));
                }
            }
            row
        })
        .collect();
    LaplacianSystem {
        matrix: CsrMatrix::from_rows(rows),
        rhs: alloc::vec![-1.0; region.area()],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    /// Raw potential in [`Region::pixels`] order.
    pub values: Vec<f64>,
    pub report: PoissonSolveReport,
}

pub fn solve_poisson(region: &Region, config: &PoissonConfig) -> Result<PoissonSolution> {
    let system = assemble_laplacian(region);
    let n = system.dim();
    let ones = alloc::vec![1.0; n];
    let iterative = config.iterative_threshold.is_some_and(|t| n > t);
    let values = if iterative {
        let outcome = conjugate_gradient(
            &system.negated(),
            &ones,
            config.cg_tolerance,
            config.cg_max_iterations,
        );
        if !outcome.converged {
            return Err(Error::SolverFailure {
                instance_id: region.instance_id(),
                reason: "conjugate gradients hit the iteration cap",
            });
        }
        outcome.solution
    } else {
        EnvelopeCholesky::factor(&system.negated())
            .map_err(|_| Error::SolverFailure {
                instance_id: region.instance_id(),
                reason: "matrix is not positive definite",
            })?
            .solve(&ones)
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverFailure {
            instance_id: region.instance_id(),
            reason: "non-finite solution",
        });
    }
    let report = PoissonSolveReport {
        instance_id: region.instance_id(),
        unknowns: n,
        max_residual: system.max_residual(&values),
        strategy: if iterative {
            SolveStrategy::Iterative
        } else {
            SolveStrategy::Direct
        },
        has_holes: region.has_holes(),
    };
    Ok(PoissonSolution { values, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonField {
    pub field: FieldMap,
    /// One per instance, by id.
    pub reports: Vec<PoissonSolveReport>,
}

/// Solves every cell independently and scales each to a maximum of 1.
pub fn poisson_field_map(labels: &LabelImage, config: &PoissonConfig) -> Result<PoissonField> {
    let regions = extract_regions(labels)?;
    let mut field = FieldMap::filled(labels.width(), labels.height(), 0.0);
    let mut reports = Vec::with_capacity(regions.len());
    for region in &regions {
        let solution = solve_poisson(region, config)?;
        paint_normalized(&mut field, region, &solution.values)?;
        reports.push(solution.report);
    }
    Ok(PoissonField { field, reports })
}

/// Writes `values / max(values)` onto the region's pixels.
pub(crate) fn paint_normalized(
    field: &mut FieldMap,
    region: &Region,
    values: &[f64],
) -> Result<()> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::DegenerateField {
            instance_id: region.instance_id(),
        });
    }
    for (p, v) in region.pixels().iter().zip(values) {
        field.set(p.x, p.y, v / max);
    }
    Ok(())
}
