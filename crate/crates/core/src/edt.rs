//! Exact Euclidean distance transform fields.
//!
//! Each in-cell pixel gets the distance to the nearest pixel center outside
//! its cell. Pixels of other cells and virtual pixels beyond the image border
//! count as outside, so touching cells meet in a valley.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{extract_regions, FieldMap, LabelImage, Region};
use crate::Result;

const INF: f64 = f64::INFINITY;

/// Squared distance to the outside for every pixel of `region`, in
/// [`Region::pixels`] order.
///
/// Runs the separable lower-envelope transform on the bounding box padded by
/// one pixel. The padding ring is entirely outside the region, and clamping
/// any farther outside pixel onto the padded box never increases its
/// distance, so restricting the search to the padded box is exact.
pub fn region_squared_distances(region: &Region) -> Vec<f64> {
    let bbox = region.bounding_box();
    let w = bbox.width() + 2;
    let h = bbox.height() + 2;
    let mut grid = vec![0.0; w * h];
    for p in region.pixels() {
        grid[(p.y - bbox.y0 + 1) * w + (p.x - bbox.x0 + 1)] = INF;
    }
    squared_distance_transform(&mut grid, w, h);
    region
        .pixels()
        .iter()
        .map(|p| grid[(p.y - bbox.y0 + 1) * w + (p.x - bbox.x0 + 1)])
        .collect()
}

/// In-place 2D squared distance transform of a sampled function
/// (`0` on features, `INF` elsewhere): columns first, then rows.
pub fn squared_distance_transform(grid: &mut [f64], width: usize, height: usize) {
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        lower_envelope(&f[..height], &mut d[..height], &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = d[y];
        }
    }
    for y in 0..height {
        let row = &mut grid[y * width..(y + 1) * width];
        f[..width].copy_from_slice(row);
        lower_envelope(&f[..width], &mut d[..width], &mut v, &mut z);
        row.copy_from_slice(&d[..width]);
    }
}

/// 1D squared distance transform: `d[q] = min_p (q - p)² + f[p]`.
fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    // First finite sample anchors the envelope; an all-INF line stays INF.
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        d.fill(INF);
        return;
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = -INF;
    z[1] = INF;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        loop {
            let p = v[k];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                // k == 0 can't happen: z[0] is -INF
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = INF;
                break;
            }
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}

/// Raw (unnormalized) Euclidean distances for every cell; background is 0.
pub fn edt_distance_map(labels: &LabelImage) -> Result<FieldMap> {
    let regions = extract_regions(labels)?;
    let mut field = FieldMap::filled(labels.width(), labels.height(), 0.0);
    for region in &regions {
        for (p, d2) in region.pixels().iter().zip(region_squared_distances(region)) {
            field.set(p.x, p.y, libm::sqrt(d2));
        }
    }
    Ok(field)
}

/// Distance field with every cell scaled to a maximum of exactly 1.
pub fn edt_field_map(labels: &LabelImage) -> Result<FieldMap> {
    let regions = extract_regions(labels)?;
    let mut field = FieldMap::filled(labels.width(), labels.height(), 0.0);
    for region in &regions {
        let dist: Vec<f64> = region_squared_distances(region)
            .into_iter()
            .map(libm::sqrt)
            .collect();
        // every in-cell pixel is at least 1 from the outside
        let max = dist.iter().copied().fold(0.0, f64::max);
        for (p, d) in region.pixels().iter().zip(dist) {
            field.set(p.x, p.y, d / max);
        }
    }
    Ok(field)
}
