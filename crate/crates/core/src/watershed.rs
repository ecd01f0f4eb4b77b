//! Marker-controlled watershed of a field map.
//!
//! The field is thresholded at `background_epsilon` to get the background
//! mask, inverted on the foreground (`g = 1 - u`), and its h-minima become
//! markers. Markers are then flooded in order of increasing `g`, confined to
//! the foreground, so every foreground pixel ends up in exactly one basin.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::grid::{Connectivity, FieldMap, Mask, Raster, Segmentation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WatershedParams {
    /// Pixels with a field value below this are background.
    pub background_epsilon: f64,
    /// Minimum depth of a surviving minimum of the inverted field.
    pub h: f64,
    pub connectivity: Connectivity,
}

impl Default for WatershedParams {
    fn default() -> Self {
        WatershedParams {
            background_epsilon: 0.05,
            h: 0.30,
            connectivity: Connectivity::Eight,
        }
    }
}

impl WatershedParams {
    pub fn validate(&self) -> Result<()> {
        let eps = self.background_epsilon;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter {
                name: "background_epsilon",
                value: eps,
                expected: "a value in (0, 1)",
            });
        }
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "h",
                value: self.h,
                expected: "a value in (0, 1]",
            });
        }
        Ok(())
    }
}

/// Watershed seeds: `0` unmarked, `k ≥ 1` marker id.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSet {
    pub markers: Raster<u32>,
    pub count: usize,
}

/// `true` exactly where `field < eps`.
pub fn background_mask(field: &FieldMap, eps: f64) -> Mask {
    field.map(|&v| v < eps)
}

/// Min-heap entry ordered by `(key, seq)`, seq giving FIFO order on ties.
#[derive(Debug, Clone, Copy)]
struct Entry {
    key: f64,
    seq: u64,
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Queue {
    heap: BinaryHeap<Entry>,
    seq: u64,
}

impl Queue {
    fn new() -> Self {
        Queue {
            heap: BinaryHeap::new(),
            seq: 0,
        }
    }

    fn push(&mut self, key: f64, index: usize) {
        self.heap.push(Entry {
            key,
            seq: self.seq,
            index,
        });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Entry> {
        self.heap.pop()
    }
}

fn neighbors(
    width: usize,
    height: usize,
    index: usize,
    connectivity: Connectivity,
) -> impl Iterator<Item = usize> {
    let (x, y) = ((index % width) as isize, (index / width) as isize);
    connectivity.offsets().iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        (nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height)
            .then(|| ny as usize * width + nx as usize)
    })
}

/// Grayscale reconstruction by erosion of `marker` over `mask` on the
/// foreground graph (`marker ≥ mask` pointwise).
///
/// Computes, for every foreground pixel, the smallest value reachable as
/// `max(marker(start), mask along the path)`, which is the geodesic erosion
/// iterated to stability.
fn reconstruct_by_erosion(
    marker: &[f64],
    mask: &[f64],
    foreground: &[bool],
    width: usize,
    height: usize,
    connectivity: Connectivity,
) -> Vec<f64> {
    let mut out = marker.to_vec();
    let mut done = vec![false; marker.len()];
    let mut queue = Queue::new();
    for (i, &fg) in foreground.iter().enumerate() {
        if fg {
            queue.push(out[i], i);
        }
    }
    while let Some(Entry { key, index, .. }) = queue.pop() {
        if done[index] || key > out[index] {
            continue;
        }
        done[index] = true;
        for n in neighbors(width, height, index, connectivity) {
            if !foreground[n] || done[n] {
                continue;
            }
            let candidate = key.max(mask[n]);
            if candidate < out[n] {
                out[n] = candidate;
                queue.push(candidate, n);
            }
        }
    }
    out
}

/// h-minima markers of the inverted foreground field `1 - field`.
///
/// The inverted field raised by `h` is reconstructed by erosion over the
/// inverted field; the regional minima of the result are the minima of depth
/// at least `h` (plateaus count once). Each connected minimum becomes one
/// marker, numbered in raster discovery order.
pub fn hminima_markers(
    field: &FieldMap,
    background: &Mask,
    h: f64,
    connectivity: Connectivity,
) -> Result<MarkerSet> {
    field.ensure_same_dims(background)?;
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            expected: "a value in (0, 1]",
        });
    }
    let (w, ht) = field.dims();
    let foreground: Vec<bool> = background.data().iter().map(|b| !b).collect();
    let inverted: Vec<f64> = field.data().iter().map(|v| 1.0 - v).collect();
    let raised: Vec<f64> = inverted.iter().map(|v| v + h).collect();
    let recon = reconstruct_by_erosion(&raised, &inverted, &foreground, w, ht, connectivity);
    let (markers, count) = regional_minima(&recon, &foreground, w, ht, connectivity);
    Ok(MarkerSet {
        markers: Raster::new(w, ht, markers)?,
        count,
    })
}

/// Labels plateaus of equal value with no strictly lower foreground neighbor.
/// Plateaus are discovered from their first pixel in raster order.
fn regional_minima(
    values: &[f64],
    foreground: &[bool],
    width: usize,
    height: usize,
    connectivity: Connectivity,
) -> (Vec<u32>, usize) {
    let mut labels = vec![0u32; values.len()];
    let mut visited = vec![false; values.len()];
    let mut plateau = Vec::new();
    let mut stack = Vec::new();
    let mut count = 0u32;
    for start in 0..values.len() {
        if !foreground[start] || visited[start] {
            continue;
        }
        let level = values[start];
        let mut is_minimum = true;
        plateau.clear();
        visited[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            plateau.push(i);
            for n in neighbors(width, height, i, connectivity) {
                if !foreground[n] {
                    continue;
                }
                if values[n] < level {
                    is_minimum = false;
                } else if values[n] == level && !visited[n] {
                    visited[n] = true;
                    stack.push(n);
                }
            }
        }
        if is_minimum {
            count += 1;
            for &i in &plateau {
                labels[i] = count;
            }
        }
    }
    (labels, count as usize)
}

/// Priority flood of the inverted field from the markers, confined to the
/// foreground. A pixel joins the basin that reaches it first; ties in level
/// are served first-in first-out.
pub fn flood(
    field: &FieldMap,
    markers: &MarkerSet,
    background: &Mask,
    connectivity: Connectivity,
) -> Result<Segmentation> {
    field.ensure_same_dims(background)?;
    field.ensure_same_dims(&markers.markers)?;
    let (w, h) = field.dims();
    let bg = background.data();
    let mut labels = vec![0u32; w * h];
    let mut queue = Queue::new();
    for (i, &m) in markers.markers.data().iter().enumerate() {
        if m != 0 && !bg[i] {
            labels[i] = m;
            queue.push(1.0 - field.data()[i], i);
        }
    }
    while let Some(Entry { key, index, .. }) = queue.pop() {
        let id = labels[index];
        for n in neighbors(w, h, index, connectivity) {
            if bg[n] || labels[n] != 0 {
                continue;
            }
            labels[n] = id;
            queue.push(key.max(1.0 - field.data()[n]), n);
        }
    }
    // foreground unreachable from any marker stays unlabeled; fold it into
    // the background so the segmentation stays a partition
    let background = Raster::new(w, h, labels.iter().map(|&l| l == 0).collect())?;
    Segmentation::new(Raster::new(w, h, labels)?, background)
}

/// Threshold, invert, h-minima, flood.
pub fn segment(field: &FieldMap, params: &WatershedParams) -> Result<Segmentation> {
    params.validate()?;
    let background = background_mask(field, params.background_epsilon);
    let markers = hminima_markers(field, &background, params.h, params.connectivity)?;
    flood(field, &markers, &background, params.connectivity)
}
