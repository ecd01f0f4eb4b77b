//! Rasters, instance regions and connectivity.
//!
//! All rasters are row-major with `(x, y)` addressing, `x` along the row.

use alloc::vec;
use alloc::vec::Vec;

use crate::{edt, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub x: usize,
    pub y: usize,
}

impl Point {
    pub const fn new(x: usize, y: usize) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Connectivity {
    Four,
    Eight,
}

const OFFSETS_4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
const OFFSETS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

impl Connectivity {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &OFFSETS_4,
            Connectivity::Eight => &OFFSETS_8,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::InvalidConnectivity(other)),
        }
    }
}

/// A dense row-major raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Scalar field over the image domain. Ground-truth fields lie in `[0, 1]`.
pub type FieldMap = Raster<f64>;

/// Boolean raster, `true` marks membership.
pub type Mask = Raster<bool>;

impl<T> Raster<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(data.len()) {
            return Err(Error::InvalidDimensions {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Raster {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self
    where
        T: Clone,
    {
        assert!(width > 0 && height > 0, "raster sides must be positive");
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn point(&self, index: usize) -> Point {
        Point::new(index % self.width, index / self.width)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.index(x, y);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Neighbor of `(x, y)` at `offset`, if inside the raster.
    #[inline]
    pub fn neighbor(&self, x: usize, y: usize, offset: (isize, isize)) -> Option<(usize, usize)> {
        let nx = x.checked_add_signed(offset.0)?;
        let ny = y.checked_add_signed(offset.1)?;
        (nx < self.width && ny < self.height).then_some((nx, ny))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn ensure_same_dims<U>(&self, other: &Raster<U>) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }

    pub fn transformed(&self, symmetry: Symmetry) -> Raster<T>
    where
        T: Clone,
    {
        let (w, h) = symmetry.output_dims(self.width, self.height);
        let mut out: Vec<Option<T>> = vec![None; w * h];
        for y in 0..self.height {
            for x in 0..self.width {
                let (tx, ty) = symmetry.apply(x, y, self.width, self.height);
                out[ty * w + tx] = Some(self.get(x, y).clone());
            }
        }
        Raster {
            width: w,
            height: h,
            data: out.into_iter().map(|v| v.expect("bijection")).collect(),
        }
    }
}

/// The eight symmetries of the square grid (dihedral group of order 8).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetry {
    Identity,
    Rotate90,
    Rotate180,
    Rotate270,
    FlipHorizontal,
    FlipVertical,
    Transpose,
    AntiTranspose,
}

impl Symmetry {
    pub const ALL: [Symmetry; 8] = [
        Symmetry::Identity,
        Symmetry::Rotate90,
        Symmetry::Rotate180,
        Symmetry::Rotate270,
        Symmetry::FlipHorizontal,
        Symmetry::FlipVertical,
        Symmetry::Transpose,
        Symmetry::AntiTranspose,
    ];

    pub fn output_dims(self, width: usize, height: usize) -> (usize, usize) {
        match self {
            Symmetry::Identity
            | Symmetry::Rotate180
            | Symmetry::FlipHorizontal
            | Symmetry::FlipVertical => (width, height),
            _ => (height, width),
        }
    }

    /// Image of pixel `(x, y)` of a `width × height` raster.
    pub fn apply(self, x: usize, y: usize, width: usize, height: usize) -> (usize, usize) {
        let (xm, ym) = (width - 1 - x, height - 1 - y);
        match self {
            Symmetry::Identity => (x, y),
            // clockwise
            Symmetry::Rotate90 => (ym, x),
            Symmetry::Rotate180 => (xm, ym),
            Symmetry::Rotate270 => (y, xm),
            Symmetry::FlipHorizontal => (xm, y),
            Symmetry::FlipVertical => (x, ym),
            Symmetry::Transpose => (y, x),
            Symmetry::AntiTranspose => (ym, xm),
        }
    }
}

/// Instance map: `0` is background, `k ≥ 1` a cell instance.
///
/// Construction only checks the raster shape. [`extract_regions`] requires
/// the ids to be compact (`1..=n`, each present).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelImage {
    raster: Raster<u32>,
}

impl LabelImage {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        Ok(LabelImage {
            raster: Raster::new(width, height, labels)?,
        })
    }

    pub fn from_raster(raster: Raster<u32>) -> Self {
        LabelImage { raster }
    }

    pub fn background(width: usize, height: usize) -> Self {
        LabelImage {
            raster: Raster::filled(width, height, 0),
        }
    }

    pub fn raster(&self) -> &Raster<u32> {
        &self.raster
    }

    pub fn into_raster(self) -> Raster<u32> {
        self.raster
    }

    pub fn width(&self) -> usize {
        self.raster.width
    }

    pub fn height(&self) -> usize {
        self.raster.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.raster.dims()
    }

    pub fn labels(&self) -> &[u32] {
        &self.raster.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        *self.raster.get(x, y)
    }

    pub fn max_id(&self) -> u32 {
        self.raster.data.iter().copied().max().unwrap_or(0)
    }

    /// Number of instances if the labeling is compact, else the first missing id.
    pub fn check_compact(&self) -> Result<u32> {
        let max_id = self.max_id();
        let mut seen = vec![false; max_id as usize + 1];
        for &id in &self.raster.data {
            seen[id as usize] = true;
        }
        match seen.iter().skip(1).position(|s| !s) {
            Some(missing) => Err(Error::MissingLabel {
                id: missing as u32 + 1,
                max_id,
            }),
            None => Ok(max_id),
        }
    }

    /// Rewrites ids to `1..=n` in order of increasing original id.
    pub fn compacted(&self) -> LabelImage {
        let max_id = self.max_id() as usize;
        let mut remap = vec![0u32; max_id + 1];
        for &id in &self.raster.data {
            if id != 0 {
                remap[id as usize] = 1;
            }
        }
        let mut next = 0;
        for slot in remap.iter_mut().skip(1) {
            if *slot == 1 {
                next += 1;
                *slot = next;
            }
        }
        LabelImage {
            raster: self.raster.map(|&id| remap[id as usize]),
        }
    }

    pub fn transformed(&self, symmetry: Symmetry) -> LabelImage {
        LabelImage {
            raster: self.raster.transformed(symmetry),
        }
    }
}

/// Inclusive pixel bounds `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn contains(&self, p: Point) -> bool {
        (self.x0..=self.x1).contains(&p.x) && (self.y0..=self.y1).contains(&p.y)
    }
}

/// The pixels `Ω_k` of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    instance_id: u32,
    pixels: Vec<Point>,
    bbox: BoundingBox,
    centroid: (f64, f64),
    source_pixel: Point,
    source_set: Vec<Point>,
}

impl Region {
    pub fn instance_id(&self) -> u32 {
        self.instance_id
    }

    /// Pixels in raster order.
    pub fn pixels(&self) -> &[Point] {
        &self.pixels
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn bounding_box(&self) -> BoundingBox {
        self.bbox
    }

    /// Mean pixel coordinate `(cx, cy)`.
    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    /// Rounded centroid when it falls inside the region, otherwise the pixel
    /// deepest inside it (Euclidean distance to the outside, first in raster
    /// order on ties).
    pub fn source_pixel(&self) -> Point {
        self.source_pixel
    }

    /// Every pixel with an equal claim to be the source, in raster order:
    /// the in-region pixels nearest the centroid (up to four when a
    /// coordinate ends in exactly .5), or else all deepest pixels. Unlike
    /// [`Region::source_pixel`] this set is carried along exactly by the grid
    /// symmetries.
    pub fn source_pixels(&self) -> &[Point] {
        &self.source_set
    }

    /// Position of `p` in [`Region::pixels`].
    pub fn position(&self, p: Point) -> Option<usize> {
        self.pixels
            .binary_search_by(|q| (q.y, q.x).cmp(&(p.y, p.x)))
            .ok()
    }

    pub(crate) fn local_index(&self) -> LocalIndex {
        LocalIndex::new(self.bbox, &self.pixels)
    }

    /// Whether the region is a single connected component.
    pub fn is_connected(&self, connectivity: Connectivity) -> bool {
        let index = self.local_index();
        let mut seen = vec![false; self.pixels.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            let p = self.pixels[i];
            for &off in connectivity.offsets() {
                if let Some(j) = index.offset(p, off) {
                    if !seen[j] {
                        seen[j] = true;
                        count += 1;
                        stack.push(j);
                    }
                }
            }
        }
        count == self.pixels.len()
    }

    /// Whether the complement of the region encloses a hole.
    pub fn has_holes(&self) -> bool {
        // Outside pixels in the one-pixel padded box, 8-connected.
        let bw = self.bbox.width() + 2;
        let bh = self.bbox.height() + 2;
        let mut inside = vec![false; bw * bh];
        for p in &self.pixels {
            inside[(p.y - self.bbox.y0 + 1) * bw + (p.x - self.bbox.x0 + 1)] = true;
        }
        let outside = Raster::new(bw, bh, inside.iter().map(|v| !v).collect())
            .expect("padded box is non-empty");
        relabel_connected(&outside, Connectivity::Eight).max_id() > 1
    }
}

/// Dense lookup from bounding-box coordinates to region pixel positions.
pub(crate) struct LocalIndex {
    bbox: BoundingBox,
    slots: Vec<u32>,
}

impl LocalIndex {
    const NONE: u32 = u32::MAX;

    fn new(bbox: BoundingBox, pixels: &[Point]) -> Self {
        let mut slots = vec![Self::NONE; bbox.width() * bbox.height()];
        for (i, p) in pixels.iter().enumerate() {
            slots[(p.y - bbox.y0) * bbox.width() + (p.x - bbox.x0)] = i as u32;
        }
        LocalIndex { bbox, slots }
    }

    #[inline]
    pub(crate) fn get(&self, x: isize, y: isize) -> Option<usize> {
        let lx = x - self.bbox.x0 as isize;
        let ly = y - self.bbox.y0 as isize;
        if lx < 0 || ly < 0 || lx as usize >= self.bbox.width() || ly as usize >= self.bbox.height()
        {
            return None;
        }
        let slot = self.slots[ly as usize * self.bbox.width() + lx as usize];
        (slot != Self::NONE).then_some(slot as usize)
    }

    #[inline]
    pub(crate) fn offset(&self, p: Point, off: (isize, isize)) -> Option<usize> {
        self.get(p.x as isize + off.0, p.y as isize + off.1)
    }
}

/// One [`Region`] per instance id, sorted by id.
///
/// Fails with [`Error::MissingLabel`] when the ids are not compact.
pub fn extract_regions(labels: &LabelImage) -> Result<Vec<Region>> {
    let n = labels.check_compact()? as usize;
    let mut pixels: Vec<Vec<Point>> = vec![Vec::new(); n];
    let w = labels.width();
    for (i, &id) in labels.labels().iter().enumerate() {
        if id != 0 {
            pixels[id as usize - 1].push(Point::new(i % w, i / w));
        }
    }
    Ok(pixels
        .into_iter()
        .enumerate()
        .map(|(k, pixels)| Region::from_pixels(k as u32 + 1, pixels))
        .collect())
}

impl Region {
    /// Builds a region from its pixels, which must be non-empty and in raster order.
    pub fn from_pixels(instance_id: u32, pixels: Vec<Point>) -> Region {
        assert!(!pixels.is_empty(), "region {instance_id} has no pixels");
        debug_assert!(pixels
            .windows(2)
            .all(|w| (w[0].y, w[0].x) < (w[1].y, w[1].x)));
        let mut bbox = BoundingBox {
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
        };
        let (mut sx, mut sy) = (0u64, 0u64);
        for p in &pixels {
            bbox.x0 = bbox.x0.min(p.x);
            bbox.y0 = bbox.y0.min(p.y);
            bbox.x1 = bbox.x1.max(p.x);
            bbox.y1 = bbox.y1.max(p.y);
            sx += p.x as u64;
            sy += p.y as u64;
        }
        let n = pixels.len() as u64;
        let centroid = (sx as f64 / n as f64, sy as f64 / n as f64);
        let mut region = Region {
            instance_id,
            pixels,
            bbox,
            centroid,
            source_pixel: Point::new(0, 0),
            source_set: Vec::new(),
        };
        // nearest integer(s) to sum / n, both neighbors on an exact half
        let nearest = |sum: u64| -> ([usize; 2], usize) {
            let (q, r) = ((sum / n) as usize, sum % n);
            match (2 * r).cmp(&n) {
                core::cmp::Ordering::Less => ([q, q], 1),
                core::cmp::Ordering::Greater => ([q + 1, q + 1], 1),
                core::cmp::Ordering::Equal => ([q, q + 1], 2),
            }
        };
        let (xs, nx) = nearest(sx);
        let (ys, ny) = nearest(sy);
        for &y in &ys[..ny] {
            for &x in &xs[..nx] {
                let p = Point::new(x, y);
                if region.position(p).is_some() {
                    region.source_set.push(p);
                }
            }
        }
        // round half up, as the centroid is never negative
        let rounded = Point::new(xs[nx - 1], ys[ny - 1]);
        let dist = if region.position(rounded).is_some() {
            None
        } else {
            Some(edt::region_squared_distances(&region))
        };
        region.source_pixel = match &dist {
            None => rounded,
            Some(dist) => {
                let mut best = 0;
                for (i, &d) in dist.iter().enumerate() {
                    if d > dist[best] {
                        best = i;
                    }
                }
                region.pixels[best]
            }
        };
        if region.source_set.is_empty() {
            let dist = dist.expect("distances computed when no candidate is inside");
            let top = dist.iter().copied().fold(0.0, f64::max);
            region.source_set = region
                .pixels
                .iter()
                .zip(&dist)
                .filter(|(_, &d)| d == top)
                .map(|(p, _)| *p)
                .collect();
        }
        region
    }
}

/// Inner boundary `Γ_k`: region pixels with a 4-neighbor outside the region
/// or outside the image. Returned in raster order.
pub fn boundary_pixels(region: &Region, labels: &LabelImage) -> Vec<Point> {
    let raster = labels.raster();
    let id = region.instance_id();
    region
        .pixels()
        .iter()
        .copied()
        .filter(|p| {
            Connectivity::Four
                .offsets()
                .iter()
                .any(|&off| match raster.neighbor(p.x, p.y, off) {
                    Some((nx, ny)) => *raster.get(nx, ny) != id,
                    None => true,
                })
        })
        .collect()
}

/// Labels the connected components of `mask` as `1..=n` in raster-scan
/// discovery order.
pub fn relabel_connected(mask: &Mask, connectivity: Connectivity) -> LabelImage {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.data()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            for &off in connectivity.offsets() {
                if let Some((nx, ny)) = mask.neighbor(x, y, off) {
                    let j = ny * w + nx;
                    if mask.data()[j] && labels[j] == 0 {
                        labels[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
    }
    LabelImage::new(w, h, labels).expect("same shape as mask")
}

/// Recovered instances `Ψ` together with the background mask `Ψ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    instance_map: Raster<u32>,
    background: Mask,
}

impl Segmentation {
    /// Fails unless the instance map is zero exactly on the background mask.
    pub fn new(instance_map: Raster<u32>, background: Mask) -> Result<Self> {
        instance_map.ensure_same_dims(&background)?;
        let consistent = instance_map
            .data()
            .iter()
            .zip(background.data())
            .all(|(&id, &bg)| (id == 0) == bg);
        if !consistent {
            return Err(Error::InconsistentBackground);
        }
        Ok(Segmentation {
            instance_map,
            background,
        })
    }

    /// Treats id 0 as background.
    pub fn from_instance_map(instance_map: Raster<u32>) -> Self {
        let background = instance_map.map(|&id| id == 0);
        Segmentation {
            instance_map,
            background,
        }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Segmentation {
            instance_map: Raster::filled(width, height, 0),
            background: Raster::filled(width, height, true),
        }
    }

    pub fn instance_map(&self) -> &Raster<u32> {
        &self.instance_map
    }

    pub fn background_mask(&self) -> &Mask {
        &self.background
    }

    pub fn dims(&self) -> (usize, usize) {
        self.instance_map.dims()
    }

    /// Number of distinct non-zero ids.
    pub fn instance_count(&self) -> usize {
        let mut ids: Vec<u32> = self
            .instance_map
            .data()
            .iter()
            .copied()
            .filter(|&id| id != 0)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn into_label_image(self) -> LabelImage {
        LabelImage::from_raster(self.instance_map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(w: usize, h: usize, v: &[u32]) -> LabelImage {
        LabelImage::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn half_integer_centroids_tie_sources() {
        let strip = extract_regions(&LabelImage::new(4, 1, vec![0, 1, 1, 0]).unwrap()).unwrap();
        assert_eq!(
            strip[0].source_pixels(),
            &[Point::new(1, 0), Point::new(2, 0)]
        );
        assert!(strip[0].source_pixels().contains(&strip[0].source_pixel()));
        let block = extract_regions(&LabelImage::new(2, 2, vec![1; 4]).unwrap()).unwrap();
        assert_eq!(block[0].source_pixels().len(), 4);
        let dot = extract_regions(&LabelImage::new(3, 3, vec![0, 0, 0, 0, 1, 0, 0, 0, 0]).unwrap())
            .unwrap();
        assert_eq!(dot[0].source_pixels(), &[Point::new(1, 1)]);
    }

    #[test]
    fn ring_sources_fall_back_to_all_deepest_pixels() {
        // 5×5 block with its center removed: the centroid is the hole and
        // the four pixels diagonal to it are deepest, at √2
        let v = (0..25).map(|i| u32::from(i != 12)).collect();
        let r = extract_regions(&LabelImage::new(5, 5, v).unwrap()).unwrap();
        let corners = [(1, 1), (3, 1), (1, 3), (3, 3)].map(|(x, y)| Point::new(x, y));
        assert_eq!(r[0].source_pixels(), &corners);
        assert_eq!(r[0].source_pixel(), Point::new(1, 1));
    }

    #[test]
    fn compacting_keeps_background_and_order() {
        let l = LabelImage::new(5, 1, vec![0, 7, 3, 0, 7]).unwrap();
        assert_eq!(l.compacted().labels(), &[0, 2, 1, 0, 2]);
        let done = LabelImage::new(3, 1, vec![1, 0, 2]).unwrap();
        assert_eq!(done.compacted(), done);
    }

    #[test]
    fn single_center_pixel() {
        let l = label(3, 3, &[0, 0, 0, 0, 1, 0, 0, 0, 0]);
        let r = extract_regions(&l).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].centroid(), (1.0, 1.0));
        assert_eq!(r[0].source_pixel(), Point::new(1, 1));
    }

    #[test]
    fn row_of_two_rounds_centroid_up() {
        let l = label(4, 1, &[0, 1, 1, 0]);
        let r = extract_regions(&l).unwrap();
        assert_eq!(r[0].centroid(), (1.5, 0.0));
        assert_eq!(r[0].source_pixel(), Point::new(2, 0));
    }

    #[test]
    fn two_by_two_split() {
        let l = label(2, 2, &[1, 1, 2, 2]);
        let r = extract_regions(&l).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].instance_id(), 1);
        assert_eq!(r[0].pixels(), &[Point::new(0, 0), Point::new(1, 0)]);
        assert_eq!(r[1].pixels(), &[Point::new(0, 1), Point::new(1, 1)]);
    }

    #[test]
    fn missing_id_is_named() {
        let l = label(3, 1, &[1, 0, 3]);
        assert_eq!(
            extract_regions(&l).unwrap_err(),
            Error::MissingLabel { id: 2, max_id: 3 }
        );
    }

    #[test]
    fn centroid_outside_uses_deepest_pixel() {
        // U shape: centroid (2, 1.33) rounds to (2, 1), which is a gap pixel.
        #[rustfmt::skip]
        let l = label(5, 3, &[
            1, 0, 0, 0, 1,
            1, 0, 0, 0, 1,
            1, 1, 1, 1, 1,
        ]);
        let r = extract_regions(&l).unwrap();
        let s = r[0].source_pixel();
        assert!(r[0].position(s).is_some());
        // every pixel has distance 1 to outside, so the first in raster order wins
        assert_eq!(s, Point::new(0, 0));
    }

    #[test]
    fn boundary_examples() {
        let l = label(3, 3, &[0, 0, 0, 0, 1, 0, 0, 0, 0]);
        let r = extract_regions(&l).unwrap();
        assert_eq!(boundary_pixels(&r[0], &l), vec![Point::new(1, 1)]);

        let mut v = vec![0u32; 25];
        for y in 1..4 {
            for x in 1..4 {
                v[y * 5 + x] = 1;
            }
        }
        let l = label(5, 5, &v);
        let r = extract_regions(&l).unwrap();
        let b = boundary_pixels(&r[0], &l);
        assert_eq!(b.len(), 8);
        assert!(!b.contains(&Point::new(2, 2)));

        let l = label(7, 1, &[0, 1, 1, 1, 1, 1, 0]);
        let r = extract_regions(&l).unwrap();
        assert_eq!(boundary_pixels(&r[0], &l).len(), 5);
    }

    #[test]
    fn image_edge_counts_as_outside() {
        let l = label(3, 3, &[1; 9]);
        let r = extract_regions(&l).unwrap();
        assert_eq!(boundary_pixels(&r[0], &l).len(), 8);
    }

    #[test]
    fn relabel_examples() {
        let empty = Mask::filled(3, 3, false);
        assert_eq!(relabel_connected(&empty, Connectivity::Four).max_id(), 0);

        let diag = Mask::new(2, 2, vec![true, false, false, true]).unwrap();
        assert_eq!(
            relabel_connected(&diag, Connectivity::Four).labels(),
            &[1, 0, 0, 2]
        );
        assert_eq!(
            relabel_connected(&diag, Connectivity::Eight).labels(),
            &[1, 0, 0, 1]
        );
    }

    #[test]
    fn holes_and_connectivity() {
        #[rustfmt::skip]
        let ring = label(3, 3, &[
            1, 1, 1,
            1, 0, 1,
            1, 1, 1,
        ]);
        let r = extract_regions(&ring).unwrap();
        assert!(r[0].has_holes());
        assert!(r[0].is_connected(Connectivity::Four));

        let split = label(3, 1, &[1, 0, 1]);
        let r = extract_regions(&split).unwrap();
        assert!(!r[0].has_holes());
        assert!(!r[0].is_connected(Connectivity::Eight));
    }

    #[test]
    fn symmetries_are_bijective_and_invertible() {
        let l = Raster::new(3, 2, (0..6u32).collect()).unwrap();
        for s in Symmetry::ALL {
            let t = l.transformed(s);
            let mut seen: Vec<u32> = t.data().to_vec();
            seen.sort();
            assert_eq!(seen, (0..6).collect::<Vec<_>>());
        }
        assert_eq!(
            l.transformed(Symmetry::Rotate90)
                .transformed(Symmetry::Rotate270),
            l
        );
        assert_eq!(
            l.transformed(Symmetry::Transpose)
                .transformed(Symmetry::Transpose),
            l
        );
    }

    #[test]
    fn segmentation_rejects_inconsistent_background() {
        let map = Raster::new(2, 1, vec![1, 0]).unwrap();
        let bg = Mask::new(2, 1, vec![false, false]).unwrap();
        assert!(Segmentation::new(map, bg).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn labels() -> impl Strategy<Value = LabelImage> {
            (1usize..10, 1usize..10)
                .prop_flat_map(|(w, h)| {
                    (Just(w), Just(h), proptest::collection::vec(0u32..5, w * h))
                })
                .prop_map(|(w, h, v)| LabelImage::new(w, h, v).unwrap().compacted())
        }

        proptest! {
            #[test]
            fn repaint_reproduces_labels(l in labels()) {
                let regions = extract_regions(&l).unwrap();
                let mut out = vec![0u32; l.labels().len()];
                for r in &regions {
                    for p in r.pixels() {
                        out[p.y * l.width() + p.x] = r.instance_id();
                    }
                    prop_assert!(r.position(r.source_pixel()).is_some());
                    for &p in r.source_pixels() {
                        prop_assert!(r.position(p).is_some());
                    }
                }
                prop_assert_eq!(out.as_slice(), l.labels());
            }

            #[test]
            fn source_sets_follow_symmetries(l in labels()) {
                let regions = extract_regions(&l).unwrap();
                let (w, h) = l.dims();
                for s in Symmetry::ALL {
                    let moved = extract_regions(&l.transformed(s)).unwrap();
                    for (r, m) in regions.iter().zip(&moved) {
                        let mut expect: Vec<Point> = r
                            .source_pixels()
                            .iter()
                            .map(|p| {
                                let (x, y) = s.apply(p.x, p.y, w, h);
                                Point::new(x, y)
                            })
                            .collect();
                        expect.sort_by_key(|p| (p.y, p.x));
                        prop_assert_eq!(m.source_pixels(), expect.as_slice());
                    }
                }
            }

            #[test]
            fn boundary_is_subset_and_equal_iff_no_interior(l in labels()) {
                for r in extract_regions(&l).unwrap() {
                    let b = boundary_pixels(&r, &l);
                    prop_assert!(b.len() <= r.area());
                    prop_assert!(b.iter().all(|p| r.position(*p).is_some()));
                    let has_interior = r.pixels().iter().any(|p| {
                        Connectivity::Four.offsets().iter().all(|&o| {
                            l.raster().neighbor(p.x, p.y, o)
                                .map(|(x, y)| l.get(x, y) == r.instance_id())
                                .unwrap_or(false)
                        })
                    });
                    prop_assert_eq!(b.len() == r.area(), !has_interior);
                }
            }

            #[test]
            fn relabel_is_idempotent(
                v in proptest::collection::vec(any::<bool>(), 64),
                eight in any::<bool>(),
            ) {
                let c = if eight { Connectivity::Eight } else { Connectivity::Four };
                let mask = Mask::new(8, 8, v).unwrap();
                let once = relabel_connected(&mask, c);
                let again = relabel_connected(&once.raster().map(|&id| id != 0), c);
                prop_assert_eq!(once, again);
            }
        }
    }
}
