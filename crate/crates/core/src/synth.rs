//! Seeded synthetic label images: disks, ellipses and radially perturbed
//! blobs, placed by rejection sampling with a minimum clearance, optionally
//! pushed against an existing cell so the two touch.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{relabel_connected, Connectivity, LabelImage, Mask, Point, Raster};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Disk,
    Ellipse,
    Blob,
    /// Each instance picks one of the other kinds uniformly.
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub n_instances: usize,
    pub shape_kind: ShapeKind,
    /// `(min, max)` radius in pixels; for ellipses each semi-axis is drawn
    /// from this range.
    pub radius_range: (f64, f64),
    /// Instances not placed as touching keep at least this many pixel widths
    /// of clearance: the smallest distance between pixel centers of two
    /// instances is at least `min_gap + 1`.
    pub min_gap: usize,
    /// Probability that an instance (after the first) is placed against an
    /// existing one.
    pub touching_fraction: f64,
    /// Standard deviation of the additive Gaussian noise of the rendered
    /// image, as a fraction of the `[0, 1]` intensity range.
    pub noise_amplitude: f64,
    /// Placement attempts per instance before giving up.
    pub max_attempts: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            width: 128,
            height: 128,
            n_instances: 8,
            shape_kind: ShapeKind::Disk,
            radius_range: (5.0, 12.0),
            min_gap: 2,
            touching_fraction: 0.0,
            noise_amplitude: 0.05,
            max_attempts: 1000,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let (rmin, rmax) = self.radius_range;
        if !(rmin >= 2.0 && rmax >= rmin && rmax.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "radius_range",
                value: rmin,
                expected: "2 <= min <= max",
            });
        }
        if !(0.0..=1.0).contains(&self.touching_fraction) {
            return Err(Error::InvalidParameter {
                name: "touching_fraction",
                value: self.touching_fraction,
                expected: "a value in [0, 1]",
            });
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise_amplitude",
                value: self.noise_amplitude,
                expected: "a non-negative value",
            });
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidDimensions {
                width: self.width,
                height: self.height,
                len: 0,
            });
        }
        Ok(())
    }

    /// This `SynthSpec` with a seed derived from its own and `index`, for
    /// generating numbered images of a dataset.
    pub fn for_image(&self, index: u64) -> SynthSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        SynthSpec {
            seed: rng.gen(),
            ..self.clone()
        }
    }

    /// Smallest pixel count any generated instance may have.
    pub fn min_area(&self) -> f64 {
        PI * self.radius_range.0 * self.radius_range.0 / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub labels: LabelImage,
    /// 8-bit grayscale rendering: per-instance intensity plus noise.
    pub image: Raster<u8>,
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Disk {
        r: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
        angle: f64,
    },
    /// `r(θ) = r·(1 + Σ amp_k cos(kθ + phase_k))`, `k = 2, 3, 4`.
    Blob {
        r: f64,
        amp: [f64; 3],
        phase: [f64; 3],
    },
}

impl Shape {
    fn random(kind: ShapeKind, (rmin, rmax): (f64, f64), rng: &mut ChaCha8Rng) -> Shape {
        let radius = |rng: &mut ChaCha8Rng| {
            if rmax > rmin {
                rng.gen_range(rmin..=rmax)
            } else {
                rmin
            }
        };
        let kind = match kind {
            ShapeKind::Mixed => {
                [ShapeKind::Disk, ShapeKind::Ellipse, ShapeKind::Blob][rng.gen_range(0..3)]
            }
            k => k,
        };
        match kind {
            ShapeKind::Disk => Shape::Disk { r: radius(rng) },
            ShapeKind::Ellipse => Shape::Ellipse {
                a: radius(rng),
                b: radius(rng),
                angle: rng.gen_range(0.0..PI),
            },
            ShapeKind::Blob | ShapeKind::Mixed => {
                let r = radius(rng);
                let mut amp = [0.0; 3];
                let mut phase = [0.0; 3];
                for k in 0..3 {
                    amp[k] = rng.gen_range(-0.08..=0.08);
                    phase[k] = rng.gen_range(0.0..2.0 * PI);
                }
                Shape::Blob { r, amp, phase }
            }
        }
    }

    fn extent(&self) -> f64 {
        match *self {
            Shape::Disk { r } => r,
            Shape::Ellipse { a, b, .. } => a.max(b),
            Shape::Blob { r, amp, .. } => r * (1.0 + amp.iter().map(|a| a.abs()).sum::<f64>()),
        }
    }

    fn contains(&self, dx: f64, dy: f64) -> bool {
        match *self {
            Shape::Disk { r } => dx * dx + dy * dy <= r * r,
            Shape::Ellipse { a, b, angle } => {
                let (s, c) = libm::sincos(angle);
                let u = (dx * c + dy * s) / a;
                let v = (-dx * s + dy * c) / b;
                u * u + v * v <= 1.0
            }
            Shape::Blob { r, amp, phase } => {
                let theta = libm::atan2(dy, dx);
                let mut scale = 1.0;
                for k in 0..3 {
                    scale += amp[k] * libm::cos((k + 2) as f64 * theta + phase[k]);
                }
                libm::hypot(dx, dy) <= r * scale
            }
        }
    }

    /// Pixels of the shape centered at `(cx, cy)`, keeping the 4-connected
    /// piece that contains the center. `None` if it would leave the image
    /// interior (one-pixel margin).
    fn rasterize(&self, cx: f64, cy: f64, width: usize, height: usize) -> Option<Vec<Point>> {
        if width < 3 || height < 3 {
            return None;
        }
        let ext = self.extent() + 1.0;
        let (x0, x1) = (libm::floor(cx - ext), libm::ceil(cx + ext));
        let (y0, y1) = (libm::floor(cy - ext), libm::ceil(cy + ext));
        if x0 < 1.0 || y0 < 1.0 || x1 > (width - 2) as f64 || y1 > (height - 2) as f64 {
            return None;
        }
        let (x0, y0) = (x0 as usize, y0 as usize);
        let (bw, bh) = (x1 as usize - x0 + 1, y1 as usize - y0 + 1);
        let mut inside = vec![false; bw * bh];
        for y in 0..bh {
            for x in 0..bw {
                inside[y * bw + x] = self.contains((x + x0) as f64 - cx, (y + y0) as f64 - cy);
            }
        }
        let (ccx, ccy) = (libm::round(cx) as usize - x0, libm::round(cy) as usize - y0);
        if !inside[ccy * bw + ccx] {
            return None;
        }
        let comps = relabel_connected(&Mask::new(bw, bh, inside).ok()?, Connectivity::Four);
        let keep = comps.get(ccx, ccy);
        let pixels = comps
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &id)| id == keep)
            .map(|(i, _)| Point::new(x0 + i % bw, y0 + i / bw))
            .collect();
        Some(pixels)
    }
}

struct Canvas {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    /// Offsets `(dx, dy)` with `dx² + dy² < (min_gap + 1)²`, excluding the origin.
    clearance: Vec<(isize, isize)>,
}

impl Canvas {
    fn new(width: usize, height: usize, min_gap: usize) -> Self {
        let reach = min_gap as isize + 1;
        let mut clearance = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if (dx, dy) != (0, 0) && dx * dx + dy * dy < reach * reach {
                    clearance.push((dx, dy));
                }
            }
        }
        Canvas {
            width,
            height,
            labels: vec![0; width * height],
            clearance,
        }
    }

    fn at(&self, x: isize, y: isize) -> u32 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            0
        } else {
            self.labels[y as usize * self.width + x as usize]
        }
    }

    fn overlaps(&self, pixels: &[Point]) -> bool {
        pixels
            .iter()
            .any(|p| self.labels[p.y * self.width + p.x] != 0)
    }

    /// Every pixel keeps the clearance from all instances except `partner`.
    fn is_clear(&self, pixels: &[Point], partner: Option<u32>) -> bool {
        pixels.iter().all(|p| {
            self.clearance.iter().all(|&(dx, dy)| {
                let id = self.at(p.x as isize + dx, p.y as isize + dy);
                id == 0 || Some(id) == partner
            })
        })
    }

    fn touches(&self, pixels: &[Point], partner: u32) -> bool {
        pixels.iter().any(|p| {
            Connectivity::Four
                .offsets()
                .iter()
                .any(|&(dx, dy)| self.at(p.x as isize + dx, p.y as isize + dy) == partner)
        })
    }

    fn paint(&mut self, pixels: &[Point], id: u32) {
        for p in pixels {
            self.labels[p.y * self.width + p.x] = id;
        }
    }
}

/// Standard normal sample (Box–Muller).
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthImage> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut canvas = Canvas::new(spec.width, spec.height, spec.min_gap);
    let mut centers: Vec<(f64, f64, f64)> = Vec::with_capacity(spec.n_instances);
    let min_area = spec.min_area();

    for k in 0..spec.n_instances {
        let id = k as u32 + 1;
        let touching = k > 0 && rng.gen_bool(spec.touching_fraction);
        let mut placed = false;
        for _ in 0..spec.max_attempts {
            let shape = Shape::random(spec.shape_kind, spec.radius_range, &mut rng);
            let candidate = if touching {
                let partner = rng.gen_range(0..centers.len());
                place_touching(
                    &canvas,
                    &shape,
                    centers[partner],
                    partner as u32 + 1,
                    &mut rng,
                )
            } else {
                let ext = shape.extent() + 1.0;
                let (lo_x, hi_x) = (1.0 + ext, spec.width as f64 - 2.0 - ext);
                let (lo_y, hi_y) = (1.0 + ext, spec.height as f64 - 2.0 - ext);
                if lo_x > hi_x || lo_y > hi_y {
                    None
                } else {
                    let cx = rng.gen_range(lo_x..=hi_x);
                    let cy = rng.gen_range(lo_y..=hi_y);
                    shape
                        .rasterize(cx, cy, spec.width, spec.height)
                        .filter(|px| !canvas.overlaps(px) && canvas.is_clear(px, None))
                        .map(|px| (px, cx, cy))
                }
            };
            if let Some((pixels, cx, cy)) = candidate {
                if (pixels.len() as f64) < min_area {
                    continue;
                }
                canvas.paint(&pixels, id);
                centers.push((cx, cy, shape.extent()));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PlacementFailed {
                placed: k,
                requested: spec.n_instances,
            });
        }
    }

    let labels = LabelImage::new(spec.width, spec.height, canvas.labels)?;
    let image = render(&labels, spec, &mut rng);
    Ok(SynthImage { labels, image })
}

/// Slides `shape` toward the partner's center along a random direction and
/// keeps the closest position that neither overlaps anything nor crowds a
/// third instance, provided it shares a 4-adjacent pixel pair with the partner.
fn place_touching(
    canvas: &Canvas,
    shape: &Shape,
    (px, py, pext): (f64, f64, f64),
    partner: u32,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<Point>, f64, f64)> {
    let theta = rng.gen_range(0.0..2.0 * PI);
    let (s, c) = libm::sincos(theta);
    let mut dist = pext + shape.extent() + 2.0;
    let mut best = None;
    while dist > 0.0 {
        let (cx, cy) = (px + dist * c, py + dist * s);
        let Some(pixels) = shape.rasterize(cx, cy, canvas.width, canvas.height) else {
            break;
        };
        if canvas.overlaps(&pixels) {
            break;
        }
        best = Some((pixels, cx, cy));
        dist -= 0.5;
    }
    best.filter(|(pixels, _, _)| {
        canvas.touches(pixels, partner) && canvas.is_clear(pixels, Some(partner))
    })
}

fn render(labels: &LabelImage, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Raster<u8> {
    const BACKGROUND: f64 = 0.15;
    let n = labels.max_id() as usize;
    let intensity: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..0.9)).collect();
    let data = labels
        .labels()
        .iter()
        .map(|&id| {
            let base = if id == 0 {
                BACKGROUND
            } else {
                intensity[id as usize - 1]
            };
            let v = base + spec.noise_amplitude * gaussian(rng);
            libm::round(v.clamp(0.0, 1.0) * 255.0) as u8
        })
        .collect();
    Raster::new(labels.width(), labels.height(), data).expect("same shape as labels")
}
