//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Run alone with
//! `cargo test -p cellfield --test acceptance`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::time::Instant;

use cellfield::commands::{self, FieldOptions, Method, PipelineOptions};
use cellfield_core::diffusion::{run_diffusion, BoundaryRule, DiffusionConfig};
use cellfield_core::edt::edt_field_map;
use cellfield_core::grid::extract_regions;
use cellfield_core::metrics::{evaluate, MetricsReport, MATCH_IOU_THRESHOLD};
use cellfield_core::poisson::{
    assemble_laplacian, poisson_field_map, solve_poisson, PoissonConfig,
};
use cellfield_core::synth::{generate, ShapeKind, SynthSpec};
use cellfield_core::watershed::{background_mask, hminima_markers, segment, WatershedParams};
use cellfield_core::{FieldMap, LabelImage, Point, Raster, Region, Segmentation, Symmetry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn suite(spec: &SynthSpec, n: usize) -> Vec<LabelImage> {
    (0..n as u64)
        .map(|i| {
            generate(&spec.for_image(i))
                .expect("synthetic image")
                .labels
        })
        .collect()
}

/// Mixed shapes with cells of up to ~2000 pixels.
fn large_cell_suite() -> Vec<LabelImage> {
    suite(
        &SynthSpec {
            seed: 2024,
            width: 192,
            height: 192,
            n_instances: 8,
            shape_kind: ShapeKind::Mixed,
            radius_range: (5.0, 23.0),
            ..SynthSpec::default()
        },
        100,
    )
}

fn poisson_residual(images: &[LabelImage]) -> Outcome {
    let start = Instant::now();
    let config = PoissonConfig::default();
    let (mut worst, mut cells, mut largest) = (0.0f64, 0, 0);
    for labels in images {
        let out = poisson_field_map(labels, &config).unwrap();
        for r in &out.reports {
            worst = worst.max(r.max_residual);
            largest = largest.max(r.unknowns);
            cells += 1;
        }
    }
    // recompute independently from the assembled system for one image
    let region = &extract_regions(&images[0]).unwrap()[0];
    let sol = solve_poisson(region, &config).unwrap();
    let sys = assemble_laplacian(region);
    let direct: f64 = sys
        .apply(&sol.values)
        .iter()
        .map(|v| (v + 1.0).abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && direct <= 1e-8 && secs <= 60.0 && largest >= 1500,
        format!(
            "{cells} cells in {} images, largest {largest} px, max residual {worst:.2e}, {secs:.2} s",
            images.len()
        ),
    )
}

type Visit<'a> = &'a mut dyn FnMut(&[(i32, i32)]);

/// Fixed polyominoes (connected cell shapes up to translation) with at most
/// `max` pixels, by Redelmeier's method.
fn polyominoes(max: usize, visit: Visit) {
    fn grow(
        mut untried: Vec<(i32, i32)>,
        poly: &mut Vec<(i32, i32)>,
        seen: &mut HashSet<(i32, i32)>,
        max: usize,
        visit: Visit,
    ) {
        while let Some(c) = untried.pop() {
            poly.push(c);
            visit(poly);
            if poly.len() < max {
                let mut next = untried.clone();
                let mut added = Vec::new();
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let n = (c.0 + dx, c.1 + dy);
                    let allowed = n.1 > 0 || (n.1 == 0 && n.0 >= 0);
                    if allowed && seen.insert(n) {
                        next.push(n);
                        added.push(n);
                    }
                }
                grow(next, poly, seen, max, visit);
                for n in added {
                    seen.remove(&n);
                }
            }
            poly.pop();
        }
    }
    let mut seen = HashSet::from([(0, 0)]);
    grow(vec![(0, 0)], &mut Vec::new(), &mut seen, max, visit);
}

fn region_of(cells: &[(i32, i32)]) -> Region {
    let x0 = cells.iter().map(|c| c.0).min().unwrap();
    let y0 = cells.iter().map(|c| c.1).min().unwrap();
    let mut pixels: Vec<Point> = cells
        .iter()
        .map(|&(x, y)| Point::new((x - x0) as usize, (y - y0) as usize))
        .collect();
    pixels.sort_by_key(|p| (p.y, p.x));
    Region::from_pixels(1, pixels)
}

/// Dense Gaussian elimination on the system built from pixel adjacency.
fn dense_solution(pixels: &[Point]) -> Vec<f64> {
    let n = pixels.len();
    let mut m = vec![vec![0.0f64; n + 1]; n];
    for (i, p) in pixels.iter().enumerate() {
        m[i][i] = -4.0;
        m[i][n] = -1.0;
        for (j, q) in pixels.iter().enumerate() {
            if p.x.abs_diff(q.x) + p.y.abs_diff(q.y) == 1 {
                m[i][j] = 1.0;
            }
        }
    }
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap();
        m.swap(c, piv);
        let pivot = m[c].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != c {
                let f = row[c] / pivot[c];
                for (v, pv) in row.iter_mut().zip(&pivot).skip(c) {
                    *v -= f * pv;
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

fn small_system_oracle() -> Outcome {
    let start = Instant::now();
    let config = PoissonConfig::default();
    let mut counts = [0usize; 13];
    let mut worst = 0.0f64;
    let mut check = |region: &Region| {
        let got = solve_poisson(region, &config).unwrap().values;
        for (u, v) in got.iter().zip(dense_solution(region.pixels())) {
            worst = worst.max((u - v).abs());
        }
    };
    polyominoes(12, &mut |cells| {
        counts[cells.len()] += 1;
        check(&region_of(cells));
    });
    // disconnected cells: random pixel subsets of a 5×5 box
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20_000 {
        let n = rng.gen_range(2..=12);
        let mut set = BTreeSet::new();
        while set.len() < n {
            set.insert((rng.gen_range(0..5), rng.gen_range(0..5)));
        }
        let cells: Vec<(i32, i32)> = set.into_iter().collect();
        check(&region_of(&cells));
    }
    // known counts of fixed polyominoes
    let known = [
        0, 1, 2, 6, 19, 63, 216, 760, 2725, 9910, 36446, 135268, 505861,
    ];
    let strip = Region::from_pixels(1, (0..3).map(|x| Point::new(x, 0)).collect());
    let u = solve_poisson(&strip, &config).unwrap().values;
    let hand = [5.0 / 14.0, 6.0 / 14.0, 5.0 / 14.0];
    let strip_err = u
        .iter()
        .zip(hand)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let total: usize = counts.iter().sum();
    outcome(
        counts == known && worst <= 1e-10 && strip_err <= 1e-12,
        format!(
            "{total} connected shapes of 1-12 px + 20000 disconnected, max deviation {worst:.2e}; \
             1x3 error {strip_err:.2e}; {:.1} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn leaky() -> DiffusionConfig {
    DiffusionConfig {
        boundary_rule: BoundaryRule::LeakyDenominator9,
        ..DiffusionConfig::default()
    }
}

fn diffusion_convergence(images: &[LabelImage]) -> Outcome {
    let start = Instant::now();
    let config = leaky();
    let (mut cells, mut most, mut failures) = (0, 0, 0);
    for labels in images {
        match run_diffusion(labels, &config) {
            Ok(out) => {
                for inst in &out.report.instances {
                    cells += 1;
                    most = most.max(inst.iterations);
                    if !(inst.converged && inst.last_delta < 0.01) {
                        failures += 1;
                    }
                }
            }
            Err(_) => failures += 1,
        }
    }
    let dot = LabelImage::new(3, 3, vec![0, 0, 0, 0, 1, 0, 0, 0, 0]).unwrap();
    let tight = DiffusionConfig {
        convergence_epsilon: 1e-10,
        ..leaky()
    };
    let fixed = *run_diffusion(&dot, &tight).unwrap().raw.get(1, 1);
    outcome(
        failures == 0 && (fixed - 0.125).abs() <= 1e-6,
        format!(
            "{cells} cells converged at eps 0.01, most iterations {most}, {failures} failures; \
             single-pixel fixed point {fixed:.9}; {:.1} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

struct RoundTrip {
    mean_pq: f64,
    exact: usize,
    n: usize,
}

fn round_trip(images: &[LabelImage], field: impl Fn(&LabelImage) -> FieldMap) -> RoundTrip {
    let params = WatershedParams::default();
    let mut total_pq = 0.0;
    let mut exact = 0;
    for labels in images {
        let seg = segment(&field(labels), &params).unwrap();
        let report = evaluate(labels, &seg).unwrap();
        total_pq += report.pq;
        exact += usize::from(seg.instance_count() == labels.max_id() as usize);
    }
    RoundTrip {
        mean_pq: total_pq / images.len() as f64,
        exact,
        n: images.len(),
    }
}

fn poisson(labels: &LabelImage) -> FieldMap {
    poisson_field_map(labels, &PoissonConfig::default())
        .unwrap()
        .field
}

fn diffusion(labels: &LabelImage) -> FieldMap {
    run_diffusion(labels, &DiffusionConfig::default())
        .unwrap()
        .field
}

fn round_trip_segmentation() -> Outcome {
    let start = Instant::now();
    let images = suite(
        &SynthSpec {
            seed: 7,
            shape_kind: ShapeKind::Mixed,
            min_gap: 2,
            ..SynthSpec::default()
        },
        100,
    );
    let p = round_trip(&images, poisson);
    let d = round_trip(&images, diffusion);
    let secs = start.elapsed().as_secs_f64();
    let ok = |r: &RoundTrip| r.mean_pq >= 0.95 && r.exact * 100 >= 95 * r.n;
    outcome(
        ok(&p) && ok(&d) && secs <= 120.0,
        format!(
            "poisson PQ {:.4}, exact {}/{}; diffusion PQ {:.4}, exact {}/{}; {secs:.1} s",
            p.mean_pq, p.exact, p.n, d.mean_pq, d.exact, d.n
        ),
    )
}

fn touching_separation() -> Outcome {
    let images = suite(
        &SynthSpec {
            seed: 11,
            shape_kind: ShapeKind::Mixed,
            touching_fraction: 0.5,
            ..SynthSpec::default()
        },
        50,
    );
    let touching = images.iter().filter(|l| has_touching_pair(l)).count();
    let p = round_trip(&images, poisson);
    let e = round_trip(&images, |l| edt_field_map(l).unwrap());
    let d = round_trip(&images, diffusion);
    outcome(
        p.exact * 100 >= 90 * p.n && touching * 2 >= images.len(),
        format!(
            "poisson exact {}/{} (PQ {:.4}); for reference edt {}/{}, diffusion {}/{}; \
             {touching} images contain touching cells",
            p.exact, p.n, p.mean_pq, e.exact, e.n, d.exact, d.n
        ),
    )
}

fn has_touching_pair(labels: &LabelImage) -> bool {
    let (w, h) = labels.dims();
    (0..h).any(|y| {
        (0..w).any(|x| {
            let a = labels.get(x, y);
            let right = x + 1 < w && labels.get(x + 1, y) != 0 && labels.get(x + 1, y) != a;
            let down = y + 1 < h && labels.get(x, y + 1) != 0 && labels.get(x, y + 1) != a;
            a != 0 && (right || down)
        })
    })
}

/// Exhaustive pixel-set version of every score.
fn set_oracle(gt: &LabelImage, pred: &Raster<u32>) -> MetricsReport {
    let sets = |ids: &[u32]| {
        let mut m: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
        for (i, &id) in ids.iter().enumerate() {
            if id != 0 {
                m.entry(id).or_default().insert(i);
            }
        }
        m
    };
    let g = sets(gt.labels());
    let p = sets(pred.data());
    let mut ious = Vec::new();
    let (mut hit_g, mut hit_p) = (BTreeSet::new(), BTreeSet::new());
    for (gi, gs) in &g {
        for (pi, ps) in &p {
            let inter = gs.intersection(ps).count() as f64;
            let union = gs.union(ps).count() as f64;
            if inter / union > MATCH_IOU_THRESHOLD {
                ious.push(inter / union);
                hit_g.insert(*gi);
                hit_p.insert(*pi);
            }
        }
    }
    let tp = ious.len() as f64;
    let fp = (p.len() - hit_p.len()) as f64;
    let fn_ = (g.len() - hit_g.len()) as f64;
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let dices: Vec<f64> = ious.iter().map(|i| 2.0 * i / (1.0 + i)).collect();
    let sq = mean(&ious);
    let rq = if tp + fp + fn_ == 0.0 {
        0.0
    } else {
        tp / (tp + 0.5 * fp + 0.5 * fn_)
    };
    let fg_g: BTreeSet<usize> = g.values().flatten().copied().collect();
    let fg_p: BTreeSet<usize> = p.values().flatten().copied().collect();
    let fg_total = fg_g.len() + fg_p.len();
    MetricsReport {
        n_gt: g.len(),
        n_pred: p.len(),
        mean_iou: sq,
        dice: mean(&dices),
        pq: sq * rq,
        sq,
        rq,
        foreground_dice: if fg_total == 0 {
            0.0
        } else {
            2.0 * fg_g.intersection(&fg_p).count() as f64 / fg_total as f64
        },
        pairs: Vec::new(),
    }
}

fn random_case(rng: &mut ChaCha8Rng) -> (LabelImage, Raster<u32>) {
    let (w, h) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
    let mut gt = vec![0u32; w * h];
    for id in 1..=rng.gen_range(0..=5u32) {
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (x1, y1) = (rng.gen_range(x0..w), rng.gen_range(y0..h));
        for y in y0..=y1 {
            for x in x0..=x1 {
                gt[y * w + x] = id;
            }
        }
    }
    let gt = LabelImage::new(w, h, gt).unwrap().compacted();
    let (dx, dy) = (rng.gen_range(-1..=1isize), rng.gen_range(-1..=1isize));
    let mut perm: Vec<u32> = (1..=6).collect();
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let noise = rng.gen_range(0.0..0.15);
    let mut pred = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = (x as isize - dx, y as isize - dy);
            let mut id = if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                gt.get(sx as usize, sy as usize)
            } else {
                0
            };
            if rng.gen_bool(noise) {
                id = rng.gen_range(0..=5);
            }
            pred[y * w + x] = if id == 0 { 0 } else { perm[id as usize - 1] };
        }
    }
    (gt, Raster::new(w, h, pred).unwrap())
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let (mut worst, mut pairs, mut bad_identity, mut bad_counts) = (0.0f64, 0, 0, 0);
    let mut pq_gap = 0.0f64;
    for _ in 0..1000 {
        let (gt, pred) = random_case(&mut rng);
        let got = evaluate(&gt, &Segmentation::from_instance_map(pred.clone())).unwrap();
        let want = set_oracle(&gt, &pred);
        for (a, b) in [
            (got.mean_iou, want.mean_iou),
            (got.dice, want.dice),
            (got.pq, want.pq),
            (got.sq, want.sq),
            (got.rq, want.rq),
            (got.foreground_dice, want.foreground_dice),
        ] {
            worst = worst.max((a - b).abs());
        }
        bad_counts += usize::from(got.n_gt != want.n_gt || got.n_pred != want.n_pred);
        pq_gap = pq_gap.max((got.pq - got.sq * got.rq).abs());
        for pair in &got.pairs {
            pairs += 1;
            bad_identity += usize::from(pair.dice() != 2.0 * pair.iou / (1.0 + pair.iou));
        }
    }
    outcome(
        worst <= 1e-12 && bad_identity == 0 && bad_counts == 0 && pq_gap <= 1e-12 && pairs > 500,
        format!(
            "1000 cases, max deviation {worst:.1e}, {pairs} matched pairs, \
             {bad_identity} Dice identity failures, PQ-SQ*RQ gap {pq_gap:.1e}"
        ),
    )
}

fn watershed_monotonicity() -> Outcome {
    let touching = suite(
        &SynthSpec {
            seed: 21,
            shape_kind: ShapeKind::Mixed,
            touching_fraction: 0.5,
            ..SynthSpec::default()
        },
        10,
    );
    let mut fields: Vec<FieldMap> = touching.iter().map(poisson).collect();
    fields.extend(touching.iter().map(diffusion));
    let hs = [0.05, 0.1, 0.2, 0.3, 0.4];
    let mut violations = 0;
    let mut example = Vec::new();
    for field in &fields {
        let bg = background_mask(field, 0.05);
        let counts: Vec<usize> = hs
            .iter()
            .map(|&h| {
                hminima_markers(field, &bg, h, cellfield_core::Connectivity::Eight)
                    .unwrap()
                    .count
            })
            .collect();
        violations += counts.windows(2).filter(|w| w[1] > w[0]).count();
        if example.is_empty() && counts[0] > counts[4] {
            example = counts;
        }
    }
    outcome(
        violations == 0,
        format!(
            "{} fields, {violations} increases; e.g. counts {example:?} over h {hs:?}",
            fields.len()
        ),
    )
}

fn max_diff(a: &FieldMap, b: &FieldMap) -> f64 {
    if a.dims() != b.dims() {
        return f64::INFINITY;
    }
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn equivariance() -> Outcome {
    let images = suite(
        &SynthSpec {
            seed: 5,
            width: 96,
            height: 80,
            n_instances: 6,
            shape_kind: ShapeKind::Mixed,
            touching_fraction: 0.3,
            ..SynthSpec::default()
        },
        20,
    );
    let (mut p_worst, mut d_worst, mut edt_mismatch) = (0.0f64, 0.0f64, 0);
    for labels in &images {
        let p = poisson(labels);
        let e = edt_field_map(labels).unwrap();
        let d = diffusion(labels);
        for s in Symmetry::ALL {
            let moved = labels.transformed(s);
            p_worst = p_worst.max(max_diff(&poisson(&moved), &p.transformed(s)));
            edt_mismatch += usize::from(edt_field_map(&moved).unwrap() != e.transformed(s));
            d_worst = d_worst.max(max_diff(&diffusion(&moved), &d.transformed(s)));
        }
    }
    outcome(
        p_worst <= 1e-9 && edt_mismatch == 0 && d_worst <= 1e-6,
        format!(
            "{} images x 8 symmetries: poisson {p_worst:.1e}, edt {edt_mismatch} mismatches, \
             diffusion {d_worst:.1e}",
            images.len()
        ),
    )
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let options = PipelineOptions {
        synth: SynthSpec {
            seed: 99,
            shape_kind: ShapeKind::Mixed,
            touching_fraction: 0.3,
            ..SynthSpec::default()
        },
        n_images: 12,
        fields: FieldOptions::new(Method::Diffusion),
        watershed: WatershedParams::default(),
        viz: true,
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    commands::pipeline(&options, a.path()).unwrap();
    // second run on a single thread: scheduling must not matter
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| commands::pipeline(&options, b.path()).unwrap());
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let pngs = ta.iter().filter(|(n, _)| n.ends_with(".png")).count();
    let has_csv = ta.iter().any(|(n, _)| n == "metrics.csv");
    outcome(
        ta == tb && has_csv && pngs > 0,
        format!(
            "{} files compared ({pngs} PNG, metrics.csv), identical: {}",
            ta.len(),
            ta == tb
        ),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let start = Instant::now();
    let large = large_cell_suite();
    let criteria: Vec<Criterion> = vec![
        ("poisson residual", Box::new(|| poisson_residual(&large))),
        ("small-system oracle", Box::new(small_system_oracle)),
        (
            "diffusion convergence",
            Box::new(|| diffusion_convergence(&large)),
        ),
        ("round-trip segmentation", Box::new(round_trip_segmentation)),
        ("touching-cell separation", Box::new(touching_separation)),
        ("metrics oracle", Box::new(metrics_oracle)),
        ("watershed monotonicity", Box::new(watershed_monotonicity)),
        ("equivariance", Box::new(equivariance)),
        ("pipeline determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "{}/{} criteria passed in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
