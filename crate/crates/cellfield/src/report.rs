//! CSV reports. Floats use fixed formatting so identical runs produce
//! identical bytes.

use cellfield_core::metrics::{aggregate, MetricsReport};

/// Per-instance diagnostics from computing a field.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub instance_id: u32,
    pub area: usize,
    /// Poisson only: ∞-norm of `A·u + 1`.
    pub max_residual: Option<f64>,
    /// Diffusion only.
    pub iterations: Option<usize>,
    pub has_holes: bool,
}

/// One row per image, then a `mean` row: the unweighted mean of every
/// column over the images (zeros when there are none).
pub fn metrics_csv(rows: &[(String, MetricsReport)]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "path",
        "n_gt",
        "n_pred",
        "iou",
        "dice",
        "pq",
        "sq",
        "rq",
        "foreground_dice",
    ])
    .expect("writing to memory");
    for (name, r) in rows {
        let mut record = vec![name.clone(), r.n_gt.to_string(), r.n_pred.to_string()];
        record.extend(scores(r));
        w.write_record(record).expect("writing to memory");
    }
    let reports: Vec<MetricsReport> = rows.iter().map(|(_, r)| r.clone()).collect();
    let mean_count = |f: fn(&MetricsReport) -> usize| {
        let total: usize = reports.iter().map(f).sum();
        format!("{:.2}", total as f64 / reports.len().max(1) as f64)
    };
    let mut record = vec![
        "mean".to_string(),
        mean_count(|r| r.n_gt),
        mean_count(|r| r.n_pred),
    ];
    record.extend(scores(&aggregate(&reports)));
    w.write_record(record).expect("writing to memory");
    w.into_inner().expect("flushing to memory")
}

fn scores(r: &MetricsReport) -> [String; 6] {
    [r.mean_iou, r.dice, r.pq, r.sq, r.rq, r.foreground_dice].map(|v| format!("{v:.6}"))
}

pub fn fields_csv(rows: &[(String, Vec<InstanceRecord>)]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "path",
        "instance_id",
        "area",
        "max_residual",
        "iterations",
        "has_holes",
    ])
    .expect("writing to memory");
    for (name, records) in rows {
        for r in records {
            w.write_record([
                name.clone(),
                r.instance_id.to_string(),
                r.area.to_string(),
                r.max_residual.map_or(String::new(), |v| format!("{v:.3e}")),
                r.iterations.map_or(String::new(), |v| v.to_string()),
                r.has_holes.to_string(),
            ])
            .expect("writing to memory");
        }
    }
    w.into_inner().expect("flushing to memory")
}
