use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{SweepResult, SweepRow};
use crate::error::{Error, Result};
use crate::risk::CSV_COLUMNS;

/// Metrics aggregated per `n`.
pub const METRICS: [&str; 8] = [
    "fitted_risk",
    "oracle_risk",
    "excess_risk",
    "mse_identity",
    "mse_aligned",
    "saturated_fraction",
    "loglik",
    "rank_oracle_risk",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub iqr: Option<f64>,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        let q = |p| quantile(&v, p);
        let (q1, q3) = (q(0.25), q(0.75));
        MetricSummary { count: v.len(), median: q(0.5), q1, q3, iqr: q1.zip(q3).map(|(a, b)| b - a) }
    }
}

/// Linear-interpolation quantile of sorted data; `None` when empty.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSummary {
    pub n: usize,
    pub k: usize,
    pub rho_n: f64,
    pub ok: usize,
    pub failed: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub per_n: Vec<NSummary>,
    /// Log-log slope of each metric's median against `n`, where defined.
    pub slopes: BTreeMap<String, Option<f64>>,
}

impl Summary {
    pub fn from_rows(n_list: &[usize], rows: &[SweepRow]) -> Self {
        let per_n: Vec<NSummary> = n_list
            .iter()
            .map(|&n| {
                let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.n == n).collect();
                let metrics = METRICS
                    .iter()
                    .map(|&m| {
                        let vals: Vec<f64> = cell.iter().filter_map(|r| r.metric(m)).collect();
                        (m.to_string(), MetricSummary::of(&vals))
                    })
                    .collect();
                NSummary {
                    n,
                    k: cell.first().map_or(0, |r| r.k),
                    rho_n: cell.first().map_or(f64::NAN, |r| r.rho_n),
                    ok: cell.iter().filter(|r| r.is_ok()).count(),
                    failed: cell.iter().filter(|r| !r.is_ok()).count(),
                    metrics,
                }
            })
            .collect();
        let mut s = Summary { per_n, slopes: BTreeMap::new() };
        s.slopes = METRICS.iter().map(|&m| (m.to_string(), slope_estimate(&s, m).ok())).collect();
        s
    }

    pub fn median(&self, n: usize, metric: &str) -> Option<f64> {
        self.per_n.iter().find(|s| s.n == n)?.metrics.get(metric)?.median
    }
}

/// Least-squares slope of `log(median)` on `log(n)`.
pub fn slope_estimate(summary: &Summary, metric: &str) -> Result<f64> {
    if !METRICS.contains(&metric) {
        return Err(Error::config(format!("unknown metric '{metric}'")));
    }
    let mut pts = Vec::new();
    for s in &summary.per_n {
        match s.metrics.get(metric).and_then(|m| m.median) {
            Some(m) if m > 0.0 => pts.push(((s.n as f64).ln(), m.ln())),
            Some(m) => return Err(Error::Undefined(format!("median {metric} at n = {} is {m}, not positive", s.n))),
            None => return Err(Error::Undefined(format!("no {metric} values at n = {}", s.n))),
        }
    }
    let mut ns: Vec<f64> = pts.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::Undefined(format!("slope needs at least 3 distinct n, got {}", ns.len())));
    }
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub(crate) fn write_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = CSV_COLUMNS.to_vec();
    header.push("status");
    out.write_record(&header)?;
    for r in rows {
        let mut rec = match &r.report {
            Some(rep) => rep.csv_record(),
            None => {
                let mut rec = vec![String::new(); CSV_COLUMNS.len()];
                rec[0] = r.n.to_string();
                rec[1] = r.k.to_string();
                rec[2] = r.rho_n.to_string();
                rec[3] = r.seed.to_string();
                rec[9] = fmt_opt(r.saturated_fraction);
                rec
            }
        };
        rec.push(r.status.clone());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

fn write_dat<W: Write>(summary: &Summary, mut w: W) -> Result<()> {
    write!(w, "# n k rho_n ok failed")?;
    for m in METRICS {
        write!(w, " {m}_median {m}_q1 {m}_q3")?;
    }
    writeln!(w)?;
    for s in &summary.per_n {
        write!(w, "{} {} {} {} {}", s.n, s.k, s.rho_n, s.ok, s.failed)?;
        for m in METRICS {
            let ms = &s.metrics[m];
            for v in [ms.median, ms.q1, ms.q3] {
                write!(w, " {}", v.map_or_else(|| "NaN".to_string(), |x| x.to_string()))?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes `results.csv`, `summary.json` and, when `dat` is set, `summary.dat`.
pub fn write_outputs(dir: impl AsRef<Path>, result: &SweepResult, dat: bool) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("results.csv");
    write_csv(&result.rows, BufWriter::new(File::create(&csv_path)?))?;
    let json_path = dir.join("summary.json");
    let json = serde_json::json!({
        "config": result.config,
        "regime": result.regime,
        "notes": result.notes,
        "failures": result.failures().count(),
        "summary": result.summary,
    });
    let mut f = BufWriter::new(File::create(&json_path)?);
    serde_json::to_writer_pretty(&mut f, &json)?;
    writeln!(f)?;
    f.flush()?;
    let mut paths = vec![csv_path, json_path];
    if dat {
        let dat_path = dir.join("summary.dat");
        let mut f = BufWriter::new(File::create(&dat_path)?);
        write_dat(&result.summary, &mut f)?;
        f.flush()?;
        paths.push(dat_path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn summary_with(medians: &[(usize, f64)]) -> Summary {
        let per_n = medians
            .iter()
            .map(|&(n, m)| {
                let metrics = METRICS
                    .iter()
                    .map(|&name| (name.to_string(), MetricSummary { count: 1, median: Some(m), q1: Some(m), q3: Some(m), iqr: Some(0.0) }))
                    .collect();
                NSummary { n, k: 1, rho_n: 0.3, ok: 1, failed: 0, metrics }
            })
            .collect();
        Summary { per_n, slopes: BTreeMap::new() }
    }

    #[test]
    fn slope_examples() {
        let s = summary_with(&[(100, 0.03), (200, 0.015), (400, 0.0075), (800, 0.00375)]);
        assert_abs_diff_eq!(slope_estimate(&s, "excess_risk").unwrap(), -1.0, epsilon = 1e-9);
        let s = summary_with(&[(100, 2.0), (200, 2.0), (400, 2.0)]);
        assert_abs_diff_eq!(slope_estimate(&s, "fitted_risk").unwrap(), 0.0, epsilon = 1e-12);
        let s = summary_with(&[(100, 2.0), (200, 0.0), (400, 2.0)]);
        assert!(matches!(slope_estimate(&s, "fitted_risk"), Err(Error::Undefined(_))));
        let s = summary_with(&[(100, 2.0), (200, 1.0)]);
        assert!(slope_estimate(&s, "fitted_risk").is_err());
        assert!(slope_estimate(&s, "nope").is_err());
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.25), Some(1.75));
        assert_eq!(quantile(&[], 0.5), None);
        let m = MetricSummary::of(&[3.0, f64::NAN, 1.0, 2.0]);
        assert_eq!((m.count, m.median, m.iqr), (3, Some(2.0), Some(1.0)));
    }
}
