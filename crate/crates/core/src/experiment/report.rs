use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{ArmSummary, ExperimentReport};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "arm,classifier,kappa,kappa_se,acc,acc_se,sens,sens_se,spec,spec_se";

/// One row per arm × classifier, mean and standard error per metric.
pub fn summary_csv(summary: &[ArmSummary]) -> Result<String> {
    if summary.is_empty() {
        return Err(Error::empty("report has no arms"));
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for arm in summary {
        for c in &arm.classifiers {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                arm.arm.name(),
                c.classifier,
                c.kappa.mean,
                c.kappa.se,
                c.accuracy.mean,
                c.accuracy.se,
                c.sensitivity.mean,
                c.sensitivity.se,
                c.specificity.mean,
                c.specificity.se
            );
        }
    }
    Ok(out)
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line plot of named `(x, y)` series. A one-point series is drawn as a
/// one-point polyline.
pub fn trajectory_svg(series: &[(String, Vec<(f64, f64)>)]) -> Result<String> {
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if points.is_empty() {
        return Err(Error::empty("nothing to plot"));
    }
    let (w, h, m) = (640.0, 360.0, 50.0);
    let (mut x0, mut x1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = points.iter().fold((0.0f64, 1.0f64), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x1 <= x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 <= y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = h - m,
        r = w - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{x0}</text>"#, px(x0), h - m + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{x1}</text>"#, px(x1), h - m + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{y0:.2}</text>"#, m - 4.0, py(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{y1:.2}</text>"#, m - 4.0, py(y1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">epoch</text>"#, w / 2.0, h - 12.0);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, coords.join(" "));
        let ly = m + 14.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" font-size="12" fill="{color}">{name}</text>"#, w - m - 110.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Validation kappa, T-metric and MMD² per checkpoint epoch, averaged over
/// iterations and GANs.
fn trajectories(report: &ExperimentReport) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut acc: BTreeMap<usize, ([f64; 3], usize)> = BTreeMap::new();
    for cp in report.iterations.iter().flat_map(|it| &it.gans).flat_map(|g| &g.trajectory) {
        let e = acc.entry(cp.epoch).or_insert(([0.0; 3], 0));
        e.0[0] += cp.validation_kappa;
        e.0[1] += cp.quality.t_metric;
        e.0[2] += cp.quality.mmd2;
        e.1 += 1;
    }
    ["validation kappa", "T-metric", "MMD²"]
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let pts = acc.iter().map(|(&ep, (sum, n))| (ep as f64, sum[k] / *n as f64)).collect();
            (name.to_string(), pts)
        })
        .collect()
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `report.json`, `summary.csv` and, when checkpoints were scored,
/// `trajectory.svg` into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let csv = summary_csv(&report.summary)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = vec![write(dir.join("report.json"), &report.to_json()?)?, write(dir.join("summary.csv"), &csv)?];
    let series = trajectories(report);
    if series.iter().any(|(_, p)| !p.is_empty()) {
        written.push(write(dir.join("trajectory.svg"), &trajectory_svg(&series)?)?);
    }
    Ok(written)
}
