//! Error metrics in ln γ∞ and γ∞ space, per-family APE summaries and
//! parity-plot export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::DataRecord;
use crate::error::Error;
use crate::tensor::exact_sum;

/// Half-width of the parity band in ln γ∞.
pub const PARITY_BAND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
}

fn check_lengths(pred: &[f64], target: &[f64]) -> Result<(), Error> {
    if pred.len() != target.len() {
        return Err(Error::Eval(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Eval("no predictions to evaluate".into()));
    }
    Ok(())
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    exact_sum(v.iter().copied()) / v.len() as f64
}

/// MAE, RMSE and R² (about the target mean). Fails on length mismatch,
/// empty input or constant targets.
pub fn space_metrics(pred: &[f64], target: &[f64]) -> Result<SpaceMetrics, Error> {
    check_lengths(pred, target)?;
    let t_mean = mean(target.iter().copied());
    let ss_tot = exact_sum(target.iter().map(|t| (t - t_mean) * (t - t_mean)));
    if ss_tot == 0.0 {
        return Err(Error::Eval("targets are constant; R² is undefined".into()));
    }
    let ss_res = exact_sum(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)));
    Ok(SpaceMetrics {
        mae: mean(pred.iter().zip(target).map(|(p, t)| (p - t).abs())),
        rmse: (ss_res / pred.len() as f64).sqrt(),
        r2: 1.0 - ss_res / ss_tot,
    })
}

/// Absolute percentage error in γ∞ space for one ln-space pair.
pub fn ape(pred_ln: f64, target_ln: f64) -> f64 {
    let (p, t) = (pred_ln.exp(), target_ln.exp());
    debug_assert!(t > 0.0);
    100.0 * (p - t).abs() / t
}

/// MAPE (percent) in γ∞ space from ln-space values.
pub fn mape(pred_ln: &[f64], target_ln: &[f64]) -> Result<f64, Error> {
    check_lengths(pred_ln, target_ln)?;
    Ok(mean(pred_ln.iter().zip(target_ln).map(|(&p, &t)| ape(p, t))))
}

/// Box-plot summary of APE within one solute family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyApe {
    pub family: String,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme values within 1.5·IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
    /// Records with APE above 100 %.
    pub outliers_over_100: usize,
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (position `q·(n−1)`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(family: &str, mut apes: Vec<f64>) -> FamilyApe {
    apes.sort_by(f64::total_cmp);
    let q1 = quantile(&apes, 0.25);
    let q3 = quantile(&apes, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    FamilyApe {
        family: family.to_string(),
        count: apes.len(),
        median: quantile(&apes, 0.5),
        q1,
        q3,
        whisker_low: apes.iter().copied().find(|&a| a >= lo_fence).unwrap_or(q1),
        whisker_high: apes.iter().rev().copied().find(|&a| a <= hi_fence).unwrap_or(q3),
        outliers_over_100: apes.iter().filter(|&&a| a > 100.0).count(),
    }
}

/// APE distribution per solute family, families in sorted order.
pub fn per_family_ape(pred_ln: &[f64], records: &[&DataRecord]) -> Result<Vec<FamilyApe>, Error> {
    if pred_ln.len() != records.len() {
        return Err(Error::Eval(format!(
            "{} predictions for {} records",
            pred_ln.len(),
            records.len()
        )));
    }
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (p, r) in pred_ln.iter().zip(records) {
        if r.solute_family.is_empty() {
            return Err(Error::Eval("record without a solute family label".into()));
        }
        groups.entry(&r.solute_family).or_default().push(ape(*p, r.ln_gamma));
    }
    Ok(groups.into_iter().map(|(f, a)| summarize(f, a)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub count: usize,
    pub ln_gamma: SpaceMetrics,
    pub gamma: SpaceMetrics,
    /// Percent, γ∞ space.
    pub mape: f64,
    /// Records with |error| ≤ 0.5 in ln γ∞.
    pub within_band: usize,
    pub families: Vec<FamilyApe>,
}

impl MetricReport {
    pub fn compute(pred_ln: &[f64], records: &[&DataRecord]) -> Result<Self, Error> {
        let target_ln: Vec<f64> = records.iter().map(|r| r.ln_gamma).collect();
        let pred_g: Vec<f64> = pred_ln.iter().map(|v| v.exp()).collect();
        let target_g: Vec<f64> = target_ln.iter().map(|v| v.exp()).collect();
        Ok(MetricReport {
            count: pred_ln.len(),
            ln_gamma: space_metrics(pred_ln, &target_ln)?,
            gamma: space_metrics(&pred_g, &target_g)?,
            mape: mape(pred_ln, &target_ln)?,
            within_band: band_counts(pred_ln, &target_ln).0,
            families: per_family_ape(pred_ln, records)?,
        })
    }

    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "records: {}", self.count);
        let _ = writeln!(s, "{:<8} {:>10} {:>10} {:>10}", "space", "MAE", "RMSE", "R2");
        for (name, m) in [("ln_gamma", &self.ln_gamma), ("gamma", &self.gamma)] {
            let _ = writeln!(s, "{:<8} {:>10.5} {:>10.5} {:>10.5}", name, m.mae, m.rmse, m.r2);
        }
        let _ = writeln!(s, "MAPE (gamma): {:.3} %", self.mape);
        let _ = writeln!(
            s,
            "within +/-{PARITY_BAND} ln units: {} of {}",
            self.within_band, self.count
        );
        if !self.families.is_empty() {
            let _ = writeln!(
                s,
                "{:<16} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>6}",
                "family", "n", "median", "q1", "q3", "wlo", "whi", ">100%"
            );
            for f in &self.families {
                let _ = writeln!(
                    s,
                    "{:<16} {:>6} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>6}",
                    f.family, f.count, f.median, f.q1, f.q3, f.whisker_low, f.whisker_high, f.outliers_over_100
                );
            }
        }
        s
    }
}

/// (inside, outside) the ±0.5 ln-unit band; the boundary counts as inside.
pub fn band_counts(pred_ln: &[f64], target_ln: &[f64]) -> (usize, usize) {
    let inside = pred_ln
        .iter()
        .zip(target_ln)
        .filter(|(p, t)| (*p - *t).abs() <= PARITY_BAND)
        .count();
    (inside, pred_ln.len() - inside)
}

/// Writes `target,prediction,family,within_band` rows, and optionally an
/// SVG parity plot with the ±0.5 band. Returns (inside, outside).
pub fn export_parity(
    pred_ln: &[f64],
    records: &[&DataRecord],
    csv_path: &Path,
    svg_path: Option<&Path>,
) -> Result<(usize, usize), Error> {
    if pred_ln.len() != records.len() {
        return Err(Error::Eval("prediction and record counts differ".into()));
    }
    let io = |path: &Path, e: std::io::Error| Error::Eval(format!("cannot write {}: {e}", path.display()));
    let file = std::fs::File::create(csv_path).map_err(|e| io(csv_path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::Eval(format!("cannot write {}: {e}", csv_path.display()));
    w.write_record(["target", "prediction", "family", "within_band"]).map_err(csv_err)?;
    for (p, r) in pred_ln.iter().zip(records) {
        let inside = (p - r.ln_gamma).abs() <= PARITY_BAND;
        w.write_record([
            r.ln_gamma.to_string(),
            p.to_string(),
            r.solute_family.clone(),
            inside.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| io(csv_path, e))?;
    let targets: Vec<f64> = records.iter().map(|r| r.ln_gamma).collect();
    if let Some(svg) = svg_path {
        let mut f = std::fs::File::create(svg).map_err(|e| io(svg, e))?;
        f.write_all(parity_svg(pred_ln, &targets).as_bytes()).map_err(|e| io(svg, e))?;
    }
    Ok(band_counts(pred_ln, &targets))
}

/// Minimal standalone SVG: points, the diagonal and the ±0.5 band.
pub fn parity_svg(pred_ln: &[f64], target_ln: &[f64]) -> String {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 40.0;
    let all = pred_ln.iter().chain(target_ln).copied();
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo - 0.5, hi + 0.5) } else { (-1.0, 1.0) };
    let px = |v: f64| PAD + (v - lo) / (hi - lo) * (SIZE - 2.0 * PAD);
    let py = |v: f64| SIZE - px(v);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let line = |s: &mut String, off: f64, color: &str| {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1"/>"#,
            px(lo),
            py(lo + off),
            px(hi),
            py(hi + off)
        );
    };
    line(&mut s, 0.0, "black");
    line(&mut s, PARITY_BAND, "red");
    line(&mut s, -PARITY_BAND, "red");
    for (p, t) in pred_ln.iter().zip(target_ln) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="steelblue" fill-opacity="0.6"/>"#,
            px(*t),
            py(*p)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.0}" y="{:.0}" font-size="12" text-anchor="middle">experimental ln gamma</text>"#,
        SIZE / 2.0,
        SIZE - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{:.0}" font-size="12" transform="rotate(-90 12 {:.0})" text-anchor="middle">predicted ln gamma</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    s.push_str("</svg>\n");
    s
}
