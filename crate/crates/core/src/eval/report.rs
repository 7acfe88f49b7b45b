use std::fmt::Write as _;

use super::crossval::{FoldReport, FoldResult};
use super::metrics::{accuracy, sensitivity, specificity, ConfusionCounts, Metric};

/// A human reader's operating point to overlay on the ROC plot.
#[derive(Clone, Debug, PartialEq)]
pub struct ReaderPoint {
    pub label: String,
    pub sensitivity: f64,
    pub specificity: f64,
}

impl ReaderPoint {
    pub fn from_counts(label: impl Into<String>, c: &ConfusionCounts) -> Option<Self> {
        Some(ReaderPoint {
            label: label.into(),
            sensitivity: sensitivity(c).value()?,
            specificity: specificity(c).value()?,
        })
    }

    /// Published surgeon reading: 9 of 17 loose and 22 of 23 well-fixed correct.
    pub fn surgeon() -> Self {
        Self::from_counts("surgeon", &ConfusionCounts::new(9, 1, 22, 8)).expect("both classes present")
    }
}

fn cell(m: Metric) -> String {
    match m {
        Metric::Defined(v) => format!("{v:.6}"),
        Metric::Undefined => "undefined".into(),
    }
}

/// `fold,tp,fp,tn,fn,sensitivity,specificity,accuracy,auc`, one row per fold,
/// then a `mean` row (mean of per-fold metrics).
pub fn report_csv(report: &FoldReport) -> String {
    let mut s = String::from("fold,tp,fp,tn,fn,sensitivity,specificity,accuracy,auc\n");
    for f in &report.folds {
        let c = &f.counts;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            f.fold + 1,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            cell(f.sensitivity()),
            cell(f.specificity()),
            cell(f.accuracy()),
            cell(f.auc())
        );
    }
    let mean = |f: fn(&FoldResult) -> Metric| cell(Metric::mean(report.folds.iter().map(f)));
    let _ = writeln!(
        s,
        "mean,,,,,{},{},{},{}",
        mean(FoldResult::sensitivity),
        mean(FoldResult::specificity),
        mean(FoldResult::accuracy),
        cell(report.mean_auc)
    );
    s
}

/// Confusion counts pooled over all folds, with the metrics they imply.
pub fn pooled_csv(report: &FoldReport) -> String {
    let p = report.pooled_counts();
    format!(
        "tp,fp,tn,fn,sensitivity,specificity,accuracy\n{},{},{},{},{},{},{}\n",
        p.tp,
        p.fp,
        p.tn,
        p.fn_,
        cell(sensitivity(&p)),
        cell(specificity(&p)),
        cell(accuracy(&p))
    )
}

/// Per-sample validation predictions: `fold,id,label,score`.
pub fn predictions_csv(report: &FoldReport) -> String {
    let mut s = String::from("fold,id,label,score\n");
    for f in &report.folds {
        for ((id, &pos), score) in f.validation_ids.iter().zip(&f.labels).zip(&f.scores) {
            let label = if pos { "loose" } else { "well_fixed" };
            let _ = writeln!(s, "{},{id},{label},{score:.6}", f.fold + 1);
        }
    }
    s
}

/// Averaged curve: `fpr,tpr`.
pub fn curve_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("fpr,tpr\n");
    for (f, t) in points {
        let _ = writeln!(s, "{f:.6},{t:.6}");
    }
    s
}

const SIZE: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn px(fpr: f64, tpr: f64) -> (f64, f64) {
    let span = SIZE - 2.0 * MARGIN;
    (MARGIN + fpr * span, SIZE - MARGIN - tpr * span)
}

fn polyline(points: &[(f64, f64)]) -> String {
    points
        .iter()
        .map(|&(f, t)| {
            let (x, y) = px(f, t);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// ROC plot: per-fold curves light, averaged curve bold, chance diagonal dashed,
/// and an optional reader operating point.
pub fn roc_svg(report: &FoldReport, reader: Option<&ReaderPoint>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let (x0, y0) = px(0.0, 0.0);
    let (x1, y1) = px(1.0, 1.0);
    let _ =
        writeln!(s, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let (tx, _) = px(v, 0.0);
        let (_, ty) = px(0.0, v);
        let _ = writeln!(s, r#"<line x1="{tx}" y1="{y0}" x2="{tx}" y2="{}" stroke="black"/>"#, y0 + 4.0);
        let _ = writeln!(s, r#"<text x="{tx}" y="{}" text-anchor="middle">{v:.1}</text>"#, y0 + 18.0);
        let _ = writeln!(s, r#"<line x1="{}" y1="{ty}" x2="{x0}" y2="{ty}" stroke="black"/>"#, x0 - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.1}</text>"#, x0 - 8.0, ty + 4.0);
    }
    let _ =
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#, SIZE / 2.0, SIZE - 16.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">True positive rate</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line class="chance" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="gray" stroke-dasharray="6,4"/>"#
    );
    for f in &report.folds {
        if let Some(roc) = &f.roc {
            let _ = writeln!(
                s,
                r#"<polyline class="fold" data-fold="{}" points="{}" fill="none" stroke="lightsteelblue" stroke-width="1" opacity="0.8"/>"#,
                f.fold + 1,
                polyline(&roc.points)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<polyline class="mean" points="{}" fill="none" stroke="steelblue" stroke-width="3"/>"#,
        polyline(&report.mean_curve)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{} mean AUC {:.3}</text>"#,
        x1 - 8.0,
        y0 - 10.0,
        report.regime,
        report.mean_auc
    );
    if let Some(r) = reader {
        let (rx, ry) = px(1.0 - r.specificity, r.sensitivity);
        let _ = writeln!(s, r#"<circle class="reader" cx="{rx:.2}" cy="{ry:.2}" r="5" fill="firebrick"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{} ({:.2}, {:.2})</text>"#,
            rx + 8.0,
            ry + 4.0,
            r.label,
            r.sensitivity,
            r.specificity
        );
    }
    s.push_str("</svg>\n");
    s
}
