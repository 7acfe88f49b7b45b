use super::{EvalError, Result};

pub const GRID_POINTS: usize = 101;

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// (fpr, tpr) from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    /// Score threshold that produces each point (`+inf` for the origin).
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

/// Sweeps a threshold over every distinct score, tied scores moving together.
/// AUC is the trapezoid area, computed from integer counts.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(EvalError::Input(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::Input(format!("non-finite score {s}")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass { positives: pos, negatives: neg });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut tp, mut fp) = (0u64, 0u64);
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    // Twice the area in units of (1 / (pos * neg)).
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        thresholds.push(s);
    }
    let auc = area2 as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok(RocCurve { points, thresholds, auc })
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let (mut num, mut den) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            den += 2;
            num += match scores[i].partial_cmp(&scores[j])? {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    (den > 0).then(|| num as f64 / den as f64)
}

/// Operating point reaching at least `min_specificity`, with the highest sensitivity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

pub fn threshold_at_specificity(curve: &RocCurve, min_specificity: f64) -> Option<OperatingPoint> {
    curve
        .points
        .iter()
        .zip(&curve.thresholds)
        .filter(|((fpr, _), _)| 1.0 - fpr >= min_specificity - 1e-12)
        .max_by(|((fa, ta), _), ((fb, tb), _)| ta.total_cmp(tb).then(fb.total_cmp(fa)))
        .map(|(&(fpr, tpr), &threshold)| OperatingPoint { threshold, sensitivity: tpr, specificity: 1.0 - fpr })
}

/// Tpr at `fpr` by linear interpolation, taking the top of any vertical run at `fpr`.
pub fn interpolate_tpr(points: &[(f64, f64)], fpr: f64) -> f64 {
    let i = points.iter().rposition(|&(f, _)| f <= fpr).unwrap_or(0);
    match points.get(i + 1) {
        Some(&(f1, t1)) if f1 > points[i].0 => {
            let (f0, t0) = points[i];
            t0 + (t1 - t0) * (fpr - f0) / (f1 - f0)
        }
        _ => points[i].1,
    }
}

/// Vertical average on a 101-point fpr grid. The result starts at (0, 0) and ends at (1, 1).
pub fn average_curves(curves: &[&RocCurve]) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0)];
    if curves.is_empty() {
        out.push((1.0, 1.0));
        return out;
    }
    for g in 0..GRID_POINTS {
        let fpr = g as f64 / (GRID_POINTS - 1) as f64;
        let tpr = curves.iter().map(|c| interpolate_tpr(&c.points, fpr)).sum::<f64>() / curves.len() as f64;
        out.push((fpr, tpr));
    }
    out
}

/// Trapezoid area under an arbitrary (fpr, tpr) polyline.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}
