use std::fmt;

/// A ratio that may be undefined when its denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    Defined(f64),
    Undefined,
}

impl Metric {
    pub fn ratio(num: usize, den: usize) -> Metric {
        if den == 0 {
            Metric::Undefined
        } else {
            Metric::Defined(num as f64 / den as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Metric::Defined(v) => Some(v),
            Metric::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Metric::Defined(_))
    }

    /// Mean of the defined entries; undefined when none are.
    pub fn mean(items: impl IntoIterator<Item = Metric>) -> Metric {
        let (sum, n) = items.into_iter().filter_map(Metric::value).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            Metric::Undefined
        } else {
            Metric::Defined(sum / n as f64)
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Defined(v) => match f.precision() {
                Some(p) => write!(f, "{v:.p$}"),
                None => write!(f, "{v}"),
            },
            Metric::Undefined => f.write_str("undefined"),
        }
    }
}

/// Confusion matrix with loose as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    /// Counts predictions `score >= threshold` as positive.
    pub fn at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = ConfusionCounts::default();
        for (&s, &positive) in scores.iter().zip(labels) {
            match (s >= threshold, positive) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(&self, other: &ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts::new(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn_ + other.fn_)
    }
}

pub fn sensitivity(c: &ConfusionCounts) -> Metric {
    Metric::ratio(c.tp, c.tp + c.fn_)
}

pub fn specificity(c: &ConfusionCounts) -> Metric {
    Metric::ratio(c.tn, c.tn + c.fp)
}

pub fn accuracy(c: &ConfusionCounts) -> Metric {
    Metric::ratio(c.tp + c.tn, c.total())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(m: Metric, v: f64, tol: f64) -> bool {
        m.value().is_some_and(|x| (x - v).abs() < tol)
    }

    #[test]
    fn published_operating_points() {
        let dl = ConfusionCounts::new(16, 1, 22, 1);
        assert!(close(sensitivity(&dl), 16.0 / 17.0, 1e-15));
        assert_eq!(format!("{:.2}", sensitivity(&dl)), "0.94");
        assert_eq!(format!("{:.2}", specificity(&dl)), "0.96");
        assert_eq!(accuracy(&dl), Metric::Defined(0.95));
        let reader = ConfusionCounts::new(9, 1, 22, 8);
        assert_eq!(format!("{:.2}", sensitivity(&reader)), "0.53");
        assert_eq!(format!("{:.2}", specificity(&reader)), "0.96");
    }

    #[test]
    fn empty_class_is_undefined() {
        let c = ConfusionCounts::new(0, 2, 3, 0);
        assert_eq!(sensitivity(&c), Metric::Undefined);
        assert_eq!(sensitivity(&c).to_string(), "undefined");
        assert_eq!(accuracy(&ConfusionCounts::default()), Metric::Undefined);
        assert_eq!(
            Metric::mean([Metric::Undefined, Metric::Defined(0.5), Metric::Defined(1.0)]),
            Metric::Defined(0.75)
        );
    }

    #[test]
    fn threshold_counts() {
        let c = ConfusionCounts::at_threshold(&[0.9, 0.5, 0.2, 0.7], &[true, false, true, false], 0.5);
        assert_eq!(c, ConfusionCounts::new(1, 2, 0, 1));
    }
}
