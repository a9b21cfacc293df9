//! Detection scores against phantom truth and diameter relative-error statistics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::phantom::{render_phantom, PhantomSpec, TruthStenosis};
use crate::pipeline::{analyze_auto, prepare};
use crate::quant::StenosisFinding;

/// Default matching radius (px).
pub const MATCH_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    /// Index into the findings passed to [`match_findings`].
    pub finding: usize,
    /// Truth stenosis id.
    pub truth: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fp: usize,
    pub matches: Vec<Match>,
}

impl DetectionOutcome {
    /// Sums counts; matches are concatenated.
    pub fn merge(&mut self, other: &DetectionOutcome) {
        self.tp += other.tp;
        self.fn_ += other.fn_;
        self.fp += other.fp;
        self.matches.extend_from_slice(&other.matches);
    }
}

fn finding_key(f: &StenosisFinding) -> (usize, [usize; 2]) {
    (f.segment_id, f.point_range)
}

/// Greedy nearest-pair matching of finding locations to truth locations within
/// `radius`. Pairs are taken by increasing distance, then finding `(segment, range)`,
/// then truth id, so the result does not depend on input order.
pub fn match_findings(findings: &[StenosisFinding], truths: &[TruthStenosis], radius: f64) -> DetectionOutcome {
    let mut pairs = Vec::new();
    for (fi, f) in findings.iter().enumerate() {
        for t in truths {
            let d = f.location.distance(t.location);
            if d <= radius {
                pairs.push((d, fi, t.id));
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(finding_key(&findings[a.1]).cmp(&finding_key(&findings[b.1])))
            .then(a.2.cmp(&b.2))
    });
    let mut used_f = vec![false; findings.len()];
    let mut used_t = Vec::new();
    let mut matches = Vec::new();
    for (distance, fi, ti) in pairs {
        if used_f[fi] || used_t.contains(&ti) {
            continue;
        }
        used_f[fi] = true;
        used_t.push(ti);
        matches.push(Match {
            finding: fi,
            truth: ti,
            distance,
        });
    }
    DetectionOutcome {
        tp: matches.len(),
        fn_: truths.len() - matches.len(),
        fp: findings.len() - matches.len(),
        matches,
    }
}

/// Sensitivity, precision and F1; `None` where a denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub sen: Option<f64>,
    pub pre: Option<f64>,
    pub f1: Option<f64>,
}

/// Harmonic mean of sensitivity and precision; `None` when both are zero.
pub fn f1_score(sen: f64, pre: f64) -> Option<f64> {
    let sum = sen + pre;
    (sum > 0.0).then(|| 2.0 * sen * pre / sum)
}

pub fn sen_pre_f1(outcome: &DetectionOutcome) -> Scores {
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let sen = ratio(outcome.tp, outcome.tp + outcome.fn_);
    let pre = ratio(outcome.tp, outcome.tp + outcome.fp);
    let f1 = match (sen, pre) {
        (Some(s), Some(p)) => f1_score(s, p),
        _ => None,
    };
    Scores { sen, pre, f1 }
}

/// Per-point relative errors with population statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct REStats {
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl REStats {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
            values,
        })
    }
}

/// `|estimated - real| / real` elementwise.
pub fn relative_error(estimated: &[f64], real: &[f64]) -> Result<REStats> {
    if estimated.len() != real.len() {
        return Err(Error::LengthMismatch(estimated.len(), real.len()));
    }
    if let Some((i, &r)) = real.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::NonPositiveReference(r, i));
    }
    REStats::from_values(estimated.iter().zip(real).map(|(e, r)| (e - r).abs() / r).collect())
}

/// Aligned `name min max mean std` table.
pub fn re_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a REStats)>) -> String {
    let rows: Vec<(&str, &REStats)> = rows.into_iter().collect();
    let w = rows.iter().map(|r| r.0.len()).chain(["name".len()]).max().unwrap_or(4);
    let mut out = format!("{:<w$}  {:>8}  {:>8}  {:>8}  {:>8}\n", "name", "min", "max", "mean", "std");
    for (name, s) in rows {
        let _ = writeln!(out, "{name:<w$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}", s.min, s.max, s.mean, s.std);
    }
    out
}

/// Outcome of the automatic pipeline on one phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomEval {
    pub name: String,
    pub findings: Vec<StenosisFinding>,
    pub detection: DetectionOutcome,
    /// Relative error of every measured point that lies inside the vessel, against
    /// the analytic cross-section width there.
    pub diameter: Option<REStats>,
}

/// Runs the automatic pipeline on a rendered phantom. Truth stenoses whose degree is
/// not below `stenosis_tau_3` are not expected to be found and are left out of the
/// detection counts.
pub fn evaluate_phantom(spec: &PhantomSpec, seed: u64, cfg: &Config, radius: f64) -> Result<PhantomEval> {
    let (img, truth) = render_phantom(spec, seed)?;
    let prep = prepare(&img, cfg)?;
    let auto = analyze_auto(&prep, cfg)?;
    let mut est = Vec::new();
    let mut real = Vec::new();
    for s in &auto.segments {
        for (p, d) in s.points.iter().zip(&s.diameters) {
            if let (Some(d), Some(w)) = (d, truth.cross_section(p.pos)) {
                est.push(*d);
                real.push(w);
            }
        }
    }
    let gradable: Vec<TruthStenosis> = truth
        .stenoses
        .iter()
        .filter(|t| t.degree < cfg.stenosis_tau_3)
        .cloned()
        .collect();
    Ok(PhantomEval {
        name: spec.name.clone(),
        detection: match_findings(&auto.findings, &gradable, radius),
        findings: auto.findings,
        diameter: relative_error(&est, &real).ok(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEval {
    pub phantoms: Vec<PhantomEval>,
    pub detection: DetectionOutcome,
    pub scores: Scores,
}

pub fn evaluate_suite(specs: &[PhantomSpec], seed: u64, cfg: &Config, radius: f64) -> Result<SuiteEval> {
    let phantoms = specs
        .iter()
        .map(|s| evaluate_phantom(s, seed, cfg, radius))
        .collect::<Result<Vec<_>>>()?;
    let mut detection = DetectionOutcome::default();
    for p in &phantoms {
        detection.merge(&p.detection);
    }
    let scores = sen_pre_f1(&detection);
    Ok(SuiteEval {
        phantoms,
        detection,
        scores,
    })
}

impl SuiteEval {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("evaluation serializes")
    }

    /// Detection counts and the diameter table.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.3}"));
        let mut out = format!(
            "tp {}  fn {}  fp {}  sen {}  pre {}  f1 {}\n\n",
            self.detection.tp,
            self.detection.fn_,
            self.detection.fp,
            opt(self.scores.sen),
            opt(self.scores.pre),
            opt(self.scores.f1)
        );
        out.push_str(&re_table(
            self.phantoms.iter().filter_map(|p| p.diameter.as_ref().map(|d| (p.name.as_str(), d))),
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn finding(seg: usize, x: f64, y: f64) -> StenosisFinding {
        StenosisFinding {
            segment_id: seg,
            point_range: [0, 1],
            location: Point2::new(x, y),
            min_degree: 0.5,
            mean_degree: 0.6,
        }
    }

    fn truth(id: usize, x: f64, y: f64) -> TruthStenosis {
        TruthStenosis {
            id,
            path: 0,
            s_range: [0.0, 1.0],
            location: Point2::new(x, y),
            degree: 0.5,
        }
    }

    #[test]
    fn matching_examples() {
        let o = match_findings(&[finding(0, 1.0, 1.0)], &[truth(0, 1.0, 1.0)], 10.0);
        assert_eq!((o.tp, o.fn_, o.fp), (1, 0, 0));
        let o = match_findings(&[], &[truth(0, 0.0, 0.0), truth(1, 50.0, 0.0)], 10.0);
        assert_eq!((o.tp, o.fn_, o.fp), (0, 2, 0));
        let o = match_findings(&[finding(0, 2.0, 0.0), finding(1, 3.0, 0.0)], &[truth(0, 0.0, 0.0)], 10.0);
        assert_eq!((o.tp, o.fn_, o.fp), (1, 0, 1));
        assert_eq!(o.matches[0].finding, 0);
    }

    #[test]
    fn score_examples() {
        let o = DetectionOutcome {
            tp: 3,
            fn_: 1,
            fp: 0,
            matches: vec![],
        };
        let s = sen_pre_f1(&o);
        assert_eq!(s.sen, Some(0.75));
        assert_eq!(s.pre, Some(1.0));
        assert!((s.f1.unwrap() - 6.0 / 7.0).abs() < 1e-12);
        let s = sen_pre_f1(&DetectionOutcome::default());
        assert_eq!(s, Scores { sen: None, pre: None, f1: None });
        assert_eq!(f1_score(0.0, 0.0), None);
    }

    #[test]
    fn re_examples() {
        let s = relative_error(&[1.1], &[1.0]).unwrap();
        assert!((s.mean - 0.1).abs() < 1e-12);
        let s = relative_error(&[3.0, 5.0], &[3.0, 5.0]).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
        let s = relative_error(&[2.0, 4.0], &[4.0, 4.0]).unwrap();
        assert_eq!(s.values, vec![0.5, 0.0]);
        assert_eq!((s.mean, s.std, s.min, s.max), (0.25, 0.25, 0.0, 0.5));
        assert!(matches!(relative_error(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(relative_error(&[1.0], &[0.0]), Err(Error::NonPositiveReference(_, 0))));
        assert!(matches!(relative_error(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn table_is_aligned() {
        let a = relative_error(&[1.1], &[1.0]).unwrap();
        let t = re_table([("tube", &a), ("a_longer_name", &a)]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.len() == lines[0].len()));
    }
}
