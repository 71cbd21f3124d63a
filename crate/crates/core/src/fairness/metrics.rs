use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PRIVILEGED: &str = "male";

/// Ground truth, prediction, score and group for every patient of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub patient_ids: Vec<String>,
    pub y_true: Vec<u8>,
    pub y_pred: Vec<u8>,
    pub score: Vec<f64>,
    pub group: Vec<String>,
    pub privileged: String,
}

impl PredictionSet {
    pub fn new(
        patient_ids: Vec<String>,
        y_true: Vec<u8>,
        y_pred: Vec<u8>,
        score: Vec<f64>,
        group: Vec<String>,
        privileged: impl Into<String>,
    ) -> Result<Self> {
        let n = patient_ids.len();
        for len in [y_true.len(), y_pred.len(), score.len(), group.len()] {
            if len != n {
                return Err(Error::LengthMismatch { left: n, right: len });
            }
        }
        if let Some(v) = y_true.iter().chain(&y_pred).find(|&&v| v > 1) {
            return Err(Error::InvalidParams(format!("label {v} is not binary")));
        }
        if let Some(s) = score.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidParams(format!("score {s} outside [0, 1]")));
        }
        let set = Self {
            patient_ids,
            y_true,
            y_pred,
            score,
            group,
            privileged: privileged.into(),
        };
        let groups = set.groups();
        if groups.len() < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least two groups, found {groups:?}"
            )));
        }
        if !groups.contains(&set.privileged) {
            return Err(Error::EmptyGroup(set.privileged.clone()));
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.y_true.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_true.is_empty()
    }

    /// Distinct groups, sorted.
    pub fn groups(&self) -> Vec<String> {
        let mut g: Vec<String> = self.group.clone();
        g.sort();
        g.dedup();
        g
    }

    /// Every group other than the privileged one; pooled in the metrics.
    pub fn unprivileged(&self) -> Vec<String> {
        self.groups().into_iter().filter(|g| *g != self.privileged).collect()
    }

    pub fn with_privileged(&self, privileged: impl Into<String>) -> Result<Self> {
        let p = privileged.into();
        if !self.group.contains(&p) {
            return Err(Error::EmptyGroup(p));
        }
        Ok(Self {
            privileged: p,
            ..self.clone()
        })
    }

    /// CSV with columns patient_id, y_true, y_pred, score, group.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["patient_id", "y_true", "y_pred", "score", "group"])?;
        for i in 0..self.len() {
            w.write_record([
                self.patient_ids[i].as_str(),
                &self.y_true[i].to_string(),
                &self.y_pred[i].to_string(),
                &self.score[i].to_string(),
                &self.group[i],
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, privileged: &str) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let idx = [col("patient_id")?, col("y_true")?, col("y_pred")?, col("score")?, col("group")?];
        let (mut ids, mut yt, mut yp, mut sc, mut gr) = (vec![], vec![], vec![], vec![], vec![]);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| rec.get(idx[i]).unwrap_or("");
            let parse_err = |what: &str, v: &str| Error::Parse {
                what: format!("{what} on data row {}", line + 1),
                detail: format!("`{v}`"),
            };
            ids.push(field(0).to_string());
            yt.push(field(1).parse::<u8>().map_err(|_| parse_err("y_true", field(1)))?);
            yp.push(field(2).parse::<u8>().map_err(|_| parse_err("y_pred", field(2)))?);
            sc.push(field(3).parse::<f64>().map_err(|_| parse_err("score", field(3)))?);
            gr.push(field(4).to_string());
        }
        Self::new(ids, yt, yp, sc, gr, privileged)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    /// P(Ŷ=1); `None` for an empty group.
    pub fn positive_rate(&self) -> Option<f64> {
        ratio(self.tp + self.fp, self.total())
    }

    /// P(Ŷ=1 | Y=0).
    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    /// P(Ŷ=0 | Y=1).
    pub fn fnr(&self) -> Option<f64> {
        ratio(self.fn_, self.fn_ + self.tp)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion_by_group(p: &PredictionSet) -> BTreeMap<String, Confusion> {
    let mut out: BTreeMap<String, Confusion> = BTreeMap::new();
    for i in 0..p.len() {
        let c = out.entry(p.group[i].clone()).or_default();
        match (p.y_true[i], p.y_pred[i]) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (0, 0) => c.tn += 1,
            _ => c.fn_ += 1,
        }
    }
    out
}

pub fn positive_rate_by_group(p: &PredictionSet) -> BTreeMap<String, f64> {
    confusion_by_group(p)
        .into_iter()
        .map(|(g, c)| (g, c.positive_rate().expect("groups in the map are non-empty")))
        .collect()
}

/// Privileged and pooled unprivileged confusion counts.
fn sides(p: &PredictionSet) -> (Confusion, Confusion) {
    let by = confusion_by_group(p);
    let mut priv_ = Confusion::default();
    let mut unpriv = Confusion::default();
    for (g, c) in &by {
        if *g == p.privileged {
            priv_.add(c);
        } else {
            unpriv.add(c);
        }
    }
    (priv_, unpriv)
}

fn undefined(metric: &'static str, reason: &str) -> Error {
    Error::UndefinedMetric {
        metric,
        reason: reason.to_string(),
    }
}

pub fn dpr_from_counts(privileged: &Confusion, unprivileged: &Confusion) -> Result<f64> {
    const M: &str = "demographic parity ratio";
    let p = privileged.positive_rate().ok_or_else(|| undefined(M, "privileged group is empty"))?;
    let u = unprivileged.positive_rate().ok_or_else(|| undefined(M, "unprivileged group is empty"))?;
    if u == 0.0 {
        return Err(undefined(M, "unprivileged positive rate is 0"));
    }
    Ok(p / u)
}

pub fn eod_from_counts(privileged: &Confusion, unprivileged: &Confusion) -> Result<f64> {
    const M: &str = "equality of opportunity difference";
    let p = privileged.fnr().ok_or_else(|| undefined(M, "privileged group has no positives"))?;
    let u = unprivileged.fnr().ok_or_else(|| undefined(M, "unprivileged group has no positives"))?;
    Ok(u - p)
}

pub fn eor_from_counts(privileged: &Confusion, unprivileged: &Confusion) -> Result<f64> {
    const M: &str = "equalized odds ratio";
    let fpr_p = privileged.fpr().ok_or_else(|| undefined(M, "privileged group has no negatives"))?;
    let fpr_u = unprivileged.fpr().ok_or_else(|| undefined(M, "unprivileged group has no negatives"))?;
    let fnr_p = privileged.fnr().ok_or_else(|| undefined(M, "privileged group has no positives"))?;
    let fnr_u = unprivileged.fnr().ok_or_else(|| undefined(M, "unprivileged group has no positives"))?;
    if fpr_u == 0.0 {
        return Err(undefined(M, "unprivileged false positive rate is 0"));
    }
    if fnr_u == 0.0 {
        return Err(undefined(M, "unprivileged false negative rate is 0"));
    }
    Ok((fpr_p / fpr_u) * (fnr_p / fnr_u))
}

/// P(Ŷ=1 | privileged) / P(Ŷ=1 | unprivileged).
pub fn demographic_parity_ratio(p: &PredictionSet) -> Result<f64> {
    let (a, b) = sides(p);
    dpr_from_counts(&a, &b)
}

/// FNR(unprivileged) − FNR(privileged).
pub fn equality_of_opportunity_difference(p: &PredictionSet) -> Result<f64> {
    let (a, b) = sides(p);
    eod_from_counts(&a, &b)
}

/// [FPR(priv) / FPR(unpriv)] × [FNR(priv) / FNR(unpriv)].
pub fn equalized_odds_ratio(p: &PredictionSet) -> Result<f64> {
    let (a, b) = sides(p);
    eor_from_counts(&a, &b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessReport {
    pub privileged: String,
    pub unprivileged: Vec<String>,
    pub demographic_parity_ratio: Option<f64>,
    pub equality_of_opportunity_difference: Option<f64>,
    pub abs_equality_of_opportunity_difference: Option<f64>,
    /// Product of the FPR ratio and the FNR ratio.
    pub equalized_odds_ratio: Option<f64>,
    pub positive_rates: BTreeMap<String, f64>,
    pub confusion: BTreeMap<String, Confusion>,
    /// Metrics that hit a zero denominator, with the reason.
    pub undefined: BTreeMap<String, String>,
}

impl FairnessReport {
    pub fn compute(p: &PredictionSet) -> Self {
        let mut undefined_metrics = BTreeMap::new();
        let mut keep = |name: &str, r: Result<f64>| match r {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric { reason, .. }) => {
                undefined_metrics.insert(name.to_string(), reason);
                None
            }
            Err(e) => {
                undefined_metrics.insert(name.to_string(), e.to_string());
                None
            }
        };
        let dpr = keep("demographic_parity_ratio", demographic_parity_ratio(p));
        let eod = keep("equality_of_opportunity_difference", equality_of_opportunity_difference(p));
        let eor = keep("equalized_odds_ratio", equalized_odds_ratio(p));
        Self {
            privileged: p.privileged.clone(),
            unprivileged: p.unprivileged(),
            demographic_parity_ratio: dpr,
            equality_of_opportunity_difference: eod,
            abs_equality_of_opportunity_difference: eod.map(f64::abs),
            equalized_odds_ratio: eor,
            positive_rates: positive_rate_by_group(p),
            confusion: confusion_by_group(p),
            undefined: undefined_metrics,
        }
    }
}
