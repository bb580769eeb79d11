//! Unconditional survival estimators and the incidence/latency split of a
//! mixture cure model.
//!
//! Every estimator here is a product-limit construction over the
//! observations sorted by time. Equal times are ordered uncensored first,
//! then known cures, then plain censored observations, with input order
//! breaking any remaining ties.
//!
//! - [`km_estimate`] treats known cures as ordinary censoring.
//! - [`km_estimate_reduced`] drops known cures before estimating.
//! - [`empirical_estimate`] uses the uncensored times only.
//! - [`npmcm_estimate`] keeps known cures in the risk set after their
//!   observation time, so the curve levels off at the cure fraction.
//!
//! [`event_probability`] and [`latency`] turn a curve into the event
//! probability `p = 1 - S(inf)` and the latency curve
//! `S0(t) = (S(t) - (1 - p)) / p`.

use std::cmp::Ordering;
use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted age, in years.
pub const MAX_AGE: f64 = 130.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sex {
    type Err = String;

    /// Accepts `male`/`female`, `m`/`f` and the 0 = male, 1 = female coding.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" | "0" => Ok(Sex::Male),
            "female" | "f" | "1" => Ok(Sex::Female),
            other => Err(format!("unrecognised sex `{other}`")),
        }
    }
}

/// One subject's follow-up: observed time in days, whether the event was
/// seen, and whether the subject is known never to experience it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub event: bool,
    pub known_cure: bool,
    pub age: Option<f64>,
    pub sex: Option<Sex>,
}

impl Observation {
    pub fn new(time: f64, event: bool, known_cure: bool) -> Result<Self> {
        let obs = Observation {
            time,
            event,
            known_cure,
            age: None,
            sex: None,
        };
        obs.validate()?;
        Ok(obs)
    }

    /// Event observed at `time`. Panics on a negative or non-finite time.
    pub fn event(time: f64) -> Self {
        Self::new(time, true, false).expect("valid event time")
    }

    /// Right censored at `time`. Panics on a negative or non-finite time.
    pub fn censored(time: f64) -> Self {
        Self::new(time, false, false).expect("valid censoring time")
    }

    /// Known cure observed at `time`. Panics on a negative or non-finite time.
    pub fn cured(time: f64) -> Self {
        Self::new(time, false, true).expect("valid cure time")
    }

    pub fn with_age(mut self, age: f64) -> Self {
        self.age = Some(age);
        self
    }

    pub fn with_sex(mut self, sex: Sex) -> Self {
        self.sex = Some(sex);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.time.is_finite() || self.time < 0.0 {
            return Err(Error::InvalidTime(self.time));
        }
        if self.event && self.known_cure {
            return Err(Error::InvalidObservation(
                "event and known_cure are both set".into(),
            ));
        }
        if let Some(age) = self.age {
            if !age.is_finite() || !(0.0..=MAX_AGE).contains(&age) {
                return Err(Error::InvalidObservation(format!(
                    "age {age} outside [0, {MAX_AGE}]"
                )));
            }
        }
        Ok(())
    }

    /// Tie class at equal times: events, then known cures, then censored.
    pub(crate) fn tie_class(&self) -> u8 {
        if self.event {
            0
        } else if self.known_cure {
            1
        } else {
            2
        }
    }
}

/// Right-continuous step estimate of a survival function.
///
/// `values[k]` holds the estimate on `[jump_times[k], jump_times[k + 1])`;
/// before the first jump the curve is 1 and after the last it stays at the
/// plateau. `max_time` records the largest observed time behind the estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRepr", into = "CurveRepr")]
pub struct SurvivalCurve {
    jump_times: Vec<f64>,
    values: Vec<f64>,
    max_time: f64,
}

#[derive(Serialize, Deserialize)]
struct CurveRepr {
    jump_times: Vec<f64>,
    values: Vec<f64>,
    plateau: f64,
    max_time: f64,
}

impl TryFrom<CurveRepr> for SurvivalCurve {
    type Error = Error;

    fn try_from(repr: CurveRepr) -> Result<Self> {
        let curve = SurvivalCurve::new(repr.jump_times, repr.values, repr.max_time)?;
        if (curve.plateau() - repr.plateau).abs() > 1e-12 {
            return Err(Error::InvalidCurve(format!(
                "plateau {} does not match last value {}",
                repr.plateau,
                curve.plateau()
            )));
        }
        Ok(curve)
    }
}

impl From<SurvivalCurve> for CurveRepr {
    fn from(curve: SurvivalCurve) -> Self {
        let plateau = curve.plateau();
        CurveRepr {
            jump_times: curve.jump_times,
            values: curve.values,
            plateau,
            max_time: curve.max_time,
        }
    }
}

impl SurvivalCurve {
    pub fn new(jump_times: Vec<f64>, values: Vec<f64>, max_time: f64) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::InvalidCurve(format!(
                "{} jump times but {} values",
                jump_times.len(),
                values.len()
            )));
        }
        for (k, &t) in jump_times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidCurve(format!(
                    "jump time {t} is not a valid time"
                )));
            }
            if k > 0 && t <= jump_times[k - 1] {
                return Err(Error::InvalidCurve(
                    "jump times must be strictly increasing".into(),
                ));
            }
        }
        let mut previous = 1.0;
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidCurve(format!("value {v} outside [0, 1]")));
            }
            if v > previous {
                return Err(Error::InvalidCurve("values must be non-increasing".into()));
            }
            previous = v;
        }
        let last = jump_times.last().copied().unwrap_or(0.0);
        if !max_time.is_finite() || max_time < last {
            return Err(Error::InvalidCurve(format!(
                "max_time {max_time} precedes the last jump {last}"
            )));
        }
        Ok(SurvivalCurve {
            jump_times,
            values,
            max_time,
        })
    }

    /// Flat curve at 1 with no jumps.
    pub fn constant_one(max_time: f64) -> Self {
        SurvivalCurve {
            jump_times: Vec::new(),
            values: Vec::new(),
            max_time: max_time.max(0.0),
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_time(&self) -> f64 {
        self.max_time
    }

    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    /// Value beyond the largest observation, standing in for `S(inf)`.
    pub fn plateau(&self) -> f64 {
        self.values.last().copied().unwrap_or(1.0)
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.jump_times.partition_point(|&x| x <= t);
        if idx == 0 {
            1.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Value just before `t`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let idx = self.jump_times.partition_point(|&x| x < t);
        if idx == 0 {
            1.0
        } else {
            self.values[idx - 1]
        }
    }

    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.jump_times
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Probability mass removed at each jump.
    pub fn jump_masses(&self) -> Vec<f64> {
        let mut previous = 1.0;
        self.values
            .iter()
            .map(|&v| {
                let mass = previous - v;
                previous = v;
                mass
            })
            .collect()
    }

    /// Number of jumps with a strictly positive drop.
    pub fn effective_jumps(&self) -> usize {
        self.jump_masses().iter().filter(|&&m| m > 0.0).count()
    }

    /// Smallest jump time at which the curve is at or below `level`.
    pub fn quantile_time(&self, level: f64) -> Option<f64> {
        self.jumps().find(|&(_, v)| v <= level).map(|(t, _)| t)
    }

    /// `(t, S)` pairs: the `(0, 1)` anchor, one row per jump, and a final
    /// row at `max_time` carrying the plateau.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut rows = Vec::with_capacity(self.len() + 2);
        rows.push((0.0, 1.0));
        rows.extend(self.jumps());
        rows.push((self.max_time, self.plateau()));
        rows
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "survival"])?;
        for (t, s) in self.points() {
            w.write_record([format_time(t), format_real(s)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Reads the format produced by [`SurvivalCurve::write_csv`]. Rows that
    /// repeat the previous value are treated as non-jumps; the last row sets
    /// `max_time`.
    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let t_col = column_index(&headers, "t")?;
        let s_col = column_index(&headers, "survival")?;
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = k + 2;
            let t = parse_real(&rec, t_col, "t", row)?;
            let s = parse_real(&rec, s_col, "survival", row)?;
            rows.push((t, s));
        }
        let mut jump_times: Vec<f64> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut current = 1.0;
        let mut max_time: f64 = 0.0;
        for (t, s) in rows {
            max_time = max_time.max(t);
            if s == current {
                continue;
            }
            if s > current {
                return Err(Error::InvalidCurve(format!(
                    "survival increases to {s} at t={t}"
                )));
            }
            match jump_times.last() {
                Some(&last) if last == t => {
                    *values.last_mut().expect("paired with jump_times") = s;
                }
                _ => {
                    jump_times.push(t);
                    values.push(s);
                }
            }
            current = s;
        }
        SurvivalCurve::new(jump_times, values, max_time)
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_real(rec: &csv::StringRecord, col: usize, name: &str, row: usize) -> Result<f64> {
    let raw = rec.get(col).unwrap_or("").trim();
    raw.parse::<f64>().map_err(|e| Error::Field {
        row,
        column: name.to_string(),
        message: format!("`{raw}`: {e}"),
    })
}

/// Times print without a trailing `.0` when integral.
pub fn format_time(t: f64) -> String {
    format!("{t}")
}

/// Shortest representation that round-trips exactly, always with a decimal
/// point (`1.0`, `0.375`).
pub fn format_real(x: f64) -> String {
    format!("{x:?}")
}

/// Event probability `p` together with the latency curve `S0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CureModelEstimate {
    pub p: f64,
    pub latency: SurvivalCurve,
}

fn validate_all(observations: &[Observation]) -> Result<()> {
    if observations.is_empty() {
        return Err(Error::NoObservations);
    }
    observations.iter().try_for_each(Observation::validate)
}

/// Sort order shared by every product-limit estimator.
pub(crate) fn product_limit_order(observations: &[Observation]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..observations.len()).collect();
    order.sort_by(|&a, &b| {
        let (oa, ob) = (&observations[a], &observations[b]);
        oa.time
            .total_cmp(&ob.time)
            .then(oa.tie_class().cmp(&ob.tie_class()))
            .then(a.cmp(&b))
    });
    order
}

/// Shared product-limit engine.
///
/// Without weights every subject counts once; with weights the risk set is
/// the weight mass still under observation. When `cures_stay_at_risk` is set
/// known cures keep contributing to the risk set after their own time.
pub(crate) fn product_limit(
    observations: &[Observation],
    weights: Option<&[f64]>,
    cures_stay_at_risk: bool,
) -> SurvivalCurve {
    let order = product_limit_order(observations);
    let n = order.len();
    let weight = |idx: usize| weights.map_or(1.0, |w| w[idx]);

    // Weight still at risk from position i onwards, in sorted order.
    let suffix: Option<Vec<f64>> = weights.map(|w| {
        let mut acc = vec![0.0; n + 1];
        for pos in (0..n).rev() {
            acc[pos] = acc[pos + 1] + w[order[pos]];
        }
        acc
    });

    let max_time = order
        .iter()
        .filter(|&&idx| weight(idx) > 0.0)
        .map(|&idx| observations[idx].time)
        .fold(0.0, f64::max);

    let mut jump_times = Vec::new();
    let mut values = Vec::new();
    let mut surv = 1.0;
    let mut cured_count = 0usize;
    let mut cured_weight = 0.0;
    let mut pos = 0;
    while pos < n {
        let t = observations[order[pos]].time;
        let mut jumped = false;
        while pos < n && observations[order[pos]].time.total_cmp(&t) == Ordering::Equal {
            let idx = order[pos];
            let obs = &observations[idx];
            if obs.known_cure && cures_stay_at_risk {
                cured_count += 1;
                cured_weight += weight(idx);
            }
            if obs.event && weight(idx) > 0.0 {
                let factor = match &suffix {
                    None => {
                        let extra = if cures_stay_at_risk { cured_count } else { 0 };
                        1.0 - 1.0 / (n - pos + extra) as f64
                    }
                    Some(acc) => {
                        let extra = if cures_stay_at_risk {
                            cured_weight
                        } else {
                            0.0
                        };
                        1.0 - weight(idx) / (acc[pos] + extra)
                    }
                };
                surv *= factor.max(0.0);
                jumped = true;
            }
            pos += 1;
        }
        if jumped {
            jump_times.push(t);
            values.push(surv.clamp(0.0, 1.0));
        }
    }

    SurvivalCurve {
        jump_times,
        values,
        max_time,
    }
}

/// Kaplan-Meier estimate; known cures count as ordinary censoring.
pub fn km_estimate(observations: &[Observation]) -> Result<SurvivalCurve> {
    validate_all(observations)?;
    Ok(product_limit(observations, None, false))
}

/// Kaplan-Meier estimate on the subjects not known to be cured.
pub fn km_estimate_reduced(observations: &[Observation]) -> Result<SurvivalCurve> {
    validate_all(observations)?;
    let susceptible: Vec<Observation> = observations
        .iter()
        .copied()
        .filter(|o| !o.known_cure)
        .collect();
    if susceptible.is_empty() {
        return Err(Error::NoSusceptibleObservations);
    }
    Ok(product_limit(&susceptible, None, false))
}

/// Empirical survival of the uncensored times, `#{t_i > t} / #uncensored`.
///
/// Computed as the product-limit estimate over the uncensored subsample,
/// which is the same step function.
pub fn empirical_estimate(observations: &[Observation]) -> Result<SurvivalCurve> {
    validate_all(observations)?;
    let uncensored: Vec<Observation> = observations.iter().copied().filter(|o| o.event).collect();
    if uncensored.is_empty() {
        return Err(Error::NoObservedEvents);
    }
    Ok(product_limit(&uncensored, None, false))
}

/// Product-limit estimate with known cures.
///
/// At the i-th ordered observation with an event the factor is
/// `1 - 1 / (n - i + 1 + sum_{j <= i} x_j)`: known cures never leave the
/// risk set. Without known cures this is exactly [`km_estimate`].
pub fn npmcm_estimate(observations: &[Observation]) -> Result<SurvivalCurve> {
    validate_all(observations)?;
    Ok(product_limit(observations, None, true))
}

/// `p = 1 - S(inf)`, read off the plateau.
pub fn event_probability(curve: &SurvivalCurve) -> f64 {
    1.0 - curve.plateau()
}

/// Share of subjects whose event was observed.
pub fn empirical_event_probability(observations: &[Observation]) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::NoObservations);
    }
    let events = observations.iter().filter(|o| o.event).count();
    Ok(events as f64 / observations.len() as f64)
}

/// Splits a curve into event probability and latency curve,
/// `S0(t) = (S(t) - (1 - p)) / p`.
pub fn latency(curve: &SurvivalCurve) -> Result<CureModelEstimate> {
    let plateau = curve.plateau();
    let p = 1.0 - plateau;
    if p <= 0.0 {
        return Err(Error::ZeroEventProbability);
    }
    // (S - plateau) rather than (S - (1 - p)) so the last jump lands on 0 exactly.
    let values = curve
        .values()
        .iter()
        .map(|&s| ((s - plateau) / p).clamp(0.0, 1.0))
        .collect();
    let latency = SurvivalCurve {
        jump_times: curve.jump_times().to_vec(),
        values,
        max_time: curve.max_time(),
    };
    Ok(CureModelEstimate { p, latency })
}
