//! Line-list parsing and derivation of endpoint-specific observation sets.
//!
//! Each endpoint maps an admitted patient to one observation: the event was
//! seen, the patient is known never to reach it (a competing outcome was
//! seen), or follow-up was cut at the study end.

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{AgeBand, Demographics};
use crate::survival::{format_time, Observation, Sex, MAX_AGE};

pub const LINELIST_COLUMNS: [&str; 9] = [
    "id",
    "sex",
    "age",
    "date_diagnosis",
    "date_hw_admission",
    "date_icu_admission",
    "date_icu_exit",
    "date_discharge",
    "date_death",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineListRecord {
    pub id: String,
    pub sex: Option<Sex>,
    pub age: Option<f64>,
    pub date_diagnosis: Option<NaiveDate>,
    pub date_hw_admission: Option<NaiveDate>,
    pub date_icu_admission: Option<NaiveDate>,
    pub date_icu_exit: Option<NaiveDate>,
    pub date_discharge: Option<NaiveDate>,
    pub date_death: Option<NaiveDate>,
}

/// How the first ward stay ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WardOutcome {
    ToIcu(NaiveDate),
    Death(NaiveDate),
    Discharge(NaiveDate),
    Ongoing,
}

/// How the first ICU stay ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcuOutcome {
    Death(NaiveDate),
    Discharge(NaiveDate),
    Ongoing,
}

impl LineListRecord {
    pub fn is_admitted(&self) -> bool {
        self.date_hw_admission.is_some()
    }

    pub fn ward_outcome(&self) -> WardOutcome {
        if let Some(icu) = self.date_icu_admission {
            WardOutcome::ToIcu(icu)
        } else if let Some(d) = self.date_death {
            WardOutcome::Death(d)
        } else if let Some(d) = self.date_discharge {
            WardOutcome::Discharge(d)
        } else {
            WardOutcome::Ongoing
        }
    }

    /// `None` for patients never admitted to ICU. A death on or before the
    /// ICU exit date is an ICU death; a missing exit date with a hospital
    /// discharge counts as leaving ICU alive on the discharge date.
    pub fn icu_outcome(&self) -> Option<IcuOutcome> {
        self.date_icu_admission?;
        Some(
            match (self.date_death, self.date_icu_exit, self.date_discharge) {
                (Some(death), exit, _) if exit.is_none_or(|e| death <= e) => {
                    IcuOutcome::Death(death)
                }
                (_, Some(exit), _) => IcuOutcome::Discharge(exit),
                (_, None, Some(discharge)) => IcuOutcome::Discharge(discharge),
                _ => IcuOutcome::Ongoing,
            },
        )
    }

    pub fn hospital_exit(&self) -> Option<NaiveDate> {
        self.date_death.or(self.date_discharge)
    }

    /// Left ICU alive and later died in the ward.
    pub fn died_after_icu_exit(&self) -> bool {
        matches!((self.date_icu_exit, self.date_death), (Some(exit), Some(death)) if death > exit)
    }

    fn check_chronology(
        &self,
        study_end: NaiveDate,
    ) -> std::result::Result<(), (String, &'static str)> {
        let named = [
            ("date_diagnosis", self.date_diagnosis),
            ("date_hw_admission", self.date_hw_admission),
            ("date_icu_admission", self.date_icu_admission),
            ("date_icu_exit", self.date_icu_exit),
            ("date_discharge", self.date_discharge),
            ("date_death", self.date_death),
        ];
        for (col, date) in named {
            if let Some(d) = date {
                if d > study_end {
                    return Err((format!("{d} is after the study end {study_end}"), col));
                }
            }
        }
        if self.date_death.is_some() && self.date_discharge.is_some() {
            return Err((
                "both death and discharge dates present".into(),
                "date_discharge",
            ));
        }
        let Some(admission) = self.date_hw_admission else {
            for (col, date) in [
                ("date_icu_admission", self.date_icu_admission),
                ("date_icu_exit", self.date_icu_exit),
                ("date_discharge", self.date_discharge),
            ] {
                if date.is_some() {
                    return Err((
                        "hospital dates present without a ward admission".into(),
                        col,
                    ));
                }
            }
            return Ok(());
        };
        if self.date_icu_exit.is_some() && self.date_icu_admission.is_none() {
            return Err(("ICU exit without ICU admission".into(), "date_icu_exit"));
        }
        let before = |a: Option<NaiveDate>, b: Option<NaiveDate>| matches!((a, b), (Some(a), Some(b)) if b < a);
        let checks = [
            (
                Some(admission),
                self.date_icu_admission,
                "date_icu_admission",
                "ICU admission before ward admission",
            ),
            (
                self.date_icu_admission,
                self.date_icu_exit,
                "date_icu_exit",
                "ICU exit before ICU admission",
            ),
            (
                Some(admission),
                self.date_death,
                "date_death",
                "death before admission",
            ),
            (
                Some(admission),
                self.date_discharge,
                "date_discharge",
                "discharge before admission",
            ),
            (
                self.date_icu_admission,
                self.date_death,
                "date_death",
                "death before ICU admission",
            ),
            (
                self.date_icu_admission,
                self.date_discharge,
                "date_discharge",
                "discharge before ICU admission",
            ),
            (
                self.date_icu_exit,
                self.date_discharge,
                "date_discharge",
                "discharge before ICU exit",
            ),
        ];
        for (a, b, col, msg) in checks {
            if before(a, b) {
                return Err((msg.to_string(), col));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Parse,
    Chronology,
    /// Later admission of a patient already seen; only the first is kept.
    LaterAdmission,
    /// Died in the ward after leaving ICU alive.
    PostIcuWardDeath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDiagnostic {
    /// 1-based line number in the source, header included.
    pub row: usize,
    pub id: String,
    pub column: Option<String>,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}", self.row)?;
        if let Some(col) = &self.column {
            write!(f, ", column `{col}`")?;
        }
        write!(f, " (id `{}`): {}", self.id, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LineList {
    pub records: Vec<LineListRecord>,
    pub rejected: Vec<RowDiagnostic>,
    pub notes: Vec<RowDiagnostic>,
}

impl LineList {
    /// Fails if any row was rejected.
    pub fn into_strict(self) -> Result<Vec<LineListRecord>> {
        if self.rejected.is_empty() {
            Ok(self.records)
        } else {
            Err(Error::RejectedRows(self.rejected))
        }
    }
}

/// Parses a line-list CSV. Columns may appear in any order; empty fields
/// mean absent. Rows that fail to parse or are chronologically inconsistent
/// are returned in [`LineList::rejected`]. When an id repeats, only the row
/// with the earliest ward admission is kept.
pub fn parse_linelist<R: io::Read>(source: R, study_end: NaiveDate) -> Result<LineList> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rdr.headers()?.clone();
    let mut cols = HashMap::new();
    for name in LINELIST_COLUMNS {
        let idx = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        cols.insert(name, idx);
    }

    let mut out = LineList::default();
    let mut kept: Vec<(usize, LineListRecord)> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();

    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec?;
        let field = |name: &str| rec.get(cols[name]).unwrap_or("");
        let id = field("id").to_string();
        let reject = |column: Option<&str>, kind, message: String| RowDiagnostic {
            row,
            id: id.clone(),
            column: column.map(str::to_string),
            kind,
            message,
        };

        let parsed = (|| -> std::result::Result<LineListRecord, RowDiagnostic> {
            if id.is_empty() {
                return Err(reject(Some("id"), DiagnosticKind::Parse, "empty id".into()));
            }
            let sex = match field("sex") {
                "" => None,
                s => Some(
                    s.parse::<Sex>()
                        .map_err(|e| reject(Some("sex"), DiagnosticKind::Parse, e))?,
                ),
            };
            let age = match field("age") {
                "" => None,
                s => {
                    let a: f64 = s.parse().map_err(|e| {
                        reject(Some("age"), DiagnosticKind::Parse, format!("`{s}`: {e}"))
                    })?;
                    if !a.is_finite() || !(0.0..=MAX_AGE).contains(&a) {
                        return Err(reject(
                            Some("age"),
                            DiagnosticKind::Parse,
                            format!("age {a} outside [0, {MAX_AGE}]"),
                        ));
                    }
                    Some(a)
                }
            };
            let date = |name: &str| -> std::result::Result<Option<NaiveDate>, RowDiagnostic> {
                match field(name) {
                    "" => Ok(None),
                    s => NaiveDate::parse_from_str(s, "%Y-%m-%d")
                        .map(Some)
                        .map_err(|e| {
                            reject(
                                Some(name),
                                DiagnosticKind::Parse,
                                format!("`{s}` is not an ISO date: {e}"),
                            )
                        }),
                }
            };
            let record = LineListRecord {
                id: id.clone(),
                sex,
                age,
                date_diagnosis: date("date_diagnosis")?,
                date_hw_admission: date("date_hw_admission")?,
                date_icu_admission: date("date_icu_admission")?,
                date_icu_exit: date("date_icu_exit")?,
                date_discharge: date("date_discharge")?,
                date_death: date("date_death")?,
            };
            record
                .check_chronology(study_end)
                .map_err(|(msg, col)| reject(Some(col), DiagnosticKind::Chronology, msg))?;
            Ok(record)
        })();

        let record = match parsed {
            Ok(r) => r,
            Err(diag) => {
                out.rejected.push(diag);
                continue;
            }
        };
        if record.died_after_icu_exit() {
            out.notes.push(reject(
                Some("date_death"),
                DiagnosticKind::PostIcuWardDeath,
                "left ICU alive, later died in the ward; ICU outcome recorded as discharge".into(),
            ));
        }

        match by_id.get(&record.id) {
            None => {
                by_id.insert(record.id.clone(), kept.len());
                kept.push((row, record));
            }
            Some(&slot) => {
                let (prev_row, prev) = &kept[slot];
                let newer_is_first = match (record.date_hw_admission, prev.date_hw_admission) {
                    (Some(a), Some(b)) => a < b,
                    (Some(_), None) => true,
                    _ => false,
                };
                let dropped_row = if newer_is_first { *prev_row } else { row };
                out.notes.push(RowDiagnostic {
                    row: dropped_row,
                    id: record.id.clone(),
                    column: Some("date_hw_admission".into()),
                    kind: DiagnosticKind::LaterAdmission,
                    message: "later admission of a repeated id; first admission kept".into(),
                });
                if newer_is_first {
                    kept[slot] = (row, record);
                }
            }
        }
    }
    out.records = kept.into_iter().map(|(_, r)| r).collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoint {
    HwToIcu,
    HwDeath,
    HwDischarge,
    IcuDeath,
    IcuDischarge,
    HospitalTotal,
}

impl Endpoint {
    pub const ALL: [Endpoint; 6] = [
        Endpoint::HwToIcu,
        Endpoint::HwDeath,
        Endpoint::HwDischarge,
        Endpoint::IcuDeath,
        Endpoint::IcuDischarge,
        Endpoint::HospitalTotal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Endpoint::HwToIcu => "hw-to-icu",
            Endpoint::HwDeath => "hw-death",
            Endpoint::HwDischarge => "hw-discharge",
            Endpoint::IcuDeath => "icu-death",
            Endpoint::IcuDischarge => "icu-discharge",
            Endpoint::HospitalTotal => "hospital-total",
        }
    }

    pub fn requires_icu(self) -> bool {
        matches!(self, Endpoint::IcuDeath | Endpoint::IcuDischarge)
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Endpoint::ALL
            .into_iter()
            .find(|e| e.as_str() == norm)
            .ok_or_else(|| format!("unknown endpoint `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointDataset {
    pub endpoint: Endpoint,
    pub observations: Vec<Observation>,
    /// Records that do not enter this endpoint (not admitted, or no ICU stay
    /// for the ICU endpoints).
    pub skipped: usize,
}

fn days(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64
}

/// Observation for one record, or `None` when the record does not enter
/// the endpoint.
pub fn derive_observation(
    record: &LineListRecord,
    endpoint: Endpoint,
    study_end: NaiveDate,
) -> Option<Observation> {
    let admission = record.date_hw_admission?;
    let (start, end, event, known_cure) = match endpoint {
        Endpoint::HwToIcu | Endpoint::HwDeath | Endpoint::HwDischarge => {
            let (end, which) = match record.ward_outcome() {
                WardOutcome::ToIcu(d) => (d, Some(Endpoint::HwToIcu)),
                WardOutcome::Death(d) => (d, Some(Endpoint::HwDeath)),
                WardOutcome::Discharge(d) => (d, Some(Endpoint::HwDischarge)),
                WardOutcome::Ongoing => (study_end, None),
            };
            match which {
                Some(e) if e == endpoint => (admission, end, true, false),
                Some(_) => (admission, end, false, true),
                None => (admission, end, false, false),
            }
        }
        Endpoint::IcuDeath | Endpoint::IcuDischarge => {
            let icu = record.date_icu_admission?;
            match record.icu_outcome()? {
                IcuOutcome::Death(d) => (
                    icu,
                    d,
                    endpoint == Endpoint::IcuDeath,
                    endpoint != Endpoint::IcuDeath,
                ),
                IcuOutcome::Discharge(d) => (
                    icu,
                    d,
                    endpoint == Endpoint::IcuDischarge,
                    endpoint != Endpoint::IcuDischarge,
                ),
                IcuOutcome::Ongoing => (icu, study_end, false, false),
            }
        }
        Endpoint::HospitalTotal => match record.hospital_exit() {
            Some(d) => (admission, d, true, false),
            None => (admission, study_end, false, false),
        },
    };
    Some(Observation {
        time: days(start, end),
        event,
        known_cure,
        age: record.age,
        sex: record.sex,
    })
}

pub fn derive_endpoint(
    records: &[LineListRecord],
    endpoint: Endpoint,
    study_end: NaiveDate,
) -> EndpointDataset {
    let mut observations = Vec::with_capacity(records.len());
    let mut skipped = 0;
    for record in records {
        match derive_observation(record, endpoint, study_end) {
            Some(obs) => observations.push(obs),
            None => skipped += 1,
        }
    }
    EndpointDataset {
        endpoint,
        observations,
        skipped,
    }
}

pub const DATASET_COLUMNS: [&str; 5] = ["time", "event", "known_cure", "age", "sex"];

impl EndpointDataset {
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        write_observations(&self.observations, writer)
    }
}

pub fn write_observations<W: io::Write>(observations: &[Observation], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DATASET_COLUMNS)?;
    for o in observations {
        w.write_record([
            format_time(o.time),
            u8::from(o.event).to_string(),
            u8::from(o.known_cure).to_string(),
            o.age.map(format_time).unwrap_or_default(),
            o.sex.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_flag(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Some(true),
        "0" | "false" | "f" | "no" => Some(false),
        _ => None,
    }
}

/// Reads `time,event,known_cure[,age,sex]`; `age` and `sex` are optional
/// columns and may be empty.
pub fn read_observations<R: io::Read>(reader: R) -> Result<Vec<Observation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let (t_col, e_col, x_col) = (need("time")?, need("event")?, need("known_cure")?);
    let (age_col, sex_col) = (find("age"), find("sex"));

    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let get = |col: usize| rec.get(col).unwrap_or("");
        let bad = |column: &str, message: String| Error::Field {
            row,
            column: column.to_string(),
            message,
        };
        let time: f64 = get(t_col)
            .parse()
            .map_err(|e| bad("time", format!("`{}`: {e}", get(t_col))))?;
        let event = parse_flag(get(e_col))
            .ok_or_else(|| bad("event", format!("`{}` is not a flag", get(e_col))))?;
        let known_cure = parse_flag(get(x_col))
            .ok_or_else(|| bad("known_cure", format!("`{}` is not a flag", get(x_col))))?;
        let age = match age_col.map(get).unwrap_or("") {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .map_err(|e| bad("age", format!("`{s}`: {e}")))?,
            ),
        };
        let sex = match sex_col.map(get).unwrap_or("") {
            "" => None,
            s => Some(s.parse::<Sex>().map_err(|e| bad("sex", e))?),
        };
        let obs = Observation {
            time,
            event,
            known_cure,
            age,
            sex,
        };
        obs.validate().map_err(|e| bad("time", e.to_string()))?;
        out.push(obs);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EndpointCounts {
    pub events: usize,
    pub known_cures: usize,
    pub censored: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SexCounts {
    pub male: usize,
    pub female: usize,
    pub unknown: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AgeBandCounts {
    pub under_40: usize,
    pub from_40_to_59: usize,
    pub from_60_to_69: usize,
    pub from_70: usize,
    pub unknown: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub records: usize,
    pub admitted: usize,
    pub admitted_to_icu: usize,
    pub dead: usize,
    pub discharged: usize,
    pub in_hospital: usize,
    pub in_icu: usize,
    pub endpoints: Vec<(Endpoint, EndpointCounts)>,
    pub sex: SexCounts,
    pub age_bands: AgeBandCounts,
}

impl DatasetSummary {
    pub fn counts(&self, endpoint: Endpoint) -> EndpointCounts {
        self.endpoints
            .iter()
            .find(|(e, _)| *e == endpoint)
            .map(|(_, c)| *c)
            .unwrap_or_default()
    }

    /// Age/sex marginals in the simulator's input form; `None` when no record
    /// carries the covariate.
    pub fn demographics(&self) -> Option<Demographics> {
        let known_sex = self.sex.male + self.sex.female;
        let b = &self.age_bands;
        let known_age = b.under_40 + b.from_40_to_59 + b.from_60_to_69 + b.from_70;
        if known_sex == 0 || known_age == 0 {
            return None;
        }
        Some(Demographics {
            female_fraction: self.sex.female as f64 / known_sex as f64,
            age_band_weights: [b.under_40, b.from_40_to_59, b.from_60_to_69, b.from_70]
                .map(|c| c as f64 / known_age as f64),
        })
    }
}

pub fn summarize(records: &[LineListRecord], study_end: NaiveDate) -> DatasetSummary {
    let mut summary = DatasetSummary {
        records: records.len(),
        ..DatasetSummary::default()
    };
    for r in records {
        match r.sex {
            Some(Sex::Male) => summary.sex.male += 1,
            Some(Sex::Female) => summary.sex.female += 1,
            None => summary.sex.unknown += 1,
        }
        match r.age.map(AgeBand::of) {
            Some(AgeBand::Under40) => summary.age_bands.under_40 += 1,
            Some(AgeBand::From40To59) => summary.age_bands.from_40_to_59 += 1,
            Some(AgeBand::From60To69) => summary.age_bands.from_60_to_69 += 1,
            Some(AgeBand::From70) => summary.age_bands.from_70 += 1,
            None => summary.age_bands.unknown += 1,
        }
        if !r.is_admitted() {
            continue;
        }
        summary.admitted += 1;
        if r.date_icu_admission.is_some() {
            summary.admitted_to_icu += 1;
        }
        if r.date_death.is_some() {
            summary.dead += 1;
        } else if r.date_discharge.is_some() {
            summary.discharged += 1;
        } else {
            summary.in_hospital += 1;
        }
        if r.icu_outcome() == Some(IcuOutcome::Ongoing) {
            summary.in_icu += 1;
        }
    }
    for endpoint in Endpoint::ALL {
        let ds = derive_endpoint(records, endpoint, study_end);
        let mut c = EndpointCounts {
            skipped: ds.skipped,
            ..EndpointCounts::default()
        };
        for o in &ds.observations {
            match (o.event, o.known_cure) {
                (true, _) => c.events += 1,
                (false, true) => c.known_cures += 1,
                (false, false) => c.censored += 1,
            }
        }
        summary.endpoints.push((endpoint, c));
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,sex,age,date_diagnosis,date_hw_admission,date_icu_admission,date_icu_exit,date_discharge,date_death\n";

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn parse(body: &str) -> LineList {
        parse_linelist(format!("{HEADER}{body}").as_bytes(), d("2020-05-07")).unwrap()
    }

    #[test]
    fn parses_icu_death_row() {
        let ll = parse("a1,female,71,2020-03-09,2020-03-10,2020-03-14,,,2020-03-29\n");
        assert!(ll.rejected.is_empty());
        let r = &ll.records[0];
        assert_eq!(r.id, "a1");
        assert_eq!(r.sex, Some(Sex::Female));
        assert_eq!(r.age, Some(71.0));
        assert_eq!(r.date_diagnosis, Some(d("2020-03-09")));
        assert_eq!(r.date_hw_admission, Some(d("2020-03-10")));
        assert_eq!(r.date_icu_admission, Some(d("2020-03-14")));
        assert_eq!(r.date_icu_exit, None);
        assert_eq!(r.date_discharge, None);
        assert_eq!(r.date_death, Some(d("2020-03-29")));
        assert_eq!(r.icu_outcome(), Some(IcuOutcome::Death(d("2020-03-29"))));
    }

    #[test]
    fn empty_body_is_empty() {
        let ll = parse("");
        assert!(ll.records.is_empty() && ll.rejected.is_empty());
    }

    #[test]
    fn columns_are_order_free() {
        let text = "date_death,id,age,sex,date_diagnosis,date_hw_admission,date_icu_admission,date_icu_exit,date_discharge\n\
                    ,b,50,m,,2020-04-01,,,2020-04-05\n";
        let ll = parse_linelist(text.as_bytes(), d("2020-05-07")).unwrap();
        assert_eq!(ll.records[0].date_discharge, Some(d("2020-04-05")));
        assert_eq!(ll.records[0].sex, Some(Sex::Male));
    }

    #[test]
    fn missing_column_is_fatal() {
        let err = parse_linelist("id,sex,age\n".as_bytes(), d("2020-05-07")).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "date_diagnosis"));
    }

    #[test]
    fn chronology_and_parse_rejections() {
        let ll = parse(
            "a,m,60,,2020-03-10,,,,2020-03-01\n\
             b,m,60,,2020-03-10,,,2020-03-12,2020-03-13\n\
             c,m,60,,2020-03-10,2020-03-09,,,\n\
             e,m,60,,2020-13-10,,,,\n\
             f,x,60,,2020-03-10,,,,\n\
             g,m,60,,2020-03-10,,,2020-06-01,\n",
        );
        assert!(ll.records.is_empty());
        let cols: Vec<_> = ll
            .rejected
            .iter()
            .map(|r| (r.row, r.column.clone().unwrap(), r.kind))
            .collect();
        assert_eq!(
            cols,
            vec![
                (2, "date_death".into(), DiagnosticKind::Chronology),
                (3, "date_discharge".into(), DiagnosticKind::Chronology),
                (4, "date_icu_admission".into(), DiagnosticKind::Chronology),
                (5, "date_hw_admission".into(), DiagnosticKind::Parse),
                (6, "sex".into(), DiagnosticKind::Parse),
                (7, "date_discharge".into(), DiagnosticKind::Chronology),
            ]
        );
        assert!(ll.rejected[0].message.contains("death before admission"));
        assert!(matches!(ll.into_strict(), Err(Error::RejectedRows(v)) if v.len() == 6));
    }

    #[test]
    fn keeps_first_admission() {
        let ll = parse(
            "p,f,40,,2020-04-01,,,2020-04-03,\n\
             p,f,40,,2020-03-20,,,2020-03-25,\n",
        );
        assert_eq!(ll.records.len(), 1);
        assert_eq!(ll.records[0].date_hw_admission, Some(d("2020-03-20")));
        assert_eq!(ll.notes.len(), 1);
        assert_eq!(ll.notes[0].row, 2);
        assert_eq!(ll.notes[0].kind, DiagnosticKind::LaterAdmission);
    }

    #[test]
    fn flags_post_icu_ward_death() {
        let ll = parse("q,m,80,,2020-03-01,2020-03-02,2020-03-10,,2020-03-15\n");
        assert_eq!(ll.notes[0].kind, DiagnosticKind::PostIcuWardDeath);
        let r = &ll.records[0];
        assert_eq!(
            r.icu_outcome(),
            Some(IcuOutcome::Discharge(d("2020-03-10")))
        );
    }

    fn record(
        adm: i64,
        icu: Option<i64>,
        exit: Option<i64>,
        discharge: Option<i64>,
        death: Option<i64>,
    ) -> LineListRecord {
        let base = d("2020-03-01");
        let at = |k: i64| base + chrono::Duration::days(k);
        LineListRecord {
            id: "r".into(),
            sex: Some(Sex::Male),
            age: Some(60.0),
            date_diagnosis: None,
            date_hw_admission: Some(at(adm)),
            date_icu_admission: icu.map(at),
            date_icu_exit: exit.map(at),
            date_discharge: discharge.map(at),
            date_death: death.map(at),
        }
    }

    fn derive(r: &LineListRecord, e: Endpoint) -> Option<(f64, bool, bool)> {
        let end = d("2020-03-01") + chrono::Duration::days(60);
        derive_observation(r, e, end).map(|o| (o.time, o.event, o.known_cure))
    }

    #[test]
    fn icu_death_patient() {
        let r = record(0, Some(4), None, None, Some(19));
        assert_eq!(derive(&r, Endpoint::HwToIcu), Some((4.0, true, false)));
        assert_eq!(derive(&r, Endpoint::HwDeath), Some((4.0, false, true)));
        assert_eq!(derive(&r, Endpoint::HwDischarge), Some((4.0, false, true)));
        assert_eq!(derive(&r, Endpoint::IcuDeath), Some((15.0, true, false)));
        assert_eq!(
            derive(&r, Endpoint::IcuDischarge),
            Some((15.0, false, true))
        );
        assert_eq!(
            derive(&r, Endpoint::HospitalTotal),
            Some((19.0, true, false))
        );
    }

    #[test]
    fn ward_discharge_patient() {
        let r = record(0, None, None, Some(10), None);
        assert_eq!(derive(&r, Endpoint::HwToIcu), Some((10.0, false, true)));
        assert_eq!(derive(&r, Endpoint::HwDischarge), Some((10.0, true, false)));
        assert_eq!(derive(&r, Endpoint::HwDeath), Some((10.0, false, true)));
        assert_eq!(derive(&r, Endpoint::IcuDeath), None);
        assert_eq!(
            derive(&r, Endpoint::HospitalTotal),
            Some((10.0, true, false))
        );
    }

    #[test]
    fn still_in_ward_is_censored() {
        let r = record(55, None, None, None, None);
        for e in [
            Endpoint::HwToIcu,
            Endpoint::HwDeath,
            Endpoint::HwDischarge,
            Endpoint::HospitalTotal,
        ] {
            assert_eq!(derive(&r, e), Some((5.0, false, false)));
        }
    }

    #[test]
    fn still_in_icu_is_censored() {
        let r = record(40, Some(45), None, None, None);
        assert_eq!(derive(&r, Endpoint::IcuDeath), Some((15.0, false, false)));
        assert_eq!(
            derive(&r, Endpoint::IcuDischarge),
            Some((15.0, false, false))
        );
    }

    #[test]
    fn same_day_exit_is_time_zero() {
        let r = record(3, None, None, None, Some(3));
        assert_eq!(derive(&r, Endpoint::HwDeath), Some((0.0, true, false)));
    }

    #[test]
    fn summary_of_three_records() {
        let records = vec![
            record(0, Some(4), None, None, Some(19)),
            record(0, None, None, Some(10), None),
            record(55, None, None, None, None),
        ];
        let end = d("2020-03-01") + chrono::Duration::days(60);
        let s = summarize(&records, end);
        assert_eq!(
            (s.admitted, s.dead, s.discharged, s.in_hospital),
            (3, 1, 1, 1)
        );
        assert_eq!(s.sex.male + s.sex.female + s.sex.unknown, 3);
        assert_eq!(s.counts(Endpoint::IcuDeath).skipped, 2);
        assert_eq!(s.counts(Endpoint::HospitalTotal).known_cures, 0);

        let empty = summarize(&[], end);
        assert_eq!(empty.admitted, 0);
        assert!(empty
            .endpoints
            .iter()
            .all(|(_, c)| *c == EndpointCounts::default()));
    }

    #[test]
    fn dataset_csv_round_trip() {
        let obs = vec![
            Observation::event(4.0).with_age(71.0).with_sex(Sex::Female),
            Observation::cured(0.0),
            Observation::censored(12.0).with_sex(Sex::Male),
        ];
        let mut buf = Vec::new();
        write_observations(&obs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "time,event,known_cure,age,sex\n4,1,0,71,female\n0,0,1,,\n12,0,0,,male\n"
        );
        assert_eq!(read_observations(buf.as_slice()).unwrap(), obs);
    }

    #[test]
    fn dataset_reader_rejects_bad_rows() {
        let err = read_observations("time,event,known_cure\n1,1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Field { row: 2, .. }));
        let err = read_observations("time,event,known_cure\n1,maybe,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Field { ref column, .. } if column == "event"));
    }

    #[test]
    fn endpoint_names() {
        for e in Endpoint::ALL {
            assert_eq!(e.as_str().parse::<Endpoint>().unwrap(), e);
        }
        assert_eq!("HW_TO_ICU".parse::<Endpoint>().unwrap(), Endpoint::HwToIcu);
    }
}
