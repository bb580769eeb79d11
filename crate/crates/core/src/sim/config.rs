//! Simulator inputs: population, admission law, transition probabilities and
//! length-of-stay laws, optionally refined per sex × age band.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::Sex;
use crate::weibull::WeibullParams;

/// Admitted / confirmed cases in the reference surveillance data (2453 of 10454).
pub const DEFAULT_P_HOSPITALIZED: f64 = 2453.0 / 10454.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBand {
    #[serde(rename = "<40")]
    Under40,
    #[serde(rename = "40-59")]
    From40To59,
    #[serde(rename = "60-69")]
    From60To69,
    #[serde(rename = ">=70")]
    From70,
}

impl AgeBand {
    pub const ALL: [AgeBand; 4] = [
        AgeBand::Under40,
        AgeBand::From40To59,
        AgeBand::From60To69,
        AgeBand::From70,
    ];

    pub fn of(age: f64) -> AgeBand {
        if age < 40.0 {
            AgeBand::Under40
        } else if age < 60.0 {
            AgeBand::From40To59
        } else if age < 70.0 {
            AgeBand::From60To69
        } else {
            AgeBand::From70
        }
    }

    /// Half-open age interval used when drawing ages inside the band.
    pub fn range(self) -> (f64, f64) {
        match self {
            AgeBand::Under40 => (0.0, 40.0),
            AgeBand::From40To59 => (40.0, 60.0),
            AgeBand::From60To69 => (60.0, 70.0),
            AgeBand::From70 => (70.0, 100.0),
        }
    }

    /// Representative age at which conditional estimates for the band are taken.
    pub fn midpoint(self) -> f64 {
        let (lo, hi) = self.range();
        (lo + hi) / 2.0
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgeBand::Under40 => "<40",
            AgeBand::From40To59 => "40-59",
            AgeBand::From60To69 => "60-69",
            AgeBand::From70 => ">=70",
        }
    }
}

impl fmt::Display for AgeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgeBand {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        AgeBand::ALL
            .into_iter()
            .find(|b| b.as_str() == s.trim())
            .ok_or_else(|| format!("unknown age band `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stratum {
    pub sex: Sex,
    pub age_band: AgeBand,
}

impl Stratum {
    pub fn all() -> impl Iterator<Item = Stratum> {
        [Sex::Male, Sex::Female].into_iter().flat_map(|sex| {
            AgeBand::ALL
                .into_iter()
                .map(move |age_band| Stratum { sex, age_band })
        })
    }

    pub(crate) fn index(self) -> usize {
        let s = match self.sex {
            Sex::Male => 0,
            Sex::Female => 1,
        };
        s * AgeBand::ALL.len() + self.age_band.index()
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.sex, self.age_band)
    }
}

/// Age/sex marginals of the infected population. Ages are uniform inside
/// each band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub female_fraction: f64,
    /// Weights for `<40`, `40-59`, `60-69`, `>=70`.
    pub age_band_weights: [f64; 4],
}

impl Default for Demographics {
    /// Synthetic profile; not derived from any surveillance data.
    fn default() -> Self {
        Demographics {
            female_fraction: 0.5,
            age_band_weights: [0.30, 0.30, 0.15, 0.25],
        }
    }
}

/// Outcome probabilities out of the hospital ward. Need not sum to 1; the
/// simulator normalises.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwOutcomes {
    pub to_icu: f64,
    pub death: f64,
    pub discharge: f64,
}

/// Outcome probabilities out of ICU, normalised like [`HwOutcomes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcuOutcomes {
    pub death: f64,
    pub discharge: f64,
}

impl HwOutcomes {
    pub fn as_array(&self) -> [f64; 3] {
        [self.to_icu, self.death, self.discharge]
    }
}

impl IcuOutcomes {
    pub fn as_array(&self) -> [f64; 2] {
        [self.death, self.discharge]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionOverride {
    pub sex: Sex,
    pub age_band: AgeBand,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hw: Option<HwOutcomes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icu: Option<IcuOutcomes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    pub hw: HwOutcomes,
    pub icu: IcuOutcomes,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strata: Vec<TransitionOverride>,
}

impl Default for TransitionTable {
    /// Published event probabilities of the reference cohort (NP-MCM column).
    fn default() -> Self {
        TransitionTable {
            hw: HwOutcomes {
                to_icu: 0.0845,
                death: 0.1561,
                discharge: 0.7953,
            },
            icu: IcuOutcomes {
                death: 0.2222,
                discharge: 0.6820,
            },
            strata: Vec::new(),
        }
    }
}

/// Length-of-stay law for one transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DurationLaw {
    Weibull(WeibullParams),
    /// Point mass, mostly for tests.
    Fixed {
        fixed_days: u32,
    },
}

impl DurationLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            DurationLaw::Weibull(p) => p.validate(),
            DurationLaw::Fixed { fixed_days } if *fixed_days >= 1 => Ok(()),
            DurationLaw::Fixed { .. } => {
                Err(Error::InvalidConfig("fixed_days must be at least 1".into()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationSet {
    pub hw_to_icu: DurationLaw,
    pub hw_death: DurationLaw,
    pub hw_discharge: DurationLaw,
    pub icu_death: DurationLaw,
    pub icu_discharge: DurationLaw,
}

impl DurationSet {
    fn laws(&self) -> [(&'static str, &DurationLaw); 5] {
        [
            ("hw_to_icu", &self.hw_to_icu),
            ("hw_death", &self.hw_death),
            ("hw_discharge", &self.hw_discharge),
            ("icu_death", &self.icu_death),
            ("icu_discharge", &self.icu_discharge),
        ]
    }

    pub fn all_fixed(days: u32) -> Self {
        let law = DurationLaw::Fixed { fixed_days: days };
        DurationSet {
            hw_to_icu: law,
            hw_death: law,
            hw_discharge: law,
            icu_death: law,
            icu_discharge: law,
        }
    }
}

impl Default for DurationSet {
    /// Synthetic Weibull laws (shape 1.5) with medians of 3, 7, 10, 15 and
    /// 14 days; placeholders for fitted parameters.
    fn default() -> Self {
        let law = |median: f64| {
            DurationLaw::Weibull(WeibullParams::from_median(1.5, median).expect("positive median"))
        };
        DurationSet {
            hw_to_icu: law(3.0),
            hw_death: law(7.0),
            hw_discharge: law(10.0),
            icu_death: law(15.0),
            icu_discharge: law(14.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DurationOverride {
    pub sex: Option<Sex>,
    pub age_band: Option<AgeBand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hw_to_icu: Option<DurationLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hw_death: Option<DurationLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hw_discharge: Option<DurationLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icu_death: Option<DurationLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icu_discharge: Option<DurationLaw>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DurationTable {
    #[serde(flatten)]
    pub base: DurationSet,
    /// Overrides apply in order; a `None` sex or band matches every value.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strata: Vec<DurationOverride>,
}

impl DurationTable {
    pub fn resolve(&self, stratum: Stratum) -> DurationSet {
        let mut set = self.base;
        for o in &self.strata {
            if o.sex.is_some_and(|s| s != stratum.sex)
                || o.age_band.is_some_and(|b| b != stratum.age_band)
            {
                continue;
            }
            let fields = [
                (&mut set.hw_to_icu, o.hw_to_icu),
                (&mut set.hw_death, o.hw_death),
                (&mut set.hw_discharge, o.hw_discharge),
                (&mut set.icu_death, o.icu_death),
                (&mut set.icu_discharge, o.icu_discharge),
            ];
            for (slot, law) in fields {
                if let Some(law) = law {
                    *slot = law;
                }
            }
        }
        set
    }
}

/// Distribution of the admission day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionCurve {
    /// Linear rise from `start` to `peak`, linear fall to `end` (days, inclusive).
    Triangular { start: u32, peak: u32, end: u32 },
    /// Non-negative weight per day starting at day 0.
    Weights(Vec<f64>),
    /// Two-column `day,weight` CSV; relative paths resolve against the config file.
    Csv(PathBuf),
}

impl Default for AdmissionCurve {
    /// Synthetic epidemic pulse.
    fn default() -> Self {
        AdmissionCurve::Triangular {
            start: 0,
            peak: 20,
            end: 60,
        }
    }
}

impl AdmissionCurve {
    /// Raw daily weights (not normalised).
    pub fn weights(&self) -> Result<Vec<f64>> {
        match self {
            AdmissionCurve::Triangular { start, peak, end } => {
                let (s, p, e) = (*start, *peak, *end);
                if !(s <= p && p <= e) {
                    return Err(Error::InvalidConfig(format!(
                        "triangular admission curve needs start <= peak <= end, got {s}, {p}, {e}"
                    )));
                }
                let mut w = vec![0.0; e as usize + 1];
                for d in s..=e {
                    w[d as usize] = if d <= p {
                        f64::from(d - s + 1) / f64::from(p - s + 1)
                    } else {
                        f64::from(e - d + 1) / f64::from(e - p + 1)
                    };
                }
                Ok(w)
            }
            AdmissionCurve::Weights(w) => Ok(w.clone()),
            AdmissionCurve::Csv(path) => read_admission_csv(path),
        }
    }
}

pub fn read_admission_csv(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| {
        Error::InvalidConfig(format!(
            "cannot open admission curve {}: {e}",
            path.display()
        ))
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (day_col, w_col) = (col("day")?, col("weight")?);
    let mut weights: Vec<f64> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let field = |c: usize, name: &str| -> Result<&str> {
            rec.get(c).ok_or_else(|| Error::Field {
                row,
                column: name.into(),
                message: "missing".into(),
            })
        };
        let day: usize = field(day_col, "day")?.parse().map_err(|e| Error::Field {
            row,
            column: "day".into(),
            message: format!("{e}"),
        })?;
        let w: f64 = field(w_col, "weight")?.parse().map_err(|e| Error::Field {
            row,
            column: "weight".into(),
            message: format!("{e}"),
        })?;
        if weights.len() <= day {
            weights.resize(day + 1, 0.0);
        }
        weights[day] += w;
    }
    Ok(weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_infected: u32,
    pub n_replications: u32,
    pub horizon_days: u32,
    pub p_hospitalized: f64,
    #[serde(default)]
    pub admission: AdmissionCurve,
    #[serde(default)]
    pub demographics: Demographics,
    #[serde(default)]
    pub transitions: TransitionTable,
    #[serde(default)]
    pub durations: DurationTable,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_infected: 1000,
            n_replications: 1000,
            horizon_days: 200,
            p_hospitalized: DEFAULT_P_HOSPITALIZED,
            admission: AdmissionCurve::default(),
            demographics: Demographics::default(),
            transitions: TransitionTable::default(),
            durations: DurationTable::default(),
            seed: 1,
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{name} = {p} is not a probability"
        )))
    }
}

fn check_outcomes(name: &str, probs: &[f64]) -> Result<()> {
    for (k, &p) in probs.iter().enumerate() {
        check_probability(&format!("{name}[{k}]"), p)?;
    }
    if probs.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "{name} outcome probabilities are all zero"
        )));
    }
    Ok(())
}

impl SimulationConfig {
    /// Reads a JSON config; a CSV admission curve is loaded relative to the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let mut config: SimulationConfig = serde_json::from_reader(std::io::BufReader::new(file))?;
        if let AdmissionCurve::Csv(csv_path) = &config.admission {
            let resolved = if csv_path.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(csv_path)
            } else {
                csv_path.clone()
            };
            config.admission = AdmissionCurve::Weights(read_admission_csv(&resolved)?);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Normalised admission-day probabilities over `0..horizon_days`.
    pub fn admission_distribution(&self) -> Result<Vec<f64>> {
        let mut w = self.admission.weights()?;
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidConfig(
                "admission weights must be finite and non-negative".into(),
            ));
        }
        while w.len() > self.horizon_days as usize && w.last() == Some(&0.0) {
            w.pop();
        }
        if w.len() > self.horizon_days as usize {
            return Err(Error::InvalidConfig(format!(
                "admission curve covers {} days, beyond the {}-day horizon",
                w.len(),
                self.horizon_days
            )));
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidConfig("admission weights sum to zero".into()));
        }
        w.resize(self.horizon_days as usize, 0.0);
        Ok(w.into_iter().map(|x| x / total).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_infected == 0 {
            return Err(Error::InvalidConfig("n_infected must be positive".into()));
        }
        if self.n_replications == 0 {
            return Err(Error::InvalidConfig(
                "n_replications must be positive".into(),
            ));
        }
        if self.horizon_days == 0 {
            return Err(Error::InvalidConfig("horizon_days must be positive".into()));
        }
        check_probability("p_hospitalized", self.p_hospitalized)?;
        check_probability(
            "demographics.female_fraction",
            self.demographics.female_fraction,
        )?;
        let bands = &self.demographics.age_band_weights;
        if bands.iter().any(|w| !w.is_finite() || *w < 0.0) || bands.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig(
                "age band weights must be non-negative with positive sum".into(),
            ));
        }
        check_outcomes("transitions.hw", &self.transitions.hw.as_array())?;
        check_outcomes("transitions.icu", &self.transitions.icu.as_array())?;
        for o in &self.transitions.strata {
            if let Some(hw) = o.hw {
                check_outcomes(
                    &format!("transitions.strata[{} {}].hw", o.sex, o.age_band),
                    &hw.as_array(),
                )?;
            }
            if let Some(icu) = o.icu {
                check_outcomes(
                    &format!("transitions.strata[{} {}].icu", o.sex, o.age_band),
                    &icu.as_array(),
                )?;
            }
        }
        for stratum in Stratum::all() {
            for (name, law) in self.durations.resolve(stratum).laws() {
                law.validate().map_err(|e| {
                    Error::InvalidConfig(format!("durations.{name} for {stratum}: {e}"))
                })?;
            }
        }
        self.admission_distribution()?;
        Ok(())
    }

    /// Transition probabilities for a stratum before normalisation.
    pub fn transitions_for(&self, stratum: Stratum) -> (HwOutcomes, IcuOutcomes) {
        let mut hw = self.transitions.hw;
        let mut icu = self.transitions.icu;
        for o in &self.transitions.strata {
            if o.sex == stratum.sex && o.age_band == stratum.age_band {
                if let Some(h) = o.hw {
                    hw = h;
                }
                if let Some(i) = o.icu {
                    icu = i;
                }
            }
        }
        (hw, icu)
    }

    pub fn is_stratified(&self) -> bool {
        !self.transitions.strata.is_empty() || !self.durations.strata.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let config = SimulationConfig::default();
        config.validate().unwrap();
        let adm = config.admission_distribution().unwrap();
        assert_eq!(adm.len(), 200);
        assert!((adm.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(adm[61], 0.0);
        assert!(adm[20] > adm[10] && adm[20] > adm[40]);
    }

    #[test]
    fn default_transitions_match_published_table() {
        let t = TransitionTable::default();
        assert_eq!(t.hw.as_array(), [0.0845, 0.1561, 0.7953]);
        assert_eq!(t.icu.as_array(), [0.2222, 0.6820]);
        assert!((t.hw.as_array().iter().sum::<f64>() - 1.0359).abs() < 1e-12);
        assert!((t.icu.as_array().iter().sum::<f64>() - 0.9042).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let mut config = SimulationConfig::default();
        config.durations.strata.push(DurationOverride {
            sex: Some(Sex::Female),
            age_band: Some(AgeBand::From70),
            hw_discharge: Some(DurationLaw::Fixed { fixed_days: 9 }),
            ..Default::default()
        });
        let text = config.to_json_pretty().unwrap();
        let back: SimulationConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn duration_overrides_resolve_in_order() {
        let mut table = DurationTable {
            base: DurationSet::all_fixed(5),
            strata: Vec::new(),
        };
        table.strata.push(DurationOverride {
            sex: Some(Sex::Male),
            hw_death: Some(DurationLaw::Fixed { fixed_days: 2 }),
            ..Default::default()
        });
        table.strata.push(DurationOverride {
            age_band: Some(AgeBand::From70),
            hw_death: Some(DurationLaw::Fixed { fixed_days: 8 }),
            ..Default::default()
        });
        let young_male = Stratum {
            sex: Sex::Male,
            age_band: AgeBand::Under40,
        };
        let old_male = Stratum {
            sex: Sex::Male,
            age_band: AgeBand::From70,
        };
        let young_female = Stratum {
            sex: Sex::Female,
            age_band: AgeBand::Under40,
        };
        assert_eq!(
            table.resolve(young_male).hw_death,
            DurationLaw::Fixed { fixed_days: 2 }
        );
        assert_eq!(
            table.resolve(old_male).hw_death,
            DurationLaw::Fixed { fixed_days: 8 }
        );
        assert_eq!(
            table.resolve(young_female).hw_death,
            DurationLaw::Fixed { fixed_days: 5 }
        );
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = SimulationConfig::default();
        c.p_hospitalized = 1.5;
        assert!(c.validate().is_err());

        let mut c = SimulationConfig::default();
        c.transitions.icu = IcuOutcomes {
            death: 0.0,
            discharge: 0.0,
        };
        assert!(c.validate().is_err());

        let mut c = SimulationConfig::default();
        c.horizon_days = 30;
        assert!(
            c.validate().is_err(),
            "admission pulse extends past horizon"
        );

        let mut c = SimulationConfig::default();
        c.admission = AdmissionCurve::Weights(vec![1.0, -1.0]);
        assert!(c.validate().is_err());

        let mut c = SimulationConfig::default();
        c.durations.base.icu_death = DurationLaw::Fixed { fixed_days: 0 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn age_bands() {
        assert_eq!(AgeBand::of(39.9), AgeBand::Under40);
        assert_eq!(AgeBand::of(40.0), AgeBand::From40To59);
        assert_eq!(AgeBand::of(69.5), AgeBand::From60To69);
        assert_eq!(AgeBand::of(70.0), AgeBand::From70);
        assert_eq!(AgeBand::From40To59.midpoint(), 50.0);
        assert_eq!(">=70".parse::<AgeBand>().unwrap(), AgeBand::From70);
        let indices: Vec<usize> = Stratum::all().map(Stratum::index).collect();
        assert_eq!(indices, (0..8).collect::<Vec<_>>());
    }
}
