//! Line list → event probabilities and Weibull length-of-stay laws →
//! simulator tables.

use chrono::NaiveDate;
use serde::Serialize;

use crate::conditional::{npmcm_conditional_estimate, CovariateQuery, KernelConfig, SexFilter};
use crate::error::Result;
use crate::ingest::{derive_endpoint, Endpoint, LineListRecord};
use crate::sim::{
    AgeBand, DurationLaw, DurationOverride, DurationSet, DurationTable, HwOutcomes, IcuOutcomes,
    SimulationConfig, Stratum, TransitionOverride, TransitionTable,
};
use crate::survival::{
    empirical_event_probability, event_probability, latency, npmcm_estimate, Observation,
};
use crate::weibull::{fit_weibull, FitReport};

/// The five simulated transitions, in simulator order.
pub const TRANSITION_ENDPOINTS: [Endpoint; 5] = [
    Endpoint::HwToIcu,
    Endpoint::HwDeath,
    Endpoint::HwDischarge,
    Endpoint::IcuDeath,
    Endpoint::IcuDischarge,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalibrationMode {
    Unconditional,
    /// Conditional estimates at each age band's midpoint, per sex.
    Conditional(KernelConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointFit {
    pub endpoint: Endpoint,
    /// `None` for pooled estimates.
    pub stratum: Option<Stratum>,
    pub n: usize,
    pub p: f64,
    pub empirical_p: Option<f64>,
    pub fit: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub transitions: TransitionTable,
    pub durations: DurationTable,
    pub fits: Vec<EndpointFit>,
    /// Strata/endpoints that fell back to the pooled estimate, with the reason.
    pub fallbacks: Vec<String>,
}

impl Calibration {
    pub fn apply(&self, config: &mut SimulationConfig) {
        config.transitions = self.transitions.clone();
        config.durations = self.durations.clone();
    }
}

struct Estimate {
    p: f64,
    fit: FitReport,
}

fn pooled(observations: &[Observation]) -> Result<Estimate> {
    let curve = npmcm_estimate(observations)?;
    let p = event_probability(&curve);
    let fit = fit_weibull(&latency(&curve)?.latency)?;
    Ok(Estimate { p, fit })
}

fn at_query(
    observations: &[Observation],
    query: &CovariateQuery,
    kernel: &KernelConfig,
) -> Result<Estimate> {
    let curve = npmcm_conditional_estimate(observations, query, kernel)?;
    let p = event_probability(&curve);
    let fit = fit_weibull(&latency(&curve)?.latency)?;
    Ok(Estimate { p, fit })
}

fn law(fit: &FitReport) -> DurationLaw {
    DurationLaw::Weibull(fit.params)
}

/// Estimates transition probabilities and length-of-stay laws from a line
/// list. Pooled estimates always come first; in conditional mode each
/// stratum that can be estimated overrides them.
pub fn calibrate(
    records: &[LineListRecord],
    study_end: NaiveDate,
    mode: CalibrationMode,
) -> Result<Calibration> {
    let datasets: Vec<(Endpoint, Vec<Observation>)> = TRANSITION_ENDPOINTS
        .iter()
        .map(|&e| (e, derive_endpoint(records, e, study_end).observations))
        .collect();

    let mut fits = Vec::new();
    let mut base = Vec::with_capacity(5);
    for (endpoint, obs) in &datasets {
        let est = pooled(obs).map_err(|e| {
            crate::error::Error::InvalidConfig(format!(
                "pooled estimate for {endpoint} failed: {e}"
            ))
        })?;
        fits.push(EndpointFit {
            endpoint: *endpoint,
            stratum: None,
            n: obs.len(),
            p: est.p,
            empirical_p: empirical_event_probability(obs).ok(),
            fit: est.fit.clone(),
        });
        base.push(est);
    }

    let mut transitions = TransitionTable {
        hw: HwOutcomes {
            to_icu: base[0].p,
            death: base[1].p,
            discharge: base[2].p,
        },
        icu: IcuOutcomes {
            death: base[3].p,
            discharge: base[4].p,
        },
        strata: Vec::new(),
    };
    let mut durations = DurationTable {
        base: DurationSet {
            hw_to_icu: law(&base[0].fit),
            hw_death: law(&base[1].fit),
            hw_discharge: law(&base[2].fit),
            icu_death: law(&base[3].fit),
            icu_discharge: law(&base[4].fit),
        },
        strata: Vec::new(),
    };
    let mut fallbacks = Vec::new();

    if let CalibrationMode::Conditional(kernel) = mode {
        for stratum in Stratum::all() {
            let query = CovariateQuery {
                age: stratum.age_band.midpoint(),
                sex: SexFilter::from(stratum.sex),
            };
            let mut ps = [0.0; 5];
            let mut laws = [DurationLaw::Fixed { fixed_days: 1 }; 5];
            for (k, (endpoint, obs)) in datasets.iter().enumerate() {
                match at_query(obs, &query, &kernel) {
                    Ok(est) => {
                        ps[k] = est.p;
                        laws[k] = law(&est.fit);
                        fits.push(EndpointFit {
                            endpoint: *endpoint,
                            stratum: Some(stratum),
                            n: obs.iter().filter(|o| query.sex.admits(o.sex)).count(),
                            p: est.p,
                            empirical_p: None,
                            fit: est.fit,
                        });
                    }
                    Err(e) => {
                        fallbacks.push(format!("{endpoint} at {stratum}: {e}"));
                        ps[k] = base[k].p;
                        laws[k] = law(&base[k].fit);
                    }
                }
            }
            let hw = HwOutcomes {
                to_icu: ps[0],
                death: ps[1],
                discharge: ps[2],
            };
            let icu = IcuOutcomes {
                death: ps[3],
                discharge: ps[4],
            };
            // An all-zero outcome set cannot be sampled; keep the pooled one.
            let usable = |v: &[f64]| v.iter().sum::<f64>() > 0.0;
            transitions.strata.push(TransitionOverride {
                sex: stratum.sex,
                age_band: stratum.age_band,
                hw: usable(&hw.as_array()).then_some(hw),
                icu: usable(&icu.as_array()).then_some(icu),
            });
            durations.strata.push(DurationOverride {
                sex: Some(stratum.sex),
                age_band: Some(stratum.age_band),
                hw_to_icu: Some(laws[0]),
                hw_death: Some(laws[1]),
                hw_discharge: Some(laws[2]),
                icu_death: Some(laws[3]),
                icu_discharge: Some(laws[4]),
            });
        }
    }

    Ok(Calibration {
        transitions,
        durations,
        fits,
        fallbacks,
    })
}

/// Midpoint ages used as conditional query points, in band order.
pub fn band_query_ages() -> [f64; 4] {
    AgeBand::ALL.map(AgeBand::midpoint)
}
