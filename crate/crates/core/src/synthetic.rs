//! Synthetic line lists with known ground truth.
//!
//! Patients are admitted uniformly over the window before the study end.
//! From the ward a fixed share goes to ICU; the rest leave the ward dead or
//! discharged. ICU stays end in death or in a short ward stay followed by
//! discharge. Dates after the study end are dropped, which is the only
//! source of censoring. The true probability of ICU admission is therefore
//! exactly [`SyntheticSpec::p_icu`].

use std::io;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{LineListRecord, LINELIST_COLUMNS};
use crate::survival::Sex;
use crate::weibull::{weibull_quantile_from_uniform, WeibullParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_patients: usize,
    pub seed: u64,
    pub study_end: NaiveDate,
    /// Admissions are uniform over this many days ending the day before `study_end`.
    pub admission_window_days: u32,
    pub p_icu: f64,
    pub hw_to_icu: WeibullParams,
    pub ward_exit: WeibullParams,
    pub p_ward_death: f64,
    pub icu_stay: WeibullParams,
    pub p_icu_death: f64,
    pub post_icu_ward: WeibullParams,
    pub female_fraction: f64,
    /// Weights for `<40`, `40-59`, `60-69`, `>=70`; ages uniform inside each
    /// band (`>=70` spans 70 to 99).
    pub age_band_weights: [f64; 4],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let w = |shape, scale| WeibullParams::new(shape, scale).expect("valid synthetic law");
        SyntheticSpec {
            n_patients: 2500,
            seed: 20_200_507,
            study_end: NaiveDate::from_ymd_opt(2020, 5, 7).expect("valid date"),
            admission_window_days: 60,
            p_icu: 0.30,
            hw_to_icu: w(1.3, 4.0),
            ward_exit: w(1.5, 10.0),
            p_ward_death: 0.2,
            icu_stay: w(1.4, 12.0),
            p_icu_death: 0.3,
            post_icu_ward: w(1.5, 5.0),
            female_fraction: 0.5,
            age_band_weights: [0.2, 0.3, 0.2, 0.3],
        }
    }
}

fn whole_days(params: &WeibullParams, u: f64) -> i64 {
    weibull_quantile_from_uniform(params, 1.0 - u).ceil() as i64
}

pub fn generate_linelist(spec: &SyntheticSpec) -> Vec<LineListRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start = spec.study_end - Duration::days(i64::from(spec.admission_window_days));
    let total_w: f64 = spec.age_band_weights.iter().sum();
    let bands = [(0.0, 40.0), (40.0, 60.0), (60.0, 70.0), (70.0, 100.0)];
    let observed = |d: NaiveDate| (d <= spec.study_end).then_some(d);

    (0..spec.n_patients)
        .map(|i| {
            let u: [f64; 11] = std::array::from_fn(|_| rng.gen::<f64>());
            let sex = if u[0] < spec.female_fraction {
                Sex::Female
            } else {
                Sex::Male
            };
            let mut acc = 0.0;
            let band = spec
                .age_band_weights
                .iter()
                .position(|w| {
                    acc += w / total_w;
                    u[1] < acc
                })
                .unwrap_or(3);
            let (lo, hi) = bands[band];
            let age = (lo + u[2] * (hi - lo)).floor();

            let admission =
                start + Duration::days((u[3] * f64::from(spec.admission_window_days)) as i64);
            let diagnosis = admission - Duration::days((u[4] * 4.0) as i64);
            let mut rec = LineListRecord {
                id: format!("S{:05}", i + 1),
                sex: Some(sex),
                age: Some(age),
                date_diagnosis: Some(diagnosis),
                date_hw_admission: Some(admission),
                date_icu_admission: None,
                date_icu_exit: None,
                date_discharge: None,
                date_death: None,
            };

            if u[5] < spec.p_icu {
                let icu = admission + Duration::days(whole_days(&spec.hw_to_icu, u[6]));
                rec.date_icu_admission = observed(icu);
                if rec.date_icu_admission.is_some() {
                    let exit = icu + Duration::days(whole_days(&spec.icu_stay, u[7]));
                    if u[8] < spec.p_icu_death {
                        rec.date_death = observed(exit);
                    } else {
                        rec.date_icu_exit = observed(exit);
                        let discharge =
                            exit + Duration::days(whole_days(&spec.post_icu_ward, u[9]));
                        rec.date_discharge = rec.date_icu_exit.and(observed(discharge));
                    }
                }
            } else {
                let exit = admission + Duration::days(whole_days(&spec.ward_exit, u[6]));
                if u[10] < spec.p_ward_death {
                    rec.date_death = observed(exit);
                } else {
                    rec.date_discharge = observed(exit);
                }
            }
            rec
        })
        .collect()
}

pub fn write_linelist<W: io::Write>(records: &[LineListRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LINELIST_COLUMNS)?;
    let date = |d: Option<NaiveDate>| {
        d.map(|d| d.format("%Y-%m-%d").to_string())
            .unwrap_or_default()
    };
    for r in records {
        w.write_record([
            r.id.clone(),
            r.sex.map(|s| s.to_string()).unwrap_or_default(),
            r.age.map(|a| format!("{a}")).unwrap_or_default(),
            date(r.date_diagnosis),
            date(r.date_hw_admission),
            date(r.date_icu_admission),
            date(r.date_icu_exit),
            date(r.date_discharge),
            date(r.date_death),
        ])?;
    }
    w.flush()?;
    Ok(())
}
