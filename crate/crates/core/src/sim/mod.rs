//! Monte Carlo patient-flow simulator.
//!
//! Each replication draws `n_infected` individuals; the hospitalised ones
//! walk through ward, optionally ICU, and end dead or discharged. Daily
//! counts are tallied per replication and summarised across replications.
//!
//! Replication `r` draws from a ChaCha8 stream selected by `(seed, r)`, and
//! every individual consumes the same number of uniforms whatever the
//! configuration, so two configs run with one seed share their random
//! numbers draw for draw.

mod config;

use std::io;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::*;

use crate::error::{Error, Result};
use crate::survival::{format_real, Sex};
use crate::weibull::weibull_quantile_from_uniform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum State {
    Hw,
    Icu,
    Dead,
    Discharged,
}

impl State {
    pub fn is_absorbing(self) -> bool {
        matches!(self, State::Dead | State::Discharged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedIndividual {
    pub sex: Sex,
    pub age: f64,
    pub hospitalized: bool,
    pub admission_day: Option<u32>,
    /// `(state, entry_day)` pairs, starting in the ward on the admission day.
    pub trajectory: Vec<(State, u32)>,
}

impl SimulatedIndividual {
    /// Day the individual enters an absorbing state.
    pub fn exit_day(&self) -> Option<u32> {
        self.trajectory
            .last()
            .filter(|(s, _)| s.is_absorbing())
            .map(|&(_, d)| d)
    }
}

/// Whole-day stay from a law: Weibull draws are rounded up with a one-day
/// minimum, fixed laws are used as given.
pub fn stay_days(law: &DurationLaw, u: f64) -> u32 {
    match law {
        DurationLaw::Fixed { fixed_days } => *fixed_days,
        DurationLaw::Weibull(p) => {
            let days = weibull_quantile_from_uniform(p, 1.0 - u).ceil();
            if days.is_finite() {
                days.clamp(1.0, f64::from(u32::MAX / 4)) as u32
            } else {
                u32::MAX / 4
            }
        }
    }
}

/// Cumulative table ending at exactly 1.0.
fn cumulative(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

/// Index drawn by inverse CDF for `u` in `[0, 1)`; zero-weight categories
/// are never selected.
fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

#[derive(Debug, Clone)]
struct ResolvedStratum {
    hw_cdf: Vec<f64>,
    icu_cdf: Vec<f64>,
    durations: DurationSet,
}

/// Immutable simulator built from a validated config.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimulationConfig,
    admission_cdf: Vec<f64>,
    age_cdf: Vec<f64>,
    strata: Vec<ResolvedStratum>,
}

/// Uniform draws per individual.
const DRAWS_PER_INDIVIDUAL: usize = 9;

impl Simulator {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        let admission_cdf = cumulative(&config.admission_distribution()?);
        let age_cdf = cumulative(&config.demographics.age_band_weights);
        let strata = Stratum::all()
            .map(|s| {
                let (hw, icu) = config.transitions_for(s);
                ResolvedStratum {
                    hw_cdf: cumulative(&hw.as_array()),
                    icu_cdf: cumulative(&icu.as_array()),
                    durations: config.durations.resolve(s),
                }
            })
            .collect();
        Ok(Simulator {
            config,
            admission_cdf,
            age_cdf,
            strata,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    /// Random stream owned by replication `replication`.
    pub fn replication_rng(&self, replication: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(u64::from(replication));
        rng
    }

    /// Draws one infected individual and, if hospitalised, their path.
    pub fn simulate_individual<R: Rng + ?Sized>(&self, rng: &mut R) -> SimulatedIndividual {
        let u: [f64; DRAWS_PER_INDIVIDUAL] = std::array::from_fn(|_| rng.gen::<f64>());
        let sex = if u[0] < self.config.demographics.female_fraction {
            Sex::Female
        } else {
            Sex::Male
        };
        let band = AgeBand::ALL[pick(&self.age_cdf, u[1])];
        let (lo, hi) = band.range();
        let age = lo + u[2] * (hi - lo);

        let mut individual = SimulatedIndividual {
            sex,
            age,
            hospitalized: u[3] < self.config.p_hospitalized,
            admission_day: None,
            trajectory: Vec::new(),
        };
        if !individual.hospitalized {
            return individual;
        }

        let stratum = &self.strata[Stratum {
            sex,
            age_band: band,
        }
        .index()];
        let admission = pick(&self.admission_cdf, u[4]) as u32;
        individual.admission_day = Some(admission);
        individual.trajectory.push((State::Hw, admission));

        let d = &stratum.durations;
        match pick(&stratum.hw_cdf, u[5]) {
            0 => {
                let icu_entry = admission + stay_days(&d.hw_to_icu, u[6]);
                individual.trajectory.push((State::Icu, icu_entry));
                let (state, law) = match pick(&stratum.icu_cdf, u[7]) {
                    0 => (State::Dead, &d.icu_death),
                    _ => (State::Discharged, &d.icu_discharge),
                };
                individual
                    .trajectory
                    .push((state, icu_entry + stay_days(law, u[8])));
            }
            1 => individual
                .trajectory
                .push((State::Dead, admission + stay_days(&d.hw_death, u[6]))),
            _ => individual.trajectory.push((
                State::Discharged,
                admission + stay_days(&d.hw_discharge, u[6]),
            )),
        }
        individual
    }

    /// Runs one replication on its own stream.
    pub fn run_replication(&self, replication: u32) -> ReplicationCounts {
        let mut rng = self.replication_rng(replication);
        let horizon = self.config.horizon_days as usize;
        let mut tally = Tally::new(horizon);
        for _ in 0..self.config.n_infected {
            let individual = self.simulate_individual(&mut rng);
            tally.add(&individual);
        }
        tally.finish(self.config.n_infected)
    }

    /// Runs every replication (in parallel) and aggregates in replication
    /// order, so the output does not depend on the thread count.
    pub fn run(&self) -> OccupancySeries {
        let replications: Vec<ReplicationCounts> = (0..self.config.n_replications)
            .into_par_iter()
            .map(|r| self.run_replication(r))
            .collect();
        OccupancySeries::from_replications(&self.config, replications)
    }
}

/// Difference-array tally for one replication.
struct Tally {
    horizon: usize,
    hw: Vec<i64>,
    icu: Vec<i64>,
    dead: Vec<i64>,
    discharged: Vec<i64>,
    waiting: Vec<i64>,
    never: u32,
    truncated: u32,
}

impl Tally {
    fn new(horizon: usize) -> Self {
        let z = || vec![0i64; horizon + 1];
        Tally {
            horizon,
            hw: z(),
            icu: z(),
            dead: z(),
            discharged: z(),
            waiting: z(),
            never: 0,
            truncated: 0,
        }
    }

    fn add(&mut self, ind: &SimulatedIndividual) {
        let Some(admission) = ind.admission_day else {
            self.never += 1;
            return;
        };
        let h = self.horizon;
        let clip = |d: u32| (d as usize).min(h);
        self.waiting[0] += 1;
        self.waiting[clip(admission)] -= 1;
        for (k, &(state, entry)) in ind.trajectory.iter().enumerate() {
            let from = clip(entry);
            let to = ind.trajectory.get(k + 1).map_or(h, |&(_, next)| clip(next));
            let series = match state {
                State::Hw => &mut self.hw,
                State::Icu => &mut self.icu,
                State::Dead => &mut self.dead,
                State::Discharged => &mut self.discharged,
            };
            series[from] += 1;
            series[to] -= 1;
        }
        if ind.exit_day().is_none_or(|d| d as usize >= h) {
            self.truncated += 1;
        }
    }

    fn finish(self, n_infected: u32) -> ReplicationCounts {
        let mut days = Vec::with_capacity(self.horizon);
        let mut run = [0i64; 5];
        for d in 0..self.horizon {
            for (acc, series) in run.iter_mut().zip([
                &self.hw,
                &self.icu,
                &self.dead,
                &self.discharged,
                &self.waiting,
            ]) {
                *acc += series[d];
            }
            let c = DayCounts {
                in_hw: run[0] as u32,
                in_icu: run[1] as u32,
                dead_cum: run[2] as u32,
                discharged_cum: run[3] as u32,
                not_yet_admitted: run[4] as u32,
                never_hospitalized: self.never,
            };
            debug_assert_eq!(c.total(), n_infected);
            days.push(c);
        }
        ReplicationCounts {
            days,
            truncated: self.truncated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DayCounts {
    pub in_hw: u32,
    pub in_icu: u32,
    pub dead_cum: u32,
    pub discharged_cum: u32,
    pub not_yet_admitted: u32,
    pub never_hospitalized: u32,
}

impl DayCounts {
    pub fn total(&self) -> u32 {
        self.in_hw
            + self.in_icu
            + self.dead_cum
            + self.discharged_cum
            + self.not_yet_admitted
            + self.never_hospitalized
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationCounts {
    pub days: Vec<DayCounts>,
    /// Individuals still in hospital at the end of the horizon.
    pub truncated: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DailySummary {
    pub day: u32,
    pub mean_hw: f64,
    pub sd_hw: f64,
    pub mean_icu: f64,
    pub sd_icu: f64,
    pub mean_dead: f64,
    pub sd_dead: f64,
    pub mean_discharged: f64,
    pub sd_discharged: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub n_replications: u32,
    pub n_infected: u32,
    pub horizon_days: u32,
    pub stratified: bool,
    /// Individuals, summed over replications, still in hospital at the horizon.
    pub truncated_individuals: u64,
    pub replications_with_truncation: u32,
    pub truncated: bool,
    /// Statistic compared against capacity when counting exceedance days.
    pub exceedance_statistic: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySeries {
    pub replications: Vec<ReplicationCounts>,
    pub summary: Vec<DailySummary>,
    pub metadata: RunMetadata,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub const OCCUPANCY_COLUMNS: [&str; 9] = [
    "day",
    "mean_hw",
    "sd_hw",
    "mean_icu",
    "sd_icu",
    "mean_dead",
    "sd_dead",
    "mean_discharged",
    "sd_discharged",
];

impl OccupancySeries {
    pub fn from_replications(
        config: &SimulationConfig,
        replications: Vec<ReplicationCounts>,
    ) -> Self {
        let horizon = config.horizon_days as usize;
        let summary = (0..horizon)
            .map(|d| {
                let col = |f: fn(&DayCounts) -> u32| {
                    replications.iter().map(move |r| f64::from(f(&r.days[d])))
                };
                let (mean_hw, sd_hw) = mean_sd(col(|c| c.in_hw));
                let (mean_icu, sd_icu) = mean_sd(col(|c| c.in_icu));
                let (mean_dead, sd_dead) = mean_sd(col(|c| c.dead_cum));
                let (mean_discharged, sd_discharged) = mean_sd(col(|c| c.discharged_cum));
                DailySummary {
                    day: d as u32,
                    mean_hw,
                    sd_hw,
                    mean_icu,
                    sd_icu,
                    mean_dead,
                    sd_dead,
                    mean_discharged,
                    sd_discharged,
                }
            })
            .collect();
        let truncated_individuals = replications.iter().map(|r| u64::from(r.truncated)).sum();
        let replications_with_truncation =
            replications.iter().filter(|r| r.truncated > 0).count() as u32;
        let metadata = RunMetadata {
            seed: config.seed,
            n_replications: replications.len() as u32,
            n_infected: config.n_infected,
            horizon_days: config.horizon_days,
            stratified: config.is_stratified(),
            truncated_individuals,
            replications_with_truncation,
            truncated: truncated_individuals > 0,
            exceedance_statistic: "mean".into(),
        };
        OccupancySeries {
            replications,
            summary,
            metadata,
        }
    }

    pub fn mean_hw(&self) -> Vec<f64> {
        self.summary.iter().map(|s| s.mean_hw).collect()
    }

    pub fn mean_icu(&self) -> Vec<f64> {
        self.summary.iter().map(|s| s.mean_icu).collect()
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(OCCUPANCY_COLUMNS)?;
        for s in &self.summary {
            w.write_record([
                s.day.to_string(),
                format_real(s.mean_hw),
                format_real(s.sd_hw),
                format_real(s.mean_icu),
                format_real(s.sd_icu),
                format_real(s.mean_dead),
                format_real(s.sd_dead),
                format_real(s.mean_discharged),
                format_real(s.sd_discharged),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads the daily summary written by [`OccupancySeries::write_csv`].
pub fn read_occupancy_csv<R: io::Read>(reader: R) -> Result<Vec<DailySummary>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 9];
    for (slot, name) in idx.iter_mut().zip(OCCUPANCY_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let mut v = [0f64; 9];
        for ((slot, &i), name) in v.iter_mut().zip(&idx).zip(OCCUPANCY_COLUMNS) {
            let raw = rec.get(i).unwrap_or("");
            *slot = raw.parse().map_err(|e| Error::Field {
                row,
                column: name.to_string(),
                message: format!("`{raw}`: {e}"),
            })?;
        }
        out.push(DailySummary {
            day: v[0] as u32,
            mean_hw: v[1],
            sd_hw: v[2],
            mean_icu: v[3],
            sd_icu: v[4],
            mean_dead: v[5],
            sd_dead: v[6],
            mean_discharged: v[7],
            sd_discharged: v[8],
        });
    }
    Ok(out)
}

pub fn simulate_outbreak(config: &SimulationConfig) -> Result<OccupancySeries> {
    Ok(Simulator::new(config.clone())?.run())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Hw,
    Icu,
}

impl Resource {
    pub fn as_str(self) -> &'static str {
        match self {
            Resource::Hw => "hw",
            Resource::Icu => "icu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub resource: Resource,
    pub capacity: u32,
    pub days_exceeded: u32,
}

pub const DEFAULT_HW_CAPACITIES: RangeInclusive<u32> = 15..=90;
pub const DEFAULT_ICU_CAPACITIES: RangeInclusive<u32> = 5..=15;

/// Days on which mean demand strictly exceeds each capacity.
pub fn capacity_excess_from_means(
    hw_demand: &[f64],
    icu_demand: &[f64],
    hw_capacities: RangeInclusive<u32>,
    icu_capacities: RangeInclusive<u32>,
) -> Result<Vec<CapacityRow>> {
    if hw_capacities.is_empty() {
        return Err(Error::EmptyRange(format!("hw {hw_capacities:?}")));
    }
    if icu_capacities.is_empty() {
        return Err(Error::EmptyRange(format!("icu {icu_capacities:?}")));
    }
    let count =
        |demand: &[f64], c: u32| demand.iter().filter(|&&m| m > f64::from(c)).count() as u32;
    let hw = hw_capacities.map(|capacity| CapacityRow {
        resource: Resource::Hw,
        capacity,
        days_exceeded: count(hw_demand, capacity),
    });
    let icu = icu_capacities.map(|capacity| CapacityRow {
        resource: Resource::Icu,
        capacity,
        days_exceeded: count(icu_demand, capacity),
    });
    Ok(hw.chain(icu).collect())
}

pub fn capacity_excess(
    series: &OccupancySeries,
    hw_capacities: RangeInclusive<u32>,
    icu_capacities: RangeInclusive<u32>,
) -> Result<Vec<CapacityRow>> {
    capacity_excess_from_means(
        &series.mean_hw(),
        &series.mean_icu(),
        hw_capacities,
        icu_capacities,
    )
}

pub fn write_capacity_csv<W: io::Write>(rows: &[CapacityRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["resource", "capacity", "days_exceeded"])?;
    for r in rows {
        w.write_record([
            r.resource.as_str().to_string(),
            r.capacity.to_string(),
            r.days_exceeded.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Conditional minus unconditional mean, per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyDivergence {
    pub day: u32,
    pub hw: f64,
    pub icu: f64,
    pub dead: f64,
    pub discharged: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityComparison {
    pub resource: Resource,
    pub capacity: u32,
    pub days_unconditional: u32,
    pub days_conditional: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DivergenceSummary {
    pub max_abs_hw: f64,
    pub max_abs_icu: f64,
    pub max_abs_dead: f64,
    pub max_abs_discharged: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub unconditional: OccupancySeries,
    pub conditional: OccupancySeries,
    pub divergence: Vec<DailyDivergence>,
    pub summary: DivergenceSummary,
    pub capacity: Vec<CapacityComparison>,
}

/// Runs both configs and contrasts their daily means and exceedance tables.
pub fn compare_conditional(
    unconditional: &SimulationConfig,
    conditional: &SimulationConfig,
) -> Result<Comparison> {
    compare_conditional_with(
        unconditional,
        conditional,
        DEFAULT_HW_CAPACITIES,
        DEFAULT_ICU_CAPACITIES,
    )
}

pub fn compare_conditional_with(
    unconditional: &SimulationConfig,
    conditional: &SimulationConfig,
    hw_capacities: RangeInclusive<u32>,
    icu_capacities: RangeInclusive<u32>,
) -> Result<Comparison> {
    let mismatch = [
        (
            "n_infected",
            u64::from(unconditional.n_infected),
            u64::from(conditional.n_infected),
        ),
        (
            "horizon_days",
            u64::from(unconditional.horizon_days),
            u64::from(conditional.horizon_days),
        ),
        ("seed", unconditional.seed, conditional.seed),
    ]
    .into_iter()
    .find(|(_, a, b)| a != b);
    if let Some((field, a, b)) = mismatch {
        return Err(Error::ConfigMismatch(format!("{field}: {a} vs {b}")));
    }
    let u = simulate_outbreak(unconditional)?;
    let c = simulate_outbreak(conditional)?;
    let divergence: Vec<DailyDivergence> = u
        .summary
        .iter()
        .zip(&c.summary)
        .map(|(a, b)| DailyDivergence {
            day: a.day,
            hw: b.mean_hw - a.mean_hw,
            icu: b.mean_icu - a.mean_icu,
            dead: b.mean_dead - a.mean_dead,
            discharged: b.mean_discharged - a.mean_discharged,
        })
        .collect();
    let summary = divergence
        .iter()
        .fold(DivergenceSummary::default(), |acc, d| DivergenceSummary {
            max_abs_hw: acc.max_abs_hw.max(d.hw.abs()),
            max_abs_icu: acc.max_abs_icu.max(d.icu.abs()),
            max_abs_dead: acc.max_abs_dead.max(d.dead.abs()),
            max_abs_discharged: acc.max_abs_discharged.max(d.discharged.abs()),
        });
    let cap_u = capacity_excess(&u, hw_capacities.clone(), icu_capacities.clone())?;
    let cap_c = capacity_excess(&c, hw_capacities, icu_capacities)?;
    let capacity = cap_u
        .iter()
        .zip(&cap_c)
        .map(|(a, b)| CapacityComparison {
            resource: a.resource,
            capacity: a.capacity,
            days_unconditional: a.days_exceeded,
            days_conditional: b.days_exceeded,
        })
        .collect();
    Ok(Comparison {
        unconditional: u,
        conditional: c,
        divergence,
        summary,
        capacity,
    })
}

impl Comparison {
    pub fn write_divergence_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["day", "diff_hw", "diff_icu", "diff_dead", "diff_discharged"])?;
        for d in &self.divergence {
            w.write_record([
                d.day.to_string(),
                format_real(d.hw),
                format_real(d.icu),
                format_real(d.dead),
                format_real(d.discharged),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_capacity_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "resource",
            "capacity",
            "days_unconditional",
            "days_conditional",
        ])?;
        for r in &self.capacity {
            w.write_record([
                r.resource.as_str().to_string(),
                r.capacity.to_string(),
                r.days_unconditional.to_string(),
                r.days_conditional.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degenerate(n_infected: u32, admission_day: usize, stay: u32) -> SimulationConfig {
        let mut weights = vec![0.0; admission_day + 1];
        weights[admission_day] = 1.0;
        SimulationConfig {
            n_infected,
            n_replications: 3,
            horizon_days: 20,
            p_hospitalized: 1.0,
            admission: AdmissionCurve::Weights(weights),
            demographics: Demographics::default(),
            transitions: TransitionTable {
                hw: HwOutcomes {
                    to_icu: 0.0,
                    death: 0.0,
                    discharge: 1.0,
                },
                icu: IcuOutcomes {
                    death: 0.5,
                    discharge: 0.5,
                },
                strata: Vec::new(),
            },
            durations: DurationTable {
                base: DurationSet::all_fixed(stay),
                strata: Vec::new(),
            },
            seed: 3,
        }
    }

    #[test]
    fn degenerate_trajectory() {
        let sim = Simulator::new(degenerate(1, 3, 5)).unwrap();
        let mut rng = sim.replication_rng(0);
        let ind = sim.simulate_individual(&mut rng);
        assert!(ind.hospitalized);
        assert_eq!(ind.trajectory, vec![(State::Hw, 3), (State::Discharged, 8)]);
    }

    #[test]
    fn never_hospitalized_when_probability_zero() {
        let mut config = SimulationConfig::default();
        config.p_hospitalized = 0.0;
        let sim = Simulator::new(config).unwrap();
        let mut rng = sim.replication_rng(0);
        for _ in 0..1000 {
            let ind = sim.simulate_individual(&mut rng);
            assert!(!ind.hospitalized);
            assert!(ind.trajectory.is_empty());
        }
    }

    #[test]
    fn single_patient_occupancy() {
        let series = simulate_outbreak(&degenerate(1, 0, 5)).unwrap();
        for rep in &series.replications {
            for (d, c) in rep.days.iter().enumerate() {
                assert_eq!(c.in_hw, u32::from(d < 5), "day {d}");
                assert_eq!(c.discharged_cum, u32::from(d >= 5), "day {d}");
                assert_eq!(c.total(), 1);
            }
        }
        assert_eq!(series.metadata.truncated_individuals, 0);
    }

    #[test]
    fn truncation_is_flagged() {
        let series = simulate_outbreak(&degenerate(2, 10, 15)).unwrap();
        assert_eq!(series.metadata.truncated_individuals, 6);
        assert!(series.metadata.truncated);
        let last = series.replications[0].days[19];
        assert_eq!(last.in_hw, 2);
        assert_eq!(last.total(), 2);
    }

    #[test]
    fn stay_rounding() {
        let law = DurationLaw::Weibull(crate::weibull::WeibullParams::new(1.0, 10.0).unwrap());
        assert_eq!(stay_days(&law, 0.0), 1);
        let u = 1.0 - (-1f64).exp();
        assert_eq!(stay_days(&law, u), 10);
        assert_eq!(stay_days(&DurationLaw::Fixed { fixed_days: 4 }, 0.99), 4);
    }

    #[test]
    fn pick_skips_zero_weight() {
        let cdf = cumulative(&[0.0, 0.0, 3.0]);
        assert_eq!(pick(&cdf, 0.0), 2);
        let cdf = cumulative(&[1.0, 0.0, 1.0]);
        assert_eq!(pick(&cdf, 0.49), 0);
        assert_eq!(pick(&cdf, 0.5), 2);
    }

    #[test]
    fn capacity_strict_exceedance() {
        let mut icu = vec![0.0; 200];
        icu[10..60].iter_mut().for_each(|v| *v = 10.0);
        let hw = vec![0.0; 200];
        let rows = capacity_excess_from_means(&hw, &icu, 15..=16, 9..=10).unwrap();
        let icu_rows: Vec<_> = rows
            .iter()
            .filter(|r| r.resource == Resource::Icu)
            .collect();
        assert_eq!(icu_rows[0].days_exceeded, 50);
        assert_eq!(icu_rows[1].days_exceeded, 0);
        #[allow(clippy::reversed_empty_ranges)]
        let empty = capacity_excess_from_means(&hw, &icu, 10..=5, 9..=10);
        assert!(matches!(empty, Err(Error::EmptyRange(_))));
    }

    #[test]
    fn compare_rejects_mismatched_configs() {
        let a = degenerate(10, 0, 5);
        let mut b = a.clone();
        b.seed = 4;
        assert!(matches!(
            compare_conditional(&a, &b),
            Err(Error::ConfigMismatch(_))
        ));
    }

    #[test]
    fn occupancy_csv_round_trip() {
        let series = simulate_outbreak(&degenerate(4, 2, 3)).unwrap();
        let mut buf = Vec::new();
        series.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "day,mean_hw,sd_hw,mean_icu,sd_icu,mean_dead,sd_dead,mean_discharged,sd_discharged\n0,0.0,0.0,"
        ));
        assert_eq!(read_occupancy_csv(buf.as_slice()).unwrap(), series.summary);
    }
}
