//! Oracles and data generators shared by the integration tests. Nothing in
//! here calls the estimators under test.

#![allow(dead_code)]

use loscure::{Observation, Sex, SurvivalCurve};
use rand::Rng;

/// Ordering used by the oracles: time ascending, then event, known cure,
/// censored; input position last.
pub fn oracle_order(data: &[Observation]) -> Vec<usize> {
    let rank = |o: &Observation| {
        if o.event {
            0
        } else if o.known_cure {
            1
        } else {
            2
        }
    };
    let mut idx: Vec<usize> = (0..data.len()).collect();
    // Insertion sort keeps this independent of the library's sort.
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (&data[idx[j - 1]], &data[idx[j]]);
            let after = a.time > b.time || (a.time == b.time && rank(a) > rank(b));
            if !after {
                break;
            }
            idx.swap(j - 1, j);
            j -= 1;
        }
    }
    idx
}

/// Direct evaluation of the known-cure product at time `t` (right-continuous):
/// product over ordered i with d_i = 1 and t_i <= t of
/// `1 - d_i / (n - i + 1 + sum_{j=1..i} x_j)`, with 1-based i.
pub fn known_cure_brute_force(data: &[Observation], t: f64) -> f64 {
    let order = oracle_order(data);
    let n = data.len() as f64;
    let mut s = 1.0;
    for (pos, &k) in order.iter().enumerate() {
        let i = (pos + 1) as f64;
        let o = &data[k];
        if o.time > t || !o.event {
            continue;
        }
        let x_sum: f64 = order[..=pos]
            .iter()
            .filter(|&&j| data[j].known_cure)
            .count() as f64;
        s *= 1.0 - 1.0 / (n - i + 1.0 + x_sum);
    }
    s
}

/// Plain Kaplan-Meier by per-time risk-set counting (known cures censored).
pub fn km_brute_force(data: &[Observation], t: f64) -> f64 {
    let mut times: Vec<f64> = data
        .iter()
        .filter(|o| o.event && o.time <= t)
        .map(|o| o.time)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .iter()
        .map(|&u| {
            let d = data.iter().filter(|o| o.event && o.time == u).count() as f64;
            let r = data.iter().filter(|o| o.time >= u).count() as f64;
            1.0 - d / r
        })
        .product()
}

/// `#{uncensored t_i > t} / #uncensored`.
pub fn empirical_brute_force(data: &[Observation], t: f64) -> f64 {
    let m = data.iter().filter(|o| o.event).count() as f64;
    data.iter().filter(|o| o.event && o.time > t).count() as f64 / m
}

pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Weighted known-cure product with explicit sums:
/// `1 - w_i / (sum_{j >= i} w_j + sum_{j <= i} x_j w_j)`.
pub fn weighted_brute_force(
    data: &[Observation],
    weights: &[f64],
    t: f64,
    with_cures: bool,
) -> f64 {
    let order = oracle_order(data);
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|k| k / total).collect();
    let mut s = 1.0;
    for (pos, &k) in order.iter().enumerate() {
        let o = &data[k];
        if o.time > t || !o.event || w[k] == 0.0 {
            continue;
        }
        let at_risk: f64 = order[pos..].iter().map(|&j| w[j]).sum();
        let cured: f64 = if with_cures {
            order[..=pos]
                .iter()
                .filter(|&&j| data[j].known_cure)
                .map(|&j| w[j])
                .sum()
        } else {
            0.0
        };
        s *= 1.0 - w[k] / (at_risk + cured);
    }
    s
}

/// Evaluation grid: every observed time, midpoints, and points past the end.
pub fn grid(data: &[Observation]) -> Vec<f64> {
    let mut ts: Vec<f64> = data.iter().map(|o| o.time).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut g = ts.clone();
    g.extend(ts.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    g.push(ts.last().copied().unwrap_or(0.0) + 1.0);
    g.push(1e9);
    g
}

pub fn max_abs_diff(curve: &SurvivalCurve, oracle: impl Fn(f64) -> f64, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&t| (curve.eval(t) - oracle(t)).abs())
        .fold(0.0, f64::max)
}

/// Random dataset with heavy ties: integer times in `0..=max_time`.
pub fn random_dataset<R: Rng>(
    rng: &mut R,
    n: usize,
    cure_rate: f64,
    censor_rate: f64,
    max_time: u32,
) -> Vec<Observation> {
    (0..n)
        .map(|_| {
            let t = f64::from(rng.gen_range(0..=max_time));
            let u: f64 = rng.gen();
            let o = if u < cure_rate {
                Observation::cured(t)
            } else if u < cure_rate + censor_rate {
                Observation::censored(t)
            } else {
                Observation::event(t)
            };
            let sex = if rng.gen_bool(0.5) {
                Sex::Male
            } else {
                Sex::Female
            };
            o.with_age(f64::from(rng.gen_range(18..=95u32)))
                .with_sex(sex)
        })
        .collect()
}

pub fn strip_cures(data: &[Observation]) -> Vec<Observation> {
    data.iter()
        .map(|o| Observation {
            known_cure: false,
            ..*o
        })
        .collect()
}

pub fn with_age(data: &[Observation], age: f64) -> Vec<Observation> {
    data.iter().map(|o| o.with_age(age)).collect()
}

pub fn assert_same_steps(a: &SurvivalCurve, b: &SurvivalCurve, tol: f64) -> Result<(), String> {
    if a.jump_times() != b.jump_times() {
        return Err(format!(
            "jump times differ: {:?} vs {:?}",
            a.jump_times(),
            b.jump_times()
        ));
    }
    for (x, y) in a.values().iter().zip(b.values()) {
        if (x - y).abs() > tol {
            return Err(format!("values differ: {x} vs {y}"));
        }
    }
    Ok(())
}

/// Mixture-cure sample: each subject is susceptible with probability
/// `p_event` (event time from `latency`) or cured (exit time from `cure_exit`).
/// A random `censored_share` of subjects is under administrative censoring
/// at Uniform(0, `censor_max`); the rest are followed to their outcome, and
/// only those have their cure status ascertained.
pub struct CureSample {
    pub p_event: f64,
    pub latency: loscure::WeibullParams,
    pub cure_exit: loscure::WeibullParams,
    pub censored_share: f64,
    pub censor_max: f64,
}

impl CureSample {
    pub fn draw<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<Observation> {
        let inv =
            |p: &loscure::WeibullParams, u: f64| p.scale * (-(1.0 - u).ln()).powf(1.0 / p.shape);
        (0..n)
            .map(|_| {
                let susceptible = rng.gen::<f64>() < self.p_event;
                let t_event = inv(&self.latency, rng.gen());
                let t_exit = inv(&self.cure_exit, rng.gen());
                let censoring = if rng.gen::<f64>() < self.censored_share {
                    rng.gen::<f64>() * self.censor_max
                } else {
                    f64::INFINITY
                };
                match (susceptible, censoring.is_finite()) {
                    (true, _) if t_event <= censoring => Observation::event(t_event),
                    (true, _) => Observation::censored(censoring),
                    (false, false) => Observation::cured(t_exit),
                    (false, true) => Observation::censored(censoring),
                }
            })
            .collect()
    }
}
