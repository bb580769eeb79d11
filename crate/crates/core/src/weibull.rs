//! Two-parameter Weibull laws fitted to step survival curves.
//!
//! The fit minimises `sum_k m_k (S_W(t_k) - S_hat(t_k))^2` over the jump
//! times of the curve, with `m_k` the mass removed at each jump, using a
//! Nelder-Mead simplex on `(ln shape, ln scale)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::SurvivalCurve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub shape: f64,
    pub scale: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        let params = WeibullParams { shape, scale };
        params.validate()?;
        Ok(params)
    }

    /// Parameters with the given median.
    pub fn from_median(shape: f64, median: f64) -> Result<Self> {
        Self::new(shape, median / std::f64::consts::LN_2.powf(1.0 / shape))
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.is_finite() && self.shape > 0.0 && self.scale.is_finite() && self.scale > 0.0
        {
            Ok(())
        } else {
            Err(Error::InvalidWeibull {
                shape: self.shape,
                scale: self.scale,
            })
        }
    }

    pub fn median(&self) -> f64 {
        self.scale * std::f64::consts::LN_2.powf(1.0 / self.shape)
    }
}

/// `exp(-(t / scale)^shape)`.
pub fn weibull_survival(params: &WeibullParams, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    (-(t / params.scale).powf(params.shape)).exp()
}

/// Inverse transform of a uniform `u` in `(0, 1]`: `scale * (-ln u)^(1/shape)`.
pub fn weibull_quantile_from_uniform(params: &WeibullParams, u: f64) -> f64 {
    params.scale * (-u.ln()).powf(1.0 / params.shape)
}

/// One inverse-transform draw.
pub fn weibull_sample<R: Rng + ?Sized>(params: &WeibullParams, rng: &mut R) -> f64 {
    // gen::<f64>() is in [0, 1); flip it so ln never sees 0.
    let u = 1.0 - rng.gen::<f64>();
    weibull_quantile_from_uniform(params, u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the simplex diameter in log-parameter space.
    pub tolerance: f64,
    /// Record the best objective after every iteration.
    pub trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            tolerance: 1e-8,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub params: WeibullParams,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub trace: Option<Vec<f64>>,
}

struct Target {
    times: Vec<f64>,
    values: Vec<f64>,
    masses: Vec<f64>,
}

impl Target {
    fn objective(&self, log_params: [f64; 2]) -> f64 {
        let params = WeibullParams {
            shape: log_params[0].exp(),
            scale: log_params[1].exp(),
        };
        self.times
            .iter()
            .zip(&self.values)
            .zip(&self.masses)
            .map(|((&t, &s), &m)| {
                let r = weibull_survival(&params, t) - s;
                m * r * r
            })
            .sum()
    }
}

/// Starting point from the curve's median and upper quartile.
fn initial_guess(curve: &SurvivalCurve) -> WeibullParams {
    // (t_q / scale)^shape = -ln q at survival level q.
    let levels = [0.5, 0.25, 0.75];
    let quantiles: Vec<(f64, f64)> = levels
        .iter()
        .filter_map(|&q| curve.quantile_time(q).map(|t| (q, t)))
        .filter(|&(_, t)| t > 0.0)
        .collect();
    let pair = match quantiles.as_slice() {
        [a, b, ..] => Some((*a, *b)),
        _ => None,
    };
    if let Some(((q1, t1), (q2, t2))) = pair {
        if t1 != t2 {
            let shape = ((-q2.ln()).ln() - (-q1.ln()).ln()) / (t2.ln() - t1.ln());
            if shape.is_finite() && shape > 0.0 {
                let scale = t1 / (-q1.ln()).powf(1.0 / shape);
                if scale.is_finite() && scale > 0.0 {
                    return WeibullParams { shape, scale };
                }
            }
        }
    }
    // Exponential through whatever quantile exists, else the mid jump.
    let (q, t) = quantiles.first().copied().unwrap_or_else(|| {
        let times = curve.jump_times();
        let t = times[times.len() / 2].max(f64::MIN_POSITIVE);
        (curve.eval(t).clamp(1e-6, 1.0 - 1e-6), t)
    });
    WeibullParams {
        shape: 1.0,
        scale: (t / -q.ln()).max(1e-6),
    }
}

pub fn fit_weibull(curve: &SurvivalCurve) -> Result<FitReport> {
    fit_weibull_with(curve, &FitOptions::default())
}

pub fn fit_weibull_with(curve: &SurvivalCurve, options: &FitOptions) -> Result<FitReport> {
    let masses = curve.jump_masses();
    let jumps = masses.iter().filter(|&&m| m > 0.0).count();
    if jumps < 2 {
        return Err(Error::UnderdeterminedFit(jumps));
    }
    if curve.plateau() >= 0.5 {
        log::warn!(
            "fitting a Weibull law to a curve with plateau {:.3}; expected a latency curve",
            curve.plateau()
        );
    }
    let target = Target {
        times: curve.jump_times().to_vec(),
        values: curve.values().to_vec(),
        masses,
    };
    let start = initial_guess(curve);
    let x0 = [start.shape.ln(), start.scale.ln()];
    let result = nelder_mead(|x| target.objective(x), x0, options);
    let params = WeibullParams {
        shape: result.best[0].exp(),
        scale: result.best[1].exp(),
    };
    if !result.value.is_finite() {
        return Err(Error::NonFiniteObjective {
            shape: params.shape,
            scale: params.scale,
        });
    }
    params.validate()?;
    Ok(FitReport {
        params,
        sse: result.value.max(0.0),
        iterations: result.iterations,
        converged: result.converged,
        trace: result.trace,
    })
}

struct Simplex {
    best: [f64; 2],
    value: f64,
    iterations: usize,
    converged: bool,
    trace: Option<Vec<f64>>,
}

fn nelder_mead<F: Fn([f64; 2]) -> f64>(f: F, x0: [f64; 2], options: &FitOptions) -> Simplex {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;
    const STEP: f64 = 0.1;

    let eval = |x: [f64; 2]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts = [x0, [x0[0] + STEP, x0[1]], [x0[0], x0[1] + STEP]];
    let mut vals = pts.map(eval);
    let mut trace = options.trace.then(Vec::new);
    let mut iterations = 0;
    let mut converged = false;

    let lerp =
        |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];

    loop {
        // Order best..worst; sort_by is stable so ties keep their slots.
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.map(|i| pts[i]);
        vals = idx.map(|i| vals[i]);

        let diameter = (0..3)
            .flat_map(|a| (a + 1..3).map(move |b| (a, b)))
            .map(|(a, b)| {
                ((pts[a][0] - pts[b][0]).powi(2) + (pts[a][1] - pts[b][1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max);
        if diameter < options.tolerance {
            converged = true;
            break;
        }
        if iterations >= options.max_iterations {
            break;
        }
        iterations += 1;

        let centroid = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
        let reflected = lerp(centroid, pts[2], -REFLECT);
        let fr = eval(reflected);
        if fr < vals[0] {
            let expanded = lerp(centroid, pts[2], -EXPAND);
            let fe = eval(expanded);
            if fe < fr {
                pts[2] = expanded;
                vals[2] = fe;
            } else {
                pts[2] = reflected;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            pts[2] = reflected;
            vals[2] = fr;
        } else {
            let (candidate, fc) = if fr < vals[2] {
                let outside = lerp(centroid, reflected, CONTRACT);
                (outside, eval(outside))
            } else {
                let inside = lerp(centroid, pts[2], CONTRACT);
                (inside, eval(inside))
            };
            if fc < vals[2].min(fr) {
                pts[2] = candidate;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    pts[k] = lerp(pts[0], pts[k], SHRINK);
                    vals[k] = eval(pts[k]);
                }
            }
        }
        if let Some(trace) = trace.as_mut() {
            trace.push(vals.iter().copied().fold(f64::INFINITY, f64::min));
        }
    }

    Simplex {
        best: pts[0],
        value: vals[0],
        iterations,
        converged,
        trace,
    }
}
