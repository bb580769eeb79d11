use loscure::sim::{
    capacity_excess_from_means, compare_conditional, AgeBand, DurationLaw, DurationOverride,
    SimulationConfig, Simulator,
};
use loscure::{Error, Sex, WeibullParams};

fn small(seed: u64) -> SimulationConfig {
    SimulationConfig {
        n_replications: 300,
        seed,
        ..SimulationConfig::default()
    }
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let sim = Simulator::new(small(3)).unwrap();
    let pool = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
    };
    let one = pool(1).install(|| sim.run());
    let many = pool(7).install(|| sim.run());
    assert_eq!(one.replications, many.replications);
    assert_eq!(one.summary, many.summary);
}

#[test]
fn every_day_is_conserved() {
    let cfg = small(5);
    let run = Simulator::new(cfg.clone()).unwrap().run();
    for rep in &run.replications {
        let mut prev = None;
        for c in &rep.days {
            assert_eq!(c.total(), cfg.n_infected);
            if let Some((dead, disc)) = prev {
                assert!(c.dead_cum >= dead && c.discharged_cum >= disc);
            }
            prev = Some((c.dead_cum, c.discharged_cum));
        }
    }
}

#[test]
fn identical_configs_do_not_diverge() {
    let cfg = small(9);
    let cmp = compare_conditional(&cfg, &cfg).unwrap();
    assert!(cmp
        .divergence
        .iter()
        .all(|d| d.hw == 0.0 && d.icu == 0.0 && d.dead == 0.0 && d.discharged == 0.0));
    assert!(cmp
        .capacity
        .iter()
        .all(|c| c.days_conditional == c.days_unconditional));
}

#[test]
fn longer_ward_stays_raise_ward_occupancy() {
    let base = small(11);
    let mut longer = base.clone();
    longer.durations.strata.push(DurationOverride {
        sex: Some(Sex::Male),
        age_band: Some(AgeBand::From70),
        hw_discharge: Some(DurationLaw::Weibull(
            WeibullParams::from_median(1.5, 25.0).unwrap(),
        )),
        ..DurationOverride::default()
    });
    let cmp = compare_conditional(&base, &longer).unwrap();
    // Common random numbers: each affected stay only gets longer.
    assert!(cmp
        .divergence
        .iter()
        .all(|d| d.hw >= 0.0 && d.discharged <= 0.0 && d.icu == 0.0));
    assert!(cmp.summary.max_abs_hw > 0.5);
    assert!(cmp
        .capacity
        .iter()
        .all(|c| c.days_conditional >= c.days_unconditional));
}

#[test]
fn mismatched_configs_are_rejected() {
    let a = small(1);
    let b = SimulationConfig {
        seed: 2,
        ..a.clone()
    };
    assert!(matches!(
        compare_conditional(&a, &b),
        Err(Error::ConfigMismatch(_))
    ));
}

#[test]
fn seed_change_stays_within_sampling_error() {
    let a = Simulator::new(small(21)).unwrap().run();
    let b = Simulator::new(small(22)).unwrap().run();
    let n = 300.0f64;
    let mut worst = 0.0f64;
    for (x, y) in a.summary.iter().zip(&b.summary) {
        for (m1, s1, m2, s2) in [
            (x.mean_hw, x.sd_hw, y.mean_hw, y.sd_hw),
            (x.mean_icu, x.sd_icu, y.mean_icu, y.sd_icu),
        ] {
            let se = ((s1 * s1 + s2 * s2) / n).sqrt();
            if se > 0.0 {
                worst = worst.max((m1 - m2).abs() / se);
            } else {
                assert_eq!(m1, m2);
            }
        }
    }
    assert!(worst <= 3.0, "max z {worst}");
}

#[test]
fn half_the_replications_agree_with_all() {
    let full = Simulator::new(SimulationConfig::default()).unwrap().run();
    let half = Simulator::new(SimulationConfig {
        n_replications: 500,
        ..SimulationConfig::default()
    })
    .unwrap()
    .run();
    for (f, h) in full.summary.iter().zip(&half.summary) {
        let bound = 3.0 * f.sd_hw / 1000f64.sqrt();
        assert!((f.mean_hw - h.mean_hw).abs() <= bound, "day {}", f.day);
        let bound = 3.0 * f.sd_icu / 1000f64.sqrt();
        assert!((f.mean_icu - h.mean_icu).abs() <= bound, "day {}", f.day);
    }
}

#[test]
fn exceedance_is_strict_and_monotone() {
    let rows =
        capacity_excess_from_means(&[14.0, 15.0, 15.5, 40.0], &[5.0, 6.0], 15..=16, 5..=6).unwrap();
    let days: Vec<u32> = rows.iter().map(|r| r.days_exceeded).collect();
    assert_eq!(days, vec![2, 1, 1, 0]);
    #[allow(clippy::reversed_empty_ranges)]
    let empty = 20..=10;
    assert!(matches!(
        capacity_excess_from_means(&[], &[], empty, 5..=6),
        Err(Error::EmptyRange(_))
    ));
}

#[test]
fn occupancy_csv_round_trips() {
    let run = Simulator::new(SimulationConfig {
        n_replications: 20,
        ..SimulationConfig::default()
    })
    .unwrap()
    .run();
    let mut buf = Vec::new();
    run.write_csv(&mut buf).unwrap();
    let back = loscure::sim::read_occupancy_csv(buf.as_slice()).unwrap();
    assert_eq!(back, run.summary);
}
