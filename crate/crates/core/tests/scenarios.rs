use parkcharge_core::model::{FacilityConfig, TimeGrid};
use parkcharge_core::scenarios::*;
use proptest::prelude::*;

const KS_LIMIT: f64 = 0.05;

fn int_shapes() -> Vec<IntDist> {
    vec![
        IntDist::uniform(1, 20),
        IntDist {
            min: 1,
            max: 8,
            shape: Shape::Normal { mean: 3.0, sd: 1.5 },
        },
        IntDist {
            min: 0,
            max: 23,
            shape: Shape::Bimodal {
                weight: 0.6,
                first_mean: 8.0,
                first_sd: 1.0,
                second_mean: 17.0,
                second_sd: 2.0,
            },
        },
    ]
}

fn real_shapes() -> Vec<RealDist> {
    vec![
        RealDist::uniform(1.0, 10.0),
        RealDist {
            min: 1.0,
            max: 10.0,
            shape: Shape::Normal { mean: 5.0, sd: 2.0 },
        },
        RealDist {
            min: 1.0,
            max: 10.0,
            shape: Shape::Bimodal {
                weight: 0.3,
                first_mean: 2.0,
                first_sd: 0.5,
                second_mean: 7.0,
                second_sd: 1.5,
            },
        },
    ]
}

fn facilities(n: u32) -> Vec<FacilityConfig> {
    (1..=n)
        .map(|id| {
            FacilityConfig::uniform(id, 8, 4, 7, 24, 75.0, 0.127).with_solar(vec![0.0; 24], 15.0 * f64::from(id - 1))
        })
        .collect()
}

fn params(seed: u64, arrivals: CountDist, arrival_slot: IntDist, valuation: RealDist) -> ScenarioParams {
    ScenarioParams {
        days: 1,
        seed,
        arrivals,
        arrival_slot,
        stay: IntDist::uniform(1, 8),
        min_departure_slot: None,
        energy: IntDist::uniform(1, 20),
        valuation,
        preferences: PreferenceSpec::default(),
        solar: SolarSpec::default(),
    }
}

#[test]
fn integer_samplers_match_their_distributions() {
    for (k, dist) in int_shapes().into_iter().enumerate() {
        let mut rng = day_rng(11, k);
        let xs: Vec<f64> = (0..10_000).map(|_| f64::from(dist.sample(&mut rng))).collect();
        let d = ks_distance(&xs, |x| dist.cdf(x));
        assert!(d <= KS_LIMIT, "{dist:?}: KS {d}");
        assert!((dist.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(
            (mean - dist.mean()).abs() < 0.1 * dist.mean().max(1.0),
            "{dist:?}: {mean} vs {}",
            dist.mean()
        );
    }
}

#[test]
fn real_samplers_match_their_distributions() {
    for (k, dist) in real_shapes().into_iter().enumerate() {
        let mut rng = day_rng(12, k);
        let xs: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
        assert!(xs.iter().all(|x| (dist.min..=dist.max).contains(x)));
        let d = ks_distance(&xs, |x| dist.cdf(x));
        assert!(d <= KS_LIMIT, "{dist:?}: KS {d}");
        for u in [0.1, 0.5, 0.9] {
            assert!((dist.cdf(dist.quantile(u)) - u).abs() < 1e-6);
        }
    }
}

#[test]
fn sampled_days_follow_the_configured_marginals() {
    let fs = facilities(1);
    let grid = TimeGrid::hourly_day();
    let arrival = int_shapes()[2];
    let valuation = real_shapes()[1];
    let day = sample_day_trace(
        &params(5, CountDist::Fixed { count: 10_000 }, arrival, valuation),
        &fs,
        grid,
        0,
    )
    .unwrap();
    assert_eq!(day.users.len(), 10_000);
    let slots: Vec<f64> = day.users.iter().map(|u| u.arrival_slot as f64).collect();
    assert!(ks_distance(&slots, |x| arrival.cdf(x)) <= KS_LIMIT);
    let values: Vec<f64> = day.users.iter().map(|u| u.max_valuation()).collect();
    assert!(ks_distance(&values, |x| valuation.cdf(x)) <= KS_LIMIT);
}

#[test]
fn arrival_counts_follow_the_count_distribution() {
    let fs = facilities(1);
    let grid = TimeGrid::hourly_day();
    let count = CountDist::Normal { mean: 60.0, sd: 10.0 };
    let p = ScenarioParams {
        days: 400,
        ..params(9, count, IntDist::uniform(6, 18), RealDist::uniform(1.0, 10.0))
    };
    let trace = sample_scenario(&p, &fs, grid).unwrap();
    let mean = trace.days.iter().map(|d| d.users.len() as f64).sum::<f64>() / 400.0;
    assert!((mean - 60.0).abs() < 2.0, "{mean}");
}

#[test]
fn zero_rating_gives_no_solar() {
    let fs = facilities(3);
    let grid = TimeGrid::hourly_day();
    let day = sample_day_trace(
        &params(
            1,
            CountDist::Fixed { count: 5 },
            IntDist::uniform(6, 18),
            RealDist::uniform(1.0, 10.0),
        ),
        &fs,
        grid,
        0,
    )
    .unwrap();
    assert!(day.solar[0].iter().all(|&s| s == 0.0));
    assert!(day.solar[2].iter().any(|&s| s > 0.0));
    assert!(day.solar[2].iter().all(|&s| s <= 30.0));
    // nothing at night
    assert_eq!(day.solar[2][2], 0.0);
    assert_eq!(day.solar[2][21], 0.0);
}

#[test]
fn clear_noon_output_reflects_system_loss() {
    let spec = SolarSpec {
        sunrise: 6.0,
        sunset: 18.0,
        ..SolarSpec::default()
    };
    let curve = spec.curve(TimeGrid::hourly_day(), 32.0, 1.0);
    let peak = curve.iter().copied().fold(0.0, f64::max);
    let ideal = 32.0 * (1.0 - 0.14);
    assert!(peak <= ideal && peak > 0.99 * ideal, "{peak}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn traces_are_reproducible_and_day_local(seed in any::<u64>(), days in 1usize..5) {
        let fs = facilities(2);
        let grid = TimeGrid::hourly_day();
        let p = ScenarioParams { days, ..params(seed, CountDist::Fixed { count: 30 }, IntDist::uniform(6, 18), RealDist::uniform(1.0, 10.0)) };
        let a = sample_scenario(&p, &fs, grid).unwrap();
        prop_assert_eq!(&a, &sample_scenario(&p, &fs, grid).unwrap());
        let longer = sample_scenario(&ScenarioParams { days: days + 2, ..p.clone() }, &fs, grid).unwrap();
        prop_assert_eq!(&a.days[..], &longer.days[..days]);
        for (k, d) in a.days.iter().enumerate() {
            prop_assert_eq!(d, &sample_day_trace(&p, &fs, grid, k).unwrap());
            prop_assert!(d.instance(&fs, grid).is_ok());
        }
    }

    #[test]
    fn forecasts_bracket_the_realized_curve(seed in any::<u64>(), frac in 0.0f64..0.3) {
        let fs = facilities(3);
        let grid = TimeGrid::hourly_day();
        let day = sample_day_trace(&params(seed, CountDist::Fixed { count: 1 }, IntDist::uniform(6, 18), RealDist::uniform(1.0, 10.0)), &fs, grid, 0).unwrap();
        for (f, realized) in fs.iter().zip(&day.solar) {
            let fc = make_forecast(realized, f.solar_rating, linear_widths(f.solar_rating, frac, 24)).unwrap();
            prop_assert!(fc.check_invariants().is_empty());
            for (t, &s) in realized.iter().enumerate() {
                for tc in 0..=t {
                    prop_assert!(fc.lower(t, tc) <= s && s <= fc.upper(t, tc));
                    prop_assert!(fc.lower(t, tc) >= 0.0 && fc.upper(t, tc) <= f.solar_rating);
                    if tc < t {
                        prop_assert!(fc.lower(t, tc) <= fc.lower(t, tc + 1));
                        prop_assert!(fc.upper(t, tc) >= fc.upper(t, tc + 1));
                    }
                }
            }
        }
    }

    #[test]
    fn buffers_lengthen_stays_within_the_day(seed in any::<u64>(), buffer in 0usize..4) {
        let fs = facilities(1);
        let grid = TimeGrid::hourly_day();
        let trace = sample_scenario(&params(seed, CountDist::Fixed { count: 40 }, IntDist::uniform(6, 18), RealDist::uniform(1.0, 10.0)), &fs, grid).unwrap();
        let buffered = buffer_transform(&trace, buffer, grid);
        for (a, b) in trace.days[0].users.iter().zip(&buffered.days[0].users) {
            prop_assert_eq!(b.departure_slot, (a.departure_slot + buffer).min(23));
            prop_assert_eq!((a.id, a.arrival_slot, a.energy), (b.id, b.arrival_slot, b.energy));
        }
    }
}
