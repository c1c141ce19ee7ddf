mod common;

use parkcharge_core::model::{
    AllocationState, FacilityConfig, FacilityId, Instance, LevelSet, ScheduleOption, TimeGrid, UserId, UserRequest,
};
use parkcharge_core::scheduler::*;
use proptest::prelude::*;

use common::{brute_charges, brute_options, fits_directly, loaded_instance, uniform_bounds};

#[test]
fn composition_counts_match_brute_force() {
    let f = FacilityConfig::uniform(1, 1, 1, 2, 3, 4.0, 0.127);
    let u = UserRequest::new(1, 0, 2, 2, [(1, 5.0)]);
    let opts = enumerate_options(&u, &f, LevelSet::up_to(2), 1000);
    assert_eq!(opts.len(), 6);
    assert_eq!(brute_charges(2, 3, 2).len(), 6);
    let tight = FacilityConfig::uniform(1, 1, 1, 1, 3, 4.0, 0.127);
    assert!(enumerate_options(
        &UserRequest::new(1, 0, 0, 2, [(1, 5.0)]),
        &tight,
        LevelSet::unrestricted(),
        10
    )
    .is_empty());
    assert_eq!(
        enumerate_options(
            &UserRequest::new(1, 0, 0, 1, [(1, 5.0)]),
            &tight,
            LevelSet::unrestricted(),
            10
        )
        .len(),
        1
    );
    for h in 0..9 {
        for slots in 1..5 {
            for cap in 1..4 {
                assert_eq!(
                    count_options(h, slots, cap),
                    brute_charges(h, slots, cap).len() as u128,
                    "{h} {slots} {cap}"
                );
            }
        }
    }
    assert_eq!(enumerate_options(&u, &f, LevelSet::up_to(2), 4).len(), 4);
}

#[test]
fn blocked_cables_yield_no_option() {
    let f = FacilityConfig::uniform(1, 1, 1, 2, 2, 4.0, 0.127);
    let user = UserRequest::new(1, 0, 1, 1, [(1, 5.0)]);
    let inst = Instance::new(TimeGrid::new(2, 1.0), vec![f], vec![user.clone()]).unwrap();
    let mut state = AllocationState::new(&inst);
    let blocker = ScheduleOption {
        facility: FacilityId(1),
        evse: 0,
        start: 1,
        charge: vec![0],
    };
    state.commit(&inst, UserId(9), blocker, 0.0).unwrap();
    let b = uniform_bounds(0.2, 10.0, inst.facilities());
    let q = best_option(
        &user,
        &Pricer::new(&inst, &state, &b, SolarView::Realized),
        LevelSet::unrestricted(),
    );
    assert!(q.option.is_none());
    assert_eq!(q.utility, 0.0);
}

#[test]
fn single_unit_goes_to_the_cheaper_slot() {
    // another charger already draws one unit in slot 0, so slot 1 is cheaper
    let f = FacilityConfig::uniform(1, 2, 1, 1, 2, 4.0, 0.127).with_solar(vec![2.0, 2.0], 2.0);
    let user = UserRequest::new(1, 0, 1, 1, [(1, 5.0)]);
    let inst = Instance::new(TimeGrid::new(2, 1.0), vec![f], vec![user.clone()]).unwrap();
    let mut state = AllocationState::new(&inst);
    let other = ScheduleOption {
        facility: FacilityId(1),
        evse: 1,
        start: 0,
        charge: vec![1],
    };
    state.commit(&inst, UserId(9), other, 0.0).unwrap();
    let b = uniform_bounds(0.2, 10.0, inst.facilities());
    let pricer = Pricer::new(&inst, &state, &b, SolarView::Realized);
    assert!(pricer.procurement(0, 0) > pricer.procurement(0, 1));
    let q = best_option(&user, &pricer, LevelSet::unrestricted());
    assert_eq!(q.option.unwrap().charge, vec![0, 1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn greedy_matches_exhaustive_enumeration(seed in any::<u64>(), horizon in 1usize..=4) {
        let l = loaded_instance(seed, horizon, 3);
        let pricer = Pricer::new(&l.instance, &l.state, &l.bounds, SolarView::Realized);
        let q = best_option(&l.probe, &pricer, l.levels);
        let v = l.probe.valuation(FacilityId(1)).unwrap();
        let best = brute_options(&l.probe, &l.instance, l.levels)
            .into_iter()
            .filter(|o| fits_directly(&l.instance, &l.state, o))
            .map(|o| v - pricer.option_cost(&o))
            .fold(f64::NEG_INFINITY, f64::max);
        match &q.option {
            None => prop_assert!(best == f64::NEG_INFINITY, "greedy found nothing, brute force {best}"),
            Some(o) => {
                prop_assert!((v - q.payment - best).abs() < 1e-9, "greedy {} brute {best}", v - q.payment);
                prop_assert!((q.utility - best.max(0.0)).abs() < 1e-9);
                prop_assert!((q.payment - pricer.option_cost(o)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quoted_options_are_valid_and_fit(seed in any::<u64>(), horizon in 1usize..=6) {
        let l = loaded_instance(seed, horizon, 3);
        let pricer = Pricer::new(&l.instance, &l.state, &l.bounds, SolarView::Realized);
        let q = best_option(&l.probe, &pricer, l.levels);
        if let Some(o) = q.option {
            prop_assert!(o.check_for(&l.probe, &l.instance.facilities()[0]).is_ok());
            prop_assert!(fits_directly(&l.instance, &l.state, &o));
            prop_assert!(o.charge.iter().all(|&e| e <= l.levels.cap(l.instance.facilities()[0].evse_max_energy)));
            let mut after = l.state.clone();
            prop_assert!(after.commit(&l.instance, l.probe.id, o, q.payment).is_ok());
            prop_assert!(after.check_invariants(&l.instance).is_empty());
        }
    }

    #[test]
    fn enumeration_lists_exactly_the_compositions(h in 1u32..7, slots in 1usize..5, cap in 1u32..4) {
        let f = FacilityConfig::uniform(1, 1, 1, cap, slots, 4.0, 0.127);
        let u = UserRequest::new(1, 0, slots - 1, h, [(1, 5.0)]);
        let mut got: Vec<Vec<u32>> = enumerate_options(&u, &f, LevelSet::unrestricted(), usize::MAX).into_iter().map(|o| o.charge).collect();
        let mut want = brute_charges(h, slots, cap);
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }
}
