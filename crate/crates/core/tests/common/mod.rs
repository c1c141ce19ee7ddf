#![allow(dead_code)]

use parkcharge_core::model::{
    AllocationState, FacilityConfig, Instance, LevelSet, ScheduleOption, TimeGrid, UserId, UserRequest,
};
use parkcharge_core::pricing::{ResourceBounds, ValuationBounds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every vector of `slots` entries in `0..=cap` summing to `energy`, by odometer.
pub fn brute_charges(energy: u32, slots: usize, cap: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; slots];
    loop {
        if cur.iter().sum::<u32>() == energy {
            out.push(cur.clone());
        }
        let mut i = 0;
        loop {
            if i == slots {
                return out;
            }
            if cur[i] < cap {
                cur[i] += 1;
                break;
            }
            cur[i] = 0;
            i += 1;
        }
    }
}

/// Every option of `user` across its facilities and chargers.
pub fn brute_options(user: &UserRequest, instance: &Instance, levels: LevelSet) -> Vec<ScheduleOption> {
    let mut out = Vec::new();
    for f in instance.facilities() {
        if user.valuation(f.id).is_none() {
            continue;
        }
        for m in 0..f.evse_count {
            for charge in brute_charges(user.energy, user.stay_len(), levels.cap(f.evse_max_energy)) {
                out.push(ScheduleOption {
                    facility: f.id,
                    evse: m,
                    start: user.arrival_slot,
                    charge,
                });
            }
        }
    }
    out
}

/// Capacity check written out directly against the demands.
pub fn fits_directly(instance: &Instance, state: &AllocationState, option: &ScheduleOption) -> bool {
    let fi = instance.facility_index(option.facility).unwrap();
    let f = &instance.facilities()[fi];
    option.charge.iter().enumerate().all(|(i, &e)| {
        let t = option.start + i;
        state.cable_demand(fi, option.evse, t) < f.cables_per_evse
            && state.energy_demand(fi, option.evse, t) + e <= f.evse_max_energy
            && f64::from(state.procurement_demand(fi, t) + e) <= f.solar[t] + f.transformer_limit[t] + 1e-9
    })
}

pub fn uniform_bounds(lower: f64, upper: f64, facilities: &[FacilityConfig]) -> ValuationBounds {
    let b = ResourceBounds::new(lower, upper);
    ValuationBounds::new(b, b, b, facilities)
}

/// A random one-facility instance with integer solar and a random partial
/// allocation committed on top (users with ids from 100 upward).
pub struct Loaded {
    pub instance: Instance,
    pub state: AllocationState,
    pub levels: LevelSet,
    pub bounds: ValuationBounds,
    pub probe: UserRequest,
}

pub fn loaded_instance(seed: u64, horizon: usize, max_level: u32) -> Loaded {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=2);
    let c = rng.random_range(1..=3);
    let e = rng.random_range(1..=3);
    let solar: Vec<f64> = (0..horizon).map(|_| f64::from(rng.random_range(0..=3u32))).collect();
    let g = f64::from(rng.random_range(1..=4u32));
    let f = FacilityConfig::uniform(1, m, c, e, horizon, g, 0.127).with_solar(solar, 3.0);
    let levels = LevelSet::up_to(rng.random_range(1..=max_level));
    let a = rng.random_range(0..horizon);
    let d = rng.random_range(a..horizon);
    let cap = levels.cap(e) * (d - a + 1) as u32;
    let probe = UserRequest::new(1, a, d, rng.random_range(1..=cap), [(1, rng.random_range(0.5..20.0))]);
    let instance = Instance::new(TimeGrid::new(horizon, 1.0), vec![f], vec![probe.clone()]).unwrap();
    let mut state = AllocationState::new(&instance);
    for k in 0..rng.random_range(0..6u32) {
        let a = rng.random_range(0..horizon);
        let d = rng.random_range(a..horizon);
        let charge: Vec<u32> = (a..=d).map(|_| rng.random_range(0..=1u32)).collect();
        let o = ScheduleOption {
            facility: instance.facilities()[0].id,
            evse: rng.random_range(0..m),
            start: a,
            charge,
        };
        // blocked commits are simply skipped
        let _ = state.commit(&instance, UserId(100 + k), o, 0.0);
    }
    let bounds = uniform_bounds(
        rng.random_range(0.13..0.5),
        rng.random_range(5.0..30.0),
        instance.facilities(),
    );
    Loaded {
        instance,
        state,
        levels,
        bounds,
        probe,
    }
}
