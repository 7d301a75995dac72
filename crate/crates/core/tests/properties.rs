//! Cross-module invariants checked on random inputs.

use std::sync::Arc;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use valuestack::agent::{ddqn_target, QNetwork};
use valuestack::bidding::{select_bid, BidSchedule};
use valuestack::env::{Action, EnvConfig, EpisodeSpec, ImbalanceEnv, RewardConfig};
use valuestack::market::{
    chronological_split, synth_frequency, synth_prices, MarketDataset, OuParams, PriceProfile, Split,
};
use valuestack::model::{BatteryParams, FcrConfig};
use valuestack::settlement::BlockEvaluation;

/// Plain scalar forward pass over the documented parameter layout.
fn reference_forward(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut input = x.to_vec();
    let mut offset = 0;
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let weights = &params[offset..offset + n_in * n_out];
        let biases = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let mut out = vec![0.0; n_out];
        for o in 0..n_out {
            let mut z = biases[o];
            for i in 0..n_in {
                z += weights[o * n_in + i] * input[i];
            }
            out[o] = if l + 2 < sizes.len() { z.max(0.0) } else { z };
        }
        input = out;
    }
    input
}

fn reference_target(
    r: f64,
    next: &[f64],
    mask: &[bool; 3],
    done: bool,
    sizes: &[usize],
    online: &[f64],
    target: &[f64],
    gamma: f64,
) -> f64 {
    if done {
        return r;
    }
    let q_online = reference_forward(sizes, online, next);
    let mut best: Option<usize> = None;
    for a in 0..3 {
        if mask[a] && best.is_none_or(|b| q_online[a] > q_online[b]) {
            best = Some(a);
        }
    }
    r + gamma * reference_forward(sizes, target, next)[best.unwrap()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ddqn_target_matches_scalar_reference(
        seed in any::<u64>(),
        r in -50.0f64..50.0,
        gamma in 0.0f64..0.999,
        done in any::<bool>(),
        mask_bits in 1u8..8,
    ) {
        let sizes = [4, 5, 3];
        let online = QNetwork::new(&sizes, seed).unwrap();
        let target = QNetwork::new(&sizes, seed.wrapping_add(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let next: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mask = [mask_bits & 1 != 0, mask_bits & 2 != 0, mask_bits & 4 != 0];
        let got = ddqn_target(r, &next, &mask, done, &online, &target, gamma).unwrap();
        let want = reference_target(r, &next, &mask, done, &sizes, online.params(), target.params(), gamma);
        prop_assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn split_is_a_partition(start in 0i64..700, len in 1i64..400) {
        let first = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap() + Duration::days(start);
        let last = first + Duration::days(len - 1);
        let split = chronological_split(first, last);
        let (tr, va, te) = (split.days(Split::Train), split.days(Split::Validation), split.days(Split::Test));
        prop_assert_eq!(tr.len() + va.len() + te.len(), len as usize);
        prop_assert!(tr.is_disjoint(va) && tr.is_disjoint(te) && va.is_disjoint(te));
        for d in first.iter_days().take(len as usize) {
            prop_assert!(tr.contains(&d) || va.contains(&d) || te.contains(&d));
        }
    }

    #[test]
    fn synthetic_series_are_bit_identical_per_seed(seed in any::<u64>()) {
        let start = Utc.with_ymd_and_hms(2022, 6, 1, 0, 0, 0).unwrap();
        let a = synth_frequency(start, 900, seed, &OuParams::default()).unwrap();
        let b = synth_frequency(start, 900, seed, &OuParams::default()).unwrap();
        prop_assert_eq!(a, b);
        let p = synth_prices(start, 16, seed, &PriceProfile::default()).unwrap();
        let q = synth_prices(start, 16, seed, &PriceProfile::default()).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn selected_bid_dominates_every_candidate(
        means in prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 3), 1..10),
    ) {
        let candidates: Vec<(u32, Vec<BlockEvaluation>)> = means
            .iter()
            .enumerate()
            .map(|(b, draws)| (b as u32, draws.iter().map(|&j| BlockEvaluation::new(0.0, j, 0.0, 0.0)).collect()))
            .collect();
        let chosen = select_bid(&candidates).unwrap();
        let mean = |b: usize| candidates[b].1.iter().map(|e| e.j_adj).sum::<f64>() / 3.0;
        for b in 0..candidates.len() {
            prop_assert!(mean(chosen as usize) >= mean(b));
            if mean(b) == mean(chosen as usize) {
                prop_assert!(chosen as usize <= b);
            }
        }
    }
}

fn episode_env() -> ImbalanceEnv {
    let start = Utc.with_ymd_and_hms(2022, 4, 3, 0, 0, 0).unwrap();
    let quarters = 96;
    let frequency = synth_frequency(start, quarters * 900, 21, &OuParams::default()).unwrap();
    let (prices, fcr) = synth_prices(start, quarters, 21, &PriceProfile::default()).unwrap();
    let dataset = Arc::new(MarketDataset::new(frequency, prices, fcr).unwrap());
    let schedule = BidSchedule {
        start,
        bids: vec![2, 7, 0, 9, 4, 1],
    };
    ImbalanceEnv::new(
        dataset,
        &schedule,
        BatteryParams::default(),
        FcrConfig::default(),
        RewardConfig::default(),
        EnvConfig::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn episode_cash_and_converter_limit(seed in any::<u64>()) {
        let mut env = episode_env();
        env.set_recording(true);
        let day = NaiveDate::from_ymd_opt(2022, 4, 3).unwrap();
        env.reset(&EpisodeSpec::day(day)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mask = env.mask();
        let mut r_imb = 0.0;
        while !env.is_done() {
            let allowed: Vec<Action> = Action::ALL.into_iter().filter(|a| mask[a.index()]).collect();
            let out = env.step(allowed[rng.random_range(0..allowed.len())]).unwrap();
            r_imb += out.reward.r_imb;
            mask = out.mask;
        }
        prop_assert!((r_imb - env.ledger().imbalance_cash()).abs() <= 1e-6);
        for info in env.trace().unwrap() {
            let residual = 10.0 - info.bid_mw as f64;
            prop_assert!(info.setpoint_mw.abs() <= residual + 1e-12);
        }
    }
}
