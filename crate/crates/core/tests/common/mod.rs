//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::HashMap;

use valuestack::env::toy::ToyConfig;

/// Exact optimum of one toy episode from mid-band by dynamic programming.
///
/// Stored energy is tracked on the integer lattice reached by full-power
/// charge and discharge minutes, scaled so every reachable level is an
/// integer: `E = (base + a * n_charge - b * n_discharge) / scale`.
pub fn toy_dp_optimum(cfg: &ToyConfig) -> f64 {
    // Lattice for the default parameters: charge adds p*eta/60 = 0.15 MWh,
    // discharge removes p/(60*eta) = 5/27 MWh. The common denominator of
    // 3/20 and 5/27 is 540.
    assert_eq!((cfg.p_nom, cfg.e_cap, cfg.eta), (10.0, 1.0, 0.9), "lattice derived for the default toy");
    let scale = 540i64;
    let up = 81i64; // 0.15 * 540
    let down = 100i64; // (5/27) * 540
    let cap = scale; // e_cap = 1 MWh
    let start = scale / 2;
    let minute_energy = cfg.p_nom / 60.0;
    let steps = cfg.episode_min;

    // value[t][level] = best cash from minute t on
    let mut next: HashMap<i64, f64> = HashMap::new();
    let reach = reachable(start, up, down, cap, steps);
    for t in (0..steps).rev() {
        let price = cfg.price(t / 15);
        let mut cur = HashMap::with_capacity(reach[t].len());
        for &level in &reach[t] {
            let tail = |l: i64| if t + 1 == steps { 0.0 } else { next[&l] };
            let mut best = tail(level);
            if level + up <= cap {
                best = best.max(-minute_energy * price + tail(level + up));
            }
            if level - down >= 0 {
                best = best.max(minute_energy * price + tail(level - down));
            }
            cur.insert(level, best);
        }
        next = cur;
    }
    next[&start]
}

fn reachable(start: i64, up: i64, down: i64, cap: i64, steps: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![start]];
    for _ in 1..steps {
        let mut set: Vec<i64> = out
            .last()
            .unwrap()
            .iter()
            .flat_map(|&l| [l, l + up, l - down])
            .filter(|&l| (0..=cap).contains(&l))
            .collect();
        set.sort_unstable();
        set.dedup();
        out.push(set);
    }
    out
}

/// Brute-force optimum over every action sequence, for tiny horizons.
pub fn toy_brute_force(cfg: &ToyConfig, steps: usize) -> f64 {
    fn go(cfg: &ToyConfig, t: usize, steps: usize, e: f64) -> f64 {
        if t == steps {
            return 0.0;
        }
        let price = cfg.price(t / 15);
        let p = cfg.p_nom;
        let mut best = go(cfg, t + 1, steps, e);
        let charged = e + p * cfg.eta / 60.0;
        if charged <= cfg.e_cap + 1e-12 {
            best = best.max(-p / 60.0 * price + go(cfg, t + 1, steps, charged));
        }
        let discharged = e - p / cfg.eta / 60.0;
        if discharged >= -1e-12 {
            best = best.max(p / 60.0 * price + go(cfg, t + 1, steps, discharged));
        }
        best
    }
    go(cfg, 0, steps, cfg.e_cap / 2.0)
}
