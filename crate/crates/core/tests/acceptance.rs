//! Acceptance suite: one PASS/FAIL line per criterion, with pinned
//! tolerances and runtime limits. Runs as its own test target.

mod common;

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{Datelike, NaiveDate, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use valuestack::agent::{evaluate, td_loss_and_grad, train, QNetwork, TrainConfig};
use valuestack::bidding::{
    draw_initial_soe, mean_j_adj, optimize_schedule, select_bid, simulate_block, BidSchedule,
    MonteCarloPlan, RolloutContext,
};
use valuestack::config::ExperimentConfig;
use valuestack::env::toy::ToyConfig;
use valuestack::env::{
    cycle_penalty, Action, EnvConfig, EpisodeSpec, ImbalanceEnv, InitPolicy, RewardConfig, OBS_DIM,
};
use valuestack::heuristic::{HeuristicConfig, PriceThresholds};
use valuestack::market::{
    chronological_split, synth_frequency, synth_prices, BlockView, FcrProfile,
    FrequencyTrace, ImbalanceProfile, MarketDataset, OuParams, PriceProfile,
    Split, MINUTES_PER_DAY,
};
use valuestack::model::{
    candidate_bids, soe_bounds, step_soe, BatteryParams, BatteryState, FcrConfig, SecondRecord,
};
use valuestack::pipeline::{cmd_evaluate, cmd_optimize_bids, cmd_synth, cmd_train};
use valuestack::report::cmd_report;

const PHYSICS_TOL_MWH: f64 = 1e-9;
const SETTLEMENT_REL_TOL: f64 = 1e-6;
const BOUNDARY_TOL_MWH: f64 = 1e-9;
const GRAD_REL_TOL: f64 = 1e-4;
const LEARNING_BAR: f64 = 0.9;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn block_start() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, 3, 2, 8, 0, 0).unwrap()
}

// 1. Physics exactness.
fn physics() -> Outcome {
    let params = BatteryParams::default();
    ensure((params.p_nom, params.e_cap) == (10.0, 20.0), || "default battery is not 10 MW / 20 MWh".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let energy = rng.random_range(0.0..params.e_cap);
        let p = rng.random_range(0.0..=params.p_nom);
        let (pc, pd) = if rng.random_bool(0.5) { (p, 0.0) } else { (0.0, p) };
        let dt_h = rng.random_range(1..=900) as f64 / 3600.0;
        let next = step_soe(&BatteryState::new(energy), pc, pd, dt_h, &params).map_err(err)?;
        let expected = energy + (params.eta_c * pc - pd / params.eta_d) * dt_h;
        worst = worst.max((next.energy - expected).abs());
    }
    ensure(worst <= PHYSICS_TOL_MWH, || format!("max SoE error {worst:e} MWh"))?;
    let fcr = FcrConfig::default();
    ensure(fcr.t_res_min == 25.0, || "default T_res is not 25 min".into())?;
    for bid in 0..=9 {
        let band = soe_bounds(bid, &fcr, &params).map_err(err)?;
        let reserve = bid as f64 * 25.0 / 60.0;
        ensure(
            (band.lo + band.hi - params.e_cap).abs() <= 1e-12 && (band.lo - reserve).abs() <= 1e-12,
            || format!("bid {bid}: band [{}, {}]", band.lo, band.hi),
        )?;
    }
    Ok(format!("10000 steps, max error {worst:.1e} MWh; lo + hi = E_cap for bids 0-9"))
}

/// Second-by-second re-integration of a rollout trace.
fn reintegrate(
    bid: u32,
    e0: f64,
    view: &BlockView<'_>,
    trace: &[SecondRecord],
    params: &BatteryParams,
    fcr: &FcrConfig,
    pi_bar_next: f64,
) -> Result<(f64, f64, f64), String> {
    ensure(trace.len() == view.deviations_mhz.len(), || "trace length".into())?;
    let mut energy = e0;
    let mut cash = 0.0;
    for (q, price) in view.settlement.iter().enumerate() {
        let mut quarter_mwh = 0.0;
        for s in q * 900..(q + 1) * 900 {
            let rec = &trace[s];
            let frac = (-view.deviations_mhz[s] / 200.0).clamp(-1.0, 1.0);
            let p_fcr = bid as f64 * frac;
            ensure((rec.p_fcr - p_fcr).abs() <= 1e-12, || format!("second {s}: FCR power {} vs {p_fcr}", rec.p_fcr))?;
            let p = p_fcr + rec.p_imb;
            ensure(p.abs() <= params.p_nom + 1e-9, || format!("second {s}: converter limit"))?;
            energy += if p < 0.0 { -p * params.eta_c } else { -p / params.eta_d } / 3600.0;
            ensure((rec.energy - energy).abs() <= 1e-9, || format!("second {s}: energy {} vs {energy}", rec.energy))?;
            quarter_mwh += (rec.p_imb + if fcr.fcr_energy_settled { p_fcr } else { 0.0 }) / 3600.0;
        }
        cash += quarter_mwh * price;
    }
    let r_fcr = bid as f64 * view.fcr_price;
    let delta_e = energy - e0;
    Ok((cash, delta_e, r_fcr + cash + pi_bar_next * delta_e))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

// 2. Settlement oracle equivalence.
fn settlement_oracle() -> Outcome {
    let start = block_start();
    let frequency = synth_frequency(start, 3600, 3, &OuParams::default()).map_err(err)?;
    let (imbalance, _) = synth_prices(start, 4, 3, &PriceProfile::default()).map_err(err)?;
    let view = BlockView {
        index: 0,
        start,
        deviations_mhz: &frequency.deviations_mhz,
        indicator: &imbalance.minute_indicator,
        settlement: &imbalance.settlement,
        fcr_price: 31.5,
    };
    let params = BatteryParams::default();
    let heuristic = HeuristicConfig::default();
    let thresholds = PriceThresholds::from_prices(&imbalance.minute_indicator, &heuristic);
    let pi_bar_next = 87.0;
    let mut worst: f64 = 0.0;
    let mut rollouts = 0;
    for settled in [false, true] {
        let fcr = FcrConfig {
            fcr_energy_settled: settled,
            ..FcrConfig::default()
        };
        let ctx = RolloutContext {
            params: &params,
            fcr: &fcr,
            heuristic: &heuristic,
            thresholds: &thresholds,
        };
        for bid in [0, 4, 9] {
            let band = soe_bounds(bid, &fcr, &params).map_err(err)?;
            for e0 in [band.lo, band.lo + 0.3 * band.width(), band.hi, band.lo - 0.5] {
                let mut trace = Vec::new();
                let out = simulate_block(bid, e0, &view, pi_bar_next, &ctx, Some(&mut trace)).map_err(err)?;
                let (cash, delta_e, j) = reintegrate(bid, e0, &view, &trace, &params, &fcr, pi_bar_next)?;
                let ev = out.evaluation;
                for (name, got, want) in [("pi_imb", ev.pi_imb, cash), ("delta_e", ev.delta_e, delta_e), ("j_adj", ev.j_adj, j)] {
                    let e = rel_err(got, want);
                    ensure(e <= SETTLEMENT_REL_TOL, || format!("bid {bid} e0 {e0}: {name} {got} vs oracle {want}"))?;
                    worst = worst.max(e);
                }
                rollouts += 1;
            }
        }
    }
    Ok(format!("{rollouts} one-hour rollouts, max relative error {worst:.1e}"))
}

fn single_block(fcr_price: f64, imbalance: ImbalanceProfile) -> Result<MarketDataset, String> {
    let start = block_start();
    let frequency = synth_frequency(start, 4 * 3600, 5, &OuParams::default()).map_err(err)?;
    let profile = PriceProfile {
        imbalance,
        fcr: FcrProfile::Flat { price: fcr_price },
        indicator_noise_std: 0.0,
    };
    let (prices, fcr) = synth_prices(start, 16, 5, &profile).map_err(err)?;
    MarketDataset::new(frequency, prices, fcr).map_err(err)
}

/// Every candidate, every draw; argmax of the mean with ties to the lower bid.
fn enumerate(dataset: &MarketDataset) -> Result<(u32, u32), String> {
    let params = BatteryParams::default();
    let fcr = FcrConfig::default();
    let heuristic = HeuristicConfig::default();
    let thresholds = PriceThresholds::from_prices(dataset.indicator(), &heuristic);
    let ctx = RolloutContext {
        params: &params,
        fcr: &fcr,
        heuristic: &heuristic,
        thresholds: &thresholds,
    };
    let view = dataset.block(0).map_err(err)?;
    let pi_bar = dataset.next_block_median(0).map_err(err)?;
    let plan = MonteCarloPlan::default();
    let mut candidates = Vec::new();
    for bid in 0..=9u32 {
        let evals = draw_initial_soe(bid, &plan, &params, &fcr)
            .map_err(err)?
            .into_iter()
            .map(|e0| simulate_block(bid, e0, &view, pi_bar, &ctx, None).map(|o| o.evaluation))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        candidates.push((bid, evals));
    }
    let mut best = (0u32, f64::NEG_INFINITY);
    for (bid, evals) in &candidates {
        let mean = evals.iter().map(|e| e.j_adj).sum::<f64>() / evals.len() as f64;
        if mean > best.1 {
            best = (*bid, mean);
        }
    }
    Ok((select_bid(&candidates).map_err(err)?, best.0))
}

// 3. Stage-1 correctness by enumeration.
fn stage_one_enumeration() -> Outcome {
    let rich = single_block(1000.0, ImbalanceProfile::Flat { price: 100.0 })?;
    let (selected_a, oracle_a) = enumerate(&rich)?;
    let square = single_block(
        0.0,
        ImbalanceProfile::Alternating {
            low: -200.0,
            high: 200.0,
            half_period_quarters: 1,
        },
    )?;
    let (selected_b, oracle_b) = enumerate(&square)?;
    ensure(selected_a == oracle_a && selected_a == 9, || {
        format!("scenario a: select_bid {selected_a}, enumeration {oracle_a}, expected 9")
    })?;
    ensure(selected_b == oracle_b && selected_b == 0, || {
        format!("scenario b: select_bid {selected_b}, enumeration {oracle_b}, expected 0")
    })?;
    Ok("FCR 1000 EUR/MW -> 9 MW; FCR 0 with +-200 EUR/MWh square wave -> 0 MW".into())
}

// 4. Uniform dominance.
fn uniform_dominance() -> Outcome {
    let start = Utc.with_ymd_and_hms(2022, 5, 10, 0, 0, 0).unwrap();
    let quarters = 3 * 96;
    let frequency = synth_frequency(start, quarters * 900, 11, &OuParams::default()).map_err(err)?;
    let (prices, fcr_prices) = synth_prices(start, quarters, 11, &PriceProfile::default()).map_err(err)?;
    let dataset = MarketDataset::new(frequency, prices, fcr_prices).map_err(err)?;
    let params = BatteryParams::default();
    let fcr = FcrConfig::default();
    let heuristic = HeuristicConfig::default();
    let thresholds = PriceThresholds::from_prices(dataset.indicator(), &heuristic);
    let ctx = RolloutContext {
        params: &params,
        fcr: &fcr,
        heuristic: &heuristic,
        thresholds: &thresholds,
    };
    let (schedule, reports) = optimize_schedule(&dataset, &MonteCarloPlan::default(), &ctx).map_err(err)?;
    let mean_of = |block: usize, bid: u32| -> Result<f64, String> {
        reports[block]
            .candidates
            .iter()
            .find(|c| c.bid_mw == bid)
            .map(|c| c.mean_j_adj)
            .ok_or_else(|| format!("block {block}: no stats for bid {bid}"))
    };
    let mut non_uniform = 0.0;
    for (b, &bid) in schedule.bids.iter().enumerate() {
        non_uniform += mean_of(b, bid)?;
    }
    let mut best_uniform = (0, f64::NEG_INFINITY);
    for u in 0..=9 {
        let mut total = 0.0;
        for b in 0..reports.len() {
            total += mean_of(b, u)?;
        }
        ensure(non_uniform >= total, || format!("uniform {u}: {total} > non-uniform {non_uniform}"))?;
        if total > best_uniform.1 {
            best_uniform = (u, total);
        }
    }
    // Spot-check a stored mean against a fresh rollout set.
    let view_mean = {
        let view = dataset.block(0).map_err(err)?;
        let pi = dataset.next_block_median(0).map_err(err)?;
        let evals = draw_initial_soe(schedule.bids[0], &MonteCarloPlan::default(), &params, &fcr)
            .map_err(err)?
            .into_iter()
            .map(|e0| simulate_block(schedule.bids[0], e0, &view, pi, &ctx, None).map(|o| o.evaluation))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        mean_j_adj(&evals)
    };
    ensure(view_mean == mean_of(0, schedule.bids[0])?, || "stored block mean differs from a re-run".into())?;
    Ok(format!(
        "{} blocks: non-uniform {non_uniform:.2} EUR >= best uniform ({} MW) {:.2} EUR",
        reports.len(),
        best_uniform.0,
        best_uniform.1
    ))
}

fn square_wave_dataset(day: NaiveDate, half_period_s: usize) -> Result<MarketDataset, String> {
    let start = day.and_hms_opt(0, 0, 0).unwrap().and_utc();
    let quarters = MINUTES_PER_DAY / 15;
    let deviations_mhz = (0..quarters * 900)
        .map(|s| if (s / half_period_s).is_multiple_of(2) { -200.0 } else { 200.0 })
        .collect();
    let (prices, fcr) = synth_prices(start, quarters, 13, &PriceProfile::default()).map_err(err)?;
    MarketDataset::new(FrequencyTrace { start, deviations_mhz }, prices, fcr).map_err(err)
}

fn random_episode(
    env: &mut ImbalanceEnv,
    day: NaiveDate,
    init: InitPolicy,
    seed: u64,
    mut each: impl FnMut(&valuestack::env::StepOutcome) -> Result<(), String>,
) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    env.reset(&EpisodeSpec::day(day).with_init(init)).map_err(err)?;
    let mut mask = env.mask();
    while !env.is_done() {
        let allowed: Vec<Action> = Action::ALL.into_iter().filter(|a| mask[a.index()]).collect();
        ensure(!allowed.is_empty(), || "empty mask".into())?;
        let action = allowed[rng.random_range(0..allowed.len())];
        let out = env.step(action).map_err(err)?;
        each(&out)?;
        mask = out.mask;
    }
    Ok(())
}

// 5. Safety suite.
fn safety() -> Outcome {
    let day = NaiveDate::from_ymd_opt(2022, 2, 9).unwrap();
    let params = BatteryParams::default();
    let one_minute = params.p_nom / 60.0;
    let mut boundaries = 0usize;
    let mut worst_depth: f64 = 0.0;
    let mut overrides = 0usize;
    for (half_period_s, seed) in [(900, 1), (3600, 2), (4 * 3600, 3)] {
        let dataset = Arc::new(square_wave_dataset(day, half_period_s)?);
        let schedule = BidSchedule {
            start: dataset.start(),
            bids: vec![0, 5, 2, 5, 1, 4],
        };
        let mut env = ImbalanceEnv::new(
            dataset,
            &schedule,
            params,
            FcrConfig::default(),
            RewardConfig::default(),
            EnvConfig::default(),
        )
        .map_err(err)?;
        env.set_recording(true);
        random_episode(&mut env, day, InitPolicy::Uniform { seed }, seed, |_| Ok(()))?;
        for info in env.trace().unwrap_or_default() {
            for (what, e) in [("start", info.energy_start), ("end", info.energy_end)] {
                ensure(info.band.violation_depth(e) <= BOUNDARY_TOL_MWH, || {
                    format!(
                        "{} {what}: SoE {e} outside [{}, {}] (half period {half_period_s} s)",
                        info.time, info.band.lo, info.band.hi
                    )
                })?;
            }
            ensure(info.max_violation_depth <= one_minute, || {
                format!("{}: intra-minute excursion {} MWh", info.time, info.max_violation_depth)
            })?;
            worst_depth = worst_depth.max(info.max_violation_depth);
            overrides += info.override_fired as usize;
            boundaries += 1;
        }
        ensure(env.summary().steps == MINUTES_PER_DAY, || "episode shorter than a day".into())?;
    }
    Ok(format!(
        "{boundaries} minute boundaries in band, deepest intra-minute excursion {worst_depth:.4} MWh (limit {one_minute:.4}), {overrides} overrides"
    ))
}

// 6. Reward decomposition and the cycle term.
fn reward_decomposition() -> Outcome {
    let cfg = RewardConfig {
        lambda_c: 10.0,
        c_max: 1.15,
        ..RewardConfig::default()
    };
    let point = cycle_penalty(1.25, &cfg);
    ensure((point + 1.0).abs() <= 1e-12, || format!("cycle penalty at C = 1.25: {point}"))?;
    ensure(cycle_penalty(1.15, &cfg) == 0.0 && cycle_penalty(0.3, &cfg) == 0.0, || "penalty below C_max".into())?;

    let day = NaiveDate::from_ymd_opt(2022, 2, 9).unwrap();
    let start = Utc.with_ymd_and_hms(2022, 2, 8, 0, 0, 0).unwrap();
    let quarters = 2 * 96;
    let frequency = synth_frequency(start, quarters * 900, 17, &OuParams::default()).map_err(err)?;
    let (prices, fcr) = synth_prices(start, quarters, 17, &PriceProfile::default()).map_err(err)?;
    let dataset = Arc::new(MarketDataset::new(frequency, prices, fcr).map_err(err)?);
    let schedule = BidSchedule::uniform(dataset.start(), dataset.n_blocks(), 3);
    let low_cap = RewardConfig {
        lambda_c: 10.0,
        c_max: 0.05,
        ..RewardConfig::default()
    };
    let mut env = ImbalanceEnv::new(dataset, &schedule, BatteryParams::default(), FcrConfig::default(), low_cap, EnvConfig::default())
        .map_err(err)?;
    env.set_recording(true);
    let mut steps = 0usize;
    let mut charged = 0usize;
    random_episode(&mut env, day, InitPolicy::MidBand, 4, |out| {
        let r = out.reward;
        let sum = r.r_imb + r.r_soe + r.r_cycle + r.r_override;
        ensure(out.total_reward == sum, || format!("step {steps}: total {} != sum {sum}", out.total_reward))?;
        steps += 1;
        Ok(())
    })?;
    for (i, info) in env.trace().unwrap_or_default().iter().enumerate() {
        let expected = if info.cycles <= low_cap.c_max {
            0.0
        } else {
            -low_cap.lambda_c * (info.cycles - low_cap.c_max)
        };
        ensure((info.reward.r_cycle - expected).abs() <= 1e-12, || {
            format!("step {i}: r_cycle {} with C = {}", info.reward.r_cycle, info.cycles)
        })?;
        charged += (expected < 0.0) as usize;
    }
    ensure(charged > 0, || "cycle cap never exceeded; the check saw no penalised step".into())?;
    Ok(format!("{steps} steps sum exactly; r_cycle(1.25) = {point}; {charged} penalised steps match"))
}

// 7. Gradient check.
fn gradient_check() -> Outcome {
    let sizes = [OBS_DIM, 24, 24, 3];
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for pair in 0..100u64 {
        let mut net = QNetwork::new(&sizes, 1000 + pair).map_err(err)?;
        for p in net.params_mut() {
            *p += rng.random_range(-0.05..0.05);
        }
        let x: Vec<f64> = (0..OBS_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let action = rng.random_range(0..3);
        let target = rng.random_range(-3.0..3.0);
        let loss_at = |n: &QNetwork| td_loss_and_grad(n, &[&x], &[action], &[target], 1.0).0;
        let (_, analytic) = td_loss_and_grad(&net, &[&x], &[action], &[target], 1.0);
        let mut numeric = vec![0.0; analytic.len()];
        for (i, g) in numeric.iter_mut().enumerate() {
            let base = net.params()[i];
            net.params_mut()[i] = base + h;
            let up = loss_at(&net);
            net.params_mut()[i] = base - h;
            let down = loss_at(&net);
            net.params_mut()[i] = base;
            *g = (up - down) / (2.0 * h);
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
        let rel = if scale == 0.0 { diff } else { diff / scale };
        ensure(rel <= GRAD_REL_TOL, || format!("pair {pair}: relative error {rel:e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("100 pairs, worst relative error {worst:.1e}"))
}

// 8. Learning sanity on the toy market.
fn learning_sanity() -> Outcome {
    let toy = ToyConfig::default();
    let oracle = common::toy_dp_optimum(&toy);
    let mut env = toy.environment().map_err(err)?;
    let cfg = TrainConfig {
        hidden: vec![64, 64],
        learning_rate: 1e-3,
        batch_size: 64,
        epsilon_decay_steps: 20_000,
        target_sync: 500,
        learning_starts: 500,
        episodes: 200,
        eval_every: 10,
        seed: 7,
        ..TrainConfig::default()
    };
    let out = train(&mut env, &cfg).map_err(err)?;
    let days = env.episode_days(Some(Split::Validation));
    let per_day = evaluate(&out.best, &mut env, &days).map_err(err)?.total_profit() / days.len() as f64;
    let ratio = per_day / oracle;
    ensure(ratio >= LEARNING_BAR, || format!("greedy {per_day:.2} EUR/episode is {ratio:.3} of the DP optimum {oracle:.2}"))?;
    Ok(format!("greedy {per_day:.2} EUR/episode vs DP optimum {oracle:.2} (ratio {ratio:.3}) after {} episodes", cfg.episodes))
}

// 9. Protocol fidelity.
fn protocol() -> Outcome {
    let split = chronological_split(
        NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(),
        NaiveDate::from_ymd_opt(2022, 12, 31).unwrap(),
    );
    for month in 1..=12u32 {
        let first = NaiveDate::from_ymd_opt(2022, month, 1).unwrap();
        let len = first.iter_days().take_while(|d| d.month() == month).count();
        let count = |s: Split| split.days(s).iter().filter(|d| d.month() == month).count();
        ensure(count(Split::Train) == 20 && count(Split::Validation) == 5 && count(Split::Test) == len - 25, || {
            format!("month {month}: {}/{}/{}", count(Split::Train), count(Split::Validation), count(Split::Test))
        })?;
        for d in first.iter_days().take(len) {
            let want = match d.day() {
                1..=20 => Split::Train,
                21..=25 => Split::Validation,
                _ => Split::Test,
            };
            ensure(split.days(want).contains(&d), || format!("{d} not in {want}"))?;
        }
    }
    let params = BatteryParams::default();
    let bids = candidate_bids(&params);
    ensure(bids == (0..=9).collect::<Vec<u32>>(), || format!("candidate bids {bids:?}"))?;
    let plan = MonteCarloPlan::default();
    let fcr = FcrConfig::default();
    for bid in bids {
        let band = soe_bounds(bid, &fcr, &params).map_err(err)?;
        let draws = draw_initial_soe(bid, &plan, &params, &fcr).map_err(err)?;
        ensure(draws.len() == 50 && draws[0] == band.lo && draws[49] == band.hi, || {
            format!("bid {bid}: {} draws from {} to {}", draws.len(), draws[0], draws[draws.len() - 1])
        })?;
    }
    Ok("2022 split is 20/5/rest in all 12 months; bids 0-9; 50 draws span both band edges".into())
}

fn pipeline_run(root: &Path) -> Result<(), String> {
    let text = r#"
seed = 5
[synth]
start = "2022-01-20T00:00:00Z"
days = 2
[evaluate]
split = "validation"
[train]
hidden = [16, 16]
batch_size = 32
learning_starts = 64
epsilon_decay_steps = 1000
target_sync = 200
episodes = 2
eval_every = 1
"#;
    let mut cfg = ExperimentConfig::from_toml(text).map_err(err)?;
    cfg.out_dir = root.join("run");
    cmd_synth(&cfg).map_err(err)?;
    cmd_optimize_bids(&cfg, None).map_err(err)?;
    cmd_train(&cfg, None).map_err(err)?;
    cmd_evaluate(&cfg, None, None).map_err(err)?;
    let run = cfg.out_dir.clone();
    cmd_report(&[run], &root.join("report"), &cfg.report).map_err(err)?;
    Ok(())
}

// 10. End-to-end determinism.
fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    pipeline_run(a.path())?;
    pipeline_run(b.path())?;
    let files = [
        "run/data/frequency.csv",
        "run/data/imbalance_settlement.csv",
        "run/data/fcr.csv",
        "run/schedule.csv",
        "run/candidates.csv",
        "run/checkpoint.txt",
        "run/checkpoint.json",
        "run/training_log.csv",
        "run/metrics.csv",
        "run/summary.json",
        "report/comparison.csv",
        "report/heatmap.csv",
    ];
    for f in files {
        let x = std::fs::read(a.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(x == y, || format!("{f} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical across two runs", files.len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 10] = [
        (1, "physics exactness", physics, Duration::from_secs(1)),
        (2, "settlement oracle equivalence", settlement_oracle, Duration::from_secs(5)),
        (3, "stage-1 enumeration", stage_one_enumeration, Duration::from_secs(30)),
        (4, "uniform dominance", uniform_dominance, Duration::from_secs(300)),
        (5, "safety suite", safety, Duration::from_secs(30)),
        (6, "reward decomposition", reward_decomposition, Duration::from_secs(30)),
        (7, "gradient check", gradient_check, Duration::from_secs(30)),
        (8, "learning sanity", learning_sanity, Duration::from_secs(300)),
        (9, "protocol fidelity", protocol, Duration::from_secs(5)),
        (10, "end-to-end determinism", determinism, Duration::from_secs(600)),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run, limit) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let result = run();
        let elapsed = t.elapsed();
        let result = match result {
            Ok(msg) if elapsed > limit => Err(format!("{msg}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match result {
            Ok(msg) => println!("PASS [{id}] {name}: {msg} ({elapsed:.2?})"),
            Err(msg) => {
                failed += 1;
                println!("FAIL [{id}] {name}: {msg} ({elapsed:.2?})");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
