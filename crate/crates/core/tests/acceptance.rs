//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cellsync::detrend::{polyfit_lm, residual, LmConfig, PolynomialModel};
use cellsync::metrics::{
    saturation_ratio, scan_window, subset_counts, thermal_impedance_bound, RateCriterion, RateMetric,
    THERMAL_COEFF_MAX, THERMAL_COEFF_MIN,
};
use cellsync::pipeline::{analyze, prepare, trimmed, AnalysisConfig};
use cellsync::report::Ratio;
use cellsync::simulator::{simulate, SimConfig, WaveEvent};
use cellsync::synccorr::{binomial, pair_list, rolling_pearson, PairId};
use common::{analysis, anti_wave, chebyshev_lstsq, naive_pearson, projected_amplitude, sim, wave, white};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(budget: Duration, started: Instant, outcome: Outcome) -> Outcome {
    let took = started.elapsed();
    let detail = |d: String| format!("{d}; {:.2} s (budget {} s)", took.as_secs_f64(), budget.as_secs());
    match outcome {
        Ok(d) if took <= budget => Ok(detail(d)),
        Ok(d) => Err(format!("{}; over budget", detail(d))),
        Err(d) => Err(detail(d)),
    }
}

fn c1_combinatorics() -> Outcome {
    let counts = [(6, 15), (8, 28), (12, 66)];
    let mut ok = counts.iter().all(|&(p, c)| binomial(p, 2) == c && pair_list(p as usize).len() as u64 == c);
    let saturation = [(4, 1.5), (6, 2.5), (8, 3.5), (10, 4.5)];
    for &(n, expect) in &saturation {
        let all: Vec<PairId> = pair_list(n);
        let (np, nc, ratio) = subset_counts(&all);
        ok &= np as u64 == binomial(n as u64, 2) && nc == n && ratio == expect && saturation_ratio(n) == expect;
    }
    check(ok, "C(6,2)=15 C(8,2)=28 C(12,2)=66; saturation 1.5/2.5/3.5/4.5 for 4/6/8/10 cells".into())
}

fn c2_streaming_oracle() -> Outcome {
    let started = Instant::now();
    let n = 100_000;
    let mut worst = 0.0f64;
    for (k, offset) in [(0u64, 0.0), (1, 1e5)] {
        let a: Vec<f64> = white(10 + k, n).iter().map(|v| offset + v).collect();
        let b: Vec<f64> = white(20 + k, n).iter().zip(&a).map(|(e, x)| 0.3 * (x - offset) + e + offset).collect();
        for w in [70, 100, 200] {
            let r = rolling_pearson(&a, &b, w).map_err(|e| e.to_string())?;
            for (t, v) in r.iter().enumerate() {
                let oracle = naive_pearson(&a[t..t + w], &b[t..t + w]).unwrap();
                worst = worst.max((v - oracle).abs());
            }
        }
    }
    within(
        Duration::from_secs(5),
        started,
        check(worst < 1e-9, format!("max |dr| = {worst:.2e} over windows 70/100/200 (limit 1e-9)")),
    )
}

fn c3_detrend_oracle() -> Outcome {
    let started = Instant::now();
    let n = 2000;
    let cfg = LmConfig::default();
    let domain = PolynomialModel::for_domain(n, vec![0.0]);
    let x: Vec<f64> = (0..n).map(|i| domain.normalize(i as f64)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_gap, mut worst_exact) = (0.0f64, 0.0f64);
    for trial in 0..100 {
        for order in [5, 10] {
            let coeffs: Vec<f64> = (0..=order).map(|_| rng.random_range(-100.0..100.0)).collect();
            let clean = PolynomialModel::for_domain(n, coeffs).evaluate();
            let noise = rng.random_range(0.1..20.0);
            let noisy: Vec<f64> = clean
                .iter()
                .zip(white(1000 + trial, n))
                .map(|(c, e)| c + noise * e)
                .collect();
            let (_, rep) = polyfit_lm(&noisy, order, &cfg).map_err(|e| e.to_string())?;
            let (_, direct) = chebyshev_lstsq(&x, &noisy, order);
            worst_gap = worst_gap.max((rep.final_sse - direct).abs() / direct);

            let (model, _) = polyfit_lm(&clean, order, &cfg).map_err(|e| e.to_string())?;
            let res = residual(&clean, "exact", &model).map_err(|e| e.to_string())?;
            let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
            worst_exact = worst_exact.max(rms(&res.values) / rms(&clean));
        }
    }
    within(
        Duration::from_secs(10),
        started,
        check(
            worst_gap < 1e-6 && worst_exact < 1e-8,
            format!("max relative SSE gap {worst_gap:.2e} (limit 1e-6), exact-recovery RMS {worst_exact:.2e} (limit 1e-8)"),
        ),
    )
}

/// Four waves at random, non-overlapping positions in a 20000-sample session.
fn random_waves(seed: u64, n_cells: usize) -> Vec<WaveEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA11CE);
    (0..4)
        .map(|k| {
            let t0 = 5000 * k + rng.random_range(100..4600);
            wave(t0, (0..n_cells).collect(), 3.0)
        })
        .collect()
}

fn c4_detection() -> Outcome {
    let started = Instant::now();
    let cfg = analysis();
    let (mut hits, mut total, mut false_events, mut control_samples) = (0usize, 0usize, 0usize, 0usize);
    for seed in 0..50u64 {
        let mut sc = sim(8, 20_000);
        sc.events = random_waves(seed, 8);
        let (s, truth) = simulate(&sc, 4_000 + seed).map_err(|e| e.to_string())?;
        let events = analyze(&s, &cfg).map_err(|e| e.to_string())?.events;
        for t in &truth.events {
            total += 1;
            hits += events.iter().any(|e| e.overlaps(t.start..t.end)) as usize;
        }

        let (control, _) = simulate(&sim(8, 20_000), 5_000 + seed).map_err(|e| e.to_string())?;
        let r = analyze(&control, &cfg).map_err(|e| e.to_string())?;
        false_events += r.events.len();
        control_samples += r.n_samples;
    }
    let recall = hits as f64 / total as f64;
    let per_1e4 = false_events as f64 / control_samples as f64 * 1e4;
    within(
        Duration::from_secs(120),
        started,
        check(
            recall >= 0.9 && per_1e4 <= 1.0,
            format!("recall {hits}/{total} = {recall:.3} (min 0.9); {false_events} control events over {control_samples} samples = {per_1e4:.3} per 1e4 (max 1)"),
        ),
    )
}

fn c5_rate_gap() -> Outcome {
    let started = Instant::now();
    let cfg = AnalysisConfig {
        criteria: vec![RateCriterion::new(RateMetric::RMean, 0.65)],
        ..analysis()
    };
    let suite = |coupling: f64, base: u64| -> Result<(usize, usize, f64), String> {
        let (mut n_smp, mut n_events, mut t_exp) = (0, 0, 0.0);
        for seed in 0..20 {
            let sc = SimConfig {
                coupling,
                ..sim(8, 20_000)
            };
            let (s, _) = simulate(&sc, base + seed).map_err(|e| e.to_string())?;
            let r = analyze(&s, &cfg).map_err(|e| e.to_string())?;
            let row = r.rates.row("r_mean>0.65").ok_or("missing r_mean>0.65 row")?;
            n_smp += row.n_smp;
            n_events += row.n_events;
            t_exp += r.rates.t_exp;
        }
        Ok((n_smp, n_events, t_exp))
    };
    let (a_smp, a_ev, a_t) = suite(0.8, 6_000)?;
    let (b_smp, b_ev, b_t) = suite(0.0, 7_000)?;
    let ratio = Ratio::of(a_smp as f64 / a_t, b_smp as f64 / b_t);
    let pass = match ratio {
        Ratio::Infinite => a_smp > 0,
        Ratio::Finite(v) => v >= 4.0,
    };
    within(
        Duration::from_secs(180),
        started,
        check(
            pass,
            format!(
                "coupled {a_smp} samples / {a_ev} events, control {b_smp} samples / {b_ev} events; rate ratio {ratio} (min 4)"
            ),
        ),
    )
}

fn c6_anti_phase() -> Outcome {
    let started = Instant::now();
    let cfg = analysis();
    let mut caught = 0;
    let mut misses = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBEEF);
        let t0 = rng.random_range(2100..3600);
        let mut sc = sim(6, 6000);
        sc.events = vec![anti_wave(t0, (0..6).collect(), 3.0)];
        let (s, _) = simulate(&sc, 8_000 + seed).map_err(|e| e.to_string())?;
        let m = analyze(&s, &cfg).map_err(|e| e.to_string())?.metrics;
        let span = (t0 - m.start)..(t0 + 300 + cfg.window - m.start).min(m.len());
        if span.clone().any(|k| m.l_pair_abs[k] >= 0.9 && m.r_mean[k] < 0.3) {
            caught += 1;
        } else {
            misses.push(seed);
        }
    }
    within(
        Duration::from_secs(60),
        started,
        check(caught == 20, format!("{caught}/20 scenarios with l_pair_abs >= 0.9 and r_mean < 0.3 at one index; misses {misses:?}")),
    )
}

fn c7_thermal_bound() -> Outcome {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..=20 {
        let a = THERMAL_COEFF_MIN + (THERMAL_COEFF_MAX - THERMAL_COEFF_MIN) * i as f64 / 20.0;
        for j in 0..=20 {
            let dt = 1e-4 + (1e-3 - 1e-4) * j as f64 / 20.0;
            let b = thermal_impedance_bound(1e5, a, dt).map_err(|e| e.to_string())?;
            lo = lo.min(b);
            hi = hi.max(b);
        }
    }
    let range_ok = (lo - 0.191).abs() < 1e-12 && (hi - 2.5).abs() < 1e-12;

    // Wave amplitudes as they survive detrending in simulated residuals.
    let mut amps = Vec::new();
    for (k, amp) in [10.0, 20.0, 30.0].into_iter().enumerate() {
        let mut sc = sim(4, 2000);
        sc.events = vec![wave(800, (0..4).collect(), amp)];
        let (s, _) = simulate(&sc, 900 + k as u64).map_err(|e| e.to_string())?;
        let a = AnalysisConfig {
            lowpass: None,
            rejection: None,
            ..analysis()
        };
        let frames = prepare(&trimmed(&s, &a).map_err(|e| e.to_string())?, &a).map_err(|e| e.to_string())?;
        let ev = &sc.events[0];
        let shape: Vec<f64> = (ev.t0..ev.end()).map(|t| ev.shape(t)).collect();
        for ch in &frames[0].impedance {
            amps.push(projected_amplitude(&ch[ev.t0..ev.end()], &shape));
        }
    }
    let amp_lo = amps.iter().copied().fold(f64::INFINITY, f64::min);
    let amp_hi = amps.iter().copied().fold(0.0, f64::max);
    let typical = ((amp_lo * amp_hi).sqrt() / (lo * hi).sqrt()).log10();
    let worst = amp_lo / hi;
    check(
        range_ok && (1.0..=2.0).contains(&typical) && worst > 1.0,
        format!(
            "bound range [{lo:.4}, {hi:.4}] Ohm; simulated amplitudes [{amp_lo:.2}, {amp_hi:.2}] Ohm; typical separation 10^{typical:.2}; worst case x{worst:.1}"
        ),
    )
}

/// Exhaustive peak r_mean with direct per-window Pearson.
fn exhaustive_peak(channels: &[&[f64]], w: usize) -> f64 {
    let pairs = pair_list(channels.len());
    let n = channels[0].len();
    let mut best = f64::NEG_INFINITY;
    for end in w - 1..n {
        let (mut sum, mut count) = (0.0, 0);
        for p in &pairs {
            let s = end + 1 - w..end + 1;
            if let Some(r) = naive_pearson(&channels[p.i][s.clone()], &channels[p.j][s]) {
                if r.is_finite() {
                    sum += r;
                    count += 1;
                }
            }
        }
        if count > 0 {
            best = best.max(sum / count as f64);
        }
    }
    best
}

fn c8_scan() -> Outcome {
    let started = Instant::now();
    let cfg = analysis();
    let mut matched = 0;
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5CA7);
        let duration = rng.random_range(100..600);
        let period = if rng.random_bool(0.5) { Some(rng.random_range(40.0..200.0)) } else { None };
        let amp = rng.random_range(2.0..8.0);
        let mut sc = sim(6, 2000);
        sc.events = vec![WaveEvent::in_phase(rng.random_range(100..1900 - duration), duration, (0..6).collect(), amp, period)];
        let (s, _) = simulate(&sc, 9_000 + seed).map_err(|e| e.to_string())?;
        let frames = prepare(&trimmed(&s, &cfg).map_err(|e| e.to_string())?, &cfg).map_err(|e| e.to_string())?;
        let ch = frames[0].impedance_refs();
        let step = [5, 10, 13][seed as usize % 3];
        let r = scan_window(&ch, 70, 200, step).map_err(|e| e.to_string())?;
        let (mut best_w, mut best_p) = (0, f64::NEG_INFINITY);
        let mut w = 70;
        while w <= 200 {
            let p = exhaustive_peak(&ch, w);
            if let Some(&(_, got)) = r.curve.iter().find(|(x, _)| *x == w) {
                worst = worst.max((got - p).abs());
            } else {
                return Err(format!("window {w} missing from scan curve"));
            }
            if p > best_p {
                (best_w, best_p) = (w, p);
            }
            w += step;
        }
        if best_w == r.best_window {
            matched += 1;
        } else {
            notes.push(format!("seed {seed}: scan {} vs exhaustive {best_w}", r.best_window));
        }
    }
    within(
        Duration::from_secs(60),
        started,
        check(
            matched == 10 && worst < 1e-9,
            format!("{matched}/10 argmax matches, max curve deviation {worst:.2e} {notes:?}"),
        ),
    )
}

fn c9_performance() -> Outcome {
    let sc = SimConfig {
        duration: 1_000_000,
        temp: cellsync::simulator::TempConfig {
            enabled: false,
            ..Default::default()
        },
        ..SimConfig::default()
    };
    let (s, _) = simulate(&sc, 1).map_err(|e| e.to_string())?;
    let started = Instant::now();
    let r = analyze(&s, &analysis()).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} samples x {} channels, {} pairs, {} threads",
        r.n_samples,
        r.channels.len(),
        pair_list(r.channels.len()).len(),
        rayon::current_num_threads()
    );
    within(Duration::from_secs(10), started, Ok(detail))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("combinatorics", c1_combinatorics),
        ("streaming correlation oracle", c2_streaming_oracle),
        ("detrend oracle", c3_detrend_oracle),
        ("detection fidelity", c4_detection),
        ("control vs coupled rate gap", c5_rate_gap),
        ("anti-phase sensitivity", c6_anti_phase),
        ("temperature exclusion bound", c7_thermal_bound),
        ("window scan self-consistency", c8_scan),
        ("performance", c9_performance),
    ];
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(d) => println!("PASS [{}] {name}: {d}", k + 1),
            Err(d) => {
                println!("FAIL [{}] {name}: {d}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
