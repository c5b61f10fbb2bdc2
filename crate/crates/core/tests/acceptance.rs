//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use steinhull::blocks::{block_stats, weakly_geometric_scheme, BlockStats};
use steinhull::filters::{
    apply_filter, loss, monotone_oracle, quadratic_risk, BlockFilter, Filter, MonotoneFilter,
};
use steinhull::harness::{cli_dispatch_with_env, parse_config, run_oracle_ratio, Estimator};
use steinhull::hulls::{calibrate_b, verify_hull, HullSpec, HullVariant};
use steinhull::model::{
    make_signal, observe, power_spectrum, OperatorSpectrum, SignalCoefficients, SignalKind,
};
use steinhull::montecarlo::{derive_seed, Execution, MonteCarlo, NoiseStream};
use steinhull::penalties::{
    check_a2, ct_penalty, excess_expectation, lemma1_bound, lemma1_delta_limit, lemma2_bound,
    mc_penalty, tail_threshold, PenaltyValues,
};
use steinhull::stein::{block_energies, penalized_stein_filter, u_p};

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn wg_stats(beta: f64, eps: f64, n_max: usize) -> (OperatorSpectrum, BlockStats) {
    let spec = power_spectrum(beta, 1.0, n_max).unwrap();
    let scheme = weakly_geometric_scheme(eps, &spec).unwrap();
    let st = block_stats(&scheme, &spec, eps).unwrap();
    (spec, st)
}

fn random_signal(rng: &mut ChaCha8Rng, n: usize, n_blocks_end: usize) -> SignalCoefficients {
    match rng.random_range(0..4) {
        0 => make_signal(
            SignalKind::PowerSmooth,
            &[rng.random_range(0.2..3.0), rng.random_range(0.6..2.5)],
            n,
        ),
        1 => make_signal(
            SignalKind::ExpSmooth,
            &[rng.random_range(0.2..3.0), rng.random_range(0.02..1.0)],
            n,
        ),
        2 => make_signal(
            SignalKind::Spike,
            &[
                rng.random_range(1..=n_blocks_end) as f64,
                rng.random_range(-3.0..3.0),
            ],
            n,
        ),
        _ => {
            let theta: Vec<f64> = (1..=n)
                .map(|k| rng.random_range(-1.0..1.0) * 2.0 / k as f64)
                .collect();
            make_signal(SignalKind::Explicit, &theta, n)
        }
    }
    .unwrap()
}

fn random_penalty(rng: &mut ChaCha8Rng, st: &BlockStats) -> PenaltyValues {
    match rng.random_range(0..3) {
        0 => ct_penalty(st, rng.random_range(0.05..=0.5)).unwrap(),
        1 => PenaltyValues::explicit(
            st.sigma2
                .iter()
                .map(|s| s * rng.random_range(0.0..3.0))
                .collect(),
        )
        .unwrap(),
        _ => PenaltyValues::zeros(st.num_blocks()),
    }
}

/// Closed-form penalized filter against a step-1e-3 grid argmin of the criterion.
fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut blocks = 0;
    let mut violations = 0;
    for inst in 0..200u64 {
        let beta = rng.random_range(0.5..=2.0);
        let eps = rng.random_range(0.01..=0.1);
        let (spec, st) = wg_stats(beta, eps, 2000);
        let sig = random_signal(&mut rng, 2000, st.n());
        let pen = random_penalty(&mut rng, &st);
        let obs = observe(
            &spec,
            &sig,
            eps,
            &mut NoiseStream::new(derive_seed(1, inst)),
        )
        .unwrap();
        let en = block_energies(&obs, &st.scheme, &spec).unwrap();
        let lam = penalized_stein_filter(&en, &st, &pen)
            .unwrap()
            .lam()
            .to_vec();
        for j in 0..st.num_blocks() {
            let crit = |l: f64| {
                let mut v = lam.clone();
                v[j] = l;
                u_p(
                    &en,
                    &st,
                    Some(&pen),
                    &BlockFilter::new(st.scheme.clone(), v).unwrap(),
                )
                .unwrap()
            };
            let (arg, best) = (0..=1000)
                .map(|g| g as f64 / 1000.0)
                .map(|l| (l, crit(l)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let gap = (arg - lam[j]).abs();
            worst = worst.max(gap);
            blocks += 1;
            if gap > 1e-3 || crit(lam[j]) > best + 1e-12 * best.abs().max(1.0) {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("200 instances, {blocks} blocks, worst |closed form - grid argmin| = {worst:.2e}, {violations} violations"),
    )
}

/// Monte-Carlo loss against the closed-form risk for 20 fixed filters.
fn criterion_2() -> Outcome {
    let n = 200;
    let eps = 0.1;
    let (spec, st) = wg_stats(1.0, eps, n);
    let sig = make_signal(SignalKind::PowerSmooth, &[1.0, 1.0], n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_z: f64 = 0.0;
    let mut fails = 0;
    for f in 0..20u64 {
        let (risk, est) = if f < 10 {
            let lam: Vec<f64> = (0..st.num_blocks())
                .map(|_| rng.random_range(0.0..=1.0))
                .collect();
            let filt = BlockFilter::new(st.scheme.clone(), lam).unwrap();
            let risk = quadratic_risk(&filt, &sig, &spec, eps).unwrap();
            let mc = MonteCarlo::new(10_000, derive_seed(2, f));
            (risk, mc.estimate(|s| mc_loss(&filt, &spec, &sig, eps, s)))
        } else {
            let support = rng.random_range(1..=n);
            let mut lam: Vec<f64> = (0..support).map(|_| rng.random_range(0.0..=1.0)).collect();
            lam.sort_by(|a, b| b.total_cmp(a));
            let filt = MonotoneFilter::new(lam).unwrap();
            let risk = quadratic_risk(&filt, &sig, &spec, eps).unwrap();
            let mc = MonteCarlo::new(10_000, derive_seed(2, f));
            (risk, mc.estimate(|s| mc_loss(&filt, &spec, &sig, eps, s)))
        };
        let z = (est.mean - risk).abs() / est.std_error;
        worst_z = worst_z.max(z);
        if z > 4.0 {
            fails += 1;
        }
    }
    outcome(
        fails == 0,
        format!("20 filters at 1e4 reps, worst |z| = {worst_z:.2}"),
    )
}

fn mc_loss(
    filt: &impl Filter,
    spec: &OperatorSpectrum,
    sig: &SignalCoefficients,
    eps: f64,
    s: &mut NoiseStream,
) -> f64 {
    let obs = observe(spec, sig, eps, s).unwrap();
    loss(&apply_filter(filt, &obs, spec).unwrap(), sig).unwrap()
}

/// Exact minimum over nonincreasing filters with levels on the 0.01 grid.
fn grid_monotone_min(theta: &[f64], var: &[f64]) -> f64 {
    let levels: Vec<f64> = (0..=100).map(|l| l as f64 / 100.0).collect();
    let mut best = vec![0.0; levels.len()];
    for (t, v) in theta.iter().zip(var) {
        // Suffix minimum over levels >= l of the previous row.
        let mut suffix = vec![f64::INFINITY; levels.len() + 1];
        for l in (0..levels.len()).rev() {
            suffix[l] = suffix[l + 1].min(best[l]);
        }
        for (l, &lam) in levels.iter().enumerate() {
            best[l] = suffix[l] + (1.0 - lam).powi(2) * t * t + v * lam * lam;
        }
    }
    best.into_iter().fold(f64::INFINITY, f64::min)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_gap: f64 = 0.0;
    let mut ok = true;
    for _ in 0..100 {
        let n = rng.random_range(1..=6);
        let eps = rng.random_range(0.05..0.5);
        let spec = power_spectrum(rng.random_range(0.5..2.0), 1.0, n).unwrap();
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sig = SignalCoefficients::new(theta.clone());
        let pava = quadratic_risk(
            &monotone_oracle(&sig, &spec, eps, n).unwrap(),
            &sig,
            &spec,
            eps,
        )
        .unwrap();
        let var: Vec<f64> = (0..n).map(|i| eps * eps * spec.inv_sq(i)).collect();
        let grid = grid_monotone_min(&theta, &var);
        worst_gap = worst_gap.max((grid - pava).abs());
        ok &= pava <= grid + 1e-12 && grid - pava <= 1e-3;
    }
    let mut beaten = 0;
    for _ in 0..5 {
        let n = 50;
        let eps = rng.random_range(0.01..0.2);
        let spec = power_spectrum(1.0, 1.0, n).unwrap();
        let sig = random_signal(&mut rng, n, n);
        let oracle = quadratic_risk(
            &monotone_oracle(&sig, &spec, eps, n).unwrap(),
            &sig,
            &spec,
            eps,
        )
        .unwrap();
        for _ in 0..100 {
            let mut lam: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
            lam.sort_by(|a, b| b.total_cmp(a));
            let r = quadratic_risk(&MonotoneFilter::new(lam).unwrap(), &sig, &spec, eps).unwrap();
            if r + 1e-12 < oracle {
                beaten += 1;
            }
        }
    }
    outcome(
        ok && beaten == 0,
        format!("100 small instances, worst |PAVA - grid| = {worst_gap:.2e}; oracle beaten by {beaten} of 500 random filters"),
    )
}

fn criterion_4() -> Outcome {
    let spec = OperatorSpectrum::new(vec![1.0]).unwrap();
    let st = block_stats(
        &steinhull::blocks::custom_scheme(vec![1, 2]).unwrap(),
        &spec,
        1.0,
    )
    .unwrap();
    let est = excess_expectation(&st, 0, 0.0, &MonteCarlo::new(100_000, 404)).unwrap();
    let target = 2.0 * (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let z = (est.mean - target).abs() / est.std_error;
    outcome(
        z <= 3.0,
        format!(
            "E[eta]_+ = {:.6} +- {:.6}, target {target:.6}, |z| = {z:.2}",
            est.mean, est.std_error
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut triples = Vec::new();
    for eps in [0.1, 0.05, 0.02] {
        let (_, st) = wg_stats(1.0, eps, 2000);
        for j in 0..st.num_blocks() {
            for (pen_mult, delta_frac) in [(0.5, 0.5), (1.0, 0.25), (2.0, 0.75), (3.0, 0.5)] {
                triples.push((
                    st.clone(),
                    j,
                    pen_mult * st.sigma2[j],
                    delta_frac * lemma1_delta_limit(&st, j),
                ));
            }
        }
    }
    triples.truncate(20);
    let mut worst = f64::NEG_INFINITY;
    let mut ok = triples.len() == 20;
    for (i, (st, j, pen, delta)) in triples.iter().enumerate() {
        let est = excess_expectation(
            st,
            *j,
            *pen,
            &MonteCarlo::new(10_000, derive_seed(5, i as u64)),
        )
        .unwrap();
        let bound = lemma1_bound(st, *j, *pen, *delta).unwrap();
        worst = worst.max(est.mean - bound - 3.0 * est.std_error);
        ok &= est.mean <= bound + 3.0 * est.std_error;
    }
    outcome(
        ok,
        format!(
            "{} triples, max (mc - bound - 3 se) = {worst:.3e}",
            triples.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let (_, st) = wg_stats(1.0, 0.1, 2000);
    let mc = MonteCarlo::new(10_000, 606);
    let level = 0.01;
    let mut ok = true;
    let mut parts = Vec::new();
    for j in 0..st.num_blocks() {
        let u = tail_threshold(&st, j, level, &mc.child(j as u64), None).unwrap();
        let b = lemma2_bound(&st, j, 1.0);
        ok &= u >= b;
        parts.push(format!("U_{}={u:.4}>=bound {b:.4}", j + 1));
    }
    let pen = mc_penalty(&st, 0.5, None, &mc, None).unwrap();
    for (j, p) in pen.pen.iter().enumerate() {
        ok &= p / 1.5 >= lemma2_bound(&st, j, 1.0);
    }
    outcome(ok, parts.join(", "))
}

fn criterion_7() -> Outcome {
    let grid = [0.1, 0.05, 0.02, 0.01];
    let mut vals = Vec::new();
    for (i, &eps) in grid.iter().enumerate() {
        let (_, st) = wg_stats(1.0, eps, 2000);
        let pen = mc_penalty(
            &st,
            0.5,
            None,
            &MonteCarlo::new(100_000, derive_seed(71, i as u64)),
            None,
        )
        .unwrap();
        let rep = check_a2(
            &st,
            &pen,
            &MonteCarlo::new(100_000, derive_seed(72, i as u64)),
        )
        .unwrap();
        vals.push((rep.sum_over_eps2, rep.std_error));
    }
    let bounded = vals.iter().all(|(v, _)| *v <= 1.0);
    let nonincreasing = vals
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 + 3.0 * w[0].1.hypot(w[1].1));
    let shown: Vec<String> = grid
        .iter()
        .zip(&vals)
        .map(|(e, (v, s))| format!("{e}: {v:.4}+-{s:.4}"))
        .collect();
    outcome(
        bounded && nonincreasing,
        format!("sum E[eta-pen]_+/eps^2 = {}", shown.join(", ")),
    )
}

fn criterion_8() -> Outcome {
    let grid = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, eps) in [0.1, 0.02].into_iter().enumerate() {
        let tag = i as u64;
        let (_, st) = wg_stats(1.0, eps, 2000);
        let sig = make_signal(SignalKind::PowerSmooth, &[1.0, 1.0], 2000).unwrap();
        let pen = mc_penalty(
            &st,
            0.5,
            None,
            &MonteCarlo::new(100_000, derive_seed(81, tag)),
            None,
        )
        .unwrap();
        let c2 = check_a2(&st, &pen, &MonteCarlo::new(100_000, derive_seed(82, tag)))
            .unwrap()
            .sum_over_eps2;
        let train = MonteCarlo::new(10_000, derive_seed(83, tag));
        let calibrated = [HullVariant::V, HullVariant::W]
            .map(|v| calibrate_b(&sig, &st, &pen, c2, v, &train, &grid).map(|(b, _)| b));
        let [Ok(bv), Ok(bw)] = calibrated else {
            ok = false;
            parts.push(format!("eps {eps}: calibration failed"));
            continue;
        };
        let b = bv.max(bw);
        let mut worst: f64 = f64::NEG_INFINITY;
        for seed in 0..3u64 {
            let mc = MonteCarlo::new(10_000, derive_seed(84 + tag, seed));
            let v = verify_hull(
                &HullSpec::new(pen.clone(), b, c2, HullVariant::V).unwrap(),
                &sig,
                &st,
                &mc,
            )
            .unwrap();
            let w = verify_hull(
                &HullSpec::new(pen.clone(), b, c2, HullVariant::W).unwrap(),
                &sig,
                &st,
                &mc,
            )
            .unwrap();
            ok &= v.holds && w.holds && w.mean >= v.mean;
            worst = worst
                .max(w.mean + 3.0 * w.std_error)
                .max(v.mean + 3.0 * v.std_error);
        }
        parts.push(format!(
            "eps {eps}: C2={c2:.4} B={b} (V {bv}, W {bw}), worst held-out mean+3se = {worst:.3e}"
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_9() -> Outcome {
    let config = parse_config(
        "signal.kind = power_smooth\nsignal.params = 1, 1\nbeta = 1\nn_max = 2000\n\
         epsilon_grid = 0.1, 0.05, 0.02, 0.01\npenalty.kind = mc\npenalty.alpha = 0.5\n\
         reps = 10000\nmaster_seed = 909\n",
    )
    .unwrap();
    let report = run_oracle_ratio(&config, Execution::default()).unwrap();
    let ratio = |e: f64| {
        report
            .row(e, Estimator::PenalizedStein)
            .unwrap()
            .ratio_blockwise
    };
    let shown: Vec<String> = config
        .epsilon_grid
        .iter()
        .map(|&e| format!("{e}: {:.3}", ratio(e)))
        .collect();
    outcome(
        ratio(0.01) <= ratio(0.1),
        format!("penalized Stein ratio {}", shown.join(", ")),
    )
}

fn run_cli(args: &[String], sequential: bool) -> (u8, Vec<u8>) {
    let mut argv: Vec<String> = std::iter::once("steinhull".to_string())
        .chain(args.iter().cloned())
        .collect();
    if sequential {
        argv.push("--sequential".into());
    }
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli_dispatch_with_env(argv, None, &mut out, &mut err);
    (code, out)
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).display().to_string();
    std::fs::write(
        path("ratio.conf"),
        "signal.kind = power_smooth\nsignal.params = 1,1\nepsilon_grid = 0.1,0.05\nn_max = 300\nreps = 500\nmaster_seed = 10\n",
    )
    .unwrap();
    let obs_args =
        "simulate --epsilon 0.05 --signal power_smooth --signal-params 1,1 --n-max 300 --seed 10";
    let (code, obs) = run_cli(&split(obs_args), false);
    assert_eq!(code, 0);
    std::fs::write(path("obs.csv"), &obs).unwrap();

    let commands = [
        "blocks --epsilon 0.1 --beta 1".to_string(),
        obs_args.to_string(),
        format!("estimate --obs {} --n-max 300 --seed 10", path("obs.csv")),
        "penalty --epsilon 0.05 --seed 10".to_string(),
        "penalty --epsilon 0.05 --penalty ct".to_string(),
        "verify-hull --epsilon 0.1 --signal power_smooth --signal-params 1,1 --n-max 300 --reps 1000 --seed 10 --b-grid 0,1,1024".to_string(),
        format!("oracle-ratio --config {}", path("ratio.conf")),
        "check --epsilon-grid 0.1,0.05 --seed 10".to_string(),
    ];
    let mut failures = Vec::new();
    for c in &commands {
        let args = split(c);
        let a = run_cli(&args, false);
        let b = run_cli(&args, false);
        let s = run_cli(&args, true);
        let name = args[0].clone();
        if a.0 != 0 || a.1.is_empty() || a != b || a != s {
            failures.push(name);
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} invocations x (2 parallel + 1 sequential) runs; mismatches: {:?}",
            commands.len(),
            failures
        ),
    )
}

fn split(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "closed-form filter certification", criterion_1),
        (2, "risk identity", criterion_2),
        (3, "monotone oracle", criterion_3),
        (4, "gaussian tail oracle", criterion_4),
        (5, "exponential bound dominance", criterion_5),
        (6, "logarithmic penalty floor", criterion_6),
        (7, "A2 scaling", criterion_7),
        (8, "hull property", criterion_8),
        (9, "oracle-ratio trend", criterion_9),
        (10, "CLI determinism", criterion_10),
    ];
    let only: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| outcome(false, "panicked"));
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
