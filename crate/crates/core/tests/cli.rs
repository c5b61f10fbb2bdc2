use std::process::Command;

use steinhull::harness::cli_dispatch_with_env;

struct Run {
    code: u8,
    out: String,
    err: String,
}

fn run_env(args: &str, seed_env: Option<&str>) -> Run {
    let argv: Vec<&str> = std::iter::once("steinhull")
        .chain(args.split_whitespace())
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli_dispatch_with_env(argv, seed_env, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn run(args: &str) -> Run {
    run_env(args, None)
}

#[test]
fn no_arguments_prints_usage_and_fails() {
    let r = run("");
    assert_ne!(r.code, 0);
    assert!(r.err.contains("Usage"), "{}", r.err);

    let status = Command::new(env!("CARGO_BIN_EXE_steinhull"))
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_fails() {
    let r = run("frobnicate");
    assert_ne!(r.code, 0);
    assert!(!r.err.is_empty());
}

#[test]
fn blocks_at_epsilon_tenth() {
    let r = run("blocks --epsilon 0.1 --beta 1");
    assert_eq!(r.code, 0, "{}", r.err);
    let lines: Vec<&str> = r.out.lines().collect();
    assert_eq!(lines[0], "j,K_start,K_end,T_j,sigma2_j,Sigma2_j,Delta_j");
    assert!(lines[1].starts_with("1,1,4,4,"));
    assert!(lines[2].starts_with("2,5,6,2,"));
    assert!(lines[3].starts_with("rho_eps=") && lines[3].ends_with(",N=6,J=2"));
}

#[test]
fn blocks_requires_a_single_epsilon() {
    let r = run("blocks");
    assert_eq!(r.code, 1);
    assert!(r.err.contains("single epsilon"), "{}", r.err);
    let r = run("blocks --epsilon 0.5");
    assert_eq!(r.code, 1);
}

#[test]
fn seed_precedence() {
    let base = run("penalty --epsilon 0.1");
    let env = run_env("penalty --epsilon 0.1", Some("5"));
    let flag = run("penalty --epsilon 0.1 --seed 5");
    let both = run_env("penalty --epsilon 0.1 --seed 0", Some("5"));
    assert_eq!(env.out, flag.out);
    assert_ne!(env.out, base.out);
    assert_eq!(both.out, base.out);
}

#[test]
fn config_file_errors_report_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.conf");
    std::fs::write(&p, "epsilon = 0.1\nreps = 10\nreps = 20\n").unwrap();
    let r = run(&format!("blocks --config {}", p.display()));
    assert_eq!(r.code, 1);
    assert!(
        r.err.contains("line 3") && r.err.contains("reps"),
        "{}",
        r.err
    );

    std::fs::write(&p, "epsilon = 0.1\n").unwrap();
    let r = run(&format!("oracle-ratio --config {}", p.display()));
    assert_eq!(r.code, 1);
    assert!(r.err.contains("signal"), "{}", r.err);
}

#[test]
fn out_key_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("blocks.csv");
    let r = run(&format!("blocks --epsilon 0.1 --set out={}", p.display()));
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.is_empty());
    assert!(std::fs::read_to_string(&p)
        .unwrap()
        .starts_with("j,K_start"));
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    let spec = dir.path().join("spec.csv");
    let est = dir.path().join("est.csv");
    let r = run(&format!(
        "simulate --epsilon 0.02 --signal power_smooth --signal-params 1,1 --n-max 200 --out {} --spectrum-out {}",
        obs.display(),
        spec.display()
    ));
    assert_eq!(r.code, 0, "{}", r.err);
    let text = std::fs::read_to_string(&obs).unwrap();
    assert!(text.starts_with("k,y_k\n1,"));
    assert!(text
        .trim_end()
        .lines()
        .last()
        .unwrap()
        .starts_with("epsilon=0.02,seed="));

    for estimator in ["stein", "ure"] {
        let r = run(&format!(
            "estimate --obs {} --spectrum {} --estimate-out {} --estimator {estimator} --penalty ct",
            obs.display(),
            spec.display(),
            est.display()
        ));
        assert_eq!(r.code, 0, "{}", r.err);
        assert!(r.out.starts_with("k,lambda_k\n"));
        let lam: Vec<f64> = r
            .out
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(lam.iter().all(|l| (0.0..=1.0).contains(l)));
        assert!(lam.iter().any(|l| *l > 0.0), "{estimator}: {lam:?}");
        assert_eq!(std::fs::read_to_string(&est).unwrap().lines().count(), 201);
    }
}

#[test]
fn penalty_kinds() {
    let r = run("penalty --epsilon 0.05 --penalty ct --set penalty.gamma=0.5");
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(
        r.out.lines().next().unwrap(),
        "j,pen_j,kind,lemma2_bound,sigma2_j"
    );
    assert!(r
        .out
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("ct")));
    let r = run("penalty --epsilon 0.05 --penalty none");
    assert!(r
        .out
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("0")));
    let r = run("penalty --epsilon 0.05 --penalty ct --set penalty.alpha=1");
    assert_eq!(r.code, 1);
}

#[test]
fn verify_hull_rows() {
    let r = run(
        "verify-hull --epsilon 0.1 --signal power_smooth --signal-params 1,1 --n-max 200 --reps 1000 --b-grid 0,1024 --variant W",
    );
    assert_eq!(r.code, 0, "{}", r.err);
    let lines: Vec<&str> = r.out.lines().collect();
    assert_eq!(lines[0], "variant,B,C2,mean,std_error,holds");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("W,1024,") && lines[2].ends_with(",true"));

    let r = run(
        "verify-hull --epsilon 0.1 --signal power_smooth --signal-params 1,1 --n-max 200 --reps 1000 --b-grid 0 --c2 0 --penalty none --variant V",
    );
    assert_eq!(r.code, 1);
    assert!(r.out.lines().nth(1).unwrap().ends_with(",false"));
    assert!(r.err.contains("no grid value"));
}

#[test]
fn oracle_ratio_and_check_tables() {
    let r =
        run("oracle-ratio --epsilon-grid 0.1 --signal zero --reps 100 --n-max 200 --penalty ct");
    assert_eq!(r.code, 0, "{}", r.err);
    let lines: Vec<&str> = r.out.lines().collect();
    assert!(lines[0].starts_with("epsilon,estimator,mc_risk"));
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.1,penalized_stein,") && lines[1].contains("NaN"));

    let r = run("check --epsilon-grid 0.1,0.05 --penalty ct");
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(
        r.out.lines().next().unwrap(),
        "epsilon,check,value,std_error,status"
    );
    assert!(r.out.contains("a1_side_condition") && r.out.contains("ratio_condition"));
    assert!(r
        .out
        .lines()
        .last()
        .unwrap()
        .starts_with("all,a2_nonincreasing,"));
}

#[test]
fn outputs_are_identical_across_execution_modes() {
    for args in [
        "penalty --epsilon 0.02 --seed 3",
        "oracle-ratio --epsilon-grid 0.1,0.05 --signal power_smooth --signal-params 1,1 --reps 300 --n-max 300 --seed 3",
    ] {
        let a = run(args);
        let b = run(&format!("{args} --sequential"));
        assert_eq!(a.code, 0, "{}", a.err);
        assert_eq!(a.out, b.out, "{args}");
    }
}
