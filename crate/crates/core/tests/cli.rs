//! End-to-end checks of the compiled binary: output text, JSON
//! round-trips, exit codes, and naive/engine agreement for gmod.

use std::process::{Command, Output};

use bernoulli::cli::OutputRecord;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bernoulli"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).trim().to_string()
}

#[test]
fn compute_known_fractions() {
    let out = run(&["compute", "--n", "12"]);
    assert!(out.status.success());
    assert_eq!(stdout_line(&out), "-691/2730");

    let out = run(&["compute", "--n", "7"]);
    assert_eq!(stdout_line(&out), "0");

    let out = run(&["compute", "--n", "1"]);
    assert_eq!(stdout_line(&out), "-1/2");

    let out = run(&["compute", "--n", "0"]);
    assert_eq!(stdout_line(&out), "1");

    let out = run(&["compute", "--n", "10", "--genocchi"]);
    assert_eq!(stdout_line(&out), "-155");
}

#[test]
fn compute_pipeline_with_verification() {
    let out = run(&["compute", "--n", "256", "--alpha", "1/2", "--verify", "--format", "json"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let record: OutputRecord = serde_json::from_str(&stdout_line(&out)).unwrap();
    assert_eq!(record.kind, "bernoulli");
    assert_eq!(record.verified, Some(true));
    let plan = record.plan.as_ref().expect("pipeline ran");
    assert!(plan.batches > 0 && plan.modulus_bits > 0);
    assert!(record.denominator.parse::<u64>().unwrap() % 6 == 0);
}

#[test]
fn json_round_trips_through_the_binary() {
    let out = run(&["compute", "--n", "300", "--alpha", "0.4", "--format", "json"]);
    assert!(out.status.success());
    let text = stdout_line(&out);
    let record: OutputRecord = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string(&record).unwrap();
    let back: OutputRecord = serde_json::from_str(&again).unwrap();
    assert_eq!(back, record);
}

#[test]
fn gmod_examples_and_agreement() {
    let fast = run(&["gmod", "--n", "10", "--p", "5", "--s", "2"]);
    assert_eq!(stdout_line(&fast), "20");
    let naive = run(&["gmod", "--n", "10", "--p", "5", "--s", "2", "--naive"]);
    assert_eq!(stdout_line(&naive), "20");
}

#[test]
fn gmod_fast_and_naive_agree_randomized() {
    // 50 seeded legal inputs, both paths.
    let mut state = 0xdecafbadu64;
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        state
    };
    let primes = [3u64, 5, 7, 11, 13, 17, 19, 23, 29];
    for case in 0..50 {
        let n = 5 + next() % 300;
        let s = 1 + (next() % 9) as usize;
        if n <= s as u64 {
            continue;
        }
        let p = primes[(next() % primes.len() as u64) as usize];
        let n_s = n.to_string();
        let p_s = p.to_string();
        let s_s = s.to_string();
        let fast = run(&["gmod", "--n", &n_s, "--p", &p_s, "--s", &s_s]);
        let naive = run(&["gmod", "--n", &n_s, "--p", &p_s, "--s", &s_s, "--naive"]);
        assert!(fast.status.success() && naive.status.success(), "case {case}: n={n} p={p} s={s}");
        assert_eq!(
            stdout_line(&fast),
            stdout_line(&naive),
            "case {case}: n={n} p={p} s={s}"
        );
    }
}

#[test]
fn exit_codes() {
    // Bad alpha: argument error.
    let out = run(&["compute", "--n", "12", "--alpha", "0.7"]);
    assert_eq!(out.status.code(), Some(1));

    // Engine path infeasible without --naive.
    let out = run(&["gmod", "--n", "4", "--p", "3", "--s", "4"]);
    assert_eq!(out.status.code(), Some(1));
    // ... but fine with it.
    let out = run(&["gmod", "--n", "4", "--p", "3", "--s", "4", "--naive"]);
    assert!(out.status.success());
    assert_eq!(stdout_line(&out), "1"); // G_4 mod 81

    // Composite p rejected.
    let out = run(&["gmod", "--n", "10", "--p", "9", "--s", "2"]);
    assert_eq!(out.status.code(), Some(1));

    // Unknown flag: usage error.
    let out = run(&["compute", "--n", "12", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));

    // Plan below the feasibility floor.
    let out = run(&["plan", "--n", "10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plan_prints_parameters() {
    let out = run(&["plan", "--n", "1000000"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("N (prime bound)    575"));
    assert!(text.contains("s (exponent)       47990"));
    assert!(text.contains("r (batch cap)      83"));
}
