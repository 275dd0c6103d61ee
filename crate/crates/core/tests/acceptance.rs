//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use limitdecide::adversary::{Adversary, BitString, CandidateProcedure, CertificateKind};
use limitdecide::decider::DecisionTrace;
use limitdecide::delta2::{bounded_witness, corpus, Delta2Set, SetRegistry, Verdict};
use limitdecide::harness::{monte_carlo, monte_carlo_with, run_trial, Execution, ExperimentSpec};
use limitdecide::stats::{lil_radius, lil_threshold, LilParams, OnlineStats};
use limitdecide::streams::{ComputableSet, Mean, SplitMix64, StreamSpec};
use num_bigint::BigInt;
use sha2::{Digest, Sha256};

use common::*;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// 1. closed-form radius

const DIGITS: u32 = 60;

fn scale() -> BigInt {
    BigInt::from(10).pow(DIGITS)
}

/// `atanh(p / q)` in fixed point with `DIGITS` decimals, for `|p / q| < 1`.
fn atanh_fixed(p: &BigInt, q: &BigInt) -> BigInt {
    let mut power = scale() * p / q;
    let mut sum = BigInt::from(0);
    let mut k = 1u32;
    while power != BigInt::from(0) {
        sum += &power / k;
        power = power * p * p / (q * q);
        k += 2;
    }
    sum
}

/// `ln x` for a fixed-point `x > 0`, via `2 atanh((x - 1) / (x + 1))`.
fn ln_fixed(x: &BigInt) -> BigInt {
    let one = scale();
    atanh_fixed(&(x - &one), &(x + &one)) * 2
}

fn fixed_to_f64(x: &BigInt) -> f64 {
    let digits = x.to_string();
    let padded = format!("{digits:0>width$}", width = DIGITS as usize + 1);
    let (int, frac) = padded.split_at(padded.len() - DIGITS as usize);
    format!("{int}.{frac}").parse().unwrap()
}

/// `sqrt(ln ln 16 / 16)` to 60 decimals, using only integer arithmetic.
fn radius_16_oracle() -> f64 {
    let ln16 = ln_fixed(&(scale() * 16));
    let lnln16 = ln_fixed(&ln16);
    let x: BigInt = lnln16 / 16;
    fixed_to_f64(&(x * scale()).sqrt())
}

fn criterion_1() -> Check {
    let oracle = radius_16_oracle();
    let got = lil_radius(16, 1.0, 1.0);
    ensure((got - oracle).abs() <= 1e-9, || format!("radius {got} vs oracle {oracle}"))?;
    let mut rng = SplitMix64::new(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = 16 + rng.next_u64() % (1 << 40);
        let var = 1e-6 + rng.next_open01() * 1e6;
        let eps = 0.01 + rng.next_open01() * 10.0;
        let base = lil_threshold(n, var, &LilParams::new(eps, 16).unwrap()).unwrap();
        let doubled = lil_threshold(n, var, &LilParams::new(1.0 + 2.0 * eps, 16).unwrap()).unwrap();
        worst = worst.max(rel_err(doubled, std::f64::consts::SQRT_2 * base));
    }
    ensure(worst <= 1e-12, || format!("scaling rel err {worst:e}"))?;
    Ok(format!("radius(16) = {got:.15} (oracle {oracle:.15}), scaling rel err {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// 2. streaming moments

fn criterion_2() -> Check {
    let mut rng = SplitMix64::new(2);
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let len = 1 + (rng.next_u64() % 10_000) as usize;
        let spread = 10f64.powf(-3.0 + 9.0 * rng.next_open01());
        let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
        let centre = sign * spread * (1.0 + 9.0 * rng.next_open01());
        let xs: Vec<f64> = (0..len).map(|_| centre + spread * (rng.next_open01() - 0.5)).collect();
        let s = OnlineStats::from_samples(&xs).map_err(|e| e.to_string())?;
        let (mean, var) = batch_moments(&xs);
        worst_mean = worst_mean.max(rel_err(s.mean(), mean));
        worst_var = worst_var.max(rel_err(s.variance().unwrap(), var));
    }
    ensure(worst_mean <= 1e-12 && worst_var <= 1e-12, || {
        format!("mean rel err {worst_mean:e}, variance rel err {worst_var:e}")
    })?;
    Ok(format!("1000 lists, worst rel err mean {worst_mean:.1e}, variance {worst_var:.1e}"))
}

// ---------------------------------------------------------------------------
// 3. witness race

fn bundled_sets() -> Vec<Arc<Delta2Set>> {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/sets/manifest.toml");
    let mut reg = SetRegistry::builtin();
    reg.load_manifest(&manifest).expect("bundled manifest loads");
    reg.iter().cloned().collect()
}

fn criterion_3() -> Check {
    let sets = bundled_sets();
    let (mut races, mut unhinted) = (0u64, 0u64);
    for set in &sets {
        for n in 0..=100u64 {
            let (Some(truth), Some(hint)) = (set.truth(n), set.settle_hint(n)) else {
                unhinted += 1;
                continue;
            };
            let want = if truth { Verdict::InSet } else { Verdict::NotInSet };
            for bound in hint..=4 * hint {
                let w = bounded_witness(set, n, bound);
                races += 1;
                ensure(w.verdict == want, || format!("{} n={n} N={bound}: {w:?}, truth {truth}", set.id()))?;
                ensure(Verdict::from_minima(w.min_m_phi, w.min_m_psi) == w.verdict, || format!("{w:?}"))?;
            }
        }
    }
    ensure(unhinted == 0, || format!("{unhinted} (set, n) pairs without a settle hint"))?;
    Ok(format!("{} sets, {races} races", sets.len()))
}

// ---------------------------------------------------------------------------
// 4. end-to-end mean test

fn evens() -> Arc<Delta2Set> {
    Arc::new(Delta2Set::recursive(ComputableSet::Evens))
}

fn experiment(mean: Mean, set: Arc<Delta2Set>, horizon: u64, trials: u64, base_seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        stream: StreamSpec::normal(mean, 1.0, 0).unwrap(),
        set,
        params: LilParams::default(),
        horizon,
        trials,
        base_seed,
    }
}

const BASE_SEED: u64 = 1;

fn criterion_4() -> Check {
    let mut parts = Vec::new();
    for mu in [4i64, 10, 3, 7] {
        let s = monte_carlo(&experiment(mu.into(), evens(), 1 << 14, 100, BASE_SEED)).map_err(|e| e.to_string())?;
        ensure(s.failures == 0 && s.final_accuracy >= 0.95, || {
            format!("mu={mu}: accuracy {} failures {}", s.final_accuracy, s.failures)
        })?;
        parts.push(format!("mu={mu} acc {}", s.final_accuracy));
    }
    let s = monte_carlo(&experiment(Mean::sqrt(2), evens(), 1 << 14, 100, BASE_SEED)).map_err(|e| e.to_string())?;
    ensure(s.failures == 0 && s.final_d_rate <= 0.05, || format!("mu=sqrt2: d rate {}", s.final_d_rate))?;
    parts.push(format!("mu=sqrt2 d-rate {}", s.final_d_rate));
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------------------
// 5. flip schedule

fn criterion_5() -> Check {
    let spec = experiment(5.into(), Arc::new(corpus::flip_stage10()), 1 << 14, 10, BASE_SEED);
    let truth = spec.ground_truth().map_err(|e| e.to_string())?;
    let mut latest = 0;
    for t in 0..spec.trials {
        let trace: DecisionTrace = run_trial(&spec, t).map_err(|e| e.to_string())?;
        ensure(trace.failure.is_none(), || format!("trial {t}: {:?}", trace.failure))?;
        for (n, d) in trace.decision_rows() {
            if d.e != truth {
                latest = latest.max(n);
            }
        }
    }
    ensure(latest < 1 << 10, || format!("e-decision wrong at N={latest}"))?;
    Ok(format!("10 seeds, last wrong e-decision at N={latest}"))
}

// ---------------------------------------------------------------------------
// 6. adversary vs enumeration

fn stems(max_len: usize) -> Vec<Vec<bool>> {
    all_strings(max_len)
}

fn check_branch(f: &CandidateProcedure, stem: &[bool], depth: usize, rho: f64, branch: &BitString) -> Result<(), String> {
    let b = &branch.0;
    ensure(b.len() == depth && b.starts_with(stem) && f.eval(b), || format!("bad branch {branch}"))?;
    let density = naive_accepted_levels(f, b, stem.len()) as f64 / (depth - stem.len() + 1) as f64;
    ensure(density >= rho - 1e-9, || format!("branch {branch} density {density}"))
}

fn kind_matches(kind: CertificateKind, level: Option<usize>, naive: NaiveKind) -> bool {
    match naive {
        NaiveKind::Extinction(l) => kind == CertificateKind::Extinction && level == Some(l),
        NaiveKind::WrongWay => kind == CertificateKind::WrongWayBranch,
        NaiveKind::Unstable => kind == CertificateKind::UnstableBranch,
        NaiveKind::Inconclusive => kind == CertificateKind::Inconclusive,
    }
}

fn criterion_6() -> Check {
    let target = ComputableSet::Evens;
    let mut checks = 0u64;
    for f in CandidateProcedure::builtins(target) {
        let adv = Adversary::new(f.clone());
        for stem in stems(4) {
            let t = BitString(stem.clone());
            for depth in stem.len().max(1)..=12 {
                let s = adv.survivors(&t, depth).map_err(|e| e.to_string())?;
                ensure(s.counts == naive_survivors(&f, &stem, depth), || {
                    format!("{} stem {t} D={depth}: survivors {:?}", f.name(), s.counts)
                })?;
                for rho in [0.5, 0.9, 1.0] {
                    let b = adv.find_persistent_branch(&t, depth, rho).map_err(|e| e.to_string())?;
                    ensure(b.branch.is_some() == naive_persistent_exists(&f, &stem, depth, rho), || {
                        format!("{} stem {t} D={depth} rho={rho}: branch {:?}", f.name(), b.branch)
                    })?;
                    if let Some(branch) = &b.branch {
                        check_branch(&f, &stem, depth, rho, branch)?;
                    }
                }
                if t.is_off_target(target) {
                    let c = adv.dilemma_certificate(target, &t, depth, 0.9).map_err(|e| e.to_string())?;
                    let naive = naive_certificate(&f, &stem, depth, 0.9);
                    ensure(kind_matches(c.kind, c.extinction_level, naive), || {
                        format!("{} stem {t} D={depth}: {:?} vs {naive:?}", f.name(), c.kind)
                    })?;
                }
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} (procedure, stem, depth) cases agree"))
}

// ---------------------------------------------------------------------------
// 7. trichotomy

fn criterion_7() -> Check {
    let target = ComputableSet::Evens;
    let mut certs = 0u64;
    for f in CandidateProcedure::builtins(target) {
        let adv = Adversary::new(f.clone());
        for stem in stems(4) {
            let t = BitString(stem);
            if !t.is_off_target(target) {
                continue;
            }
            let c = adv.dilemma_certificate(target, &t, 16, 0.9).map_err(|e| e.to_string())?;
            ensure(c.kind != CertificateKind::Inconclusive && c.exact, || {
                format!("{} stem {t}: {:?} exact={}", f.name(), c.kind, c.exact)
            })?;
            certs += 1;
        }
    }
    Ok(format!("{certs} certificates, none inconclusive"))
}

// ---------------------------------------------------------------------------
// 8. determinism

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn criterion_8() -> Check {
    let spec = experiment(3.into(), evens(), 1 << 12, 32, BASE_SEED);
    let run = |e| monte_carlo_with(&spec, e).map(|s| sha256_hex(s.to_json().as_bytes())).map_err(|e| e.to_string());
    let first = run(Execution::Parallel)?;
    ensure(first == run(Execution::Parallel)?, || "parallel reruns differ".into())?;
    ensure(first == run(Execution::Serial)?, || "serial differs from parallel".into())?;
    ensure(first == run(Execution::Threads(3))?, || "3-thread pool differs".into())?;

    let trace_hash = |t: u64| -> Result<String, String> {
        let mut csv = Vec::new();
        run_trial(&spec, t).map_err(|e| e.to_string())?.write_csv(&mut csv).unwrap();
        Ok(sha256_hex(&csv))
    };
    ensure(trace_hash(5)? == trace_hash(5)?, || "trace reruns differ".into())?;

    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let golden = std::fs::read(manifest.join("tests/golden/regression_summary.csv")).map_err(|e| e.to_string())?;
    let config = manifest.join("../../assets/configs/regression.toml");
    for threads in ["1", "4", "1"] {
        let out = Command::new(env!("CARGO_BIN_EXE_limitdecide"))
            .args(["decide-mean", "--config", config.to_str().unwrap(), "--threads", threads])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success() && out.stdout == golden, || {
            format!("CLI run with {threads} threads differs from the golden summary")
        })?;
    }
    Ok(format!("summary sha256 {}..., CLI golden stable", &first[..16]))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("closed-form LIL radius", criterion_1, Duration::from_secs(1)),
        ("streaming moments vs batch", criterion_2, Duration::from_secs(10)),
        ("witness race ground truth", criterion_3, Duration::from_secs(60)),
        ("end-to-end mean test", criterion_4, Duration::from_secs(300)),
        ("flip-schedule stress", criterion_5, Duration::from_secs(60)),
        ("adversary vs enumeration", criterion_6, Duration::from_secs(120)),
        ("certificate trichotomy", criterion_7, Duration::from_secs(120)),
        ("determinism", criterion_8, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|msg| {
            if elapsed <= budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {elapsed:.2?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(msg) => println!("PASS {} {name}: {msg} ({elapsed:.2?})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} {name}: {msg} ({elapsed:.2?})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
