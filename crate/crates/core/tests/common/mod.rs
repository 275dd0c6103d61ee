#![allow(dead_code)]

//! Independent oracles shared by the integration tests.

use limitdecide::adversary::CandidateProcedure;

/// Two-pass batch moments with compensated summation: (mean, 1/N variance).
pub fn batch_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = kahan_sum(xs.iter().copied()) / n;
    let dev = kahan_sum(xs.iter().map(|x| x - mean));
    let mean = mean + dev / n;
    let ss = kahan_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
    (mean, ss / n)
}

fn kahan_sum(it: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in it {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}

/// Bits of `stem` followed by the low `len` bits of `code`, most significant
/// first.
pub fn extend(stem: &[bool], code: u64, len: usize) -> Vec<bool> {
    let mut s = stem.to_vec();
    s.extend((0..len).rev().map(|i| code >> i & 1 == 1));
    s
}

pub fn parse_bits(s: &str) -> Vec<bool> {
    s.chars().map(|c| c == '1').collect()
}

/// Every string of length at most `max_len`, shortest first.
pub fn all_strings(max_len: usize) -> Vec<Vec<bool>> {
    (0..=max_len)
        .flat_map(|len| (0..1u64 << len).map(move |c| extend(&[], c, len)))
        .collect()
}

/// Accepted extensions of `stem` at each level `|stem| ..= depth`, by listing
/// every extension.
pub fn naive_survivors(f: &CandidateProcedure, stem: &[bool], depth: usize) -> Vec<u64> {
    (stem.len()..=depth)
        .map(|level| {
            let extra = level - stem.len();
            (0..1u64 << extra)
                .filter(|&c| f.eval(&extend(stem, c, extra)))
                .count() as u64
        })
        .collect()
}

pub fn naive_flips(f: &CandidateProcedure, s: &[bool]) -> usize {
    let mut flips = 0;
    for i in 0..s.len() {
        if f.eval(&s[..i]) != f.eval(&s[..=i]) {
            flips += 1;
        }
    }
    flips
}

/// Accepted prefixes of `s` at lengths `from ..= |s|`.
pub fn naive_accepted_levels(f: &CandidateProcedure, s: &[bool], from: usize) -> usize {
    (from..=s.len()).filter(|&l| f.eval(&s[..l])).count()
}

/// Whether some length-`depth` extension is accepted and has at least
/// `rho * levels` accepted prefixes.
pub fn naive_persistent_exists(f: &CandidateProcedure, stem: &[bool], depth: usize, rho: f64) -> bool {
    let extra = depth - stem.len();
    let levels = extra + 1;
    (0..1u64 << extra).any(|c| {
        let b = extend(stem, c, extra);
        f.eval(&b) && naive_accepted_levels(f, &b, stem.len()) as f64 >= rho * levels as f64 - 1e-9
    })
}

pub fn naive_max_flips(f: &CandidateProcedure, stem: &[bool], depth: usize) -> usize {
    let extra = depth - stem.len();
    (0..1u64 << extra)
        .map(|c| naive_flips(f, &extend(stem, c, extra)))
        .max()
        .unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NaiveKind {
    Extinction(usize),
    WrongWay,
    Unstable,
    Inconclusive,
}

pub fn naive_certificate(f: &CandidateProcedure, stem: &[bool], depth: usize, rho: f64) -> NaiveKind {
    let counts = naive_survivors(f, stem, depth);
    // smallest level L with zero survivors at every level L..=depth
    let mut extinct = None;
    for (i, _) in counts.iter().enumerate().rev() {
        if counts[i..].iter().all(|&c| c == 0) {
            extinct = Some(stem.len() + i);
        }
    }
    if let Some(l) = extinct {
        NaiveKind::Extinction(l)
    } else if naive_persistent_exists(f, stem, depth, rho) {
        NaiveKind::WrongWay
    } else if 4 * naive_max_flips(f, stem, depth) >= depth {
        NaiveKind::Unstable
    } else {
        NaiveKind::Inconclusive
    }
}
