#![allow(dead_code)]

use comb_clt::bounds::Instance;
use comb_clt::dist::{Atom, DistMatrix, DistSpec};
use comb_clt::exact::{merge_atoms, ExactDistribution};
use comb_clt::matrix::CoefficientMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pm_matrix() -> CoefficientMatrix {
    CoefficientMatrix::new(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Random double-centered matrix with entries of a random overall scale.
pub fn random_matrix<R: Rng>(rng: &mut R, n: usize) -> CoefficientMatrix {
    let scale = 10f64.powf(rng.random_range(-1.0..0.7));
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
        .collect();
    CoefficientMatrix::double_center(&rows).unwrap()
}

/// Mean-zero law on two atoms `-u < 0 < v`.
pub fn two_atom<R: Rng>(rng: &mut R) -> DistSpec {
    let u: f64 = rng.random_range(0.1..2.5);
    let v: f64 = rng.random_range(0.1..2.5);
    let p = v / (u + v);
    DistSpec::finite_discrete(vec![Atom::new(-u, p), Atom::new(v, 1.0 - p)]).unwrap()
}

/// Mean-zero law on three atoms `x1 < x2 < x3` with `x1 < 0 < x3`.
pub fn three_atom<R: Rng>(rng: &mut R) -> DistSpec {
    loop {
        let x1 = -rng.random_range(0.1..2.5);
        let x3 = rng.random_range(0.1..2.5);
        let x2 = rng.random_range(x1..x3);
        let p2 = rng.random_range(0.05..0.6);
        let p3 = (-p2 * x2 - (1.0 - p2) * x1) / (x3 - x1);
        let p1 = 1.0 - p2 - p3;
        if p1 > 0.01 && p3 > 0.01 {
            if let Ok(s) = DistSpec::finite_discrete(vec![Atom::new(x1, p1), Atom::new(x2, p2), Atom::new(x3, p3)]) {
                return s;
            }
        }
    }
}

pub fn random_discrete<R: Rng>(rng: &mut R) -> DistSpec {
    match rng.random_range(0..4) {
        0 => DistSpec::Degenerate0,
        1 => DistSpec::SymmetricTwoPoint {
            a: rng.random_range(0.1..2.5),
        },
        2 => two_atom(rng),
        _ => three_atom(rng),
    }
}

pub fn random_continuous<R: Rng>(rng: &mut R) -> DistSpec {
    match rng.random_range(0..4) {
        0 => DistSpec::Uniform {
            halfwidth: rng.random_range(0.1..3.0),
        },
        1 => DistSpec::Normal {
            sigma: rng.random_range(0.1..2.0),
        },
        2 => DistSpec::Laplace {
            scale: rng.random_range(0.1..1.5),
        },
        _ => DistSpec::SymmetricPareto {
            alpha: rng.random_range(2.05..=3.0),
            xmin: rng.random_range(0.1..1.5),
        },
    }
}

fn cells<R: Rng>(rng: &mut R, n: usize, mut draw: impl FnMut(&mut R) -> DistSpec) -> DistMatrix {
    if rng.random_bool(0.3) {
        DistMatrix::Broadcast(draw(rng))
    } else {
        DistMatrix::Cells((0..n).map(|_| (0..n).map(|_| draw(rng)).collect()).collect())
    }
}

/// Enumerable instance: `n` in 2..=6, discrete cells with at most three atoms.
pub fn random_enumerable<R: Rng>(rng: &mut R) -> Instance {
    loop {
        let n = rng.random_range(2..=6);
        let c = random_matrix(rng, n);
        let y = cells(rng, n, random_discrete);
        if let Ok(inst) = Instance::new(c, y) {
            return inst;
        }
    }
}

/// Instance mixing every family, discrete and continuous.
pub fn random_any<R: Rng>(rng: &mut R) -> Instance {
    loop {
        let n = rng.random_range(2..=6);
        let c = random_matrix(rng, n);
        let y = cells(rng, n, |r| {
            if r.random_bool(0.5) {
                random_discrete(r)
            } else {
                random_continuous(r)
            }
        });
        if let Ok(inst) = Instance::new(c, y) {
            return inst;
        }
    }
}

/// Independent n-fold convolution of one discrete law, by direct recursion
/// over a value map; no permutation involved.
pub fn convolve_power(atoms: &[Atom], n: usize) -> ExactDistribution {
    let mut acc = vec![Atom::new(0.0, 1.0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(acc.len() * atoms.len());
        for a in &acc {
            for b in atoms {
                next.push(Atom::new(a.value + b.value, a.prob * b.prob));
            }
        }
        acc = merge_atoms(next);
    }
    ExactDistribution { atoms: acc }
}

pub use comb_clt::dist::oracle::{numeric_moment_oracle, Region, Weight};
use comb_clt::dist::{GFunction, Moment};

/// Reference values of the standard normal CDF (50-digit arithmetic, rounded).
pub const PHI_REFERENCE: [(f64, f64); 9] = [
    (0.0, 0.5),
    (0.5, 0.6914624612740131),
    (1.0, 0.8413447460685429),
    (-1.0, 0.15865525393145705),
    (2.0, 0.9772498680518208),
    (-3.0, 0.0013498980316300946),
    (3.5, 0.9997673709209645),
    (-5.0, 2.866515718791939e-7),
    (-8.0, 6.220960574271784e-16),
];

fn geometric(lo: f64, hi: f64, k: usize, count: usize) -> f64 {
    lo * (hi / lo).powf(k as f64 / (count - 1) as f64)
}

/// Twenty parameter points for each family.
pub fn family_grid() -> Vec<DistSpec> {
    let mut out = Vec::new();
    let mut r = rng(606);
    for k in 0..20 {
        out.push(DistSpec::Degenerate0);
        out.push(DistSpec::SymmetricTwoPoint {
            a: geometric(0.1, 5.0, k, 20),
        });
        out.push(if k % 2 == 0 { three_atom(&mut r) } else { two_atom(&mut r) });
        out.push(DistSpec::Uniform {
            halfwidth: geometric(0.1, 10.0, k, 20),
        });
        out.push(DistSpec::Normal {
            sigma: geometric(0.1, 10.0, k, 20),
        });
        out.push(DistSpec::Laplace {
            scale: geometric(0.1, 10.0, k, 20),
        });
        out.push(DistSpec::SymmetricPareto {
            alpha: 2.05 + 0.95 * k as f64 / 19.0,
            xmin: geometric(0.2, 3.0, (k * 7) % 20, 20),
        });
    }
    out
}

pub const CUTS: [f64; 6] = [0.05, 0.3, 1.0, 2.0, 2.5, 7.0];

/// Compare every closed-form moment with the quadrature/summation oracle.
/// Returns the number of comparisons and a description of each mismatch.
pub fn moment_grid_failures(rel: f64) -> (usize, Vec<String>) {
    let mut count = 0;
    let mut bad: Vec<String> = Vec::new();
    let mut mismatches = Vec::new();
    let mut cmp = |spec: &DistSpec, what: String, closed: f64, oracle: f64| {
        count += 1;
        let scale = spec.variance().max(1e-300);
        // absolute floor for quantities whose true value is zero
        let ok = (closed - oracle).abs() <= rel * closed.abs().max(oracle.abs()) + 1e-15 * scale.max(1.0);
        if !ok {
            mismatches.push(format!("{spec:?} {what}: closed {closed:e} oracle {oracle:e}"));
        }
    };
    let o = |spec: &DistSpec, w: Weight, region: Region| numeric_moment_oracle(spec, w, region).unwrap();
    for spec in family_grid() {
        cmp(&spec, "variance".into(), spec.variance(), o(&spec, Weight::Square, Region::All));
        if let Moment::Finite(v) = spec.abs_third() {
            cmp(&spec, "abs_third".into(), v, o(&spec, Weight::AbsCube, Region::All));
        } else if !matches!(spec, DistSpec::SymmetricPareto { alpha, .. } if alpha <= 3.0) {
            bad.push(format!("{spec:?}: abs_third unexpectedly infinite"));
        }
        for &t in &CUTS {
            cmp(&spec, format!("alpha({t})"), spec.alpha(t), o(&spec, Weight::Square, Region::Outside(t)));
            cmp(&spec, format!("beta({t})"), spec.beta(t), o(&spec, Weight::AbsCube, Region::Inside(t)));
            let m = o(&spec, Weight::Identity, Region::Inside(t));
            cmp(&spec, format!("trunc_mean({t})"), spec.trunc_mean(t), m);
            let s2 = o(&spec, Weight::Square, Region::Inside(t));
            cmp(&spec, format!("trunc_var({t})"), spec.trunc_var(t), (s2 - m * m).max(0.0));
            let g = GFunction::MinAbsCap(t);
            cmp(&spec, format!("g_moment(min {t})"), spec.g_moment(&g).unwrap(), o(&spec, Weight::SquareTimesG(g), Region::All));
        }
        for d in [0.2, 0.5, 1.0] {
            let g = GFunction::PowerDelta(d);
            match spec.g_moment(&g) {
                Ok(v) => cmp(&spec, format!("g_moment(power {d})"), v, o(&spec, Weight::SquareTimesG(g), Region::All)),
                Err(_) => {
                    if !matches!(spec, DistSpec::SymmetricPareto { alpha, .. } if alpha <= 2.0 + d) {
                        bad.push(format!("{spec:?}: g_moment(power {d}) rejected"));
                    }
                }
            }
        }
        for c in [-1.3, 0.0, 0.4, 2.0] {
            if let Moment::Finite(v) = spec.mixed_abs_third(c) {
                cmp(&spec, format!("mixed_abs_third({c})"), v, o(&spec, Weight::MixedAbsCube(c), Region::All));
            }
        }
    }
    bad.extend(mismatches);
    (count, bad)
}

use comb_clt::bounds::{
    bound_lindeberg_form, bound_theorem_1, bound_theorem_2, bound_theorem_3, bound_theorem_a, Cap, Constants, GSpec,
};

/// Every bound the engine offers for `inst`, labelled; errors are passed through.
pub fn all_bounds(inst: &Instance, k: Constants) -> Vec<(String, comb_clt::Result<f64>)> {
    let mut out = vec![
        ("A".to_string(), bound_theorem_a(inst, k).map(|r| r.total)),
        ("1".to_string(), Ok(bound_theorem_1(inst, k).total)),
    ];
    for g in [GSpec::MinAbsCap(Cap::SqrtBn), GSpec::PowerDelta(0.5), GSpec::PowerDelta(1.0)] {
        out.push((format!("2 g={g}"), bound_theorem_2(inst, g, k).map(|r| r.total)));
    }
    for d in [0.25, 0.5, 1.0] {
        out.push((format!("3 delta={d}"), bound_theorem_3(inst, d, k).map(|r| r.total)));
    }
    for e in [0.1, 0.5] {
        out.push((format!("lindeberg eps={e}"), bound_lindeberg_form(inst, e, k).map(|r| r.total)));
    }
    out
}

/// Exact Δ_n against every bound on `count` random enumerable instances.
/// Returns the number of comparisons and any violations.
pub fn bound_validity(seed: u64, count: usize) -> (usize, Vec<String>) {
    use rayon::prelude::*;
    let k = Constants::default();
    let results: Vec<(usize, Vec<String>)> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(seed.wrapping_mul(1_000_003).wrapping_add(i));
            let inst = random_enumerable(&mut r);
            let delta = comb_clt::exact::exact_delta_n(&inst).expect("enumerable");
            let mut checked = 0;
            let mut bad = Vec::new();
            for (name, b) in all_bounds(&inst, k) {
                match b {
                    Ok(total) => {
                        checked += 1;
                        if !(delta <= total) {
                            bad.push(format!("instance {i}: delta {delta} > bound {name} = {total}"));
                        }
                    }
                    Err(e) => bad.push(format!("instance {i}: bound {name} failed: {e}")),
                }
            }
            (checked, bad)
        })
        .collect();
    let checked = results.iter().map(|r| r.0).sum();
    (checked, results.into_iter().flat_map(|r| r.1).collect())
}

use comb_clt::proof_lab::{check_inequalities, CheckKind, Status, VerifyOptions};

#[derive(Debug, Default)]
pub struct LabTally {
    pub instances: usize,
    pub holds: usize,
    pub skipped: usize,
    pub degenerate_branch: usize,
    pub certified_truncation: usize,
    pub failures: Vec<String>,
}

/// Run every check on `count` instances of each generator: one mixing all
/// families and one restricted to enumerable laws.
pub fn proof_lab_sweep(seed: u64, count: usize) -> LabTally {
    use rayon::prelude::*;
    let opts = VerifyOptions::default();
    let reports: Vec<(usize, bool, comb_clt::proof_lab::DecompositionReport)> = (0..2 * count)
        .into_par_iter()
        .map(|k| {
            let mut r = rng(seed.wrapping_mul(7_919).wrapping_add(k as u64));
            let inst = if k < count { random_any(&mut r) } else { random_enumerable(&mut r) };
            let enumerable = inst.y().all_discrete(inst.n());
            (k, enumerable, check_inequalities(&inst, &opts).expect("valid instance"))
        })
        .collect();
    let mut t = LabTally::default();
    for (k, enumerable, rep) in reports {
        t.instances += 1;
        if rep.branch.as_deref() == Some("degenerate") {
            t.degenerate_branch += 1;
        }
        for c in &rep.checks {
            match c.status {
                Status::Holds => t.holds += 1,
                Status::Skipped => t.skipped += 1,
                Status::Fails => t.failures.push(format!("instance {k}: {} lhs {:e} rhs {:e}", c.name, c.lhs, c.rhs)),
            }
        }
        if enumerable {
            match rep.check("truncation_distance") {
                Some(c) if c.status == Status::Holds && c.kind == CheckKind::Certified => t.certified_truncation += 1,
                other => t.failures.push(format!("instance {k}: truncation distance not certified: {other:?}")),
            }
        }
    }
    t
}

pub struct Output {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl Output {
    pub fn text(&self) -> String {
        String::from_utf8(self.stdout.clone()).unwrap()
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.text()))
    }
}

/// Run the command-line binary built for this test target.
pub fn cli(args: &[&str]) -> Output {
    cli_env(args, &[])
}

pub fn cli_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_comb-clt"));
    cmd.args(args).env_remove("COMB_CLT_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Write `text` into `dir/name` and return the path as a string.
pub fn write_file(dir: &std::path::Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

pub const PM_DEGENERATE: &str = r#"{"label": "pm", "matrix": [[1, -1], [-1, 1]], "y": {"broadcast": {"family": "degenerate0"}}}"#;

/// `[[1, -1, ...], ...]`-style double-centered `n x n` matrix as JSON.
pub fn centered_json(n: usize, seed: u64) -> String {
    serde_json::to_string(&random_matrix(&mut rng(seed), n).to_rows()).unwrap()
}
