//! Monte Carlo estimation of `Δ_n` with Dvoretzky–Kiefer–Wolfowitz bands.
//!
//! Draws are generated in fixed blocks of [`BLOCK_SIZE`]; block `k` uses
//! ChaCha12 seeded with the master seed on stream `k`. The partition depends
//! only on `m`, so the sorted sample is the same for any number of threads.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bounds::Instance;
use crate::dist::normal_cdf;
use crate::error::{Error, Result};

pub const BLOCK_SIZE: usize = 16384;
pub const GENERATOR: &str = "ChaCha12Rng (rand_chacha 0.9)";
pub const STREAM_RULE: &str = "block k of BLOCK_SIZE draws: seed_from_u64(seed) then set_stream(k)";

/// One draw of `S_n`: a uniform permutation by Fisher–Yates, then one
/// independent draw from each selected cell.
pub fn sample_sn<R: Rng + ?Sized>(inst: &Instance, perm: &mut [usize], rng: &mut R) -> f64 {
    let n = inst.n();
    debug_assert_eq!(perm.len(), n);
    for (k, p) in perm.iter_mut().enumerate() {
        *p = k;
    }
    perm.shuffle(rng);
    let mut fixed = 0.0;
    let mut noise = 0.0;
    for (i, &j) in perm.iter().enumerate() {
        fixed += inst.c().get(i, j);
        noise += inst.spec(i, j).sample(rng);
    }
    fixed + noise
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleMeta {
    pub generator: String,
    pub stream_rule: String,
    pub block_size: usize,
    pub seed: u64,
    pub m: usize,
    /// SHA-256 of the JSON encoding of the coefficients and cell laws.
    pub instance_digest: String,
}

/// Sorted standardized draws `S_n / √B_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSample {
    pub draws: Vec<f64>,
    pub meta: SampleMeta,
}

impl EmpiricalSample {
    /// Write the draws as consecutive little-endian `f64`s.
    pub fn write_le<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for x in &self.draws {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_le(std::io::BufWriter::new(f))?;
        Ok(())
    }

    /// SHA-256 of the little-endian draws.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for x in &self.draws {
            h.update(x.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

pub fn instance_digest(inst: &Instance) -> String {
    let body = serde_json::to_vec(&(inst.n(), inst.c().entries(), inst.y())).expect("instance serializes");
    hex::encode(Sha256::digest(body))
}

pub fn simulate(inst: &Instance, m: usize, seed: u64) -> Result<EmpiricalSample> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    let scale = 1.0 / inst.b_n().sqrt();
    let blocks = m.div_ceil(BLOCK_SIZE);
    let parts: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|k| {
            let len = BLOCK_SIZE.min(m - k * BLOCK_SIZE);
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut perm = vec![0usize; inst.n()];
            (0..len).map(|_| sample_sn(inst, &mut perm, &mut rng) * scale).collect()
        })
        .collect();
    let mut draws: Vec<f64> = parts.concat();
    draws.par_sort_unstable_by(f64::total_cmp);
    Ok(EmpiricalSample {
        draws,
        meta: SampleMeta {
            generator: GENERATOR.into(),
            stream_rule: STREAM_RULE.into(),
            block_size: BLOCK_SIZE,
            seed,
            m,
            instance_digest: instance_digest(inst),
        },
    })
}

/// Exact sup distance between the empirical CDF of sorted `draws` and Φ.
pub fn ks_vs_normal(draws: &[f64]) -> f64 {
    let m = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            let phi = normal_cdf(z);
            let hi = (k + 1) as f64 / m;
            let lo = k as f64 / m;
            (hi - phi).abs().max((lo - phi).abs())
        })
        .fold(0.0, f64::max)
}

/// Half-width `√(ln(2/(1-confidence)) / (2m))` of the DKW band.
pub fn dkw_epsilon(m: usize, confidence: f64) -> f64 {
    ((2.0 / (1.0 - confidence)).ln() / (2.0 * m as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaEstimate {
    pub delta_hat: f64,
    pub epsilon: f64,
    pub confidence: f64,
    pub meta: SampleMeta,
}

pub fn estimate_from_sample(sample: &EmpiricalSample, confidence: f64) -> Result<DeltaEstimate> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    Ok(DeltaEstimate {
        delta_hat: ks_vs_normal(&sample.draws),
        epsilon: dkw_epsilon(sample.meta.m, confidence),
        confidence,
        meta: sample.meta.clone(),
    })
}

pub fn estimate_delta(inst: &Instance, m: usize, seed: u64, confidence: f64) -> Result<DeltaEstimate> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    estimate_from_sample(&simulate(inst, m, seed)?, confidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{DistMatrix, DistSpec};
    use crate::matrix::CoefficientMatrix;

    fn pm() -> Instance {
        let c = CoefficientMatrix::new(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        Instance::new(c, DistMatrix::Broadcast(DistSpec::Degenerate0)).unwrap()
    }

    #[test]
    fn ks_small_cases() {
        assert_eq!(ks_vs_normal(&[0.0]), 0.5);
        let d = ks_vs_normal(&[-1.0, 1.0]);
        assert!((d - (normal_cdf(1.0) - 0.5)).abs() < 1e-15);
        let d = ks_vs_normal(&[8.0; 5]);
        assert!((d - normal_cdf(8.0)).abs() < 1e-15);
    }

    #[test]
    fn dkw_values() {
        let e = dkw_epsilon(50_000, 0.99);
        assert!((e - (200f64.ln() / 1e5).sqrt()).abs() < 1e-15);
        assert!((e - 0.007279).abs() < 1e-6);
        assert!((dkw_epsilon(200_000, 0.99) * 2.0 - e).abs() < 1e-15);
        let mut prev = 0.0;
        for c in [0.5, 0.9, 0.99, 0.999, 0.999999] {
            let v = dkw_epsilon(1000, c);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn two_point_frequencies() {
        let s = simulate(&pm(), 100_000, 3).unwrap();
        assert!(s.draws.iter().all(|&x| x == -1.0 || x == 1.0));
        let neg = s.draws.iter().filter(|&&x| x < 0.0).count() as f64 / 1e5;
        assert!((neg - 0.5).abs() <= 3.3 / (2.0 * 1e5f64.sqrt()));
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let inst = pm();
        let a = simulate(&inst, 40_000, 9).unwrap();
        let b = simulate(&inst, 40_000, 9).unwrap();
        assert_eq!(a, b);
        let inst = Instance::new(
            CoefficientMatrix::zeros(4).unwrap(),
            DistMatrix::Broadcast(DistSpec::Normal { sigma: 1.0 }),
        )
        .unwrap();
        let a = simulate(&inst, 1000, 1).unwrap();
        let b = simulate(&inst, 1000, 2).unwrap();
        assert_ne!(a.digest(), b.digest());
        assert_eq!(simulate(&inst, 1, 0).unwrap().draws.len(), 1);
    }

    #[test]
    fn le_dump_round_trips() {
        let s = simulate(&pm(), 10, 0).unwrap();
        let mut buf = Vec::new();
        s.write_le(&mut buf).unwrap();
        let back: Vec<f64> = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        assert_eq!(back, s.draws);
    }
}
