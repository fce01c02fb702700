//! Exact law of `S_n` by enumerating every permutation and every outcome of
//! the selected discrete cells.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::Instance;
use crate::dist::{normal_cdf, Atom};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Upper limit on `n! * (max atoms per cell)^n`.
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// Atoms closer than this are treated as one value.
pub const MERGE_TOL: f64 = 1e-12;

/// Sorted atoms of a finitely supported law with strictly increasing values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub atoms: Vec<Atom>,
}

impl ExactDistribution {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).collect::<CompensatedSum>().value()
    }

    pub fn mean(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.prob * a.value)
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .map(|a| a.prob * (a.value - m) * (a.value - m))
            .collect::<CompensatedSum>()
            .value()
    }

    /// `P(S < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.value < x)
            .map(|a| a.prob)
            .collect::<CompensatedSum>()
            .value()
    }
}

/// Per-cell atoms of an `n x n` instance, without any mean-zero requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLaws {
    n: usize,
    cells: Vec<Vec<Atom>>,
}

impl CellLaws {
    /// `cells[i][j]` lists the atoms of cell `(i, j)`.
    pub fn new(cells: Vec<Vec<Vec<Atom>>>) -> Result<Self> {
        let n = cells.len();
        let mut flat = Vec::with_capacity(n * n);
        for row in cells {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    matrix: n,
                    dists: row.len(),
                });
            }
            for atoms in row {
                if atoms.is_empty() {
                    return Err(Error::InvalidDist("cell with no atoms".into()));
                }
                flat.push(atoms);
            }
        }
        Ok(CellLaws { n, cells: flat })
    }

    /// Atoms of every cell of a validated instance.
    pub fn from_instance(inst: &Instance) -> Result<Self> {
        let n = inst.n();
        let mut cells = Vec::with_capacity(n * n);
        for (i, j, spec) in inst.y().cells(n) {
            let atoms = spec.discrete_atoms().ok_or(Error::NonDiscrete { row: i, col: j })?;
            cells.push(atoms);
        }
        Ok(CellLaws { n, cells })
    }

    /// Cell laws of `Y 1{|Y| < t}`: atoms at or beyond the cut move to 0.
    pub fn truncated(&self, t: f64) -> CellLaws {
        let cells = self
            .cells
            .iter()
            .map(|atoms| {
                let moved = atoms
                    .iter()
                    .map(|a| Atom::new(if a.value.abs() < t { a.value } else { 0.0 }, a.prob))
                    .collect();
                merge_atoms(moved)
            })
            .collect();
        CellLaws { n: self.n, cells }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &[Atom] {
        &self.cells[i * self.n + j]
    }

    fn max_atoms(&self) -> usize {
        self.cells.iter().map(Vec::len).max().unwrap_or(1)
    }
}

/// Sort by value and merge atoms within [`MERGE_TOL`] of the first atom of
/// their group, dropping zero-probability atoms.
pub fn merge_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.retain(|a| a.prob > 0.0);
    atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    let mut acc = CompensatedSum::new();
    let mut spread = 0.0f64;
    for a in atoms {
        match out.last_mut() {
            Some(last) if a.value - last.value <= MERGE_TOL => {
                acc.add(a.prob);
                last.prob = acc.value();
                spread = spread.max(a.value - last.value);
            }
            _ => {
                if spread > 0.0 {
                    log::debug!("merged atoms spread over {spread:e}");
                    spread = 0.0;
                }
                acc = CompensatedSum::new();
                acc.add(a.prob);
                out.push(a);
            }
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Visit every permutation of `items` (including the initial order) with
/// the iterative form of Heap's algorithm.
pub fn for_each_permutation<F: FnMut(&[usize])>(items: &mut [usize], mut visit: F) {
    let m = items.len();
    let mut counters = vec![0usize; m];
    visit(items);
    let mut i = 1;
    while i < m {
        if counters[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(counters[i], i);
            }
            visit(items);
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
}

/// Exact law of `sum_i c[i][pi(i)] + sum_i Y[i][pi(i)]`, with `c` in row-major
/// order. Accepts laws that are not centered and matrices that are not
/// double-centered.
pub fn exact_distribution_raw(c: &[f64], laws: &CellLaws) -> Result<ExactDistribution> {
    let n = laws.n();
    assert_eq!(c.len(), n * n, "coefficient matrix must be n x n");
    let cost = factorial(n) * (laws.max_atoms() as f64).powi(n as i32);
    if cost > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            cost,
            budget: ENUMERATION_BUDGET,
        });
    }
    let weight = 1.0 / factorial(n);

    // one chunk per value of pi(0)
    let chunks: Vec<Vec<Atom>> = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut rest: Vec<usize> = (0..n).filter(|&j| j != first).collect();
            let mut out = Vec::new();
            let mut perm = vec![0usize; n];
            let mut cur: Vec<Atom> = Vec::new();
            let mut next: Vec<Atom> = Vec::new();
            for_each_permutation(&mut rest, |tail| {
                perm[0] = first;
                perm[1..].copy_from_slice(tail);
                let base: CompensatedSum = perm.iter().enumerate().map(|(i, &j)| c[i * n + j]).collect();
                cur.clear();
                cur.push(Atom::new(base.value(), weight));
                for (i, &j) in perm.iter().enumerate() {
                    let cell = laws.get(i, j);
                    if cell.len() == 1 && cell[0].value == 0.0 {
                        continue;
                    }
                    next.clear();
                    for a in &cur {
                        for b in cell {
                            next.push(Atom::new(a.value + b.value, a.prob * b.prob));
                        }
                    }
                    std::mem::swap(&mut cur, &mut next);
                }
                out.extend_from_slice(&cur);
            });
            merge_atoms(out)
        })
        .collect();

    let atoms = merge_atoms(chunks.into_iter().flatten().collect());
    Ok(ExactDistribution { atoms })
}

/// Exact law of `S_n` for an instance whose cells are all discrete.
pub fn exact_distribution(inst: &Instance) -> Result<ExactDistribution> {
    let laws = CellLaws::from_instance(inst)?;
    exact_distribution_raw(inst.c().entries(), &laws)
}

/// `sup_x |P(S < x) - Φ((x - mean) / √var)|`, evaluated at both one-sided
/// limits of every atom.
pub fn sup_deviation_affine(dist: &ExactDistribution, mean: f64, var: f64) -> f64 {
    let sd = var.sqrt();
    let mut below = CompensatedSum::new();
    let mut worst = 0.0f64;
    for a in &dist.atoms {
        let phi = normal_cdf((a.value - mean) / sd);
        let left = below.value();
        below.add(a.prob);
        let right = below.value();
        worst = worst.max((left - phi).abs()).max((right - phi).abs());
    }
    worst
}

/// `sup_x |P(S < x √b_n) - Φ(x)|`.
pub fn sup_deviation(dist: &ExactDistribution, b_n: f64) -> f64 {
    sup_deviation_affine(dist, 0.0, b_n)
}

/// Kolmogorov distance between two finitely supported laws.
pub fn sup_distance(a: &ExactDistribution, b: &ExactDistribution) -> f64 {
    let mut points: Vec<(f64, f64)> = a
        .atoms
        .iter()
        .map(|t| (t.value, t.prob))
        .chain(b.atoms.iter().map(|t| (t.value, -t.prob)))
        .collect();
    points.sort_by(|x, y| x.0.total_cmp(&y.0));
    // F_a - F_b is constant between grouped support points
    let mut diff = CompensatedSum::new();
    let mut worst = 0.0f64;
    let mut k = 0;
    while k < points.len() {
        let head = points[k].0;
        while k < points.len() && points[k].0 - head <= MERGE_TOL {
            diff.add(points[k].1);
            k += 1;
        }
        worst = worst.max(diff.value().abs());
    }
    worst
}

pub fn exact_delta_n(inst: &Instance) -> Result<f64> {
    Ok(sup_deviation(&exact_distribution(inst)?, inst.b_n()))
}
