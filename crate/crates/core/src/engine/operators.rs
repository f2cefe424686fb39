//! Variation and selection operators shared by both phases.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Genome;
use crate::error::{Error, Result};

/// Fixed-length 0/1 inclusion string over a candidate universe.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectionGenome(pub Vec<bool>);

impl SelectionGenome {
    pub fn from_indices(len: usize, selected: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = vec![false; len];
        for i in selected {
            bits[i] = true;
        }
        SelectionGenome(bits)
    }

    pub fn popcount(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

impl Genome for SelectionGenome {
    fn len(&self) -> usize {
        self.0.len()
    }
}

/// Real-valued weight genes over a fixed asset list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGenome(pub Vec<f64>);

impl WeightGenome {
    pub fn genes(&self) -> &[f64] {
        &self.0
    }
}

impl Genome for WeightGenome {
    fn len(&self) -> usize {
        self.0.len()
    }
}

/// Box bounds applied to every gene of a [`WeightGenome`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidArgument(format!(
                "invalid gene bounds [{lower}, {upper}]"
            )));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn unit() -> Self {
        Bounds {
            lower: 0.0,
            upper: 1.0,
        }
    }

    #[inline]
    pub fn clip(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Resolves one tournament between two drawn indices. `cmp(a, b)` returns
/// `Less` when `a` is fitter; ties go to the first-drawn index.
pub fn tournament_pick(first: usize, second: usize, cmp: impl Fn(usize, usize) -> Ordering) -> usize {
    match cmp(second, first) {
        Ordering::Less => second,
        _ => first,
    }
}

/// Binary tournament: two uniform draws with replacement, fitter one wins.
/// Returns the winner's index.
pub fn binary_tournament<R: Rng + ?Sized>(
    population_len: usize,
    rng: &mut R,
    cmp: impl Fn(usize, usize) -> Ordering,
) -> usize {
    assert!(population_len > 0, "tournament over an empty population");
    if population_len == 1 {
        return 0;
    }
    let first = rng.random_range(0..population_len);
    let second = rng.random_range(0..population_len);
    tournament_pick(first, second, cmp)
}

/// Single-point crossover at cut point `k` (children swap suffixes from `k`).
pub fn single_point_crossover_at(
    a: &SelectionGenome,
    b: &SelectionGenome,
    k: usize,
) -> Result<(SelectionGenome, SelectionGenome)> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "crossover parents differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if k > a.len() {
        return Err(Error::InvalidArgument(format!(
            "cut point {k} beyond genome length {}",
            a.len()
        )));
    }
    let mut c1 = a.0[..k].to_vec();
    c1.extend_from_slice(&b.0[k..]);
    let mut c2 = b.0[..k].to_vec();
    c2.extend_from_slice(&a.0[k..]);
    Ok((SelectionGenome(c1), SelectionGenome(c2)))
}

/// Single-point crossover with the cut drawn uniformly from `1..len`.
pub fn single_point_crossover<R: Rng + ?Sized>(
    a: &SelectionGenome,
    b: &SelectionGenome,
    rng: &mut R,
) -> Result<(SelectionGenome, SelectionGenome)> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "crossover parents differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Ok((a.clone(), b.clone()));
    }
    let k = rng.random_range(1..a.len());
    single_point_crossover_at(a, b, k)
}

/// Flips each bit independently with probability `rate`.
pub fn bit_flip_mutation<R: Rng + ?Sized>(g: &SelectionGenome, rate: f64, rng: &mut R) -> SelectionGenome {
    let mut out = g.clone();
    bit_flip_in_place(&mut out, rate, rng);
    out
}

pub(crate) fn bit_flip_in_place<R: Rng + ?Sized>(g: &mut SelectionGenome, rate: f64, rng: &mut R) {
    if rate <= 0.0 {
        return;
    }
    for bit in g.0.iter_mut() {
        if rate >= 1.0 || rng.random::<f64>() < rate {
            *bit = !*bit;
        }
    }
}

/// Spread factor of simulated binary crossover for a uniform draw `u`.
fn sbx_beta(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(exponent)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(exponent)
    }
}

/// Simulated binary crossover applied to every gene, children clipped to
/// `bounds`. Before clipping each child pair is symmetric about the
/// parents' midpoint.
pub fn sbx_crossover<R: Rng + ?Sized>(
    a: &WeightGenome,
    b: &WeightGenome,
    eta: f64,
    bounds: Bounds,
    rng: &mut R,
) -> Result<(WeightGenome, WeightGenome)> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "crossover parents differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let mut c1 = a.0.clone();
    let mut c2 = b.0.clone();
    for i in 0..a.len() {
        let (x1, x2) = (a.0[i], b.0[i]);
        if (x1 - x2).abs() < 1e-14 {
            continue;
        }
        let (y1, y2) = sbx_pair(x1, x2, eta, rng.random::<f64>());
        c1[i] = bounds.clip(y1);
        c2[i] = bounds.clip(y2);
    }
    Ok((WeightGenome(c1), WeightGenome(c2)))
}

/// Unclipped SBX children for one gene pair, in parent order.
pub(crate) fn sbx_pair(x1: f64, x2: f64, eta: f64, u: f64) -> (f64, f64) {
    let (lo, hi) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
    let beta = sbx_beta(u, eta);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * beta * (hi - lo);
    if x1 < x2 {
        (mid - half, mid + half)
    } else {
        (mid + half, mid - half)
    }
}

/// Polynomial perturbation for a uniform draw `u`, in units of the bounds width.
fn polynomial_delta(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u < 0.5 {
        (2.0 * u).powf(exponent) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(exponent)
    }
}

/// Perturbs each gene with probability `rate` by the polynomial-mutation
/// distribution scaled to the bounds width, then clips.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    g: &WeightGenome,
    rate: f64,
    eta: f64,
    bounds: Bounds,
    rng: &mut R,
) -> WeightGenome {
    let mut out = g.clone();
    polynomial_mutation_in_place(&mut out, rate, eta, bounds, rng);
    out
}

pub(crate) fn polynomial_mutation_in_place<R: Rng + ?Sized>(
    g: &mut WeightGenome,
    rate: f64,
    eta: f64,
    bounds: Bounds,
    rng: &mut R,
) {
    if rate <= 0.0 {
        return;
    }
    let width = bounds.width();
    for x in g.0.iter_mut() {
        if rate >= 1.0 || rng.random::<f64>() < rate {
            let delta = polynomial_delta(rng.random::<f64>(), eta);
            *x = bounds.clip(*x + delta * width);
        }
    }
}
