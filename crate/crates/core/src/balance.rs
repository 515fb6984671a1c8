//! Quantitative equidistribution: empirical cube measures, the truncated
//! test-function metric on probability measures, its factor-consistent
//! extension over nilspace factors, Haar cube samplers for the supported
//! targets, and the balance sweep for morphisms out of Z_p.

use crate::filtered::{Carrier, Element, Filtration, Level, PolySeq};
use crate::nilmanifold::reduce;
use crate::rat::to_f64;
use num::rational::BigRational;
use num::BigInt;
use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BalanceError {
    #[error("measures live on different cube spaces or dimensions")]
    SpaceMismatch,
    #[error("unsupported balance target `{0}`")]
    UnsupportedTarget(String),
    #[error("invalid morphism spec `{0}`")]
    InvalidSpec(String),
    #[error("balance grid must be positive, descending, with 1/b ≤ {max}")]
    BadGrid { max: usize },
    #[error("exact pushforward needs {required} cubes, budget {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
}

/// Supported target spaces for cube measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CubeSpace {
    /// The torus T^m with the degree-k cube structure; its lower factor is a
    /// point.
    TorusDk { m: usize, k: usize },
    /// The Heisenberg nilmanifold with the lower-central-series structure; its
    /// factor is T² (drop the z coordinate).
    Heisenberg,
}

impl CubeSpace {
    pub fn parse(spec: &str) -> Result<Self, BalanceError> {
        if spec == "heis" {
            return Ok(CubeSpace::Heisenberg);
        }
        // d{k}t{m}, e.g. `d1t` or `d2t3`.
        if let Some(rest) = spec.strip_prefix('d') {
            if let Some((k, m)) = rest.split_once('t') {
                let k: usize = k.parse().map_err(|_| BalanceError::UnsupportedTarget(spec.into()))?;
                let m: usize = if m.is_empty() {
                    1
                } else {
                    m.parse().map_err(|_| BalanceError::UnsupportedTarget(spec.into()))?
                };
                if k >= 1 && m >= 1 {
                    return Ok(CubeSpace::TorusDk { m, k });
                }
            }
        }
        Err(BalanceError::UnsupportedTarget(spec.into()))
    }

    pub fn point_dim(&self) -> usize {
        match self {
            CubeSpace::TorusDk { m, .. } => *m,
            CubeSpace::Heisenberg => 3,
        }
    }

    /// The factor space under π_{k−1}, or None when the factor is a point.
    pub fn factor(&self) -> Option<CubeSpace> {
        match self {
            CubeSpace::TorusDk { .. } => None,
            CubeSpace::Heisenberg => Some(CubeSpace::TorusDk { m: 2, k: 1 }),
        }
    }

    fn project_point(&self, coords: &[f64]) -> Vec<f64> {
        match self {
            CubeSpace::TorusDk { .. } => coords.to_vec(),
            CubeSpace::Heisenberg => coords[..2].to_vec(),
        }
    }
}

/// A seeded multiset of sampled cubes on a target space; each sample stores
/// the vertex coordinates flattened in vertex order.
#[derive(Debug, Clone)]
pub struct EmpiricalCubeMeasure {
    space: CubeSpace,
    n: usize,
    samples: Vec<Vec<f64>>,
}

impl EmpiricalCubeMeasure {
    pub fn new(space: CubeSpace, n: usize, samples: Vec<Vec<f64>>) -> Result<Self, BalanceError> {
        let width = (1usize << n) * space.point_dim();
        if samples.is_empty() || samples.iter().any(|s| s.len() != width) {
            return Err(BalanceError::SpaceMismatch);
        }
        Ok(Self { space, n, samples })
    }

    pub fn space(&self) -> CubeSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Pushes every vertex through the factor map π_{k−1}.
    pub fn project_to_factor(&self) -> Option<EmpiricalCubeMeasure> {
        let factor = self.space.factor()?;
        let pd = self.space.point_dim();
        let samples = self
            .samples
            .iter()
            .map(|s| {
                s.chunks(pd)
                    .flat_map(|p| self.space.project_point(p))
                    .collect()
            })
            .collect();
        Some(EmpiricalCubeMeasure {
            space: factor,
            n: self.n,
            samples,
        })
    }
}

/// The canonical test-function family on cube coordinates: real and imaginary
/// parts of vertex-character products e(μ·t), with frequency vectors μ ≠ 0
/// enumerated by (L1 norm, lexicographic order), first nonzero entry positive.
#[derive(Debug, Clone)]
pub struct TestFunctionFamily {
    dim: usize,
    /// (frequency vector, take imaginary part) per rank, 0-indexed.
    entries: Vec<(Vec<i64>, bool)>,
}

impl TestFunctionFamily {
    pub fn canonical(dim: usize, count: usize) -> Self {
        let mut entries = Vec::with_capacity(count);
        let mut l1 = 1i64;
        'fill: loop {
            for vec in vectors_with_l1(dim, l1) {
                for im in [false, true] {
                    entries.push((vec.clone(), im));
                    if entries.len() == count {
                        break 'fill;
                    }
                }
            }
            l1 += 1;
            // Dimension 0 admits no nonzero frequencies.
            if dim == 0 {
                break;
            }
        }
        Self { dim, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frequency(&self, r: usize) -> (&[i64], bool) {
        let (v, im) = &self.entries[r];
        (v, *im)
    }

    /// h_r evaluated at flattened cube coordinates; sup ≤ 1 by construction.
    pub fn eval(&self, r: usize, coords: &[f64]) -> f64 {
        let (freq, im) = &self.entries[r];
        debug_assert_eq!(coords.len(), self.dim);
        let s: f64 = freq
            .iter()
            .zip(coords)
            .map(|(&m, &t)| m as f64 * t)
            .sum();
        let angle = 2.0 * std::f64::consts::PI * s;
        if *im {
            angle.sin()
        } else {
            angle.cos()
        }
    }
}

/// Lexicographically ordered integer vectors with the given L1 norm and a
/// positive leading nonzero entry.
fn vectors_with_l1(dim: usize, l1: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; dim];
    fn rec(pos: usize, remaining: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if pos == cur.len() {
            if remaining == 0 {
                if let Some(first) = cur.iter().find(|&&x| x != 0) {
                    if *first > 0 {
                        out.push(cur.clone());
                    }
                }
            }
            return;
        }
        // Ascending values keep the output lexicographic.
        for v in -remaining..=remaining {
            cur[pos] = v;
            rec(pos + 1, remaining - v.abs(), cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, l1, &mut cur, &mut out);
    out
}

fn pairwise_sum_f64(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum_f64(&values[..mid]) + pairwise_sum_f64(&values[mid..])
        }
    }
}

fn family_mean(measure: &EmpiricalCubeMeasure, family: &TestFunctionFamily, r: usize) -> f64 {
    let terms: Vec<f64> = measure
        .samples
        .iter()
        .map(|s| family.eval(r, s))
        .collect();
    pairwise_sum_f64(&terms) / terms.len() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct DPrime {
    pub value: f64,
    /// Bound on the discarded tail Σ_{r>R} 2^{-r}|∫h_r dμ − ∫h_r dν| ≤ 2^{1−R}.
    pub truncation_bound: f64,
    pub truncation_index: usize,
}

/// Truncated metric d'(μ,ν) = Σ_{r≤R} 2^{-r} |∫h_r dμ − ∫h_r dν|.
pub fn metric_d_prime(
    mu: &EmpiricalCubeMeasure,
    nu: &EmpiricalCubeMeasure,
    truncation: usize,
) -> Result<DPrime, BalanceError> {
    if mu.space != nu.space || mu.n != nu.n {
        return Err(BalanceError::SpaceMismatch);
    }
    let dim = (1usize << mu.n) * mu.space.point_dim();
    let family = TestFunctionFamily::canonical(dim, truncation);
    let mut value = 0.0;
    for r in 0..family.len() {
        let gap = (family_mean(mu, &family, r) - family_mean(nu, &family, r)).abs();
        value += 0.5f64.powi(r as i32 + 1) * gap;
    }
    Ok(DPrime {
        value,
        truncation_bound: 0.5f64.powi(truncation as i32 - 1),
        truncation_index: truncation,
    })
}

/// Factor-consistent metric: d' at this level plus the metric of the
/// pushforwards to the factor, bottoming out at the point space.
pub fn factor_consistent_metric(
    mu: &EmpiricalCubeMeasure,
    nu: &EmpiricalCubeMeasure,
    truncation: usize,
) -> Result<f64, BalanceError> {
    let here = metric_d_prime(mu, nu, truncation)?.value;
    match (mu.project_to_factor(), nu.project_to_factor()) {
        (Some(pm), Some(pn)) => Ok(here + factor_consistent_metric(&pm, &pn, truncation)?),
        (None, None) => Ok(here),
        _ => Err(BalanceError::SpaceMismatch),
    }
}

/// Exact dyadic rational in [0,1) from a u32 draw.
fn dyadic<R: Rng>(rng: &mut R) -> BigRational {
    BigRational::new(BigInt::from(rng.random::<u32>()), BigInt::from(1u64 << 32))
}

/// Samples one Haar cube on the Heisenberg nilmanifold by drawing the free
/// face parameters of the face presentation; returns the anchor-indexed
/// parameters and the resulting exact cube (before vertex reduction).
pub(crate) fn haar_heisenberg_cube<R: Rng>(
    n: usize,
    rng: &mut R,
) -> (Vec<Element>, crate::cube::Cube<Element>) {
    let filt = Filtration::heisenberg_lcs();
    let carrier = Carrier::Heisenberg;
    let mut params = Vec::with_capacity(1 << n);
    let mut values = vec![carrier.identity(); 1 << n];
    let mut order: Vec<usize> = (0..1usize << n).collect();
    order.sort_by_key(|&v| (crate::cube::vertex_weight(v), v));
    for v in order {
        let g = match filt.level(crate::cube::vertex_weight(v) as usize) {
            Level::Full => Element::heis(dyadic(rng), dyadic(rng), dyadic(rng)),
            Level::Center => Element::heis(BigRational::zero(), BigRational::zero(), dyadic(rng)),
            Level::Trivial => carrier.identity(),
        };
        for (w, val) in values.iter_mut().enumerate() {
            if w & v == v {
                *val = carrier.mul(val, &g);
            }
        }
        params.push(g);
    }
    (
        params,
        crate::cube::Cube::new(n, values).expect("length fixed"),
    )
}

/// Uniform samples of the Haar measure on C^n of the target, realized by
/// drawing the free parameters of the face presentation.
pub fn haar_cube_sampler(
    space: CubeSpace,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<EmpiricalCubeMeasure, BalanceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    match space {
        CubeSpace::TorusDk { m, k } => {
            for _ in 0..count {
                let mut vals = vec![0.0f64; (1 << n) * m];
                for v in 0..1usize << n {
                    if crate::cube::vertex_weight(v) as usize > k {
                        continue;
                    }
                    let g: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                    for w in 0..1usize << n {
                        if w & v == v {
                            for j in 0..m {
                                vals[w * m + j] = (vals[w * m + j] + g[j]).rem_euclid(1.0);
                            }
                        }
                    }
                }
                samples.push(vals);
            }
        }
        CubeSpace::Heisenberg => {
            for _ in 0..count {
                let (_, cube) = haar_heisenberg_cube(n, &mut rng);
                let mut vals = Vec::with_capacity((1 << n) * 3);
                for v in cube.values() {
                    let pt = reduce(Carrier::Heisenberg, v);
                    vals.extend(pt.coords_f64());
                }
                samples.push(vals);
            }
        }
    }
    EmpiricalCubeMeasure::new(space, n, samples)
}

/// Exact Haar mean of a family function on a torus target (the character
/// integral is 1 when every free parameter's frequency sum vanishes, else 0).
/// Test oracle for the sampler; Heisenberg has no closed form here.
pub fn haar_mean_analytic(
    space: CubeSpace,
    n: usize,
    family: &TestFunctionFamily,
    r: usize,
) -> Option<f64> {
    let CubeSpace::TorusDk { m, k } = space else {
        return None;
    };
    let (freq, im) = family.frequency(r);
    let mut integral_is_one = true;
    for v in 0..1usize << n {
        if crate::cube::vertex_weight(v) as usize > k {
            continue;
        }
        for j in 0..m {
            let total: i64 = (0..1usize << n)
                .filter(|w| w & v == v)
                .map(|w| freq[w * m + j])
                .sum();
            if total != 0 {
                integral_is_one = false;
            }
        }
    }
    Some(match (integral_is_one, im) {
        (true, false) => 1.0,
        (true, true) => 0.0,
        (false, _) => 0.0,
    })
}

/// A morphism Z_p → target, given in closed form.
#[derive(Debug, Clone)]
pub enum ZpMorphism {
    /// x ↦ {a·x/p} into D_1(T).
    TorusLinear { a: i64, p: u64 },
    /// Constant point.
    TorusConstant { t: f64, p: u64 },
    /// x ↦ Σ_l c_l·binom(x,l) mod 1 into D_k(T).
    TorusPoly {
        coeffs: Vec<BigRational>,
        k: usize,
        p: u64,
    },
    /// x ↦ g(x)Γ on the Heisenberg nilmanifold.
    Heisenberg { poly: PolySeq, p: u64 },
}

impl ZpMorphism {
    pub fn parse(spec: &str) -> Result<Self, BalanceError> {
        let bad = || BalanceError::InvalidSpec(spec.to_string());
        let parse_kv = |rest: &str| -> Result<std::collections::BTreeMap<String, String>, BalanceError> {
            let mut out = std::collections::BTreeMap::new();
            for part in rest.split(',') {
                let (k, v) = part.split_once('=').ok_or_else(bad)?;
                out.insert(k.trim().to_string(), v.trim().to_string());
            }
            Ok(out)
        };
        if let Some(rest) = spec.strip_prefix("linear:") {
            let kv = parse_kv(rest)?;
            let a = kv.get("a").map_or(Ok(1), |s| s.parse().map_err(|_| bad()))?;
            let p = kv.get("p").ok_or_else(bad)?.parse().map_err(|_| bad())?;
            return Ok(ZpMorphism::TorusLinear { a, p });
        }
        if let Some(rest) = spec.strip_prefix("const:") {
            let kv = parse_kv(rest)?;
            let t = kv.get("t").map_or(Ok(0.0), |s| s.parse().map_err(|_| bad()))?;
            let p = kv.get("p").ok_or_else(bad)?.parse().map_err(|_| bad())?;
            return Ok(ZpMorphism::TorusConstant { t, p });
        }
        Err(bad())
    }

    pub fn p(&self) -> u64 {
        match self {
            ZpMorphism::TorusLinear { p, .. }
            | ZpMorphism::TorusConstant { p, .. }
            | ZpMorphism::TorusPoly { p, .. }
            | ZpMorphism::Heisenberg { p, .. } => *p,
        }
    }

    pub fn space(&self) -> CubeSpace {
        match self {
            ZpMorphism::TorusLinear { .. } | ZpMorphism::TorusConstant { .. } => {
                CubeSpace::TorusDk { m: 1, k: 1 }
            }
            ZpMorphism::TorusPoly { k, .. } => CubeSpace::TorusDk { m: 1, k: *k },
            ZpMorphism::Heisenberg { .. } => CubeSpace::Heisenberg,
        }
    }

    pub fn eval(&self, x: u64) -> Vec<f64> {
        match self {
            ZpMorphism::TorusLinear { a, p } => {
                vec![((*a as f64) * (x as f64) / (*p as f64)).rem_euclid(1.0)]
            }
            ZpMorphism::TorusConstant { t, .. } => vec![t.rem_euclid(1.0)],
            ZpMorphism::TorusPoly { coeffs, .. } => {
                let mut acc = BigRational::zero();
                for (l, c) in coeffs.iter().enumerate() {
                    acc += c * BigRational::from(crate::rat::binom(x as i64, l as u32));
                }
                vec![to_f64(&crate::rat::fract(&acc))]
            }
            ZpMorphism::Heisenberg { poly, .. } => {
                reduce(Carrier::Heisenberg, &poly.eval(x as i64)).coords_f64()
            }
        }
    }
}

/// Pushforward of the cube measure of Z_p under φ, sampled.
pub fn pushforward_sample(
    phi: &ZpMorphism,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<EmpiricalCubeMeasure, BalanceError> {
    let p = phi.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..count)
        .map(|_| {
            let x = rng.random_range(0..p);
            let hs: Vec<u64> = (0..n).map(|_| rng.random_range(0..p)).collect();
            cube_coords(phi, p, x, &hs, n)
        })
        .collect();
    EmpiricalCubeMeasure::new(phi.space(), n, samples)
}

/// Exact pushforward: every one of the p^{n+1} parallelepipeds once.
pub fn pushforward_exact(
    phi: &ZpMorphism,
    n: usize,
    budget: u64,
) -> Result<EmpiricalCubeMeasure, BalanceError> {
    let p = phi.p();
    let required = (p as u128).pow(n as u32 + 1);
    if required > budget as u128 {
        return Err(BalanceError::BudgetExceeded { required, budget });
    }
    let samples = (0..required as u64)
        .map(|mut idx| {
            let x = idx % p;
            idx /= p;
            let hs: Vec<u64> = (0..n)
                .map(|_| {
                    let h = idx % p;
                    idx /= p;
                    h
                })
                .collect();
            cube_coords(phi, p, x, &hs, n)
        })
        .collect();
    EmpiricalCubeMeasure::new(phi.space(), n, samples)
}

fn cube_coords(phi: &ZpMorphism, p: u64, x: u64, hs: &[u64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((1 << n) * phi.space().point_dim());
    for v in 0..1usize << n {
        let mut arg = x;
        for (i, &h) in hs.iter().enumerate() {
            if v >> i & 1 == 1 {
                arg = (arg + h) % p;
            }
        }
        out.extend(phi.eval(arg));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct BalanceRow {
    pub b: f64,
    pub n: usize,
    pub d: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BalanceReport {
    pub rows: Vec<BalanceRow>,
    pub smallest_passing_b: Option<f64>,
    pub samples: usize,
    pub truncation_index: usize,
}

/// Definition-style balance sweep: for each b (descending grid), checks
/// d_{n,k} ≤ b for all n ≤ 1/b with seeded pushforward samples against the
/// Haar cube sampler; returns the smallest passing b and the full table.
pub fn balance_of(
    phi: &ZpMorphism,
    b_grid: &[f64],
    samples: usize,
    seed: u64,
    truncation: usize,
) -> Result<BalanceReport, BalanceError> {
    const MAX_N: usize = 3;
    if b_grid.is_empty()
        || b_grid.iter().any(|&b| b <= 0.0)
        || b_grid.windows(2).any(|w| w[1] > w[0])
    {
        return Err(BalanceError::BadGrid { max: MAX_N });
    }
    let n_max_needed = (1.0 / b_grid[b_grid.len() - 1]).floor() as usize;
    if n_max_needed > MAX_N {
        return Err(BalanceError::BadGrid { max: MAX_N });
    }
    let space = phi.space();
    let mut d_by_n = vec![f64::NAN; n_max_needed + 1];
    for (n, d) in d_by_n.iter_mut().enumerate().skip(1).take(n_max_needed) {
        let push = pushforward_sample(phi, n, samples, seed.wrapping_add(n as u64))?;
        let haar = haar_cube_sampler(space, n, samples, seed.wrapping_add(1000 + n as u64))?;
        *d = factor_consistent_metric(&push, &haar, truncation)?;
    }
    let mut rows = Vec::new();
    let mut smallest = None;
    for &b in b_grid {
        let n_max = ((1.0 / b).floor() as usize).min(MAX_N).max(1);
        let mut all_pass = true;
        for (n, &d) in d_by_n.iter().enumerate().skip(1).take(n_max) {
            let pass = d <= b;
            all_pass &= pass;
            rows.push(BalanceRow { b, n, d, pass });
        }
        if all_pass {
            smallest = Some(b);
        }
    }
    Ok(BalanceReport {
        rows,
        smallest_passing_b: smallest,
        samples,
        truncation_index: truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtered::FilteredError;

    #[test]
    fn family_enumeration_is_canonical() {
        let fam = TestFunctionFamily::canonical(2, 8);
        let freqs: Vec<(Vec<i64>, bool)> = (0..8)
            .map(|r| {
                let (f, im) = fam.frequency(r);
                (f.to_vec(), im)
            })
            .collect();
        assert_eq!(
            freqs,
            vec![
                (vec![0, 1], false),
                (vec![0, 1], true),
                (vec![1, 0], false),
                (vec![1, 0], true),
                (vec![0, 2], false),
                (vec![0, 2], true),
                (vec![1, -1], false),
                (vec![1, -1], true),
            ]
        );
    }

    #[test]
    fn d_prime_identical_samples_vanish() {
        let space = CubeSpace::TorusDk { m: 1, k: 1 };
        let mu = haar_cube_sampler(space, 1, 512, 7).unwrap();
        let d = metric_d_prime(&mu, &mu, 8).unwrap();
        assert_eq!(d.value, 0.0);
        assert!((d.truncation_bound - 2f64.powi(-7)).abs() < 1e-15);
    }

    #[test]
    fn d_prime_point_masses_hand_computed() {
        // Point mass at 0 vs point mass at 1/2 on 0-dimensional cubes of T:
        // ranks are Re e(t), Im e(t), Re e(2t), Im e(2t) and the sum is 1.
        let space = CubeSpace::TorusDk { m: 1, k: 1 };
        let mu = EmpiricalCubeMeasure::new(space, 0, vec![vec![0.0]]).unwrap();
        let nu = EmpiricalCubeMeasure::new(space, 0, vec![vec![0.5]]).unwrap();
        let d = metric_d_prime(&mu, &nu, 4).unwrap();
        assert!((d.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn d_prime_is_a_pseudometric_on_seeded_triples() {
        let space = CubeSpace::TorusDk { m: 1, k: 1 };
        for seed in 0..10u64 {
            let a = haar_cube_sampler(space, 1, 128, seed).unwrap();
            let b = haar_cube_sampler(space, 1, 128, seed + 100).unwrap();
            let c = haar_cube_sampler(space, 1, 128, seed + 200).unwrap();
            let dab = metric_d_prime(&a, &b, 8).unwrap().value;
            let dba = metric_d_prime(&b, &a, 8).unwrap().value;
            assert_eq!(dab, dba);
            let dac = metric_d_prime(&a, &c, 8).unwrap().value;
            let dcb = metric_d_prime(&c, &b, 8).unwrap().value;
            assert!(dab <= dac + dcb + 1e-12);
        }
    }

    #[test]
    fn independent_haar_samples_are_close() {
        let space = CubeSpace::TorusDk { m: 1, k: 1 };
        let a = haar_cube_sampler(space, 1, 10_000, 41).unwrap();
        let b = haar_cube_sampler(space, 1, 10_000, 42).unwrap();
        let d = metric_d_prime(&a, &b, 8).unwrap();
        assert!(d.value <= 0.05, "d = {}", d.value);
    }

    #[test]
    fn haar_sampler_matches_analytic_torus_means() {
        let space = CubeSpace::TorusDk { m: 1, k: 1 };
        for n in [0usize, 1, 2] {
            let mu = haar_cube_sampler(space, n, 10_000, 9).unwrap();
            let dim = (1usize << n) * 1;
            let family = TestFunctionFamily::canonical(dim, 8);
            for r in 0..family.len() {
                let analytic = haar_mean_analytic(space, n, &family, r).unwrap();
                let sampled = family_mean(&mu, &family, r);
                assert!(
                    (analytic - sampled).abs() < 0.02,
                    "n={n} r={r}: {sampled} vs {analytic}"
                );
            }
        }
    }

    #[test]
    fn haar_heisenberg_face_parameters_recoverable() {
        // The sampled face product is a genuine cube of the lower central
        // series, and face factorization recovers the corner parameter.
        let filt = Filtration::heisenberg_lcs();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let (params, cube) = haar_heisenberg_cube(2, &mut rng);
            let fact = crate::filtered::cube_membership(&cube, &filt)
                .map_err(|e: FilteredError| panic!("membership must hold: {e}"))
                .unwrap();
            // Canonical order puts the corner anchor (3) last.
            assert_eq!(fact.factor_at(3), &params[3]);
        }
    }

    #[test]
    fn factor_consistent_metric_examples() {
        // Torus target: reduces to d' alone.
        let space = CubeSpace::TorusDk { m: 1, k: 1 };
        let a = haar_cube_sampler(space, 1, 256, 1).unwrap();
        let b = haar_cube_sampler(space, 1, 256, 2).unwrap();
        let d = factor_consistent_metric(&a, &b, 8).unwrap();
        assert_eq!(d, metric_d_prime(&a, &b, 8).unwrap().value);

        // Heisenberg: identical measures at distance 0.
        let h = haar_cube_sampler(CubeSpace::Heisenberg, 1, 128, 5).unwrap();
        assert_eq!(factor_consistent_metric(&h, &h, 8).unwrap(), 0.0);

        // Concentrated vs Haar: strictly larger than the torus-factor term.
        let concentrated = EmpiricalCubeMeasure::new(
            CubeSpace::Heisenberg,
            1,
            vec![vec![0.0; 6]; 128],
        )
        .unwrap();
        let full = factor_consistent_metric(&concentrated, &h, 8).unwrap();
        let factor_term = factor_consistent_metric(
            &concentrated.project_to_factor().unwrap(),
            &h.project_to_factor().unwrap(),
            8,
        )
        .unwrap();
        assert!(full > factor_term);
    }

    #[test]
    fn constant_morphism_fails_modest_balance() {
        let phi = ZpMorphism::TorusConstant { t: 0.0, p: 11 };
        let report = balance_of(&phi, &[0.5, 0.3], 2000, 11, 8).unwrap();
        assert!(report.rows.iter().all(|row| !row.pass));
        assert_eq!(report.smallest_passing_b, None);
    }

    #[test]
    fn linear_morphism_passes_loose_grid() {
        let phi = ZpMorphism::TorusLinear { a: 1, p: 101 };
        let report = balance_of(&phi, &[1.0], 2000, 13, 8).unwrap();
        assert_eq!(report.smallest_passing_b, Some(1.0));
    }

    #[test]
    fn exact_pushforward_within_budget() {
        let phi = ZpMorphism::TorusLinear { a: 1, p: 11 };
        let m = pushforward_exact(&phi, 2, 10_000).unwrap();
        assert_eq!(m.sample_count(), 11 * 11 * 11);
        assert!(matches!(
            pushforward_exact(&phi, 3, 10_000),
            Err(BalanceError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn morphism_spec_parsing() {
        assert!(matches!(
            ZpMorphism::parse("linear:a=1,p=11"),
            Ok(ZpMorphism::TorusLinear { a: 1, p: 11 })
        ));
        assert!(matches!(
            ZpMorphism::parse("const:t=0.25,p=7"),
            Ok(ZpMorphism::TorusConstant { p: 7, .. })
        ));
        assert!(ZpMorphism::parse("spiral:p=3").is_err());
    }

    #[test]
    fn grid_validation() {
        let phi = ZpMorphism::TorusLinear { a: 1, p: 11 };
        assert!(balance_of(&phi, &[0.3, 0.5], 100, 1, 8).is_err());
        assert!(balance_of(&phi, &[0.2], 100, 1, 8).is_err());
        assert!(balance_of(&phi, &[], 100, 1, 8).is_err());
    }
}
