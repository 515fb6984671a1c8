//! Finite probability spaces with partition σ-algebras: conditional
//! expectation, meets, conditional independence, and the level-set
//! approximation constructions, all in exact rational arithmetic so the
//! strict thresholds never flip under rounding.

use num::rational::BigRational;
use num::{One, Zero};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FinprobError {
    #[error("weights must be nonnegative and sum to 1 (sum = {0})")]
    BadWeights(String),
    #[error("partition must cover the space with disjoint blocks")]
    BadPartition,
    #[error("subset/function length {got} does not match space size {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("action is not measure-preserving")]
    NotMeasurePreserving,
    #[error("permutation set is not a group (missing identity or closure)")]
    NotAGroup,
}

/// Points 1..M with rational weights summing to exactly 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteProbSpace {
    weights: Vec<BigRational>,
}

impl FiniteProbSpace {
    pub fn new(weights: Vec<BigRational>) -> Result<Self, FinprobError> {
        if weights.is_empty() || weights.iter().any(|w| w < &BigRational::zero()) {
            return Err(FinprobError::BadWeights("negative or empty".into()));
        }
        let total: BigRational = weights.iter().sum();
        if !total.is_one() {
            return Err(FinprobError::BadWeights(crate::rat::ratio_to_string(&total)));
        }
        Ok(Self { weights })
    }

    pub fn uniform(m: usize) -> Self {
        let w = BigRational::new(1.into(), (m as i64).into());
        Self {
            weights: vec![w; m],
        }
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, x: usize) -> &BigRational {
        &self.weights[x]
    }

    pub fn measure(&self, s: &[bool]) -> BigRational {
        s.iter()
            .zip(&self.weights)
            .filter(|(&b, _)| b)
            .map(|(_, w)| w.clone())
            .sum()
    }

    pub fn sym_diff_measure(&self, a: &[bool], b: &[bool]) -> BigRational {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .filter(|((&x, &y), _)| x != y)
            .map(|(_, w)| w.clone())
            .sum()
    }

    /// Equality up to null sets.
    pub fn eq_mod_null(&self, a: &[bool], b: &[bool]) -> bool {
        self.sym_diff_measure(a, b).is_zero()
    }
}

/// A partition of the points, standing in for a sub-σ-algebra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSigma {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl PartitionSigma {
    pub fn new(size: usize, blocks: Vec<Vec<usize>>) -> Result<Self, FinprobError> {
        let mut block_of = vec![usize::MAX; size];
        for (i, block) in blocks.iter().enumerate() {
            for &x in block {
                if x >= size || block_of[x] != usize::MAX {
                    return Err(FinprobError::BadPartition);
                }
                block_of[x] = i;
            }
        }
        if block_of.iter().any(|&b| b == usize::MAX) {
            return Err(FinprobError::BadPartition);
        }
        Ok(Self { blocks, block_of })
    }

    pub fn finest(size: usize) -> Self {
        Self::new(size, (0..size).map(|x| vec![x]).collect()).expect("valid")
    }

    pub fn coarsest(size: usize) -> Self {
        Self::new(size, vec![(0..size).collect()]).expect("valid")
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        let max = labels.iter().copied().max().unwrap_or(0);
        let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); max + 1];
        for (x, &l) in labels.iter().enumerate() {
            blocks[l].push(x);
        }
        blocks.retain(|b| !b.is_empty());
        Self::new(labels.len(), blocks).expect("labels cover the space")
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, x: usize) -> usize {
        self.block_of[x]
    }

    pub fn size(&self) -> usize {
        self.block_of.len()
    }

    /// S is a union of blocks, ignoring null points.
    pub fn measurable(&self, space: &FiniteProbSpace, s: &[bool]) -> bool {
        self.blocks.iter().all(|block| {
            let mut saw_true = false;
            let mut saw_false = false;
            for &x in block {
                if space.weight(x).is_zero() {
                    continue;
                }
                if s[x] {
                    saw_true = true;
                } else {
                    saw_false = true;
                }
            }
            !(saw_true && saw_false)
        })
    }
}

/// Block-wise weighted average; blocks of weight zero get value 0.
pub fn cond_expect(
    space: &FiniteProbSpace,
    f: &[BigRational],
    p: &PartitionSigma,
) -> Result<Vec<BigRational>, FinprobError> {
    if f.len() != space.size() || p.size() != space.size() {
        return Err(FinprobError::WrongLength {
            expected: space.size(),
            got: f.len(),
        });
    }
    let mut block_value = Vec::with_capacity(p.blocks.len());
    for block in &p.blocks {
        let mass: BigRational = block.iter().map(|&x| space.weight(x).clone()).sum();
        if mass.is_zero() {
            block_value.push(BigRational::zero());
        } else {
            let total: BigRational = block.iter().map(|&x| space.weight(x) * &f[x]).sum();
            block_value.push(total / mass);
        }
    }
    Ok((0..space.size())
        .map(|x| block_value[p.block_of(x)].clone())
        .collect())
}

pub fn indicator(size: usize, s: &[bool]) -> Vec<BigRational> {
    (0..size)
        .map(|x| if s[x] { BigRational::one() } else { BigRational::zero() })
        .collect()
}

/// The meet of two partition σ-algebras: connected components of the
/// bipartite overlap graph on positive-weight intersections. Null points
/// attach to the component of the least-index positive-weight point.
pub fn meet(
    space: &FiniteProbSpace,
    p0: &PartitionSigma,
    p1: &PartitionSigma,
) -> Result<PartitionSigma, FinprobError> {
    let size = space.size();
    if p0.size() != size || p1.size() != size {
        return Err(FinprobError::WrongLength {
            expected: size,
            got: p0.size(),
        });
    }
    // Union-find over blocks of p0 (ids 0..a) and p1 (ids a..a+b).
    let a = p0.blocks.len();
    let mut parent: Vec<usize> = (0..a + p1.blocks.len()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for x in 0..size {
        if space.weight(x).is_zero() {
            continue;
        }
        let r0 = find(&mut parent, p0.block_of(x));
        let r1 = find(&mut parent, a + p1.block_of(x));
        parent[r0] = r1;
    }
    let designated = (0..size).find(|&x| !space.weight(x).is_zero());
    let mut labels = vec![0usize; size];
    let mut next = 0usize;
    let mut label_of_root = std::collections::HashMap::new();
    for x in 0..size {
        let anchor = if space.weight(x).is_zero() {
            designated.unwrap_or(x)
        } else {
            x
        };
        let root = find(&mut parent, p0.block_of(anchor));
        let l = *label_of_root.entry(root).or_insert_with(|| {
            let l = next;
            next += 1;
            l
        });
        labels[x] = l;
    }
    Ok(PartitionSigma::from_labels(&labels))
}

/// Conditional independence: for every block indicator of P0, its conditional
/// expectation on P1 is P0-measurable (constant on P0 blocks up to null sets).
pub fn check_cond_independence(
    space: &FiniteProbSpace,
    p0: &PartitionSigma,
    p1: &PartitionSigma,
) -> Result<bool, FinprobError> {
    for block in &p0.blocks {
        let mut s = vec![false; space.size()];
        for &x in block {
            s[x] = true;
        }
        let e = cond_expect(space, &indicator(space.size(), &s), p1)?;
        for b0 in &p0.blocks {
            let mut value: Option<&BigRational> = None;
            for &x in b0 {
                if space.weight(x).is_zero() {
                    continue;
                }
                match value {
                    None => value = Some(&e[x]),
                    Some(v) if v != &e[x] => return Ok(false),
                    _ => {}
                }
            }
        }
    }
    Ok(true)
}

/// Exact comparison x > ε^{1/2} for nonnegative x, via squaring.
fn gt_sqrt(x: &BigRational, eps: &BigRational) -> bool {
    !x.is_zero() && x > &BigRational::zero() && &(x * x) > eps
}

/// Exact comparison x > ε^{1/4} for nonnegative x.
fn gt_fourth_root(x: &BigRational, eps: &BigRational) -> bool {
    if x <= &BigRational::zero() {
        return false;
    }
    let x2 = x * x;
    &(&x2 * &x2) > eps
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSetResult {
    pub s_prime: Vec<bool>,
    /// λ(S Δ S') as an exact rational string.
    pub sym_diff: String,
    pub precondition_ok: bool,
    /// λ(S Δ S') < 5·ε^{1/2}; asserted only under the precondition.
    pub bound_holds: Option<bool>,
}

/// Level-set approximation: S' = {x : E(1_S|P)(x) > ε^{1/2}}. When
/// ‖1_S − E(1_S|P)‖_{L²} ≤ ε holds, λ(SΔS') < 5ε^{1/2} is asserted.
pub fn level_set_approx(
    space: &FiniteProbSpace,
    s: &[bool],
    p: &PartitionSigma,
    eps: &BigRational,
) -> Result<LevelSetResult, FinprobError> {
    if s.len() != space.size() {
        return Err(FinprobError::WrongLength {
            expected: space.size(),
            got: s.len(),
        });
    }
    let e = cond_expect(space, &indicator(space.size(), s), p)?;
    // ‖1_S − E‖² ≤ ε² exactly.
    let l2sq: BigRational = (0..space.size())
        .map(|x| {
            let d = if s[x] {
                BigRational::one() - &e[x]
            } else {
                e[x].clone()
            };
            space.weight(x) * &d * &d
        })
        .sum();
    let precondition_ok = l2sq <= eps * eps;
    let s_prime: Vec<bool> = e.iter().map(|v| gt_sqrt(v, eps)).collect();
    let sym = space.sym_diff_measure(s, &s_prime);
    let bound_holds = precondition_ok.then(|| {
        // λ(SΔS') < 5ε^{1/2} ⟺ λ² < 25ε (both sides nonnegative); at ε = 0
        // the statement degenerates to exact equality.
        if eps.is_zero() {
            sym.is_zero()
        } else {
            &(&sym * &sym) < &(BigRational::from(BigInt25()) * eps)
        }
    });
    Ok(LevelSetResult {
        s_prime,
        sym_diff: crate::rat::ratio_to_string(&sym),
        precondition_ok,
        bound_holds,
    })
}

#[allow(non_snake_case)]
fn BigInt25() -> num::bigint::BigInt {
    num::bigint::BigInt::from(25)
}

#[derive(Debug, Clone, Serialize)]
pub struct CiIntersectionResult {
    pub c: Vec<bool>,
    pub meet_measurable: bool,
    pub sym_diff_s0: String,
    pub sym_diff_s1: String,
    pub precondition_ok: bool,
    /// Both λ(CΔS_i) ≤ 10·ε^{1/4}; asserted only under the preconditions.
    pub bounds_hold: Option<bool>,
}

/// Conditionally-independent intersection approximation:
/// C = {E(1_{S0}|P1) > (2ε^{1/2})^{1/2}}, meet-measurable with
/// λ(CΔS_i) ≤ 10ε^{1/4} under the stated preconditions.
pub fn ci_intersection_approx(
    space: &FiniteProbSpace,
    s0: &[bool],
    s1: &[bool],
    p0: &PartitionSigma,
    p1: &PartitionSigma,
    eps: &BigRational,
) -> Result<CiIntersectionResult, FinprobError> {
    let ci = check_cond_independence(space, p0, p1)?;
    let measurable = p0.measurable(space, s0) && p1.measurable(space, s1);
    let close = &space.sym_diff_measure(s0, s1) <= eps;
    let precondition_ok = ci && measurable && close;

    let e = cond_expect(space, &indicator(space.size(), s0), p1)?;
    // v > (2√ε)^{1/2} ⟺ v⁴ > 4ε for v ≥ 0.
    let four_eps = BigRational::from(num::bigint::BigInt::from(4)) * eps;
    let c: Vec<bool> = e.iter().map(|v| gt_fourth_root(v, &four_eps)).collect();

    let m = meet(space, p0, p1)?;
    let meet_measurable = m.measurable(space, &c);
    let d0 = space.sym_diff_measure(&c, s0);
    let d1 = space.sym_diff_measure(&c, s1);
    let bounds_hold = precondition_ok.then(|| {
        // d ≤ 10ε^{1/4} ⟺ d⁴ ≤ 10⁴ ε.
        let cap = BigRational::from(num::bigint::BigInt::from(10_000)) * eps;
        let ok0 = {
            let d2 = &d0 * &d0;
            &d2 * &d2 <= cap.clone()
        };
        let ok1 = {
            let d2 = &d1 * &d1;
            &d2 * &d2 <= cap
        };
        meet_measurable && ok0 && ok1
    });
    Ok(CiIntersectionResult {
        c,
        meet_measurable,
        sym_diff_s0: crate::rat::ratio_to_string(&d0),
        sym_diff_s1: crate::rat::ratio_to_string(&d1),
        precondition_ok,
        bounds_hold,
    })
}

/// A finite group acting on the points by weight-preserving permutations.
#[derive(Debug, Clone)]
pub struct GroupAction {
    perms: Vec<Vec<usize>>,
}

impl GroupAction {
    /// Validates identity, closure, and invertibility.
    pub fn new(size: usize, perms: Vec<Vec<usize>>) -> Result<Self, FinprobError> {
        if perms.iter().any(|p| p.len() != size) {
            return Err(FinprobError::WrongLength {
                expected: size,
                got: perms.first().map_or(0, Vec::len),
            });
        }
        for p in &perms {
            let mut seen = vec![false; size];
            for &y in p {
                if y >= size || seen[y] {
                    return Err(FinprobError::NotAGroup);
                }
                seen[y] = true;
            }
        }
        let identity: Vec<usize> = (0..size).collect();
        if !perms.contains(&identity) {
            return Err(FinprobError::NotAGroup);
        }
        for a in &perms {
            for b in &perms {
                let composed: Vec<usize> = (0..size).map(|x| a[b[x]]).collect();
                if !perms.contains(&composed) {
                    return Err(FinprobError::NotAGroup);
                }
            }
        }
        Ok(Self { perms })
    }

    /// The cyclic group generated by one permutation.
    pub fn cyclic(size: usize, generator: Vec<usize>) -> Result<Self, FinprobError> {
        let identity: Vec<usize> = (0..size).collect();
        let mut perms = vec![identity.clone()];
        let mut current = generator.clone();
        while current != identity {
            if perms.len() > size {
                return Err(FinprobError::NotAGroup);
            }
            perms.push(current.clone());
            current = (0..size).map(|x| generator[current[x]]).collect();
        }
        Self::new(size, perms)
    }

    pub fn order(&self) -> usize {
        self.perms.len()
    }

    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }

    pub fn preserves(&self, space: &FiniteProbSpace) -> bool {
        self.perms
            .iter()
            .all(|p| (0..space.size()).all(|x| space.weight(p[x]) == space.weight(x)))
    }

    pub fn apply_to_set(&self, g: usize, s: &[bool]) -> Vec<bool> {
        let mut out = vec![false; s.len()];
        for (x, &inside) in s.iter().enumerate() {
            if inside {
                out[self.perms[g][x]] = true;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantResult {
    pub s_prime: Vec<bool>,
    pub invariance_exact: bool,
    pub sym_diff: String,
    pub precondition_ok: bool,
    /// λ(SΔS') ≤ 5·ε^{1/4}; asserted only under the precondition.
    pub bound_holds: Option<bool>,
}

/// Invariant approximation: S' = {E_{g∈G} 1_{gS} > ε^{1/4}} (the Følner
/// average of a finite group is the full-group average). S' is exactly
/// G-invariant; when λ(SΔgS) ≤ ε for all g, λ(SΔS') ≤ 5ε^{1/4}.
pub fn invariant_approx(
    space: &FiniteProbSpace,
    s: &[bool],
    action: &GroupAction,
    eps: &BigRational,
) -> Result<InvariantResult, FinprobError> {
    if s.len() != space.size() {
        return Err(FinprobError::WrongLength {
            expected: space.size(),
            got: s.len(),
        });
    }
    if !action.preserves(space) {
        return Err(FinprobError::NotMeasurePreserving);
    }
    let precondition_ok = (0..action.order()).all(|g| {
        let gs = action.apply_to_set(g, s);
        &space.sym_diff_measure(s, &gs) <= eps
    });
    // f = E_{g∈G} 1_{g·S}, exactly G-invariant.
    let order = BigRational::new(1.into(), (action.order() as i64).into());
    let mut f = vec![BigRational::zero(); space.size()];
    for g in 0..action.order() {
        let gs = action.apply_to_set(g, s);
        for (x, &inside) in gs.iter().enumerate() {
            if inside {
                f[x] += &order;
            }
        }
    }
    let s_prime: Vec<bool> = f.iter().map(|v| gt_fourth_root(v, eps)).collect();
    let invariance_exact = (0..action.order()).all(|g| {
        let moved = action.apply_to_set(g, &s_prime);
        moved == s_prime
    });
    let sym = space.sym_diff_measure(s, &s_prime);
    let bound_holds = precondition_ok.then(|| {
        if eps.is_zero() {
            sym.is_zero()
        } else {
            let cap = BigRational::from(num::bigint::BigInt::from(625)) * eps;
            let s2 = &sym * &sym;
            &s2 * &s2 <= cap
        }
    });
    Ok(InvariantResult {
        s_prime,
        invariance_exact,
        sym_diff: crate::rat::ratio_to_string(&sym),
        precondition_ok,
        bound_holds,
    })
}

/// Seeded random instances for the three approximation suites.
pub mod suite {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    #[derive(Debug, Clone, Serialize)]
    pub struct SuiteReport {
        pub lemma: String,
        pub instances: u64,
        pub violations: u64,
        pub first_violation_seed: Option<u64>,
    }

    pub fn random_space<R: Rng>(rng: &mut R, max_points: usize) -> FiniteProbSpace {
        let m = rng.random_range(2..=max_points);
        let mut nums: Vec<i64> = (0..m)
            .map(|_| {
                if rng.random_range(0..10) == 0 {
                    0
                } else {
                    rng.random_range(1..=16)
                }
            })
            .collect();
        if nums.iter().all(|&x| x == 0) {
            nums[0] = 1;
        }
        let total: i64 = nums.iter().sum();
        FiniteProbSpace::new(
            nums.iter()
                .map(|&x| BigRational::new(x.into(), total.into()))
                .collect(),
        )
        .expect("normalized weights")
    }

    pub fn random_partition<R: Rng>(rng: &mut R, size: usize) -> PartitionSigma {
        let blocks = rng.random_range(1..=size);
        let labels: Vec<usize> = (0..size).map(|_| rng.random_range(0..blocks)).collect();
        PartitionSigma::from_labels(&labels)
    }

    pub fn random_subset<R: Rng>(rng: &mut R, size: usize) -> Vec<bool> {
        (0..size).map(|_| rng.random::<bool>()).collect()
    }

    /// Smallest q/64 with (q/64)² ≥ the exact squared L² distance; always a
    /// valid ε for the level-set precondition.
    fn eps_covering_l2(l2sq: &BigRational) -> BigRational {
        for q in 1..=64i64 {
            let eps = BigRational::new(q.into(), 64.into());
            if &(&eps * &eps) >= l2sq {
                return eps;
            }
        }
        BigRational::one()
    }

    /// Level-set suite: seeded instances with the precondition satisfied by
    /// construction; counts bound violations.
    pub fn run_level_set(instances: u64, seed: u64, max_points: usize) -> SuiteReport {
        let mut violations = 0;
        let mut first = None;
        for i in 0..instances {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let space = random_space(&mut rng, max_points);
            let p = random_partition(&mut rng, space.size());
            let s = if rng.random_range(0..4) == 0 {
                // Exactly measurable: union of blocks.
                let mut s = vec![false; space.size()];
                for block in p.blocks() {
                    if rng.random::<bool>() {
                        for &x in block {
                            s[x] = true;
                        }
                    }
                }
                s
            } else {
                random_subset(&mut rng, space.size())
            };
            let e = cond_expect(&space, &indicator(space.size(), &s), &p).unwrap();
            let l2sq: BigRational = (0..space.size())
                .map(|x| {
                    let d = if s[x] {
                        BigRational::one() - &e[x]
                    } else {
                        e[x].clone()
                    };
                    space.weight(x) * &d * &d
                })
                .sum();
            let eps = eps_covering_l2(&l2sq);
            let res = level_set_approx(&space, &s, &p, &eps).unwrap();
            if !(res.precondition_ok && res.bound_holds == Some(true)) {
                violations += 1;
                first.get_or_insert(seed.wrapping_add(i));
            }
        }
        SuiteReport {
            lemma: "level-set".into(),
            instances,
            violations,
            first_violation_seed: first,
        }
    }

    /// Conditionally-independent intersection suite on random product spaces.
    pub fn run_ci_intersection(instances: u64, seed: u64, max_side: usize) -> SuiteReport {
        let mut violations = 0;
        let mut first = None;
        for i in 0..instances {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let rows = rng.random_range(2..=max_side);
            let cols = rng.random_range(2..=max_side);
            // Product weights u × v keep the row/column partitions
            // conditionally independent.
            let unum: Vec<i64> = (0..rows).map(|_| rng.random_range(1..=8)).collect();
            let vnum: Vec<i64> = (0..cols).map(|_| rng.random_range(1..=8)).collect();
            let usum: i64 = unum.iter().sum();
            let vsum: i64 = vnum.iter().sum();
            let weights: Vec<BigRational> = (0..rows * cols)
                .map(|idx| {
                    let (r, c) = (idx / cols, idx % cols);
                    BigRational::new((unum[r] * vnum[c]).into(), (usum * vsum).into())
                })
                .collect();
            let space = FiniteProbSpace::new(weights).unwrap();
            let p_rows =
                PartitionSigma::from_labels(&(0..rows * cols).map(|i| i / cols).collect::<Vec<_>>());
            let p_cols =
                PartitionSigma::from_labels(&(0..rows * cols).map(|i| i % cols).collect::<Vec<_>>());

            // Correlated selections keep λ(S0ΔS1) small part of the time;
            // the rest exercise the vacuous regime.
            let style = rng.random_range(0..3);
            let (rset, cset): (Vec<bool>, Vec<bool>) = match style {
                0 => ((0..rows).map(|_| false).collect(), (0..cols).map(|_| false).collect()),
                1 => {
                    let r: Vec<bool> = (0..rows).map(|_| rng.random::<bool>()).collect();
                    let c: Vec<bool> = (0..cols).map(|_| rng.random::<bool>()).collect();
                    (r, c)
                }
                _ => {
                    let mut r = vec![false; rows];
                    r[rng.random_range(0..rows)] = true;
                    let mut c = vec![false; cols];
                    c[rng.random_range(0..cols)] = true;
                    (r, c)
                }
            };
            let s0: Vec<bool> = (0..rows * cols).map(|i| rset[i / cols]).collect();
            let s1: Vec<bool> = (0..rows * cols).map(|i| cset[i % cols]).collect();
            let eps = if style == 1 {
                BigRational::one()
            } else {
                space.sym_diff_measure(&s0, &s1)
            };
            let res = ci_intersection_approx(&space, &s0, &s1, &p_rows, &p_cols, &eps).unwrap();
            if !(res.precondition_ok && res.bounds_hold == Some(true)) {
                violations += 1;
                first.get_or_insert(seed.wrapping_add(i));
            }
        }
        SuiteReport {
            lemma: "ci-intersection".into(),
            instances,
            violations,
            first_violation_seed: first,
        }
    }

    /// Invariant-approximation suite with cyclic actions of order ≤ 8.
    pub fn run_invariant(instances: u64, seed: u64, max_points: usize) -> SuiteReport {
        let mut violations = 0;
        let mut first = None;
        for i in 0..instances {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let m = rng.random_range(4..=max_points);
            // Generator made of disjoint d-cycles so the group order is ≤ 8.
            let d = *[2usize, 3, 4, 5, 6, 7, 8]
                .iter()
                .nth(rng.random_range(0..7))
                .unwrap();
            let mut points: Vec<usize> = (0..m).collect();
            for j in (1..m).rev() {
                let k = rng.random_range(0..=j);
                points.swap(j, k);
            }
            let mut gen: Vec<usize> = (0..m).collect();
            let mut idx = 0;
            while idx + d <= m && rng.random::<bool>() {
                for off in 0..d {
                    gen[points[idx + off]] = points[idx + (off + 1) % d];
                }
                idx += d;
            }
            let action = GroupAction::cyclic(m, gen).expect("cycles of equal length");
            // Orbit-constant weights keep the action measure-preserving.
            let mut orbit_of = vec![usize::MAX; m];
            let mut orbits: Vec<Vec<usize>> = Vec::new();
            for x in 0..m {
                if orbit_of[x] != usize::MAX {
                    continue;
                }
                let id = orbits.len();
                let mut orbit = vec![x];
                orbit_of[x] = id;
                let mut y = action.perms()[1 % action.order()][x];
                while y != x {
                    orbit_of[y] = id;
                    orbit.push(y);
                    y = action.perms()[1 % action.order()][y];
                }
                orbits.push(orbit);
            }
            let orbit_weight: Vec<i64> =
                (0..orbits.len()).map(|_| rng.random_range(1..=8)).collect();
            let total: i64 = orbits
                .iter()
                .zip(&orbit_weight)
                .map(|(o, &w)| w * o.len() as i64)
                .sum();
            let space = FiniteProbSpace::new(
                (0..m)
                    .map(|x| BigRational::new(orbit_weight[orbit_of[x]].into(), total.into()))
                    .collect(),
            )
            .unwrap();
            // S = union of orbits, optionally perturbed at a few points.
            let mut s = vec![false; m];
            for orbit in &orbits {
                if rng.random::<bool>() {
                    for &x in orbit {
                        s[x] = true;
                    }
                }
            }
            for _ in 0..rng.random_range(0..3) {
                let x = rng.random_range(0..m);
                s[x] = !s[x];
            }
            let eps = (0..action.order())
                .map(|g| space.sym_diff_measure(&s, &action.apply_to_set(g, &s)))
                .max()
                .unwrap_or_else(BigRational::zero);
            let eps = if eps.is_zero() {
                BigRational::new(1.into(), 64.into())
            } else {
                eps
            };
            let res = invariant_approx(&space, &s, &action, &eps).unwrap();
            if !(res.precondition_ok && res.invariance_exact && res.bound_holds == Some(true)) {
                violations += 1;
                first.get_or_insert(seed.wrapping_add(i));
            }
        }
        SuiteReport {
            lemma: "invariant".into(),
            instances,
            violations,
            first_violation_seed: first,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::ratio;

    fn uniform4() -> FiniteProbSpace {
        FiniteProbSpace::uniform(4)
    }

    #[test]
    fn space_validation() {
        assert!(FiniteProbSpace::new(vec![ratio(1, 2), ratio(1, 2)]).is_ok());
        assert!(FiniteProbSpace::new(vec![ratio(1, 2), ratio(1, 3)]).is_err());
        assert!(FiniteProbSpace::new(vec![ratio(3, 2), ratio(-1, 2)]).is_err());
    }

    #[test]
    fn cond_expect_examples() {
        let space = uniform4();
        let f: Vec<BigRational> = [1, 2, 3, 4].iter().map(|&x| ratio(x, 1)).collect();
        // Finest partition: unchanged.
        let finest = PartitionSigma::finest(4);
        assert_eq!(cond_expect(&space, &f, &finest).unwrap(), f);
        // Coarsest: constant mean 5/2.
        let coarsest = PartitionSigma::coarsest(4);
        let e = cond_expect(&space, &f, &coarsest).unwrap();
        assert!(e.iter().all(|v| v == &ratio(5, 2)));
        // S = {0,1}, P = {{0,2},{1,3}} → 1/2 everywhere.
        let p = PartitionSigma::from_labels(&[0, 1, 0, 1]);
        let s = indicator(4, &[true, true, false, false]);
        let e = cond_expect(&space, &s, &p).unwrap();
        assert!(e.iter().all(|v| v == &ratio(1, 2)));
    }

    #[test]
    fn cond_expect_is_a_projection() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let space = suite::random_space(&mut rng, 16);
            let p = suite::random_partition(&mut rng, space.size());
            let f: Vec<BigRational> = (0..space.size())
                .map(|_| ratio(rng.random_range(-8..8), rng.random_range(1..5)))
                .collect();
            let once = cond_expect(&space, &f, &p).unwrap();
            let twice = cond_expect(&space, &once, &p).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn meet_examples() {
        let space = uniform4();
        let p0 = PartitionSigma::from_labels(&[0, 0, 1, 1]);
        assert_eq!(meet(&space, &p0, &p0).unwrap(), p0);

        let finest = PartitionSigma::finest(4);
        let coarsest = PartitionSigma::coarsest(4);
        assert_eq!(meet(&space, &finest, &coarsest).unwrap(), coarsest);

        // {{1,2},{3,4}} vs {{2,3},{1,4}}: the overlap graph is connected.
        let p1 = PartitionSigma::from_labels(&[1, 0, 0, 1]);
        assert_eq!(meet(&space, &p0, &p1).unwrap(), coarsest);
    }

    #[test]
    fn meet_is_finest_common_coarsening_on_small_spaces() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let size = rng.random_range(2..=8usize);
            let space = suite::random_space(&mut rng, size);
            let p0 = suite::random_partition(&mut rng, space.size());
            let p1 = suite::random_partition(&mut rng, space.size());
            let m = meet(&space, &p0, &p1).unwrap();
            // Every subset measurable in both (mod null) is a union of meet
            // blocks (mod null), and meet blocks are measurable in both.
            let n = space.size();
            for mask in 0..1u32 << n {
                let s: Vec<bool> = (0..n).map(|x| mask >> x & 1 == 1).collect();
                let in_both = p0.measurable(&space, &s) && p1.measurable(&space, &s);
                if in_both {
                    assert!(m.measurable(&space, &s));
                }
            }
            for block in m.blocks() {
                let mut s = vec![false; n];
                for &x in block {
                    s[x] = true;
                }
                assert!(p0.measurable(&space, &s));
                assert!(p1.measurable(&space, &s));
            }
        }
    }

    #[test]
    fn conditional_independence_examples() {
        // 2×2 product space with product weights.
        let space = FiniteProbSpace::new(vec![
            ratio(1, 6),
            ratio(1, 6),
            ratio(1, 3),
            ratio(1, 3),
        ])
        .unwrap();
        let rows = PartitionSigma::from_labels(&[0, 0, 1, 1]);
        let cols = PartitionSigma::from_labels(&[0, 1, 0, 1]);
        assert!(check_cond_independence(&space, &rows, &cols).unwrap());
        assert!(check_cond_independence(&space, &rows, &rows).unwrap());

        // Uniform measure makes the crossed partitions the two independent
        // bits of a 2×2 grid, so conditional independence holds even though
        // the meet is trivial.
        let space = uniform4();
        let p0 = PartitionSigma::from_labels(&[0, 0, 1, 1]);
        let p1 = PartitionSigma::from_labels(&[1, 0, 0, 1]);
        assert!(check_cond_independence(&space, &p0, &p1).unwrap());

        // A skewed measure on the same partitions breaks it.
        let skew = FiniteProbSpace::new(vec![
            ratio(1, 2),
            ratio(1, 4),
            ratio(1, 8),
            ratio(1, 8),
        ])
        .unwrap();
        assert!(!check_cond_independence(&skew, &p0, &p1).unwrap());
    }

    #[test]
    fn level_set_examples() {
        let space = uniform4();
        let s = [true, false, true, false];
        // Finest partition: S' = S.
        let res = level_set_approx(
            &space,
            &s,
            &PartitionSigma::finest(4),
            &ratio(1, 1_000_000),
        )
        .unwrap();
        assert!(res.precondition_ok);
        assert_eq!(res.s_prime, s.to_vec());
        assert_eq!(res.sym_diff, "0");
        assert_eq!(res.bound_holds, Some(true));

        // Coarsest partition, λ(S) = 1/2, ε = 1/2: S' = ∅ and the bound holds.
        let res = level_set_approx(&space, &s, &PartitionSigma::coarsest(4), &ratio(1, 2))
            .unwrap();
        assert!(res.precondition_ok);
        assert!(res.s_prime.iter().all(|&b| !b));
        assert_eq!(res.sym_diff, "1/2");
        assert_eq!(res.bound_holds, Some(true));
    }

    #[test]
    fn ci_intersection_examples() {
        // S0 = S1 measurable in the meet, ε = 0 → C = S0.
        let space = uniform4();
        let p0 = PartitionSigma::from_labels(&[0, 0, 1, 1]);
        let s = [true, true, false, false];
        let res = ci_intersection_approx(&space, &s, &s, &p0, &p0, &BigRational::zero()).unwrap();
        assert!(res.precondition_ok);
        assert_eq!(res.c, s.to_vec());
        assert_eq!(res.bounds_hold, Some(true));

        // ε = 1 is vacuous.
        let p1 = PartitionSigma::from_labels(&[0, 1, 0, 1]);
        let s1 = [true, false, true, false];
        let space_pr = FiniteProbSpace::new(vec![
            ratio(1, 4),
            ratio(1, 4),
            ratio(1, 4),
            ratio(1, 4),
        ])
        .unwrap();
        let res =
            ci_intersection_approx(&space_pr, &s, &s1, &p0, &p1, &BigRational::one()).unwrap();
        assert!(res.precondition_ok);
        assert_eq!(res.bounds_hold, Some(true));
    }

    #[test]
    fn invariant_examples() {
        // Z_2 swap on two uniform points.
        let space = FiniteProbSpace::uniform(2);
        let action = GroupAction::cyclic(2, vec![1, 0]).unwrap();
        let res = invariant_approx(&space, &[true, false], &action, &BigRational::one()).unwrap();
        assert!(res.precondition_ok);
        assert!(res.invariance_exact);
        assert_eq!(res.bound_holds, Some(true));

        // Already invariant: S' = S for any ε > 0.
        let s = [true, true];
        let res = invariant_approx(&space, &s, &action, &ratio(1, 100)).unwrap();
        assert_eq!(res.s_prime, s.to_vec());
        assert_eq!(res.sym_diff, "0");

        let skew = FiniteProbSpace::new(vec![ratio(1, 3), ratio(2, 3)]).unwrap();
        assert!(matches!(
            invariant_approx(&skew, &s, &action, &ratio(1, 2)),
            Err(FinprobError::NotMeasurePreserving)
        ));
    }

    #[test]
    fn suites_have_zero_violations_smoke() {
        let r = suite::run_level_set(100, 1, 64);
        assert_eq!(r.violations, 0, "first failure {:?}", r.first_violation_seed);
        let r = suite::run_ci_intersection(100, 2, 8);
        assert_eq!(r.violations, 0, "first failure {:?}", r.first_violation_seed);
        let r = suite::run_invariant(100, 3, 32);
        assert_eq!(r.violations, 0, "first failure {:?}", r.first_violation_seed);
    }
}
