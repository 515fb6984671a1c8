//! Degree-k cocycles on finite abelian groups with their standard cube
//! structure: coboundaries, the automorphism and concatenation axioms, the
//! d_1 distance to the zero cocycle, and the empirical quasimorphism defect.

use crate::cube::{
    enumerate_parallelepipeds, make_parallelepiped, parallelepiped_count, sample_parallelepiped,
    vertex_weight, Cube, CubeAutomorphism, CubeError,
};
use crate::group::{FiniteAbelianGroup, GroupElem};
use crate::rat::{circle_dist, fract, ratio_to_string, to_f64};
use num::rational::BigRational;
use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashMap;
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CocycleError {
    #[error("cocycle degree must be ≥ −1, got {0}")]
    BadDegree(i64),
    #[error("target mismatch between cocycle values")]
    TargetMismatch,
    #[error("invalid target or function spec `{0}`")]
    InvalidSpec(String),
    #[error(transparent)]
    Cube(#[from] CubeError),
}

/// The target abelian group: the unit circle with rational coordinates, or a
/// finite cyclic group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetGroup {
    Circle,
    Cyclic(u64),
}

/// A value in the target group.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TargetValue {
    /// Circle coordinate in [0,1), exact.
    Circle(BigRational),
    Cyclic(u64),
}

impl TargetGroup {
    pub fn parse(spec: &str) -> Result<Self, CocycleError> {
        if spec == "circle" {
            return Ok(TargetGroup::Circle);
        }
        if let Some(m) = spec.strip_prefix("z:") {
            let m: u64 = m
                .parse()
                .map_err(|_| CocycleError::InvalidSpec(spec.to_string()))?;
            if m == 0 {
                return Err(CocycleError::InvalidSpec(spec.to_string()));
            }
            return Ok(TargetGroup::Cyclic(m));
        }
        Err(CocycleError::InvalidSpec(spec.to_string()))
    }

    pub fn zero(&self) -> TargetValue {
        match self {
            TargetGroup::Circle => TargetValue::Circle(BigRational::zero()),
            TargetGroup::Cyclic(_) => TargetValue::Cyclic(0),
        }
    }

    pub fn add(&self, a: &TargetValue, b: &TargetValue) -> TargetValue {
        match (self, a, b) {
            (TargetGroup::Circle, TargetValue::Circle(x), TargetValue::Circle(y)) => {
                TargetValue::Circle(fract(&(x + y)))
            }
            (TargetGroup::Cyclic(m), TargetValue::Cyclic(x), TargetValue::Cyclic(y)) => {
                TargetValue::Cyclic((x + y) % m)
            }
            _ => panic!("target mismatch"),
        }
    }

    pub fn neg(&self, a: &TargetValue) -> TargetValue {
        match (self, a) {
            (TargetGroup::Circle, TargetValue::Circle(x)) => TargetValue::Circle(fract(&(-x))),
            (TargetGroup::Cyclic(m), TargetValue::Cyclic(x)) => {
                TargetValue::Cyclic((m - x) % m)
            }
            _ => panic!("target mismatch"),
        }
    }

    pub fn sub(&self, a: &TargetValue, b: &TargetValue) -> TargetValue {
        self.add(a, &self.neg(b))
    }

    /// Shift-invariant metric: circle distance to the nearest integer, or the
    /// normalized discrete metric on Z_m.
    pub fn metric(&self, a: &TargetValue, b: &TargetValue) -> BigRational {
        match (self, a, b) {
            (TargetGroup::Circle, TargetValue::Circle(x), TargetValue::Circle(y)) => {
                circle_dist(&(x - y))
            }
            (TargetGroup::Cyclic(_), TargetValue::Cyclic(x), TargetValue::Cyclic(y)) => {
                if x == y {
                    BigRational::zero()
                } else {
                    num::One::one()
                }
            }
            _ => panic!("target mismatch"),
        }
    }

    pub fn value_string(&self, v: &TargetValue) -> String {
        match v {
            TargetValue::Circle(x) => ratio_to_string(x),
            TargetValue::Cyclic(r) => r.to_string(),
        }
    }
}

/// Gray code Σ (−1)^{|v|} q(v) in the target group.
pub fn target_gray_code(target: TargetGroup, q: &Cube<TargetValue>) -> TargetValue {
    let mut acc = target.zero();
    for (v, val) in q.values().iter().enumerate() {
        acc = if vertex_weight(v) % 2 == 0 {
            target.add(&acc, val)
        } else {
            target.sub(&acc, val)
        };
    }
    acc
}

/// A degree-k cocycle candidate: a value for every (k+1)-cube of the domain.
#[derive(Clone)]
pub struct Cocycle {
    domain: FiniteAbelianGroup,
    target: TargetGroup,
    degree: i64,
    rho: Rc<dyn Fn(&Cube<GroupElem>) -> TargetValue>,
}

impl Cocycle {
    pub fn new(
        domain: FiniteAbelianGroup,
        target: TargetGroup,
        degree: i64,
        rho: Rc<dyn Fn(&Cube<GroupElem>) -> TargetValue>,
    ) -> Result<Self, CocycleError> {
        if degree < -1 {
            return Err(CocycleError::BadDegree(degree));
        }
        Ok(Self {
            domain,
            target,
            degree,
            rho,
        })
    }

    pub fn domain(&self) -> &FiniteAbelianGroup {
        &self.domain
    }

    pub fn target(&self) -> TargetGroup {
        self.target
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    /// Dimension of the cubes the cocycle is defined on (k+1; 0 for k = −1).
    pub fn cube_dim(&self) -> usize {
        (self.degree + 1) as usize
    }

    pub fn eval(&self, q: &Cube<GroupElem>) -> TargetValue {
        (self.rho)(q)
    }

    /// Returns a copy with the value at one cube replaced (for violation
    /// construction in tests and demos).
    pub fn perturbed(&self, at: Cube<GroupElem>, value: TargetValue) -> Cocycle {
        let inner = self.rho.clone();
        let mut overrides: HashMap<Vec<GroupElem>, TargetValue> = HashMap::new();
        overrides.insert(at.values().to_vec(), value);
        Cocycle {
            domain: self.domain.clone(),
            target: self.target,
            degree: self.degree,
            rho: Rc::new(move |q| {
                overrides
                    .get(q.values())
                    .cloned()
                    .unwrap_or_else(|| inner(q))
            }),
        }
    }
}

/// ρ(q) = σ_{k+1}(g ∘ q): the coboundary of a vertex function.
pub fn coboundary_from(
    domain: FiniteAbelianGroup,
    target: TargetGroup,
    g: Rc<dyn Fn(&GroupElem) -> TargetValue>,
    degree: i64,
) -> Result<Cocycle, CocycleError> {
    Cocycle::new(
        domain,
        target,
        degree,
        Rc::new(move |q| target_gray_code(target, &q.map(|e| g(e)))),
    )
}

/// Builtin vertex functions for CLI runs: `linear:a={a}` (a·x/N into the
/// circle, or a·x mod m into Z_m), `random` (seeded), or explicit values.
pub fn vertex_fn_from_spec(
    domain: &FiniteAbelianGroup,
    target: TargetGroup,
    spec: &str,
    seed: u64,
) -> Result<Rc<dyn Fn(&GroupElem) -> TargetValue>, CocycleError> {
    let n = domain.order();
    if let Some(rest) = spec.strip_prefix("linear:a=") {
        let a: i64 = rest
            .parse()
            .map_err(|_| CocycleError::InvalidSpec(spec.to_string()))?;
        let domain = domain.clone();
        return Ok(match target {
            TargetGroup::Circle => Rc::new(move |e: &GroupElem| {
                let idx = domain.index_of(e) as i64;
                TargetValue::Circle(fract(&crate::rat::ratio(a * idx, n as i64)))
            }),
            TargetGroup::Cyclic(m) => Rc::new(move |e: &GroupElem| {
                let idx = domain.index_of(e) as i64;
                TargetValue::Cyclic((a * idx).rem_euclid(m as i64) as u64)
            }),
        });
    }
    if spec == "random" {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table: Vec<TargetValue> = (0..n)
            .map(|_| match target {
                TargetGroup::Circle => TargetValue::Circle(crate::rat::ratio(
                    rng.random_range(0..4096),
                    4096,
                )),
                TargetGroup::Cyclic(m) => TargetValue::Cyclic(rng.random_range(0..m)),
            })
            .collect();
        let domain = domain.clone();
        return Ok(Rc::new(move |e: &GroupElem| {
            table[domain.index_of(e) as usize].clone()
        }));
    }
    Err(CocycleError::InvalidSpec(spec.to_string()))
}

#[derive(Debug, Clone, Copy)]
pub enum CheckMode {
    Enumerate,
    Sample { count: u32 },
}

/// One violation record, with the offending cube in vertex order.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub axiom: &'static str,
    pub cube: serde_json::Value,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct AxiomReport {
    pub cubes_checked: u64,
    pub automorphisms_checked: u64,
    pub concatenations_checked: u64,
    pub violations: Vec<Violation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn adjacent_pair(
    domain: &FiniteAbelianGroup,
    x: &GroupElem,
    h1: &GroupElem,
    g1: &GroupElem,
    rest: &[GroupElem],
) -> (Cube<GroupElem>, Cube<GroupElem>, Cube<GroupElem>) {
    let mut hs1 = vec![h1.clone()];
    hs1.extend_from_slice(rest);
    let q1 = make_parallelepiped(domain, x, &hs1).expect("valid data");
    let y = domain.add(x, h1);
    let mut hs2 = vec![g1.clone()];
    hs2.extend_from_slice(rest);
    let q2 = make_parallelepiped(domain, &y, &hs2).expect("valid data");
    let mut hs3 = vec![domain.add(h1, g1)];
    hs3.extend_from_slice(rest);
    let q3 = make_parallelepiped(domain, x, &hs3).expect("valid data");
    (q1, q2, q3)
}

/// Checks the automorphism sign rule and concatenation additivity, either
/// exhaustively or on seeded samples. The empty report means pass.
pub fn check_cocycle_axioms(
    rho: &Cocycle,
    mode: CheckMode,
    seed: u64,
    budget: u64,
) -> Result<AxiomReport, CocycleError> {
    let n = rho.cube_dim();
    let domain = rho.domain.clone();
    let target = rho.target;
    let autos = CubeAutomorphism::enumerate(n);
    let mut report = AxiomReport::default();

    let check_auto = |q: &Cube<GroupElem>, report: &mut AxiomReport| {
        let base = rho.eval(q);
        for theta in &autos {
            let lhs = rho.eval(&q.compose_automorphism(theta));
            let rhs = if theta.reflection_count() % 2 == 0 {
                base.clone()
            } else {
                target.neg(&base)
            };
            report.automorphisms_checked += 1;
            if lhs != rhs {
                report.violations.push(Violation {
                    axiom: "automorphism",
                    cube: crate::cube::cube_to_json(q),
                    detail: format!(
                        "r = {}, got {}, expected {}",
                        theta.reflection_count(),
                        target.value_string(&lhs),
                        target.value_string(&rhs)
                    ),
                });
            }
        }
    };

    let check_concat =
        |q1: &Cube<GroupElem>, q2: &Cube<GroupElem>, q3: &Cube<GroupElem>, report: &mut AxiomReport| {
            let sum = target.add(&rho.eval(q1), &rho.eval(q2));
            let whole = rho.eval(q3);
            report.concatenations_checked += 1;
            if sum != whole {
                report.violations.push(Violation {
                    axiom: "concatenation",
                    cube: crate::cube::cube_to_json(q3),
                    detail: format!(
                        "ρ(q1)+ρ(q2) = {}, ρ(q3) = {}",
                        target.value_string(&sum),
                        target.value_string(&whole)
                    ),
                });
            }
        };

    match mode {
        CheckMode::Enumerate => {
            for q in enumerate_parallelepipeds(&domain, n, budget)? {
                report.cubes_checked += 1;
                check_auto(&q, &mut report);
            }
            if n >= 1 {
                // Adjacent pairs are parametrized by (x, h1, g1, shared rest).
                let required = parallelepiped_count(&domain, n).saturating_mul(domain.order() as u128);
                if required > budget as u128 {
                    return Err(CocycleError::Cube(CubeError::BudgetExceeded {
                        required,
                        budget,
                    }));
                }
                let order = domain.order();
                let rest_count = order.pow((n - 1) as u32);
                for xi in 0..order {
                    let x = domain.elem_at(xi);
                    for h1i in 0..order {
                        let h1 = domain.elem_at(h1i);
                        for g1i in 0..order {
                            let g1 = domain.elem_at(g1i);
                            for mut ri in 0..rest_count {
                                let rest: Vec<GroupElem> = (0..n - 1)
                                    .map(|_| {
                                        let e = domain.elem_at(ri % order);
                                        ri /= order;
                                        e
                                    })
                                    .collect();
                                let (q1, q2, q3) = adjacent_pair(&domain, &x, &h1, &g1, &rest);
                                check_concat(&q1, &q2, &q3, &mut report);
                            }
                        }
                    }
                }
            }
        }
        CheckMode::Sample { count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                let q = sample_parallelepiped(&domain, n, &mut rng);
                report.cubes_checked += 1;
                check_auto(&q, &mut report);
                if n >= 1 {
                    let x = domain.random_elem(&mut rng);
                    let h1 = domain.random_elem(&mut rng);
                    let g1 = domain.random_elem(&mut rng);
                    let rest: Vec<GroupElem> =
                        (0..n - 1).map(|_| domain.random_elem(&mut rng)).collect();
                    let (q1, q2, q3) = adjacent_pair(&domain, &x, &h1, &g1, &rest);
                    check_concat(&q1, &q2, &q3, &mut report);
                }
            }
        }
    }
    Ok(report)
}

/// d_1(0, ρ): the average metric distance of the cocycle values from zero.
pub fn d1_to_zero(
    rho: &Cocycle,
    mode: CheckMode,
    seed: u64,
    budget: u64,
) -> Result<f64, CocycleError> {
    let n = rho.cube_dim();
    let mut total = BigRational::zero();
    let mut count: u64 = 0;
    let zero = rho.target.zero();
    match mode {
        CheckMode::Enumerate => {
            for q in enumerate_parallelepipeds(&rho.domain, n, budget)? {
                total += rho.target.metric(&rho.eval(&q), &zero);
                count += 1;
            }
        }
        CheckMode::Sample { count: c } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..c {
                let q = sample_parallelepiped(&rho.domain, n, &mut rng);
                total += rho.target.metric(&rho.eval(&q), &zero);
                count += 1;
            }
        }
    }
    Ok(to_f64(&total) / count as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectRow {
    pub delta: f64,
    pub failure_fraction: f64,
    /// Empirically (δ,1)-quasi: failure fraction ≤ δ.
    pub quasi: bool,
    pub samples: u64,
}

/// Empirical (δ,1)-quasimorphism defect of a vertex function φ: X → A.
///
/// For each sampled (k+1)-cube the nearest-cube correction is explicit in the
/// abelian target: adjust the zero vertex by the Gray code. The image then
/// fails to be vertexwise within δ of the corrected cube exactly when
/// d_A(σ_{k+1}(φ∘q), 0) > δ.
pub fn quasimorphism_defect(
    domain: &FiniteAbelianGroup,
    target: TargetGroup,
    phi: &dyn Fn(&GroupElem) -> TargetValue,
    degree: usize,
    deltas: &[f64],
    mode: CheckMode,
    seed: u64,
    budget: u64,
) -> Result<Vec<DefectRow>, CocycleError> {
    let n = degree + 1;
    let mut dists: Vec<f64> = Vec::new();
    let zero = target.zero();
    let mut record = |q: &Cube<GroupElem>| {
        let image = q.map(|e| phi(e));
        let sigma = target_gray_code(target, &image);
        // The corrected cube has exact Gray code zero; only the zero vertex moves.
        debug_assert_eq!(
            target_gray_code(target, &{
                let mut vals = image.values().to_vec();
                vals[0] = target.sub(&vals[0], &sigma);
                Cube::new(n, vals).expect("length preserved")
            }),
            zero
        );
        dists.push(to_f64(&target.metric(&sigma, &zero)));
    };
    match mode {
        CheckMode::Enumerate => {
            for q in enumerate_parallelepipeds(domain, n, budget)? {
                record(&q);
            }
        }
        CheckMode::Sample { count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                record(&sample_parallelepiped(domain, n, &mut rng));
            }
        }
    }
    let total = dists.len() as u64;
    Ok(deltas
        .iter()
        .map(|&delta| {
            let failures = dists.iter().filter(|&&d| d > delta).count() as u64;
            let failure_fraction = failures as f64 / total as f64;
            DefectRow {
                delta,
                failure_fraction,
                quasi: failure_fraction <= delta,
                samples: total,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::ratio;

    fn z5() -> FiniteAbelianGroup {
        FiniteAbelianGroup::cyclic(5)
    }

    fn e1(x: u64) -> GroupElem {
        GroupElem(vec![x])
    }

    fn linear_fifth() -> Rc<dyn Fn(&GroupElem) -> TargetValue> {
        Rc::new(|e: &GroupElem| TargetValue::Circle(ratio(e.0[0] as i64, 5)))
    }

    #[test]
    fn coboundary_values() {
        let rho = coboundary_from(z5(), TargetGroup::Circle, linear_fifth(), 1).unwrap();
        // Genuine parallelepiped: Gray code vanishes.
        let q = make_parallelepiped(&z5(), &e1(0), &[e1(1), e1(2)]).unwrap();
        assert_eq!(rho.eval(&q), TargetValue::Circle(BigRational::zero()));
        // Non-parallelepiped vertex tuple (0,1,2,4): alternating sum 1/5.
        let q = Cube::new(2, vec![e1(0), e1(1), e1(2), e1(4)]).unwrap();
        assert_eq!(rho.eval(&q), TargetValue::Circle(ratio(1, 5)));

        let zero_fn: Rc<dyn Fn(&GroupElem) -> TargetValue> =
            Rc::new(|_| TargetValue::Circle(BigRational::zero()));
        let rho = coboundary_from(z5(), TargetGroup::Circle, zero_fn, 1).unwrap();
        let q = Cube::new(2, vec![e1(0), e1(1), e1(2), e1(4)]).unwrap();
        assert_eq!(rho.eval(&q), TargetValue::Circle(BigRational::zero()));
    }

    #[test]
    fn coboundaries_satisfy_axioms_exhaustively() {
        for k in [1i64, 2] {
            let rho =
                coboundary_from(z5(), TargetGroup::Circle, linear_fifth(), k).unwrap();
            let report =
                check_cocycle_axioms(&rho, CheckMode::Enumerate, 0, 100_000_000).unwrap();
            assert!(report.passed(), "violations: {:?}", report.violations);
        }
        // Z_3 with a cyclic target.
        let g3 = FiniteAbelianGroup::cyclic(3);
        let into_z6: Rc<dyn Fn(&GroupElem) -> TargetValue> =
            Rc::new(|e: &GroupElem| TargetValue::Cyclic(2 * e.0[0] % 6));
        let rho = coboundary_from(g3, TargetGroup::Cyclic(6), into_z6, 2).unwrap();
        let report = check_cocycle_axioms(&rho, CheckMode::Enumerate, 0, 100_000_000).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn perturbed_cocycle_fails_with_cube_cited() {
        let rho = coboundary_from(z5(), TargetGroup::Circle, linear_fifth(), 1).unwrap();
        let at = make_parallelepiped(&z5(), &e1(1), &[e1(1), e1(3)]).unwrap();
        let bad = rho.perturbed(at.clone(), TargetValue::Circle(ratio(1, 3)));
        let report = check_cocycle_axioms(&bad, CheckMode::Enumerate, 0, 100_000_000).unwrap();
        assert!(!report.passed());
        let cited = crate::cube::cube_to_json(&at).to_string();
        assert!(report
            .violations
            .iter()
            .any(|v| v.cube.to_string() == cited || v.detail.contains("1/3")));
    }

    #[test]
    fn constant_nonzero_fails_concatenation() {
        let rho = Cocycle::new(
            z5(),
            TargetGroup::Circle,
            1,
            Rc::new(|_| TargetValue::Circle(ratio(1, 3))),
        )
        .unwrap();
        let report = check_cocycle_axioms(&rho, CheckMode::Enumerate, 0, 100_000_000).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| v.axiom == "concatenation"));
    }

    #[test]
    fn degenerate_degree_minus_one_is_vacuous() {
        let rho = Cocycle::new(
            z5(),
            TargetGroup::Circle,
            -1,
            Rc::new(|q: &Cube<GroupElem>| TargetValue::Circle(ratio(q.value(0).0[0] as i64, 5))),
        )
        .unwrap();
        assert_eq!(rho.cube_dim(), 0);
        let report = check_cocycle_axioms(&rho, CheckMode::Enumerate, 0, 1000).unwrap();
        assert!(report.passed());
        assert_eq!(report.concatenations_checked, 0);
    }

    #[test]
    fn d1_examples() {
        let zero_fn: Rc<dyn Fn(&GroupElem) -> TargetValue> =
            Rc::new(|_| TargetValue::Circle(BigRational::zero()));
        let rho = coboundary_from(z5(), TargetGroup::Circle, zero_fn, 1).unwrap();
        assert_eq!(
            d1_to_zero(&rho, CheckMode::Enumerate, 0, 1_000_000).unwrap(),
            0.0
        );

        let half = Cocycle::new(
            z5(),
            TargetGroup::Circle,
            1,
            Rc::new(|_| TargetValue::Circle(ratio(1, 2))),
        )
        .unwrap();
        assert!(
            (d1_to_zero(&half, CheckMode::Enumerate, 0, 1_000_000).unwrap() - 0.5).abs() < 1e-15
        );

        // Coboundary of a random function: sampled average matches the full
        // 125-cube enumeration oracle.
        let g = vertex_fn_from_spec(&z5(), TargetGroup::Circle, "random", 99).unwrap();
        let rho = coboundary_from(z5(), TargetGroup::Circle, g, 1).unwrap();
        let exact = d1_to_zero(&rho, CheckMode::Enumerate, 0, 1_000_000).unwrap();
        let mut manual = BigRational::zero();
        let mut count = 0u64;
        for q in enumerate_parallelepipeds(&z5(), 2, 1_000_000).unwrap() {
            manual += rho
                .target()
                .metric(&rho.eval(&q), &rho.target().zero());
            count += 1;
        }
        assert!((exact - to_f64(&manual) / count as f64).abs() < 1e-15);
    }

    #[test]
    fn d1_vanishes_iff_function_is_polynomial() {
        // Degree-1 coboundary of a linear map vanishes identically.
        let rho = coboundary_from(z5(), TargetGroup::Circle, linear_fifth(), 1).unwrap();
        assert_eq!(
            d1_to_zero(&rho, CheckMode::Enumerate, 0, 1_000_000).unwrap(),
            0.0
        );
        // A generic function does not.
        let g = vertex_fn_from_spec(&z5(), TargetGroup::Circle, "random", 3).unwrap();
        let rho = coboundary_from(z5(), TargetGroup::Circle, g, 1).unwrap();
        assert!(d1_to_zero(&rho, CheckMode::Enumerate, 0, 1_000_000).unwrap() > 0.0);
    }

    #[test]
    fn defect_of_genuine_morphism_is_zero() {
        let phi = linear_fifth();
        let rows = quasimorphism_defect(
            &z5(),
            TargetGroup::Circle,
            &*phi,
            1,
            &[0.5, 0.1, 0.01, 0.0],
            CheckMode::Enumerate,
            0,
            1_000_000,
        )
        .unwrap();
        for row in rows {
            assert_eq!(row.failure_fraction, 0.0);
            assert!(row.quasi);
        }
    }

    #[test]
    fn defect_of_pointwise_perturbation_counts_incidences() {
        // φ = x/5, shifted by 1/100 at the point x₀ = 2.
        let eps = ratio(1, 100);
        let phi = move |e: &GroupElem| {
            let base = ratio(e.0[0] as i64, 5);
            if e.0[0] == 2 {
                TargetValue::Circle(fract(&(base + &eps)))
            } else {
                TargetValue::Circle(base)
            }
        };
        let rows = quasimorphism_defect(
            &z5(),
            TargetGroup::Circle,
            &phi,
            1,
            &[0.001],
            CheckMode::Enumerate,
            0,
            1_000_000,
        )
        .unwrap();
        // Independent incidence count: cubes whose signed count of visits to
        // x₀ = 2 is nonzero.
        let mut expected = 0u64;
        let mut total = 0u64;
        for q in enumerate_parallelepipeds(&z5(), 2, 1_000_000).unwrap() {
            let mut net = 0i64;
            for (v, val) in q.values().iter().enumerate() {
                if val.0[0] == 2 {
                    net += if vertex_weight(v) % 2 == 0 { 1 } else { -1 };
                }
            }
            if net != 0 {
                expected += 1;
            }
            total += 1;
        }
        assert_eq!(total, 125);
        assert!((rows[0].failure_fraction - expected as f64 / 125.0).abs() < 1e-15);
    }

    #[test]
    fn random_map_has_large_defect() {
        let g = vertex_fn_from_spec(&z5(), TargetGroup::Circle, "random", 17).unwrap();
        let rows = quasimorphism_defect(
            &z5(),
            TargetGroup::Circle,
            &*g,
            1,
            &[0.01],
            CheckMode::Sample { count: 2000 },
            4,
            1_000_000,
        )
        .unwrap();
        assert!(rows[0].failure_fraction > 0.5);
        assert!(!rows[0].quasi);
    }
}
