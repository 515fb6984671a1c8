//! Coset nilspaces G/Γ at desk scale: canonical fundamental-domain reduction,
//! p-periodicity checks, nilsequence evaluation and correlation, the
//! constructive polynomial lift of morphisms Z_N → G/Γ, and a sampled
//! morphism certificate for maps into coset nilspaces.

use crate::cube::{vertex_weight, Cube};
use crate::expr::{Expr, ExprError};
use crate::filtered::{
    Carrier, Element, Filtration, FilteredError, Level, PolySeq,
};
use crate::gowers::{GowersError, Signal};
use crate::group::FiniteAbelianGroup;
use crate::rat::{binom, fract, is_integer, to_f64};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::complex::Complex64;
use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NilError {
    #[error("coordinates must lie in [0,1): {0}")]
    NotReduced(String),
    #[error("lift fitting failed at filtration level {level}")]
    LiftFitFailure { level: usize },
    #[error("lift residual at n = {n} is not a lattice element")]
    ResidualNotInLattice { n: i64 },
    #[error("lift verification failed at n = {n}")]
    LiftVerificationFailed { n: i64 },
    #[error("unsupported quotient at level {0} for this carrier")]
    UnsupportedQuotient(usize),
    #[error("output function sup-bound {0} exceeds 1")]
    SupBoundExceeded(f64),
    #[error("declared Lipschitz constant {0} fails sampled difference quotients")]
    LipschitzViolated(f64),
    #[error("signal group order {signal} does not match nilsequence period {period}")]
    PeriodMismatch { signal: u64, period: u64 },
    #[error("polynomial sequence is not {0}-periodic mod the lattice")]
    NotPeriodic(u64),
    #[error("invalid nilsequence spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Filtered(#[from] FilteredError),
    #[error(transparent)]
    Gowers(#[from] GowersError),
}

/// The integer-point lattice of a carrier (Z^m, or integer-entry
/// unitriangular matrices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    carrier: Carrier,
}

impl Lattice {
    pub fn new(carrier: Carrier) -> Self {
        Self { carrier }
    }

    pub fn member(&self, e: &Element) -> bool {
        self.carrier.contains(e) && e.coords().iter().all(is_integer)
    }

    /// Γ_i = Γ ∩ G_i.
    pub fn member_at_level(&self, filt: &Filtration, i: usize, e: &Element) -> bool {
        self.member(e) && filt.member(i, e)
    }
}

/// Canonical coset representative with Mal'cev coordinates in [0,1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NilPoint {
    coords: Vec<BigRational>,
}

impl NilPoint {
    pub fn new(coords: Vec<BigRational>) -> Result<Self, NilError> {
        for c in &coords {
            if c < &BigRational::zero() || c >= &BigRational::one() {
                return Err(NilError::NotReduced(crate::rat::ratio_to_string(c)));
            }
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[BigRational] {
        &self.coords
    }

    pub fn coords_f64(&self) -> Vec<f64> {
        self.coords.iter().map(to_f64).collect()
    }

    pub fn to_element(&self, carrier: Carrier) -> Element {
        carrier
            .from_coords(self.coords.clone())
            .expect("coordinate count fixed by carrier")
    }
}

/// Reduces g to its canonical representative: returns (rep, γ) with
/// g = rep·γ exactly and rep coordinates in [0,1). Heisenberg coordinates are
/// reduced in the order x, then y, then z.
pub fn reduce_mod_gamma(carrier: Carrier, g: &Element) -> (NilPoint, Element) {
    match g {
        Element::Abelian(v) => {
            let rep: Vec<BigRational> = v.iter().map(fract).collect();
            let gamma: Vec<BigRational> =
                v.iter().map(|c| BigRational::from(crate::rat::floor_int(c))).collect();
            (
                NilPoint { coords: rep },
                Element::Abelian(gamma),
            )
        }
        Element::Heisenberg { x, y, z } => {
            let a = -BigRational::from(crate::rat::floor_int(x));
            let b = -BigRational::from(crate::rat::floor_int(y));
            let t = z + x * &b;
            let c = -BigRational::from(crate::rat::floor_int(&t));
            let delta = Element::heis(a, b, c);
            let rep = carrier.mul(g, &delta);
            let gamma = carrier.inv(&delta);
            (
                NilPoint {
                    coords: rep.coords(),
                },
                gamma,
            )
        }
    }
}

/// reduce(g) as a point only.
pub fn reduce(carrier: Carrier, g: &Element) -> NilPoint {
    reduce_mod_gamma(carrier, g).0
}

/// Window test: g(n)^{-1}·g(n+p) ∈ Γ for all n in [−window, window].
pub fn p_periodic_window(g: &PolySeq, p: u64, window: u32) -> bool {
    let carrier = g.filtration().carrier();
    let lattice = Lattice::new(carrier);
    for n in -(window as i64)..=window as i64 {
        let q = carrier.mul(&carrier.inv(&g.eval(n)), &g.eval(n + p as i64));
        if !lattice.member(&q) {
            return false;
        }
    }
    true
}

/// Exact algebraic test for abelian carriers: the difference polynomial
/// n ↦ g(n+p) − g(n) is integer-valued iff all its iterated differences at 0
/// are integral. Returns None for non-abelian carriers.
pub fn p_periodic_algebraic(g: &PolySeq, p: u64) -> Option<bool> {
    let dim = match g.filtration().carrier() {
        Carrier::Abelian { dim } => dim,
        Carrier::Heisenberg => return None,
    };
    let k = g.filtration().degree();
    let mut rows: Vec<Vec<BigRational>> = (0..=k as i64)
        .map(|n| {
            let a = g.eval(n + p as i64).coords();
            let b = g.eval(n).coords();
            (0..dim).map(|i| &a[i] - &b[i]).collect()
        })
        .collect();
    // Newton coefficients of an integer-valued polynomial are integers.
    for _ in 0..=k {
        if !rows[0].iter().all(is_integer) {
            return Some(false);
        }
        for r in 0..rows.len() - 1 {
            rows[r] = rows[r + 1]
                .iter()
                .zip(&rows[r])
                .map(|(a, b)| a - b)
                .collect();
        }
        rows.pop();
        if rows.is_empty() {
            break;
        }
    }
    Some(true)
}

/// g(n)^{-1}·g(n+p) ∈ Γ for all n: window test, cross-checked against the
/// exact algebraic test on abelian carriers (the two provably agree once the
/// window covers the degree).
pub fn is_p_periodic(g: &PolySeq, p: u64, window: u32) -> bool {
    let w = p_periodic_window(g, p, window);
    if let Some(a) = p_periodic_algebraic(g, p) {
        debug_assert_eq!(w, a, "window and algebraic periodicity tests disagree");
    }
    w
}

/// A nilsequence: polynomial orbit, closed-form 1-bounded output function,
/// and declared period.
#[derive(Debug, Clone)]
pub struct Nilsequence {
    poly: PolySeq,
    expr: Expr,
    lipschitz: Option<f64>,
    period: u64,
}

impl Nilsequence {
    pub fn new(
        poly: PolySeq,
        expr: Expr,
        lipschitz: Option<f64>,
        period: u64,
    ) -> Result<Self, NilError> {
        let dim = poly.filtration().carrier().coord_dim();
        expr.validate(dim)?;
        let bound = expr.sup_bound();
        if bound > 1.0 + 1e-12 {
            return Err(NilError::SupBoundExceeded(bound));
        }
        if let Some(l) = lipschitz {
            if !crate::expr::spot_check_lipschitz(&expr, dim, l, 256, 0x1157) {
                return Err(NilError::LipschitzViolated(l));
            }
        }
        Ok(Self {
            poly,
            expr,
            lipschitz,
            period,
        })
    }

    pub fn poly(&self) -> &PolySeq {
        &self.poly
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn point(&self, n: i64) -> NilPoint {
        reduce(self.poly.filtration().carrier(), &self.poly.eval(n))
    }

    /// F(g(n)Γ).
    pub fn eval(&self, n: i64) -> Complex64 {
        self.expr.eval(&self.point(n).coords_f64())
    }
}

/// Serialized nilsequence description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NilsequenceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier: Option<String>,
    pub filtration: String,
    pub coefficients: Vec<Vec<String>>,
    #[serde(rename = "F")]
    pub f: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    pub period: u64,
}

impl NilsequenceSpec {
    pub fn build(&self) -> Result<Nilsequence, NilError> {
        let filt = Filtration::parse(&self.filtration)?;
        if let Some(c) = &self.carrier {
            let ok = match (c.as_str(), filt.carrier()) {
                ("heisenberg" | "heis", Carrier::Heisenberg) => true,
                (s, Carrier::Abelian { dim }) => {
                    s == "abelian" || s == &format!("abelian:m={dim}")
                }
                _ => false,
            };
            if !ok {
                return Err(NilError::InvalidSpec(format!(
                    "carrier `{c}` does not match filtration `{}`",
                    self.filtration
                )));
            }
        }
        let carrier = filt.carrier();
        let coeffs: Vec<Element> = self
            .coefficients
            .iter()
            .map(|coords| {
                let parsed: Result<Vec<BigRational>, _> =
                    coords.iter().map(|s| crate::rat::parse_ratio(s)).collect();
                let parsed = parsed
                    .map_err(|e| NilError::InvalidSpec(e.to_string()))?;
                carrier
                    .from_coords(parsed)
                    .map_err(NilError::Filtered)
            })
            .collect::<Result<_, _>>()?;
        let poly = PolySeq::new(filt, coeffs)?;
        let expr = Expr::parse(&self.f)?;
        Nilsequence::new(poly, expr, self.lipschitz, self.period)
    }

    pub fn from_nilsequence(ns: &Nilsequence, filtration: String) -> Self {
        Self {
            carrier: None,
            filtration,
            coefficients: ns
                .poly()
                .coeffs()
                .iter()
                .map(Element::coord_strings)
                .collect(),
            f: format!("{:?}", ns.expr()),
            lipschitz: ns.lipschitz(),
            period: ns.period(),
        }
    }
}

/// Result of correlating a signal against a nilsequence.
#[derive(Debug, Clone)]
pub struct Correlation {
    pub value: Complex64,
    /// Declared period matches the signal and the orbit is actually periodic.
    pub period_ok: bool,
}

/// E_{x ∈ Z_p} f(x)·conj(F(g(x)Γ)). Under `strict`, period problems are
/// errors; otherwise they are reported in the result.
pub fn correlate(f: &Signal, ns: &Nilsequence, strict: bool) -> Result<Correlation, NilError> {
    let p = f.group().order();
    let declared_ok = ns.period() == p;
    let periodic = declared_ok && is_p_periodic(ns.poly(), p, p.min(64) as u32);
    if strict && !declared_ok {
        return Err(NilError::PeriodMismatch {
            signal: p,
            period: ns.period(),
        });
    }
    if strict && !periodic {
        return Err(NilError::NotPeriodic(p));
    }
    let terms: Vec<Complex64> = (0..p)
        .map(|x| f.values()[x as usize] * ns.eval(x as i64).conj())
        .collect();
    let value = crate::gowers::pairwise_sum(&terms) / p as f64;
    Ok(Correlation {
        value,
        period_ok: declared_ok && periodic,
    })
}

/// The abelian quotient A_j = G_jΓ/G_{j+1}Γ used by the lift's descending
/// induction, realized as a torus of explicit coordinates.
enum QuotientTorus {
    Trivial,
    /// Indices of the element coordinates that survive, with torus values.
    Coords(Vec<usize>),
}

fn quotient_at(filt: &Filtration, j: usize) -> Result<QuotientTorus, NilError> {
    let this = filt.level(j);
    let next = filt.level(j + 1);
    match (filt.carrier(), this, next) {
        (_, a, b) if a == b => Ok(QuotientTorus::Trivial),
        (Carrier::Abelian { dim }, Level::Full, Level::Trivial) => {
            Ok(QuotientTorus::Coords((0..dim).collect()))
        }
        (Carrier::Heisenberg, Level::Full, Level::Center) => {
            Ok(QuotientTorus::Coords(vec![0, 1]))
        }
        (Carrier::Heisenberg, Level::Center, Level::Trivial) => {
            Ok(QuotientTorus::Coords(vec![2]))
        }
        _ => Err(NilError::UnsupportedQuotient(j)),
    }
}

/// Projects a residual class to the quotient torus; fails when the class does
/// not lie in G_jΓ/Γ (which signals that φ is not a morphism).
fn project_to_quotient(
    carrier: Carrier,
    filt: &Filtration,
    j: usize,
    coords: &[usize],
    e: &Element,
) -> Result<Vec<BigRational>, NilError> {
    let rep = reduce(carrier, e);
    // The canonical representative of a class in G_jΓ/Γ has zero coordinates
    // wherever G_j constrains them (Heisenberg center: x = y = 0).
    if matches!(filt.level(j), Level::Center) {
        let c = rep.coords();
        if !c[0].is_zero() || !c[1].is_zero() {
            return Err(NilError::LiftFitFailure { level: j });
        }
    }
    Ok(coords.iter().map(|&i| rep.coords()[i].clone()).collect())
}

/// Constructive lift: given φ: Z_N → G/Γ as canonical points, produces a
/// polynomial sequence g with reduce(g(n)) = φ(n mod N) on [0, 2N).
///
/// Descending induction on filtration levels: on each abelian quotient
/// A_j = G_jΓ/G_{j+1}Γ, fit the degree-≤j polynomial from finite differences,
/// choose coefficient representatives with minimal canonical coordinates,
/// divide out, and recurse.
pub fn lift_morphism(phi: &[NilPoint], filt: &Filtration) -> Result<PolySeq, NilError> {
    let carrier = filt.carrier();
    let n_points = phi.len();
    if n_points == 0 {
        return Err(NilError::InvalidSpec("empty morphism table".into()));
    }
    for p in phi {
        if p.coords().len() != carrier.coord_dim() {
            return Err(NilError::InvalidSpec(
                "morphism point dimension mismatch".into(),
            ));
        }
    }
    let window = 2 * n_points as i64;
    let k = filt.degree();
    let lattice = Lattice::new(carrier);

    let mut residual: Vec<Element> = (0..window)
        .map(|n| phi[(n as usize) % n_points].to_element(carrier))
        .collect();
    let mut alphas: Vec<PolySeq> = Vec::new();

    for j in 0..=k {
        let coords = match quotient_at(filt, j)? {
            QuotientTorus::Trivial => continue,
            QuotientTorus::Coords(c) => c,
        };
        let values: Vec<Vec<BigRational>> = residual
            .iter()
            .map(|e| project_to_quotient(carrier, filt, j, &coords, e))
            .collect::<Result<_, _>>()?;
        // Newton coefficients in the torus from differences at 0..j.
        let mut diff = values.clone();
        let mut taylor: Vec<Vec<BigRational>> = Vec::with_capacity(j + 1);
        for _ in 0..=j {
            taylor.push(diff[0].iter().map(fract).collect());
            for r in 0..diff.len() - 1 {
                diff[r] = diff[r + 1]
                    .iter()
                    .zip(&diff[r])
                    .map(|(a, b)| fract(&(a - b)))
                    .collect();
            }
            diff.pop();
        }
        // The fit must reproduce the projected residual on the whole window.
        for (n, row) in values.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                let mut acc = BigRational::zero();
                for (l, t) in taylor.iter().enumerate() {
                    acc += &t[i] * BigRational::from(binom(n as i64, l as u32));
                }
                if fract(&(v - &acc)) != BigRational::zero() {
                    return Err(NilError::LiftFitFailure { level: j });
                }
            }
        }
        // Representatives with minimal canonical coordinates.
        let coeffs: Vec<Element> = taylor
            .iter()
            .map(|t| {
                let mut full = vec![BigRational::zero(); carrier.coord_dim()];
                for (slot, v) in coords.iter().zip(t) {
                    full[*slot] = v.clone();
                }
                carrier.from_coords(full).expect("dimension fixed")
            })
            .collect();
        let alpha = PolySeq::new(filt.clone(), coeffs)?;
        for (n, r) in residual.iter_mut().enumerate() {
            let a = alpha.eval(n as i64);
            *r = carrier.mul(&carrier.inv(&a), r);
        }
        alphas.push(alpha);
    }

    for (n, r) in residual.iter().enumerate() {
        if !lattice.member(r) {
            return Err(NilError::ResidualNotInLattice { n: n as i64 });
        }
    }

    // Combine the per-level factors and recover Taylor form from values.
    let combined = |n: i64| -> Element {
        let mut acc = carrier.identity();
        for a in &alphas {
            acc = carrier.mul(&acc, &a.eval(n));
        }
        acc
    };
    let values: Vec<Element> = (0..=k as i64).map(combined).collect();
    let g = PolySeq::taylor_from_values(filt.clone(), &values)?;

    for n in 0..window {
        if reduce(carrier, &g.eval(n)) != phi[(n as usize) % n_points] {
            return Err(NilError::LiftVerificationFailed { n });
        }
    }
    Ok(g)
}

/// Coset-cube membership: greedy face peeling where each forced factor is
/// corrected by the canonical lattice reduction before the level test.
pub fn coset_cube_membership(q: &Cube<Element>, filt: &Filtration) -> bool {
    let carrier = filt.carrier();
    let lattice = Lattice::new(carrier);
    let n = q.dim();
    let mut order: Vec<usize> = (0..1usize << n).collect();
    order.sort_by_key(|&v| (vertex_weight(v), v));
    let mut residual: Vec<Element> = q.values().to_vec();
    for v in order {
        let level = filt.level(vertex_weight(v) as usize);
        let factor = match level {
            Level::Full => residual[v].clone(),
            Level::Center => {
                let rep = reduce(carrier, &residual[v]);
                let c = rep.coords();
                if !c[0].is_zero() || !c[1].is_zero() {
                    return false;
                }
                rep.to_element(carrier)
            }
            Level::Trivial => {
                if !lattice.member(&residual[v]) {
                    return false;
                }
                carrier.identity()
            }
        };
        let inv = carrier.inv(&factor);
        for (w, r) in residual.iter_mut().enumerate() {
            if w & v == v {
                *r = carrier.mul(&inv, r);
            }
        }
    }
    true
}

/// One-sided sampled morphism certificate: standard cubes on Z_N are pushed
/// through φ, lifted vertexwise, and tested for coset-cube membership.
pub fn morphism_check(
    phi: &[NilPoint],
    filt: &Filtration,
    n_dim: usize,
    samples: u32,
    seed: u64,
) -> bool {
    assert!(n_dim <= 3, "morphism_check supports cube dimension ≤ 3");
    let n_points = phi.len() as u64;
    let carrier = filt.carrier();
    let group = FiniteAbelianGroup::cyclic(n_points);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let q = crate::cube::sample_parallelepiped(&group, n_dim, &mut rng);
        let lifted = q.map(|e| phi[e.0[0] as usize].to_element(carrier));
        if !coset_cube_membership(&lifted, filt) {
            return false;
        }
    }
    true
}

/// Builds the canonical point table of π_Γ ∘ g on Z_N.
pub fn orbit_points(g: &PolySeq, n_points: u64) -> Vec<NilPoint> {
    let carrier = g.filtration().carrier();
    (0..n_points as i64)
        .map(|n| reduce(carrier, &g.eval(n)))
        .collect()
}

/// Generates a seeded p-periodic polynomial sequence (p an odd prime) for the
/// given filtration; coefficients have denominators built from p so that
/// g(n)^{-1} g(n+p) ∈ Γ holds identically.
pub fn random_p_periodic<R: Rng>(filt: &Filtration, p: u64, rng: &mut R) -> PolySeq {
    let carrier = filt.carrier();
    let pi = p as i64;
    match carrier {
        Carrier::Abelian { dim } => {
            let k = filt.degree();
            let coeffs: Vec<Element> = (0..=k)
                .map(|_| {
                    Element::Abelian(
                        (0..dim)
                            .map(|_| {
                                crate::rat::ratio(rng.random_range(0..pi), pi)
                                    + crate::rat::int(rng.random_range(-2..=2))
                            })
                            .collect(),
                    )
                })
                .collect();
            PolySeq::new(filt.clone(), coeffs).expect("abelian coefficients are unrestricted")
        }
        Carrier::Heisenberg => {
            // x, y parts take denominators p; the z parts absorb the
            // correction terms that the group law introduces.
            let a0 = rng.random_range(0..pi);
            let b0 = rng.random_range(0..pi);
            let c0 = rng.random_range(0..pi);
            let a1 = rng.random_range(0..pi);
            let b1 = rng.random_range(0..pi);
            let c1 = rng.random_range(0..pi);
            let c2 = rng.random_range(0..pi);
            let g0 = Element::heis(
                crate::rat::ratio(a0, pi),
                crate::rat::ratio(b0, pi),
                crate::rat::ratio(c0, pi),
            );
            let z1 = crate::rat::ratio(c1, pi)
                - BigRational::new(
                    BigInt::from((pi - 1) * a1 * b1),
                    BigInt::from(2 * pi * pi),
                );
            let g1 = Element::heis(crate::rat::ratio(a1, pi), crate::rat::ratio(b1, pi), z1);
            let g2 = Element::heis(
                BigRational::zero(),
                BigRational::zero(),
                crate::rat::ratio(c2, pi),
            );
            PolySeq::new(filt.clone(), vec![g0, g1, g2])
                .expect("coefficients match the lower central series")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{int, ratio};

    #[test]
    fn reduction_examples() {
        let c = Carrier::Abelian { dim: 1 };
        let (rep, gamma) = reduce_mod_gamma(c, &Element::Abelian(vec![ratio(7, 5)]));
        assert_eq!(rep.coords(), &[ratio(2, 5)]);
        assert_eq!(gamma, Element::Abelian(vec![int(1)]));

        let h = Carrier::Heisenberg;
        let (rep, _) = reduce_mod_gamma(h, &h.identity());
        assert_eq!(rep.coords(), &[int(0), int(0), int(0)]);

        let g = Element::heis(ratio(3, 2), int(1), ratio(5, 4));
        let (rep, gamma) = reduce_mod_gamma(h, &g);
        assert_eq!(rep.coords()[0], ratio(1, 2));
        assert_eq!(rep.coords()[1], int(0));
        assert!(rep.coords()[2] >= int(0) && rep.coords()[2] < int(1));
        // g = rep·γ exactly.
        assert_eq!(h.mul(&rep.to_element(h), &gamma), g);
    }

    #[test]
    fn reduction_idempotent_and_gamma_invariant() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for carrier in [Carrier::Abelian { dim: 2 }, Carrier::Heisenberg] {
            for _ in 0..1000 {
                let g = carrier.random_element(&mut rng, 9, 7);
                let (rep, gamma) = reduce_mod_gamma(carrier, &g);
                // Exactness of the decomposition.
                assert_eq!(carrier.mul(&rep.to_element(carrier), &gamma), g);
                // Idempotence.
                let again = reduce(carrier, &rep.to_element(carrier));
                assert_eq!(again, rep);
                // Right Γ-invariance.
                let noise = match carrier {
                    Carrier::Abelian { dim } => Element::Abelian(
                        (0..dim).map(|_| int(rng.random_range(-3..=3))).collect(),
                    ),
                    Carrier::Heisenberg => Element::heis(
                        int(rng.random_range(-3..=3)),
                        int(rng.random_range(-3..=3)),
                        int(rng.random_range(-3..=3)),
                    ),
                };
                let moved = carrier.mul(&g, &noise);
                assert_eq!(reduce(carrier, &moved), rep);
            }
        }
    }

    fn quadratic_over_5() -> PolySeq {
        // n²/5 in Taylor form: n/5 + 2·binom(n,2)/5.
        PolySeq::new(
            Filtration::abelian(1, 2),
            vec![
                Element::Abelian(vec![int(0)]),
                Element::Abelian(vec![ratio(1, 5)]),
                Element::Abelian(vec![ratio(2, 5)]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn periodicity_examples() {
        let g = quadratic_over_5();
        assert!(is_p_periodic(&g, 5, 12));
        assert!(!is_p_periodic(&g, 3, 12));
        assert_eq!(p_periodic_algebraic(&g, 5), Some(true));
        assert_eq!(p_periodic_algebraic(&g, 3), Some(false));

        let c = PolySeq::constant(
            Filtration::abelian(1, 2),
            Element::Abelian(vec![ratio(1, 3)]),
        )
        .unwrap();
        for p in 1..=6 {
            assert!(is_p_periodic(&c, p, 8));
        }
    }

    #[test]
    fn window_and_algebraic_agree_on_random_instances() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let filt = Filtration::abelian(1, 3);
        for _ in 0..200 {
            let p = *[5u64, 7, 31].iter().nth(rng.random_range(0..3)).unwrap();
            // Half the instances use denominator p (periodic), half use a
            // coprime denominator (designed failures).
            let denom = if rng.random::<bool>() { p as i64 } else { p as i64 + 1 };
            let coeffs: Vec<Element> = (0..=3)
                .map(|_| Element::Abelian(vec![ratio(rng.random_range(0..denom), denom)]))
                .collect();
            let g = PolySeq::new(filt.clone(), coeffs).unwrap();
            let w = p_periodic_window(&g, p, 2 * p as u32);
            let a = p_periodic_algebraic(&g, p).unwrap();
            assert_eq!(w, a);
        }
    }

    #[test]
    fn heisenberg_generator_is_p_periodic() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let filt = Filtration::heisenberg_lcs();
        for p in [5u64, 7, 31] {
            for _ in 0..20 {
                let g = random_p_periodic(&filt, p, &mut rng);
                assert!(p_periodic_window(&g, p, 2 * p as u32));
            }
        }
    }

    #[test]
    fn nilsequence_eval_examples() {
        let ns = Nilsequence::new(
            quadratic_over_5(),
            Expr::parse("e(t0)").unwrap(),
            None,
            5,
        )
        .unwrap();
        for n in 0..10i64 {
            let expect = Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * ((n * n).rem_euclid(5) as f64) / 5.0,
            );
            assert!((ns.eval(n) - expect).norm() < 1e-12);
        }

        let one = Nilsequence::new(
            quadratic_over_5(),
            Expr::parse("1").unwrap(),
            None,
            5,
        )
        .unwrap();
        assert!((one.eval(3) - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        let too_big = Nilsequence::new(
            quadratic_over_5(),
            Expr::parse("2*e(t0)").unwrap(),
            None,
            5,
        );
        assert!(matches!(too_big, Err(NilError::SupBoundExceeded(_))));
    }

    #[test]
    fn heisenberg_nilsequence_composes_with_reduction() {
        let filt = Filtration::heisenberg_lcs();
        let x = Element::heis(int(1), int(0), int(0));
        let z = Element::heis(int(0), int(0), int(1));
        let g = PolySeq::new(filt, vec![Carrier::Heisenberg.identity(), x, z]).unwrap();
        let ns = Nilsequence::new(
            g.clone(),
            Expr::parse("e(t2)*tent(t0)*tent(t1)").unwrap(),
            None,
            1,
        )
        .unwrap();
        // g(2) = X²Z reduces to the identity coset point.
        let pt = ns.point(2);
        let coords = pt.coords_f64();
        let expr = Expr::parse("e(t2)*tent(t0)*tent(t1)").unwrap();
        assert!((ns.eval(2) - expr.eval(&coords)).norm() < 1e-15);
    }

    #[test]
    fn correlation_examples() {
        let group = FiniteAbelianGroup::cyclic(5);
        let f = Signal::quad_phase(group.clone(), 1).unwrap();
        let ns = Nilsequence::new(
            quadratic_over_5(),
            Expr::parse("e(t0)").unwrap(),
            None,
            5,
        )
        .unwrap();
        let c = correlate(&f, &ns, true).unwrap();
        assert!((c.value - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(c.period_ok);

        // Character against the quadratic orbit: a complete Gauss-type sum of
        // magnitude 5^{-1/2}; oracle is direct summation.
        let chi = Signal::character(group, &[1]).unwrap();
        let c = correlate(&chi, &ns, true).unwrap();
        let mut direct = Complex64::new(0.0, 0.0);
        for x in 0..5i64 {
            direct += chi.values()[x as usize] * ns.eval(x).conj();
        }
        direct /= 5.0;
        assert!((c.value - direct).norm() < 1e-12);
        assert!((c.value.norm() - 5f64.powf(-0.5)).abs() < 1e-12);

        // Mismatched period: strict errors, relaxed reports.
        let wrong = Signal::quad_phase(FiniteAbelianGroup::cyclic(7), 1).unwrap();
        assert!(correlate(&wrong, &ns, true).is_err());
        let c = correlate(&wrong, &ns, false).unwrap();
        assert!(!c.period_ok);
    }

    #[test]
    fn lift_round_trip_abelian_quadratic() {
        let g = quadratic_over_5();
        let phi = orbit_points(&g, 5);
        let lifted = lift_morphism(&phi, g.filtration()).unwrap();
        for n in 0..10i64 {
            assert_eq!(
                reduce(Carrier::Abelian { dim: 1 }, &lifted.eval(n)),
                phi[(n % 5) as usize]
            );
        }
    }

    #[test]
    fn lift_constant_morphism() {
        let filt = Filtration::abelian(2, 2);
        let pt = NilPoint::new(vec![ratio(1, 3), ratio(2, 7)]).unwrap();
        let phi = vec![pt.clone(); 4];
        let g = lift_morphism(&phi, &filt).unwrap();
        assert_eq!(reduce(filt.carrier(), &g.eval(9)), pt);
        for c in g.coeffs().iter().skip(1) {
            assert_eq!(c, &filt.carrier().identity());
        }
    }

    #[test]
    fn lift_round_trip_heisenberg() {
        use rand::SeedableRng;
        let filt = Filtration::heisenberg_lcs();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [5u64, 7] {
            for _ in 0..20 {
                let g = random_p_periodic(&filt, p, &mut rng);
                let phi = orbit_points(&g, p);
                let lifted = lift_morphism(&phi, &filt).unwrap();
                for n in 0..2 * p as i64 {
                    assert_eq!(
                        reduce(Carrier::Heisenberg, &lifted.eval(n)),
                        phi[(n % p as i64) as usize],
                        "p={p} n={n}"
                    );
                }
                // Lifted sequences of genuinely periodic data stay periodic.
                assert!(p_periodic_window(&lifted, p, p as u32));
            }
        }
    }

    #[test]
    fn lift_rejects_non_morphisms() {
        let filt = Filtration::abelian(1, 1);
        // A map whose differences are not affine mod 1.
        let phi: Vec<NilPoint> = [0i64, 1, 3, 1]
            .iter()
            .map(|&v| NilPoint::new(vec![ratio(v, 5)]).unwrap())
            .collect();
        assert!(lift_morphism(&phi, &filt).is_err());
    }

    #[test]
    fn morphism_check_accepts_orbits_and_constants() {
        let g = quadratic_over_5();
        let phi = orbit_points(&g, 5);
        assert!(morphism_check(&phi, g.filtration(), 3, 100, 3));

        let pt = NilPoint::new(vec![ratio(2, 5)]).unwrap();
        let constant = vec![pt; 5];
        assert!(morphism_check(&constant, &Filtration::abelian(1, 2), 3, 100, 4));

        let filt = Filtration::heisenberg_lcs();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = random_p_periodic(&filt, 7, &mut rng);
        let phi = orbit_points(&h, 7);
        assert!(morphism_check(&phi, &filt, 3, 60, 5));
    }

    #[test]
    fn morphism_check_rejects_random_maps() {
        use rand::SeedableRng;
        let filt = Filtration::abelian(1, 1);
        let mut rejected = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi: Vec<NilPoint> = (0..7)
                .map(|_| {
                    NilPoint::new(vec![ratio(rng.random_range(0..97), 97)]).unwrap()
                })
                .collect();
            if !morphism_check(&phi, &filt, 2, 200, seed + 1000) {
                rejected += 1;
            }
        }
        assert!(rejected >= 99, "only {rejected}/100 random maps rejected");
    }

    #[test]
    fn nilsequence_spec_round_trip() {
        let json = r#"{
            "filtration": "abelian:m=1,deg=2",
            "coefficients": [["0"], ["1/5"], ["2/5"]],
            "F": "e(t0)",
            "period": 5
        }"#;
        let spec: NilsequenceSpec = serde_json::from_str(json).unwrap();
        let ns = spec.build().unwrap();
        assert_eq!(ns.period(), 5);
        assert!((ns.eval(2)
            - Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 4.0 / 5.0))
        .norm()
            < 1e-12);

        let bad = r#"{
            "carrier": "heisenberg",
            "filtration": "abelian:m=1,deg=2",
            "coefficients": [["0"], ["0"], ["0"]],
            "F": "1",
            "period": 5
        }"#;
        let spec: NilsequenceSpec = serde_json::from_str(bad).unwrap();
        assert!(spec.build().is_err());
    }
}
