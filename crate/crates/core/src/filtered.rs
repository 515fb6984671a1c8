//! Filtered nilpotent groups in exact rational arithmetic: the vector group
//! Q^m and the 3×3 unitriangular (Heisenberg) group, polynomial sequences via
//! Taylor coefficients, discrete derivatives, and cube groups with membership
//! decided by face factorization.

use crate::cube::{vertex_weight, Cube};
use crate::rat::{binom, fract, is_integer};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilteredError {
    #[error("invalid filtration spec `{0}` (expected `abelian:m={{m}},deg={{k}}` or `heis:lcs`)")]
    InvalidSpec(String),
    #[error("element does not belong to the carrier")]
    CarrierMismatch,
    #[error("level {0} is not a subgroup of the carrier")]
    InvalidLevel(usize),
    #[error("Taylor coefficient {index} lies outside filtration level {index}")]
    CoefficientOutsideLevel { index: usize },
    #[error("expected {expected} values, got {got}")]
    WrongValueCount { expected: usize, got: usize },
    #[error("face factorization fails at anchor vertex {anchor:#b}: factor not in level {level}")]
    FactorizationFailure { anchor: usize, level: usize },
    #[error("invalid coordinate data: {0}")]
    BadCoordinates(String),
}

/// An element of one of the two supported carriers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Abelian(Vec<BigRational>),
    /// The unitriangular matrix [[1, x, z], [0, 1, y], [0, 0, 1]].
    Heisenberg {
        x: BigRational,
        y: BigRational,
        z: BigRational,
    },
}

impl Element {
    pub fn heis(x: BigRational, y: BigRational, z: BigRational) -> Self {
        Element::Heisenberg { x, y, z }
    }

    pub fn coords(&self) -> Vec<BigRational> {
        match self {
            Element::Abelian(v) => v.clone(),
            Element::Heisenberg { x, y, z } => vec![x.clone(), y.clone(), z.clone()],
        }
    }

    pub fn coord_strings(&self) -> Vec<String> {
        self.coords().iter().map(crate::rat::ratio_to_string).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Carrier {
    Abelian { dim: usize },
    Heisenberg,
}

impl Carrier {
    pub fn identity(&self) -> Element {
        match self {
            Carrier::Abelian { dim } => Element::Abelian(vec![BigRational::zero(); *dim]),
            Carrier::Heisenberg => Element::heis(
                BigRational::zero(),
                BigRational::zero(),
                BigRational::zero(),
            ),
        }
    }

    pub fn contains(&self, e: &Element) -> bool {
        match (self, e) {
            (Carrier::Abelian { dim }, Element::Abelian(v)) => v.len() == *dim,
            (Carrier::Heisenberg, Element::Heisenberg { .. }) => true,
            _ => false,
        }
    }

    pub fn coord_dim(&self) -> usize {
        match self {
            Carrier::Abelian { dim } => *dim,
            Carrier::Heisenberg => 3,
        }
    }

    pub fn from_coords(&self, coords: Vec<BigRational>) -> Result<Element, FilteredError> {
        if coords.len() != self.coord_dim() {
            return Err(FilteredError::BadCoordinates(format!(
                "expected {} coordinates, got {}",
                self.coord_dim(),
                coords.len()
            )));
        }
        Ok(match self {
            Carrier::Abelian { .. } => Element::Abelian(coords),
            Carrier::Heisenberg => {
                let mut it = coords.into_iter();
                Element::heis(
                    it.next().unwrap(),
                    it.next().unwrap(),
                    it.next().unwrap(),
                )
            }
        })
    }

    pub fn mul(&self, a: &Element, b: &Element) -> Element {
        debug_assert!(self.contains(a) && self.contains(b));
        match (a, b) {
            (Element::Abelian(u), Element::Abelian(v)) => {
                Element::Abelian(u.iter().zip(v).map(|(p, q)| p + q).collect())
            }
            (
                Element::Heisenberg { x: x1, y: y1, z: z1 },
                Element::Heisenberg { x: x2, y: y2, z: z2 },
            ) => Element::heis(x1 + x2, y1 + y2, z1 + z2 + x1 * y2),
            _ => unreachable!("carrier mismatch"),
        }
    }

    pub fn inv(&self, a: &Element) -> Element {
        match a {
            Element::Abelian(u) => Element::Abelian(u.iter().map(|p| -p).collect()),
            Element::Heisenberg { x, y, z } => Element::heis(-x, -y, x * y - z),
        }
    }

    /// a^k for any integer k (closed form; exact).
    pub fn pow(&self, a: &Element, k: &BigInt) -> Element {
        let kr = BigRational::from(k.clone());
        match a {
            Element::Abelian(u) => Element::Abelian(u.iter().map(|p| p * &kr).collect()),
            Element::Heisenberg { x, y, z } => {
                // binom(k, 2) = k(k−1)/2, integer for every k.
                let choose2 = BigRational::new(k * (k - BigInt::one()), BigInt::from(2));
                Element::heis(x * &kr, y * &kr, z * &kr + x * y * choose2)
            }
        }
    }

    pub fn commutator(&self, a: &Element, b: &Element) -> Element {
        let lhs = self.mul(&self.inv(a), &self.inv(b));
        let rhs = self.mul(a, b);
        self.mul(&lhs, &rhs)
    }

    /// Projection to the abelianization (drops the z coordinate for Heisenberg).
    pub fn abelianize(&self, e: &Element) -> Vec<BigRational> {
        match e {
            Element::Abelian(v) => v.clone(),
            Element::Heisenberg { x, y, .. } => vec![x.clone(), y.clone()],
        }
    }

    pub fn random_element<R: Rng>(&self, rng: &mut R, max_num: i64, max_den: i64) -> Element {
        let r = |rng: &mut R| {
            crate::rat::ratio(
                rng.random_range(-max_num..=max_num),
                rng.random_range(1..=max_den),
            )
        };
        match self {
            Carrier::Abelian { dim } => {
                Element::Abelian((0..*dim).map(|_| r(rng)).collect())
            }
            Carrier::Heisenberg => Element::heis(r(rng), r(rng), r(rng)),
        }
    }
}

/// A subgroup descriptor used as a filtration level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Full,
    /// Heisenberg center {x = y = 0}.
    Center,
    Trivial,
}

/// A filtration G_0 ⊇ G_1 ⊇ … with G_i trivial beyond the stored levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtration {
    carrier: Carrier,
    levels: Vec<Level>,
}

impl Filtration {
    pub fn new(carrier: Carrier, levels: Vec<Level>) -> Result<Self, FilteredError> {
        for (i, level) in levels.iter().enumerate() {
            if matches!(level, Level::Center) && !matches!(carrier, Carrier::Heisenberg) {
                return Err(FilteredError::InvalidLevel(i));
            }
        }
        // Levels must be decreasing.
        fn rank(l: Level) -> u8 {
            match l {
                Level::Full => 2,
                Level::Center => 1,
                Level::Trivial => 0,
            }
        }
        for w in levels.windows(2) {
            if rank(w[1]) > rank(w[0]) {
                return Err(FilteredError::InvalidSpec("levels must decrease".into()));
            }
        }
        let filt = Self { carrier, levels };
        debug_assert!(filt.check_commutators());
        Ok(filt)
    }

    /// The degree-k filtration on Q^m (G_0 = … = G_k = Q^m).
    pub fn abelian(dim: usize, degree: usize) -> Self {
        Self {
            carrier: Carrier::Abelian { dim },
            levels: vec![Level::Full; degree + 1],
        }
    }

    /// Lower central series of the Heisenberg group (degree 2).
    pub fn heisenberg_lcs() -> Self {
        Self {
            carrier: Carrier::Heisenberg,
            levels: vec![Level::Full, Level::Full, Level::Center],
        }
    }

    /// Parses `abelian:m={m},deg={k}` or `heis:lcs`.
    pub fn parse(spec: &str) -> Result<Self, FilteredError> {
        let bad = || FilteredError::InvalidSpec(spec.to_string());
        let s = spec.trim();
        if s == "heis:lcs" {
            return Ok(Self::heisenberg_lcs());
        }
        if let Some(rest) = s.strip_prefix("abelian:") {
            let mut m = None;
            let mut deg = None;
            for part in rest.split(',') {
                let (key, value) = part.split_once('=').ok_or_else(bad)?;
                match key.trim() {
                    "m" => m = Some(value.trim().parse::<usize>().map_err(|_| bad())?),
                    "deg" => deg = Some(value.trim().parse::<usize>().map_err(|_| bad())?),
                    _ => return Err(bad()),
                }
            }
            return Ok(Self::abelian(m.ok_or_else(bad)?, deg.ok_or_else(bad)?));
        }
        Err(bad())
    }

    pub fn carrier(&self) -> Carrier {
        self.carrier
    }

    pub fn level(&self, i: usize) -> Level {
        self.levels.get(i).copied().unwrap_or(Level::Trivial)
    }

    /// Largest i with G_i non-trivial (0 for the trivial filtration).
    pub fn degree(&self) -> usize {
        self.levels
            .iter()
            .rposition(|l| !matches!(l, Level::Trivial))
            .unwrap_or(0)
    }

    pub fn member(&self, i: usize, e: &Element) -> bool {
        if !self.carrier.contains(e) {
            return false;
        }
        match self.level(i) {
            Level::Full => true,
            Level::Center => match e {
                Element::Heisenberg { x, y, .. } => x.is_zero() && y.is_zero(),
                _ => false,
            },
            Level::Trivial => *e == self.carrier.identity(),
        }
    }

    /// The filtration whose j-th term is G_{j+l}.
    pub fn shifted(&self, l: usize) -> Filtration {
        Filtration {
            carrier: self.carrier,
            levels: self.levels.get(l..).map(<[Level]>::to_vec).unwrap_or_default(),
        }
    }

    pub fn generators(&self, i: usize) -> Vec<Element> {
        match (self.level(i), self.carrier) {
            (Level::Trivial, _) => vec![],
            (Level::Full, Carrier::Abelian { dim }) => (0..dim)
                .map(|j| {
                    let mut v = vec![BigRational::zero(); dim];
                    v[j] = BigRational::one();
                    Element::Abelian(v)
                })
                .collect(),
            (Level::Full, Carrier::Heisenberg) => vec![
                Element::heis(BigRational::one(), BigRational::zero(), BigRational::zero()),
                Element::heis(BigRational::zero(), BigRational::one(), BigRational::zero()),
                Element::heis(BigRational::zero(), BigRational::zero(), BigRational::one()),
            ],
            (Level::Center, Carrier::Heisenberg) => vec![Element::heis(
                BigRational::zero(),
                BigRational::zero(),
                BigRational::one(),
            )],
            (Level::Center, _) => vec![],
        }
    }

    /// [G_i, G_j] ⊆ G_{i+j}, checked on generator pairs.
    pub fn check_commutators(&self) -> bool {
        let top = self.levels.len() + 1;
        for i in 0..top {
            for j in 0..top {
                for a in self.generators(i) {
                    for b in self.generators(j) {
                        let c = self.carrier.commutator(&a, &b);
                        if !self.member(i + j, &c) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// A polynomial sequence g(n) = g_0 g_1^n g_2^{binom(n,2)} ⋯ with g_i ∈ G_i.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySeq {
    filt: Filtration,
    coeffs: Vec<Element>,
}

impl PolySeq {
    pub fn new(filt: Filtration, mut coeffs: Vec<Element>) -> Result<Self, FilteredError> {
        let k = filt.degree();
        if coeffs.len() > k + 1 {
            return Err(FilteredError::WrongValueCount {
                expected: k + 1,
                got: coeffs.len(),
            });
        }
        while coeffs.len() < k + 1 {
            coeffs.push(filt.carrier().identity());
        }
        for (i, g) in coeffs.iter().enumerate() {
            if !filt.carrier().contains(g) {
                return Err(FilteredError::CarrierMismatch);
            }
            if !filt.member(i, g) {
                return Err(FilteredError::CoefficientOutsideLevel { index: i });
            }
        }
        Ok(Self { filt, coeffs })
    }

    pub fn constant(filt: Filtration, g0: Element) -> Result<Self, FilteredError> {
        Self::new(filt, vec![g0])
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filt
    }

    pub fn coeffs(&self) -> &[Element] {
        &self.coeffs
    }

    pub fn eval(&self, n: i64) -> Element {
        let carrier = self.filt.carrier();
        let mut acc = self.coeffs[0].clone();
        for (i, g) in self.coeffs.iter().enumerate().skip(1) {
            let p = carrier.pow(g, &binom(n, i as u32));
            acc = carrier.mul(&acc, &p);
        }
        acc
    }

    /// Recovers the unique Taylor coefficients from values at n = 0, …, k.
    pub fn taylor_from_values(
        filt: Filtration,
        values: &[Element],
    ) -> Result<Self, FilteredError> {
        let k = filt.degree();
        if values.len() != k + 1 {
            return Err(FilteredError::WrongValueCount {
                expected: k + 1,
                got: values.len(),
            });
        }
        let carrier = filt.carrier();
        let mut coeffs: Vec<Element> = vec![values[0].clone()];
        for i in 1..=k {
            // Prefix value of the already-recovered coefficients at n = i.
            let mut prefix = coeffs[0].clone();
            for (l, g) in coeffs.iter().enumerate().skip(1) {
                prefix = carrier.mul(&prefix, &carrier.pow(g, &binom(i as i64, l as u32)));
            }
            let g_i = carrier.mul(&carrier.inv(&prefix), &values[i]);
            coeffs.push(g_i);
        }
        Self::new(filt, coeffs)
    }
}

/// A (possibly non-polynomial) sequence Z → G, shareable and composable.
#[derive(Clone)]
pub struct SeqMap {
    carrier: Carrier,
    f: Rc<dyn Fn(i64) -> Element>,
}

impl SeqMap {
    pub fn from_fn<F: Fn(i64) -> Element + 'static>(carrier: Carrier, f: F) -> Self {
        Self {
            carrier,
            f: Rc::new(f),
        }
    }

    pub fn from_polyseq(p: &PolySeq) -> Self {
        let p = p.clone();
        Self {
            carrier: p.filtration().carrier(),
            f: Rc::new(move |n| p.eval(n)),
        }
    }

    pub fn carrier(&self) -> Carrier {
        self.carrier
    }

    pub fn eval(&self, n: i64) -> Element {
        (self.f)(n)
    }

    /// n ↦ g(n)^{-1} g(n+h), the left-quotient discrete derivative.
    pub fn derivative(&self, h: i64) -> SeqMap {
        let inner = self.clone();
        SeqMap {
            carrier: self.carrier,
            f: Rc::new(move |n| {
                let c = inner.carrier;
                c.mul(&c.inv(&inner.eval(n)), &inner.eval(n + h))
            }),
        }
    }

    pub fn pointwise_mul(&self, other: &SeqMap) -> SeqMap {
        assert_eq!(self.carrier, other.carrier, "carrier mismatch");
        let (a, b) = (self.clone(), other.clone());
        SeqMap {
            carrier: self.carrier,
            f: Rc::new(move |n| a.carrier.mul(&a.eval(n), &b.eval(n))),
        }
    }

    pub fn pointwise_inv(&self) -> SeqMap {
        let a = self.clone();
        SeqMap {
            carrier: self.carrier,
            f: Rc::new(move |n| a.carrier.inv(&a.eval(n))),
        }
    }
}

/// One-sided sampled polynomiality certificate: every sampled iterated
/// derivative of depth i must land in G_i.
pub fn is_poly_check(
    g: &SeqMap,
    filt: &Filtration,
    window: u32,
    samples: u32,
    seed: u64,
) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = filt.degree();
    for _ in 0..samples {
        let depth = rng.random_range(1..=k + 1);
        let mut m = g.clone();
        for _ in 0..depth {
            m = m.derivative(rng.random_range(1..=window) as i64);
        }
        let n = rng.random_range(-(window as i64)..=window as i64);
        if !filt.member(depth, &m.eval(n)) {
            return false;
        }
    }
    true
}

/// An ordered face factorization q = Π g_v^{F_v} over the upper faces
/// F_v = {w : w ⊇ v}, in canonical order (decreasing face dimension, then
/// anchor index).
#[derive(Debug, Clone)]
pub struct FaceFactorization {
    n: usize,
    factors: Vec<(usize, Element)>,
}

impl FaceFactorization {
    pub fn factors(&self) -> &[(usize, Element)] {
        &self.factors
    }

    pub fn factor_at(&self, anchor: usize) -> &Element {
        &self.factors[canonical_rank(self.n, anchor)].1
    }

    /// Rebuilds the cube from the stored face elements.
    pub fn evaluate(&self, carrier: Carrier) -> Cube<Element> {
        let mut values = vec![carrier.identity(); 1 << self.n];
        for (anchor, g) in &self.factors {
            for (w, value) in values.iter_mut().enumerate() {
                if w & anchor == *anchor {
                    *value = carrier.mul(value, g);
                }
            }
        }
        Cube::new(self.n, values).expect("length fixed by construction")
    }
}

fn canonical_vertex_order(n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..1usize << n).collect();
    order.sort_by_key(|&v| (vertex_weight(v), v));
    order
}

fn canonical_rank(n: usize, anchor: usize) -> usize {
    canonical_vertex_order(n)
        .iter()
        .position(|&v| v == anchor)
        .expect("anchor in range")
}

fn peel<F: Fn(usize) -> usize>(
    q: &Cube<Element>,
    filt: &Filtration,
    required_level: F,
) -> Result<FaceFactorization, FilteredError> {
    let carrier = filt.carrier();
    let n = q.dim();
    let mut residual: Vec<Element> = q.values().to_vec();
    let mut factors = Vec::with_capacity(1 << n);
    for v in canonical_vertex_order(n) {
        let g = residual[v].clone();
        let level = required_level(vertex_weight(v) as usize);
        if !filt.member(level, &g) {
            return Err(FilteredError::FactorizationFailure { anchor: v, level });
        }
        let ginv = carrier.inv(&g);
        for (w, r) in residual.iter_mut().enumerate() {
            if w & v == v {
                *r = carrier.mul(&ginv, r);
            }
        }
        factors.push((v, g));
    }
    Ok(FaceFactorization { n, factors })
}

/// Membership in the Host–Kra cube group C^n(G_•): greedy face peeling in the
/// canonical order, each forced factor required to lie in G_{codim F}.
pub fn cube_membership(
    q: &Cube<Element>,
    filt: &Filtration,
) -> Result<FaceFactorization, FilteredError> {
    peel(q, filt, |codim| codim)
}

/// Membership in G_i^{{0,1}^n} ∩ C^n(G_•): face factors must lie in
/// G_{max(i, codim F)}.
pub fn cube_group_member_at(q: &Cube<Element>, filt: &Filtration, i: usize) -> bool {
    peel(q, filt, |codim| codim.max(i)).is_ok()
}

/// The vertex-indexed evaluation map of a polynomial sequence:
/// (n_0, …, n_k) ↦ (g(n_0 + v·(n_1,…,n_k)))_v.
#[derive(Clone)]
pub struct CubeOrbit {
    poly: PolySeq,
    k: usize,
}

impl CubeOrbit {
    pub fn new(poly: PolySeq, k: usize) -> Self {
        Self { poly, k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn poly(&self) -> &PolySeq {
        &self.poly
    }

    pub fn eval(&self, nvec: &[i64]) -> Cube<Element> {
        assert_eq!(nvec.len(), self.k + 1, "need k+1 integer arguments");
        let values = (0..1usize << self.k)
            .map(|v| {
                let mut arg = nvec[0];
                for i in 0..self.k {
                    if v >> i & 1 == 1 {
                        arg += nvec[i + 1];
                    }
                }
                self.poly.eval(arg)
            })
            .collect();
        Cube::new(self.k, values).expect("length fixed by construction")
    }

    fn derived_cube(&self, base: &[i64], steps: &[(usize, i64)]) -> Cube<Element> {
        if steps.is_empty() {
            return self.eval(base);
        }
        let (coord, h) = steps[steps.len() - 1];
        let prev = &steps[..steps.len() - 1];
        let at_base = self.derived_cube(base, prev);
        let mut shifted_base = base.to_vec();
        shifted_base[coord] += h;
        let at_shift = self.derived_cube(&shifted_base, prev);
        let carrier = self.poly.filtration().carrier();
        let values = at_base
            .values()
            .iter()
            .zip(at_shift.values())
            .map(|(a, b)| carrier.mul(&carrier.inv(a), b))
            .collect();
        Cube::new(self.k, values).expect("length fixed by construction")
    }
}

/// Sampled certificate that a cube orbit is polynomial for the cube-group
/// filtration: every sampled depth-i multivariate derivative lies in
/// G_i^{{0,1}^k} ∩ C^k(G_•).
pub fn cube_orbit_poly_check(
    orbit: &CubeOrbit,
    window: u32,
    samples: u32,
    seed: u64,
) -> bool {
    let filt = orbit.poly.filtration().clone();
    let deg = filt.degree();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let depth = rng.random_range(1..=deg + 1);
        let steps: Vec<(usize, i64)> = (0..depth)
            .map(|_| {
                (
                    rng.random_range(0..=orbit.k),
                    rng.random_range(1..=window) as i64,
                )
            })
            .collect();
        let base: Vec<i64> = (0..=orbit.k)
            .map(|_| rng.random_range(-(window as i64)..=window as i64))
            .collect();
        let cube = orbit.derived_cube(&base, &steps);
        if !cube_group_member_at(&cube, &filt, depth) {
            return false;
        }
    }
    true
}

/// Alternating vertex sum of the abelianized values.
pub fn gray_code_abelianized(carrier: Carrier, q: &Cube<Element>) -> Vec<BigRational> {
    let dim = match carrier {
        Carrier::Abelian { dim } => dim,
        Carrier::Heisenberg => 2,
    };
    let mut acc = vec![BigRational::zero(); dim];
    for (v, value) in q.values().iter().enumerate() {
        let coords = carrier.abelianize(value);
        for (a, c) in acc.iter_mut().zip(coords) {
            if vertex_weight(v) % 2 == 0 {
                *a += c;
            } else {
                *a -= c;
            }
        }
    }
    acc
}

/// True when every coordinate is an integer (used for lattice membership of
/// abelianized data).
pub fn all_integral(coords: &[BigRational]) -> bool {
    coords.iter().all(is_integer)
}

/// Convenience: exact fractional parts of an element's coordinates.
pub fn fractional_coords(e: &Element) -> Vec<BigRational> {
    e.coords().iter().map(fract).collect()
}

pub fn elements_close(a: &Element, b: &Element) -> bool {
    a == b
}

#[allow(unused_imports)]
pub use crate::rat::ratio as rq;
