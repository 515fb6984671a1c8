//! Uniformity norms U^d on finite abelian groups.
//!
//! Three interchangeable evaluators are provided: exhaustive enumeration over
//! parallelepipeds, the inductive derivative recursion, and the Fourier
//! fourth-moment base case.

use crate::cube::vertex_weight;
use crate::group::{FiniteAbelianGroup, GroupElem, GroupError};
use num::complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use std::io::BufRead;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GowersError {
    #[error("signal needs {expected} values (one per group element), got {got}")]
    WrongLength { expected: u64, got: usize },
    #[error("signals live on different groups")]
    GroupMismatch,
    #[error("degree d = {0} is not supported here (need d ≥ {1})")]
    DegreeTooSmall(usize, usize),
    #[error("enumeration budget exceeded: {required} tuples required, budget {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("inner average {0} is negative beyond rounding tolerance")]
    NegativeAverage(f64),
    #[error("invalid signal spec `{0}`")]
    InvalidSpec(String),
    #[error("bad csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A bounded complex-valued function on a finite abelian group, indexed by the
/// canonical element order.
#[derive(Debug, Clone)]
pub struct Signal {
    group: FiniteAbelianGroup,
    values: Vec<Complex64>,
    bound: f64,
}

fn e(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t)
}

impl Signal {
    pub fn from_values(
        group: FiniteAbelianGroup,
        values: Vec<Complex64>,
    ) -> Result<Self, GowersError> {
        if values.len() as u64 != group.order() {
            return Err(GowersError::WrongLength {
                expected: group.order(),
                got: values.len(),
            });
        }
        let bound = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok(Self {
            group,
            values,
            bound,
        })
    }

    pub fn constant(group: FiniteAbelianGroup, c: Complex64) -> Self {
        let n = group.order() as usize;
        Self {
            group,
            values: vec![c; n],
            bound: c.norm(),
        }
    }

    /// x ↦ e(Σ a_i x_i / m_i).
    pub fn character(group: FiniteAbelianGroup, freqs: &[i64]) -> Result<Self, GowersError> {
        if freqs.len() != group.rank() {
            return Err(GowersError::InvalidSpec(format!(
                "character needs {} frequencies",
                group.rank()
            )));
        }
        let values = group
            .elements()
            .map(|x| {
                let t: f64 = x
                    .0
                    .iter()
                    .zip(group.orders())
                    .zip(freqs)
                    .map(|((&xi, &m), &a)| a as f64 * xi as f64 / m as f64)
                    .sum();
                e(t)
            })
            .collect();
        Self::from_values(group, values)
    }

    /// x ↦ e(a·x²/N) on a cyclic group.
    pub fn quad_phase(group: FiniteAbelianGroup, a: i64) -> Result<Self, GowersError> {
        if group.rank() != 1 {
            return Err(GowersError::InvalidSpec(
                "quadphase needs a cyclic group".into(),
            ));
        }
        let n = group.order();
        let values = (0..n)
            .map(|x| e((a as f64 * (x * x % n) as f64) / n as f64))
            .collect();
        Self::from_values(group, values)
    }

    /// Uniform on the closed unit disk, seed-deterministic.
    pub fn random_unit<R: Rng>(group: FiniteAbelianGroup, rng: &mut R) -> Self {
        let n = group.order() as usize;
        let values = (0..n)
            .map(|_| {
                let r = rng.random::<f64>().sqrt();
                let t = rng.random::<f64>();
                Complex64::from_polar(r, 2.0 * std::f64::consts::PI * t)
            })
            .collect();
        Self::from_values(group, values).expect("lengths agree")
    }

    /// Builtin generator specs: `const:1`, `char:a=3`, `quadphase:a=1`.
    pub fn parse_generator(group: FiniteAbelianGroup, spec: &str) -> Result<Self, GowersError> {
        let bad = || GowersError::InvalidSpec(spec.to_string());
        if let Some(v) = spec.strip_prefix("const:") {
            let c: f64 = v.parse().map_err(|_| bad())?;
            return Ok(Self::constant(group, Complex64::new(c, 0.0)));
        }
        if let Some(v) = spec.strip_prefix("char:") {
            let a = v.strip_prefix("a=").ok_or_else(bad)?;
            let freqs: Vec<i64> = a
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| bad()))
                .collect::<Result<_, _>>()?;
            return Self::character(group, &freqs);
        }
        if let Some(v) = spec.strip_prefix("quadphase:") {
            let a: i64 = v.strip_prefix("a=").ok_or_else(bad)?.parse().map_err(|_| bad())?;
            return Self::quad_phase(group, a);
        }
        Err(bad())
    }

    /// Reads `index,re,im` lines; every group element must appear exactly once.
    pub fn from_csv<R: BufRead>(group: FiniteAbelianGroup, reader: R) -> Result<Self, GowersError> {
        let n = group.order() as usize;
        let mut values = vec![None; n];
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| GowersError::Csv {
                line: lineno + 1,
                reason: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(GowersError::Csv {
                    line: lineno + 1,
                    reason: "expected `index,re,im`".into(),
                });
            }
            let idx: usize = fields[0].parse().map_err(|_| GowersError::Csv {
                line: lineno + 1,
                reason: "bad index".into(),
            })?;
            let re: f64 = fields[1].parse().map_err(|_| GowersError::Csv {
                line: lineno + 1,
                reason: "bad real part".into(),
            })?;
            let im: f64 = fields[2].parse().map_err(|_| GowersError::Csv {
                line: lineno + 1,
                reason: "bad imaginary part".into(),
            })?;
            if idx >= n || values[idx].is_some() {
                return Err(GowersError::Csv {
                    line: lineno + 1,
                    reason: format!("index {idx} out of range or duplicated"),
                });
            }
            values[idx] = Some(Complex64::new(re, im));
        }
        let values: Option<Vec<Complex64>> = values.into_iter().collect();
        match values {
            Some(values) => Self::from_values(group, values),
            None => Err(GowersError::Csv {
                line: 0,
                reason: "missing indices".into(),
            }),
        }
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: Complex64) -> Signal {
        let values = self.values.iter().map(|z| z * c).collect();
        Signal::from_values(self.group.clone(), values).expect("lengths agree")
    }

    pub fn add(&self, other: &Signal) -> Result<Signal, GowersError> {
        if self.group != other.group {
            return Err(GowersError::GroupMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Signal::from_values(self.group.clone(), values)
    }
}

/// Deterministic pairwise (tree) summation.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Streaming accumulator with a fixed two-level tree shape, so that sums do not
/// depend on buffering choices.
struct TreeAccumulator {
    chunk: Vec<Complex64>,
    partials: Vec<Complex64>,
    count: u64,
}

const CHUNK: usize = 4096;

impl TreeAccumulator {
    fn new() -> Self {
        Self {
            chunk: Vec::with_capacity(CHUNK),
            partials: Vec::new(),
            count: 0,
        }
    }

    fn push(&mut self, z: Complex64) {
        self.chunk.push(z);
        self.count += 1;
        if self.chunk.len() == CHUNK {
            self.partials.push(pairwise_sum(&self.chunk));
            self.chunk.clear();
        }
    }

    fn mean(mut self) -> Complex64 {
        if !self.chunk.is_empty() {
            self.partials.push(pairwise_sum(&self.chunk));
        }
        if self.count == 0 {
            return Complex64::new(0.0, 0.0);
        }
        pairwise_sum(&self.partials) / self.count as f64
    }
}

/// ⟨f, g⟩ = E_x f(x)·conj(g(x)).
pub fn inner_product(f: &Signal, g: &Signal) -> Result<Complex64, GowersError> {
    if f.group != g.group {
        return Err(GowersError::GroupMismatch);
    }
    let mut acc = TreeAccumulator::new();
    for (a, b) in f.values.iter().zip(&g.values) {
        acc.push(a * b.conj());
    }
    Ok(acc.mean())
}

/// Δ_h f(x) = f(x+h)·conj(f(x)).
pub fn multiplicative_derivative(f: &Signal, h: &GroupElem) -> Result<Signal, GowersError> {
    f.group.check(h)?;
    let hidx = f.group.index_of(h);
    let values: Vec<Complex64> = (0..f.values.len() as u64)
        .map(|x| {
            let shifted = f.group.add_indices(x, hidx);
            f.values[shifted as usize] * f.values[x as usize].conj()
        })
        .collect();
    let mut out = Signal::from_values(f.group.clone(), values)?;
    out.bound = f.bound * f.bound;
    Ok(out)
}

fn root_of_average(avg: f64, d: usize) -> Result<f64, GowersError> {
    if avg < -1e-12 {
        return Err(GowersError::NegativeAverage(avg));
    }
    let clamped = avg.max(0.0);
    Ok(clamped.powf(1.0 / (1u64 << d) as f64))
}

/// U^d norm by exhaustive enumeration of all N^{d+1} parallelepipeds.
/// d = 1 is supported as a documented extension (it equals |E f|).
pub fn u_norm_naive(f: &Signal, d: usize, budget: u64) -> Result<f64, GowersError> {
    if d < 1 {
        return Err(GowersError::DegreeTooSmall(d, 1));
    }
    let n = f.group.order();
    let required = (n as u128).pow(d as u32 + 1);
    if required > budget as u128 {
        return Err(GowersError::BudgetExceeded { required, budget });
    }
    let verts = 1usize << d;
    let mut acc = TreeAccumulator::new();
    // Odometer over (x, h_1..h_d); vertex indices built incrementally.
    let mut tuple = vec![0u64; d + 1];
    let mut idxs = vec![0u64; verts];
    loop {
        idxs[0] = tuple[0];
        for i in 0..d {
            let h = tuple[i + 1];
            for w in 0..1usize << i {
                idxs[(1 << i) + w] = f.group.add_indices(idxs[w], h);
            }
        }
        let mut term = Complex64::new(1.0, 0.0);
        for (v, &idx) in idxs.iter().enumerate() {
            let z = f.values[idx as usize];
            term *= if vertex_weight(v) % 2 == 0 { z } else { z.conj() };
        }
        acc.push(term);
        // Advance the odometer.
        let mut pos = 0;
        loop {
            tuple[pos] += 1;
            if tuple[pos] < n {
                break;
            }
            tuple[pos] = 0;
            pos += 1;
            if pos > d {
                let avg = acc.mean();
                return root_of_average(avg.re, d);
            }
        }
    }
}

/// Multi-dimensional DFT coefficients f̂(χ) = E_x f(x)·conj(χ(x)), flattened in
/// canonical element order.
pub fn fourier_coefficients(f: &Signal) -> Vec<Complex64> {
    let mut data = f.values.clone();
    let n = data.len();
    let mut planner = FftPlanner::new();
    let mut stride = 1usize;
    for &m in f.group.orders() {
        let m = m as usize;
        let fft = planner.plan_fft_forward(m);
        let block = stride * m;
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        for base in (0..n).step_by(block) {
            for off in 0..stride {
                for j in 0..m {
                    line[j] = data[base + off + j * stride];
                }
                fft.process(&mut line);
                for j in 0..m {
                    data[base + off + j * stride] = line[j];
                }
            }
        }
        stride = block;
    }
    let scale = 1.0 / n as f64;
    data.iter_mut().for_each(|z| *z *= scale);
    data
}

/// E-normalized 2^d-th power of the U^d norm; base case d = 2 is the Fourier
/// fourth moment (‖f‖_{U²}^4 = Σ_χ |f̂(χ)|^4).
fn u_pow(f: &Signal, d: usize) -> f64 {
    if d == 2 {
        let coeffs = fourier_coefficients(f);
        let terms: Vec<Complex64> = coeffs
            .iter()
            .map(|z| {
                let s = z.norm_sqr();
                Complex64::new(s * s, 0.0)
            })
            .collect();
        return pairwise_sum(&terms).re;
    }
    // ‖f‖_{U^d}^{2^d} = E_h ‖Δ_h f‖_{U^{d−1}}^{2^{d−1}}, reduced in index order.
    let mut acc = TreeAccumulator::new();
    for h in f.group.elements() {
        let df = multiplicative_derivative(f, &h).expect("element of own group");
        acc.push(Complex64::new(u_pow(&df, d - 1), 0.0));
    }
    acc.mean().re
}

/// U^d norm via the derivative recursion with a Fourier base case. Needs d ≥ 2.
pub fn u_norm_recursive(f: &Signal, d: usize) -> Result<f64, GowersError> {
    if d < 2 {
        return Err(GowersError::DegreeTooSmall(d, 2));
    }
    root_of_average(u_pow(f, d), d)
}
