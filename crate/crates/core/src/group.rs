//! Finite abelian groups given as products of cyclic groups.
//!
//! Elements are residue vectors with componentwise addition; everything is
//! exact integer arithmetic.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("invalid group spec `{0}` (expected e.g. `Z5` or `Z4xZ3`)")]
    InvalidSpec(String),
    #[error("cyclic order must be ≥ 1, got {0}")]
    InvalidOrder(u64),
    #[error("element {0:?} does not belong to the group with orders {1:?}")]
    ElementMismatch(Vec<u64>, Vec<u64>),
}

/// An element of a [`FiniteAbelianGroup`], stored as a residue vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElem(pub Vec<u64>);

/// Z_{m_1} × … × Z_{m_r} with componentwise addition mod m_i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteAbelianGroup {
    orders: Vec<u64>,
}

impl FiniteAbelianGroup {
    pub fn new(orders: Vec<u64>) -> Result<Self, GroupError> {
        if orders.is_empty() {
            return Err(GroupError::InvalidSpec(String::new()));
        }
        for &m in &orders {
            if m == 0 {
                return Err(GroupError::InvalidOrder(m));
            }
        }
        Ok(Self { orders })
    }

    pub fn cyclic(n: u64) -> Self {
        Self::new(vec![n]).expect("cyclic order must be ≥ 1")
    }

    /// Parses `"Z{N}"` or `"Z{a}xZ{b}x…"`.
    pub fn parse(spec: &str) -> Result<Self, GroupError> {
        let mut orders = Vec::new();
        for part in spec.trim().split('x') {
            let part = part.trim();
            let digits = part
                .strip_prefix('Z')
                .or_else(|| part.strip_prefix('z'))
                .ok_or_else(|| GroupError::InvalidSpec(spec.to_string()))?;
            let m: u64 = digits
                .parse()
                .map_err(|_| GroupError::InvalidSpec(spec.to_string()))?;
            if m == 0 {
                return Err(GroupError::InvalidOrder(m));
            }
            orders.push(m);
        }
        Self::new(orders).map_err(|_| GroupError::InvalidSpec(spec.to_string()))
    }

    pub fn orders(&self) -> &[u64] {
        &self.orders
    }

    pub fn rank(&self) -> usize {
        self.orders.len()
    }

    pub fn order(&self) -> u64 {
        self.orders.iter().product()
    }

    pub fn zero(&self) -> GroupElem {
        GroupElem(vec![0; self.orders.len()])
    }

    pub fn contains(&self, e: &GroupElem) -> bool {
        e.0.len() == self.orders.len() && e.0.iter().zip(&self.orders).all(|(&x, &m)| x < m)
    }

    pub fn check(&self, e: &GroupElem) -> Result<(), GroupError> {
        if self.contains(e) {
            Ok(())
        } else {
            Err(GroupError::ElementMismatch(e.0.clone(), self.orders.clone()))
        }
    }

    pub fn add(&self, a: &GroupElem, b: &GroupElem) -> GroupElem {
        GroupElem(
            a.0.iter()
                .zip(&b.0)
                .zip(&self.orders)
                .map(|((&x, &y), &m)| (x + y) % m)
                .collect(),
        )
    }

    pub fn neg(&self, a: &GroupElem) -> GroupElem {
        GroupElem(
            a.0.iter()
                .zip(&self.orders)
                .map(|(&x, &m)| (m - x) % m)
                .collect(),
        )
    }

    pub fn sub(&self, a: &GroupElem, b: &GroupElem) -> GroupElem {
        self.add(a, &self.neg(b))
    }

    pub fn scalar_mul(&self, k: i64, a: &GroupElem) -> GroupElem {
        GroupElem(
            a.0.iter()
                .zip(&self.orders)
                .map(|(&x, &m)| {
                    let r = (k % m as i64) * (x as i64) % m as i64;
                    r.rem_euclid(m as i64) as u64
                })
                .collect(),
        )
    }

    /// Canonical element order: little-endian mixed radix over the orders.
    pub fn index_of(&self, e: &GroupElem) -> u64 {
        let mut idx = 0u64;
        let mut stride = 1u64;
        for (&x, &m) in e.0.iter().zip(&self.orders) {
            idx += x * stride;
            stride *= m;
        }
        idx
    }

    pub fn elem_at(&self, mut idx: u64) -> GroupElem {
        let mut coords = Vec::with_capacity(self.orders.len());
        for &m in &self.orders {
            coords.push(idx % m);
            idx /= m;
        }
        GroupElem(coords)
    }

    /// Index-space addition; agrees with `add` through `index_of`.
    pub fn add_indices(&self, i: u64, j: u64) -> u64 {
        let (mut i, mut j) = (i, j);
        let mut out = 0u64;
        let mut stride = 1u64;
        for &m in &self.orders {
            out += ((i % m) + (j % m)) % m * stride;
            stride *= m;
            i /= m;
            j /= m;
        }
        out
    }

    pub fn elements(&self) -> impl Iterator<Item = GroupElem> + '_ {
        (0..self.order()).map(move |i| self.elem_at(i))
    }

    pub fn random_elem<R: Rng>(&self, rng: &mut R) -> GroupElem {
        GroupElem(self.orders.iter().map(|&m| rng.random_range(0..m)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_specs() {
        assert_eq!(FiniteAbelianGroup::parse("Z5").unwrap().orders(), &[5]);
        assert_eq!(
            FiniteAbelianGroup::parse("Z4xZ3").unwrap().orders(),
            &[4, 3]
        );
        assert_eq!(
            FiniteAbelianGroup::parse("Z2xZ3xZ5").unwrap().order(),
            30
        );
        assert!(FiniteAbelianGroup::parse("Q5").is_err());
        assert!(FiniteAbelianGroup::parse("Z0").is_err());
        assert!(FiniteAbelianGroup::parse("").is_err());
    }

    #[test]
    fn arithmetic_mod_orders() {
        let g = FiniteAbelianGroup::parse("Z4xZ3").unwrap();
        let a = GroupElem(vec![3, 2]);
        let b = GroupElem(vec![2, 2]);
        assert_eq!(g.add(&a, &b), GroupElem(vec![1, 1]));
        assert_eq!(g.add(&a, &g.neg(&a)), g.zero());
        assert_eq!(g.scalar_mul(-1, &a), g.neg(&a));
        assert_eq!(g.scalar_mul(7, &a), GroupElem(vec![1, 2]));
    }

    #[test]
    fn index_round_trip_and_index_addition() {
        let g = FiniteAbelianGroup::parse("Z4xZ3").unwrap();
        for i in 0..g.order() {
            assert_eq!(g.index_of(&g.elem_at(i)), i);
        }
        for i in 0..g.order() {
            for j in 0..g.order() {
                let viaelem = g.index_of(&g.add(&g.elem_at(i), &g.elem_at(j)));
                assert_eq!(g.add_indices(i, j), viaelem);
            }
        }
    }

    #[test]
    fn membership_checks() {
        let g = FiniteAbelianGroup::cyclic(5);
        assert!(g.contains(&GroupElem(vec![4])));
        assert!(!g.contains(&GroupElem(vec![5])));
        assert!(!g.contains(&GroupElem(vec![1, 1])));
        assert!(g.check(&GroupElem(vec![5])).is_err());
    }
}
