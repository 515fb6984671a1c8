//! Desk-scale computations around uniformity norms and nilsequences: finite
//! abelian groups and their cube structures, U^d norms with interchangeable
//! evaluators, polynomial sequences on filtered nilpotent groups, coset
//! nilmanifolds, cocycle and balance diagnostics, and finite probability
//! approximation suites.

pub mod rat;
pub mod group;
pub mod cube;
pub mod gowers;
pub mod filtered;
pub mod expr;
pub mod nilmanifold;
pub mod cocycle;
pub mod balance;
pub mod finprob;
pub mod report;
pub mod cli;
