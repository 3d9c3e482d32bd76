//! Bounded-depth modular counting circuits: construction, evaluation,
//! polynomial analysis and satisfiability.

pub mod circuit;
pub mod cnf;
pub mod compiler;
pub mod counting;
pub mod dihedral;
pub mod exec;
pub mod gf;
pub mod prob;
pub mod sat;
pub mod zpq;
