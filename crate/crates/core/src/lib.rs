//! Verification and synthesis survey engine for the simplified Toffoli
//! gate over the {CNOT, single-qubit} gate set.
//!
//! The crate verifies the three-CNOT, four-rotation realization of the
//! gate exactly, and reproduces its optimality numerically: enumerate all
//! CNOT configurations, filter the structurally impossible ones, and run
//! deterministic multi-start synthesis against every survivor. One
//! configuration admits an exact realization; the rest plateau far from
//! zero, and the same machinery shows four single-qubit gates are needed.
//!
//! Module map: [`qmat`] small dense complex matrices and metrics,
//! [`circuit`] the gate IR and named constructions, [`entangle`]
//! Schmidt-rank analysis, [`synth`] the template optimizer, [`survey`]
//! enumeration, orchestration and reports.

pub mod circuit;
pub mod entangle;
pub mod qmat;
pub mod survey;
pub mod synth;
