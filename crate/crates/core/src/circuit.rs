//! Circuit IR over the {CNOT, single-qubit} gate set, evaluation to a
//! unitary, the named target unitaries, the control/target flip rewrite,
//! and the two-CNOT decomposition of controlled-U gates.
//!
//! Conventions, fixed once for the whole crate: wire 0 is the least
//! significant qubit (bottom wire), wire `n-1` the most significant (top).
//! Basis states are big-endian, so on 3 wires the index of |q2 q1 q0> is
//! 4*q2 + 2*q1 + q0. Gates listed in a [`Circuit`] apply left to right,
//! which makes the evaluated unitary the reverse-order matrix product.

use crate::qmat::{self, mat_mul, CMat, C64};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("wire count {0} not supported: expected 2 or 3")]
    BadWireCount(usize),
    #[error("wire {wire} out of range for {n_wires} wires")]
    BadWire { wire: usize, n_wires: usize },
    #[error("control and target coincide on wire {0}")]
    ControlIsTarget(usize),
    #[error("non-finite angle in parameterized gate")]
    NonFiniteAngle,
    #[error("controlled gate payload must be 2x2, got {0}x{0}")]
    BadPayloadDim(usize),
    #[error("gate at index {0} is not a CNOT")]
    NotACnot(usize),
    #[error("gate index {0} out of range for {1} gates")]
    GateIndexOutOfRange(usize, usize),
    #[error("matrix not unitary: residual {0:.3e}")]
    NotUnitary(f64),
    #[error("invalid CNOT config: {0}")]
    BadConfig(String),
    #[error("circuit text: {0}")]
    Parse(String),
}

/// The named single-qubit gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Named {
    X,
    Z,
    Y,
    H,
    G,
    GDag,
}

impl Named {
    pub fn matrix(self) -> CMat {
        match self {
            Named::X => qmat::x(),
            Named::Z => qmat::z(),
            Named::Y => qmat::y(),
            Named::H => qmat::h(),
            Named::G => qmat::g(),
            Named::GDag => qmat::g_dag(),
        }
    }

    fn token(self) -> &'static str {
        match self {
            Named::X => "X",
            Named::Z => "Z",
            Named::Y => "Y",
            Named::H => "H",
            Named::G => "G",
            Named::GDag => "GDAG",
        }
    }
}

/// One gate occurrence in a circuit.
#[derive(Debug, Clone, PartialEq)]
pub enum GateInstance {
    NamedSingle {
        gate: Named,
        wire: usize,
    },
    /// ZYZ-parameterized single-qubit gate; global phase is not a parameter.
    ParamSingle {
        wire: usize,
        phi: f64,
        theta: f64,
        lam: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    /// IR convenience for analysis; surveys never emit it.
    ControlledU {
        control: usize,
        target: usize,
        u: CMat,
    },
}

impl GateInstance {
    fn validate(&self, n_wires: usize) -> Result<(), CircuitError> {
        let check_wire = |w: usize| {
            if w < n_wires {
                Ok(())
            } else {
                Err(CircuitError::BadWire { wire: w, n_wires })
            }
        };
        match self {
            GateInstance::NamedSingle { wire, .. } => check_wire(*wire),
            GateInstance::ParamSingle {
                wire,
                phi,
                theta,
                lam,
            } => {
                check_wire(*wire)?;
                if phi.is_finite() && theta.is_finite() && lam.is_finite() {
                    Ok(())
                } else {
                    Err(CircuitError::NonFiniteAngle)
                }
            }
            GateInstance::Cnot { control, target } => {
                check_wire(*control)?;
                check_wire(*target)?;
                if control == target {
                    return Err(CircuitError::ControlIsTarget(*control));
                }
                Ok(())
            }
            GateInstance::ControlledU { control, target, u } => {
                check_wire(*control)?;
                check_wire(*target)?;
                if control == target {
                    return Err(CircuitError::ControlIsTarget(*control));
                }
                if u.dim() != 2 {
                    return Err(CircuitError::BadPayloadDim(u.dim()));
                }
                Ok(())
            }
        }
    }
}

/// Ordered gate list on 2 or 3 wires; leftmost gate applies first.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_wires: usize,
    gates: Vec<GateInstance>,
}

impl Circuit {
    pub fn new(n_wires: usize, gates: Vec<GateInstance>) -> Result<Self, CircuitError> {
        if !(n_wires == 2 || n_wires == 3) {
            return Err(CircuitError::BadWireCount(n_wires));
        }
        for g in &gates {
            g.validate(n_wires)?;
        }
        Ok(Circuit { n_wires, gates })
    }

    pub fn n_wires(&self) -> usize {
        self.n_wires
    }

    pub fn dim(&self) -> usize {
        1 << self.n_wires
    }

    pub fn gates(&self) -> &[GateInstance] {
        &self.gates
    }
}

// ---------------------------------------------------------------------------
// CNOT configurations.

/// Sequence of normalized CNOT placements (control above target):
/// code 0 is CNOT(1,0), code 1 is CNOT(2,0), code 2 is CNOT(2,1).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CnotConfig {
    codes: Vec<u8>,
}

impl CnotConfig {
    pub fn new(codes: Vec<u8>) -> Result<Self, CircuitError> {
        if codes.is_empty() || codes.len() > 3 {
            return Err(CircuitError::BadConfig(format!(
                "length {} not in 1..=3",
                codes.len()
            )));
        }
        if let Some(bad) = codes.iter().find(|&&c| c > 2) {
            return Err(CircuitError::BadConfig(format!("code {bad} not in 0..=2")));
        }
        Ok(CnotConfig { codes })
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The (control, target) wires a placement code stands for.
    pub fn control_target(code: u8) -> (usize, usize) {
        match code {
            0 => (1, 0),
            1 => (2, 0),
            2 => (2, 1),
            _ => unreachable!("codes are validated at construction"),
        }
    }

    /// Parses the literal format, e.g. "0,1,0".
    pub fn parse(s: &str) -> Result<Self, CircuitError> {
        let codes: Result<Vec<u8>, _> = s
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<u8>()
                    .map_err(|_| CircuitError::BadConfig(format!("bad code '{tok}'")))
            })
            .collect();
        CnotConfig::new(codes?)
    }
}

impl fmt::Display for CnotConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for c in &self.codes {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
            first = false;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Embeddings and evaluation.

/// Embeds a 2x2 gate on one wire of an n-wire register.
pub fn embed_single(n_wires: usize, wire: usize, u: &CMat) -> Result<CMat, CircuitError> {
    if !(n_wires == 2 || n_wires == 3) {
        return Err(CircuitError::BadWireCount(n_wires));
    }
    if wire >= n_wires {
        return Err(CircuitError::BadWire { wire, n_wires });
    }
    if u.dim() != 2 {
        return Err(CircuitError::BadPayloadDim(u.dim()));
    }
    let dim = 1 << n_wires;
    let mut out = CMat::zeros(dim);
    // Entry (r, c) is u[r_w][c_w] when all other bits agree, else 0.
    let rest = (dim - 1) & !(1 << wire);
    for r in 0..dim {
        for c in 0..dim {
            if r & rest == c & rest {
                out.set(r, c, u.get((r >> wire) & 1, (c >> wire) & 1));
            }
        }
    }
    Ok(out)
}

/// Full-width CNOT permutation matrix.
pub fn cnot_matrix(n_wires: usize, control: usize, target: usize) -> Result<CMat, CircuitError> {
    embed_controlled(n_wires, control, target, &qmat::x())
}

/// Full-width controlled-u: applies `u` on `target` when `control` is set.
pub fn embed_controlled(
    n_wires: usize,
    control: usize,
    target: usize,
    u: &CMat,
) -> Result<CMat, CircuitError> {
    if !(n_wires == 2 || n_wires == 3) {
        return Err(CircuitError::BadWireCount(n_wires));
    }
    for w in [control, target] {
        if w >= n_wires {
            return Err(CircuitError::BadWire { wire: w, n_wires });
        }
    }
    if control == target {
        return Err(CircuitError::ControlIsTarget(control));
    }
    if u.dim() != 2 {
        return Err(CircuitError::BadPayloadDim(u.dim()));
    }
    let dim = 1 << n_wires;
    let mut out = CMat::zeros(dim);
    for col in 0..dim {
        if (col >> control) & 1 == 0 {
            out.set(col, col, C64::new(1.0, 0.0));
        } else {
            let cbit = (col >> target) & 1;
            let r0 = col & !(1 << target);
            let r1 = col | (1 << target);
            out.set(r0, col, u.get(0, cbit));
            out.set(r1, col, u.get(1, cbit));
        }
    }
    Ok(out)
}

/// Full-width unitary of a single gate instance.
pub fn gate_matrix(g: &GateInstance, n_wires: usize) -> Result<CMat, CircuitError> {
    g.validate(n_wires)?;
    match g {
        GateInstance::NamedSingle { gate, wire } => embed_single(n_wires, *wire, &gate.matrix()),
        GateInstance::ParamSingle {
            wire,
            phi,
            theta,
            lam,
        } => embed_single(n_wires, *wire, &su2_zyz(*phi, *theta, *lam)),
        GateInstance::Cnot { control, target } => cnot_matrix(n_wires, *control, *target),
        GateInstance::ControlledU { control, target, u } => {
            embed_controlled(n_wires, *control, *target, u)
        }
    }
}

/// Evaluates a circuit to its unitary: gates apply left to right, so the
/// result is the reverse-order product of the embedded matrices.
pub fn eval_circuit(c: &Circuit) -> CMat {
    let mut acc = CMat::identity(c.dim());
    for g in &c.gates {
        let m = gate_matrix(g, c.n_wires).expect("gates validated at construction");
        acc = mat_mul(&m, &acc).expect("same dims");
    }
    acc
}

// ---------------------------------------------------------------------------
// ZYZ parameterization.

/// Rz(a) = diag(e^{-ia/2}, e^{ia/2}).
pub fn rz(a: f64) -> CMat {
    let half = a / 2.0;
    CMat::from_raw(
        2,
        vec![
            C64::from_polar(1.0, -half),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::from_polar(1.0, half),
        ],
    )
}

/// Ry(b) = [[cos b/2, -sin b/2], [sin b/2, cos b/2]].
pub fn ry(b: f64) -> CMat {
    let (s, c) = (b / 2.0).sin_cos();
    CMat::from_raw(
        2,
        vec![
            C64::new(c, 0.0),
            C64::new(-s, 0.0),
            C64::new(s, 0.0),
            C64::new(c, 0.0),
        ],
    )
}

/// Rz(phi)·Ry(theta)·Rz(lam); covers SU(2), global phase not parameterized.
pub fn su2_zyz(phi: f64, theta: f64, lam: f64) -> CMat {
    let (s, c) = (theta / 2.0).sin_cos();
    let sum = (phi + lam) / 2.0;
    let diff = (phi - lam) / 2.0;
    CMat::from_raw(
        2,
        vec![
            C64::from_polar(c, -sum),
            C64::from_polar(-s, -diff),
            C64::from_polar(s, diff),
            C64::from_polar(c, sum),
        ],
    )
}

/// Recovers (alpha, phi, theta, lam) with u = e^{i alpha}·su2_zyz(phi, theta, lam).
pub fn zyz_angles(u: &CMat) -> Result<(f64, f64, f64, f64), CircuitError> {
    if u.dim() != 2 {
        return Err(CircuitError::BadPayloadDim(u.dim()));
    }
    let residual = unitarity_residual(u);
    if residual > qmat::UNITARY_CHECK_TOL {
        return Err(CircuitError::NotUnitary(residual));
    }
    let det = u.get(0, 0) * u.get(1, 1) - u.get(0, 1) * u.get(1, 0);
    let alpha = det.arg() / 2.0;
    let phase = C64::from_polar(1.0, -alpha);
    let su00 = u.get(0, 0) * phase;
    let su10 = u.get(1, 0) * phase;
    let su11 = u.get(1, 1) * phase;
    let c = su00.norm();
    let s = su10.norm();
    let theta = 2.0 * s.atan2(c);
    let (phi, lam) = if s <= 1e-12 {
        (2.0 * su11.arg(), 0.0)
    } else if c <= 1e-12 {
        (2.0 * su10.arg(), 0.0)
    } else {
        (su10.arg() + su11.arg(), su11.arg() - su10.arg())
    };
    Ok((alpha, phi, theta, lam))
}

fn unitarity_residual(u: &CMat) -> f64 {
    let prod = mat_mul(&u.adjoint(), u).expect("same dims");
    qmat::frob_dist(&prod, &CMat::identity(u.dim())).expect("same dims")
}

// ---------------------------------------------------------------------------
// Named target unitaries.

/// The simplified Toffoli gate: on control pattern (q2,q1) the target wire
/// sees I, I, Z, X for 00, 01, 10, 11 respectively. Equals the Toffoli up
/// to the sign of |101>.
pub fn margolus_target() -> CMat {
    sector_blocks(
        &CMat::identity(2),
        &CMat::identity(2),
        &qmat::z(),
        &qmat::x(),
    )
}

/// The Toffoli gate: X on the target iff both controls are set.
pub fn toffoli_target() -> CMat {
    sector_blocks(
        &CMat::identity(2),
        &CMat::identity(2),
        &CMat::identity(2),
        &qmat::x(),
    )
}

// Block-diagonal 8x8 from the four control-sector actions on wire 0.
fn sector_blocks(s00: &CMat, s01: &CMat, s10: &CMat, s11: &CMat) -> CMat {
    let mut out = CMat::zeros(8);
    for (sector, block) in [s00, s01, s10, s11].into_iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                out.set(2 * sector + i, 2 * sector + j, block.get(i, j));
            }
        }
    }
    out
}

/// The three-CNOT, four-rotation realization of the simplified Toffoli:
/// G(0), CNOT(1,0), G(0), CNOT(2,0), Gdag(0), CNOT(1,0), Gdag(0).
pub fn margolus_reference_circuit() -> Circuit {
    use GateInstance::{Cnot, NamedSingle};
    Circuit::new(
        3,
        vec![
            NamedSingle {
                gate: Named::G,
                wire: 0,
            },
            Cnot {
                control: 1,
                target: 0,
            },
            NamedSingle {
                gate: Named::G,
                wire: 0,
            },
            Cnot {
                control: 2,
                target: 0,
            },
            NamedSingle {
                gate: Named::GDag,
                wire: 0,
            },
            Cnot {
                control: 1,
                target: 0,
            },
            NamedSingle {
                gate: Named::GDag,
                wire: 0,
            },
        ],
    )
    .expect("fixed valid circuit")
}

/// The CCY-then-CZ build of the same unitary: Y on wire 0 under controls
/// {2,1}, then Z on wire 0 under control 2. Equals [`margolus_target`]
/// exactly because Z·Y = X.
pub fn ccy_cz_target() -> CMat {
    let ccy = {
        // Controlled-controlled-Y: identity except Y on the (1,1) sector.
        let i2 = CMat::identity(2);
        sector_blocks(&i2, &i2, &i2, &qmat::y())
    };
    let cz = embed_controlled(3, 2, 0, &qmat::z()).expect("valid wires");
    mat_mul(&cz, &ccy).expect("same dims")
}

/// The simplified Toffoli with the roles of wires 2 and 1 interchanged:
/// conjugation by the swap of the two most significant qubits. With the
/// flag unset, returns the unswapped gate.
pub fn permuted_target(swap_top_two: bool) -> CMat {
    let m = margolus_target();
    if !swap_top_two {
        return m;
    }
    let swap = |b: usize| (b & 1) | ((b >> 1) & 1) << 2 | ((b >> 2) & 1) << 1;
    let mut out = CMat::zeros(8);
    for r in 0..8 {
        for c in 0..8 {
            out.set(r, c, m.get(swap(r), swap(c)));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Rewrites and templates.

/// Replaces the CNOT at `index` by the Hadamard-conjugated CNOT with
/// control and target interchanged; the circuit evaluates identically.
pub fn flip_cnot(c: &Circuit, index: usize) -> Result<Circuit, CircuitError> {
    let gate = c
        .gates
        .get(index)
        .ok_or(CircuitError::GateIndexOutOfRange(index, c.gates.len()))?;
    let (a, b) = match gate {
        GateInstance::Cnot { control, target } => (*control, *target),
        _ => return Err(CircuitError::NotACnot(index)),
    };
    let h = |wire| GateInstance::NamedSingle {
        gate: Named::H,
        wire,
    };
    let mut gates = c.gates.clone();
    gates.splice(
        index..=index,
        [
            h(a),
            h(b),
            GateInstance::Cnot {
                control: b,
                target: a,
            },
            h(a),
            h(b),
        ],
    );
    Circuit::new(c.n_wires, gates)
}

/// Dresses a CNOT configuration with parameter placeholders on every wire
/// in every layer: for k CNOTs, 3·(k+1) slots at zero angles. Slot s sits
/// on wire s mod 3 in layer s div 3.
pub fn config_to_template(cfg: &CnotConfig) -> Circuit {
    let mut gates = Vec::with_capacity(4 * cfg.len() + 3);
    let push_layer = |gates: &mut Vec<GateInstance>| {
        for wire in 0..3 {
            gates.push(GateInstance::ParamSingle {
                wire,
                phi: 0.0,
                theta: 0.0,
                lam: 0.0,
            });
        }
    };
    push_layer(&mut gates);
    for &code in cfg.codes() {
        let (control, target) = CnotConfig::control_target(code);
        gates.push(GateInstance::Cnot { control, target });
        push_layer(&mut gates);
    }
    Circuit::new(3, gates).expect("valid by construction")
}

/// The 2-wire analogue: two CNOT(1,0) with placeholder slots on both wires
/// in all three layers (6 slots). Slot s sits on wire s mod 2 in layer
/// s div 2.
pub fn controlled_u_template() -> Circuit {
    let mut gates = Vec::with_capacity(8);
    let push_layer = |gates: &mut Vec<GateInstance>| {
        for wire in 0..2 {
            gates.push(GateInstance::ParamSingle {
                wire,
                phi: 0.0,
                theta: 0.0,
                lam: 0.0,
            });
        }
    };
    push_layer(&mut gates);
    for _ in 0..2 {
        gates.push(GateInstance::Cnot {
            control: 1,
            target: 0,
        });
        push_layer(&mut gates);
    }
    Circuit::new(2, gates).expect("valid by construction")
}

// ---------------------------------------------------------------------------
// Controlled-U decompositions.

pub(crate) fn param_gate(wire: usize, phi: f64, theta: f64, lam: f64) -> GateInstance {
    GateInstance::ParamSingle {
        wire,
        phi,
        theta,
        lam,
    }
}

fn param_from_matrix(wire: usize, u: &CMat) -> Result<GateInstance, CircuitError> {
    let (_, phi, theta, lam) = zyz_angles(u)?;
    Ok(param_gate(wire, phi, theta, lam))
}

/// Decomposes controlled-U (control wire 1, target wire 0) into the
/// two-CNOT template: three layers of single-qubit gates interleaved with
/// two CNOT(1,0), evaluating to the controlled-U up to global phase.
///
/// Writing u = e^{ia}·Rz(p)·Ry(t)·Rz(l), the target wire carries the Euler
/// split C, B, A with A·B·C = I and A·X·B·X·C = e^{-ia}·u; the residual
/// controlled phase becomes a z-rotation on the control wire. Every slot is
/// emitted, identity slots included, so the shape always matches
/// [`controlled_u_template`].
pub fn decompose_controlled_u(u: &CMat) -> Result<Circuit, CircuitError> {
    if u.dim() != 2 {
        return Err(CircuitError::BadPayloadDim(u.dim()));
    }
    let residual = unitarity_residual(u);
    if residual > 1e-10 {
        return Err(CircuitError::NotUnitary(residual));
    }
    let (alpha, phi, theta, lam) = zyz_angles(u)?;
    let cnot = GateInstance::Cnot {
        control: 1,
        target: 0,
    };
    // C = Rz((l-p)/2), B = Ry(-t/2)·Rz(-(l+p)/2), A = Rz(p)·Ry(t/2); the
    // control wire carries Rz(a), which is diag(1, e^{ia}) up to phase.
    let gates = vec![
        param_gate(0, 0.0, 0.0, (lam - phi) / 2.0),
        param_gate(1, 0.0, 0.0, alpha),
        cnot.clone(),
        param_gate(0, 0.0, -theta / 2.0, -(lam + phi) / 2.0),
        param_gate(1, 0.0, 0.0, 0.0),
        cnot,
        param_gate(0, phi, theta / 2.0, 0.0),
        param_gate(1, 0.0, 0.0, 0.0),
    ];
    Circuit::new(2, gates)
}

/// Alternative controlled-U decomposition in the same template whose three
/// control-wire gates are all non-sparse whenever u is not a scalar
/// multiple of the identity.
///
/// Diagonalize u = T·diag(e^{i t0}, e^{i t1})·T' and split the controlled
/// phase across the CNOTs with the rotation axis moved off z by Hadamard
/// conjugation: with f = t1 - t0, the control wire carries H, then
/// Rx(-f/2), then diag(1, e^{i t0})·Rz(f/2)·H, none of which is diagonal
/// or antidiagonal for f in (-2pi, 2pi) away from 0.
pub fn decompose_controlled_u_flipped(u: &CMat) -> Result<Circuit, CircuitError> {
    if u.dim() != 2 {
        return Err(CircuitError::BadPayloadDim(u.dim()));
    }
    let residual = unitarity_residual(u);
    if residual > 1e-10 {
        return Err(CircuitError::NotUnitary(residual));
    }
    let (t, theta0, theta1) = unitary_eigensystem(u);
    let phase = theta1 - theta0;
    let h = qmat::h();
    let t_dag = t.adjoint();
    let chain = |ms: &[&CMat]| {
        ms.iter()
            .skip(1)
            .fold((*ms[0]).clone(), |acc, m| mat_mul(&acc, m).expect("2x2"))
    };
    // Wire-1 (control) gates per layer.
    let a1 = h.clone();
    let a2 = chain(&[&h, &rz(-phase / 2.0), &h]);
    let diag0 = CMat::from_raw(
        2,
        vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::from_polar(1.0, theta0),
        ],
    );
    let a3 = chain(&[&diag0, &rz(phase / 2.0), &h]);
    // Wire-0 (target) gates per layer.
    let b1 = mat_mul(&h, &t_dag).expect("2x2");
    let b2 = CMat::identity(2);
    let b3 = chain(&[&t, &rz(phase / 2.0), &h]);
    let cnot = GateInstance::Cnot {
        control: 1,
        target: 0,
    };
    let gates = vec![
        param_from_matrix(0, &b1)?,
        param_from_matrix(1, &a1)?,
        cnot.clone(),
        param_from_matrix(0, &b2)?,
        param_from_matrix(1, &a2)?,
        cnot,
        param_from_matrix(0, &b3)?,
        param_from_matrix(1, &a3)?,
    ];
    Circuit::new(2, gates)
}

/// Eigendecomposition of a 2x2 unitary: returns (T, t0, t1) with
/// u = T·diag(e^{i t0}, e^{i t1})·adjoint(T) and T unitary.
pub(crate) fn unitary_eigensystem(u: &CMat) -> (CMat, f64, f64) {
    let tr = u.trace();
    let det = u.get(0, 0) * u.get(1, 1) - u.get(0, 1) * u.get(1, 0);
    let disc = (tr * tr - det.scale(4.0)).sqrt();
    let l0 = (tr + disc).unscale(2.0);
    let l1 = (tr - disc).unscale(2.0);
    // Eigenvector of l0 from a row of (u - l0 I), larger-norm choice.
    let cand_a = [u.get(0, 1), l0 - u.get(0, 0)];
    let cand_b = [l0 - u.get(1, 1), u.get(1, 0)];
    let na = cand_a[0].norm_sqr() + cand_a[1].norm_sqr();
    let nb = cand_b[0].norm_sqr() + cand_b[1].norm_sqr();
    let v0 = if na >= nb { cand_a } else { cand_b };
    let n0 = (v0[0].norm_sqr() + v0[1].norm_sqr()).sqrt();
    let (t, t0, t1);
    if n0 < 1e-9 {
        // u is (numerically) scalar: any basis diagonalizes it.
        t = CMat::identity(2);
        t0 = u.get(0, 0).arg();
        t1 = u.get(1, 1).arg();
    } else {
        let c0 = [v0[0] / n0, v0[1] / n0];
        // Orthonormal companion; unitary u is normal so this is the other
        // eigenvector whenever the eigenvalues are distinct.
        let c1 = [-c0[1].conj(), c0[0].conj()];
        t = CMat::from_raw(2, vec![c0[0], c1[0], c0[1], c1[1]]);
        let d = mat_mul(&mat_mul(&t.adjoint(), u).expect("2x2"), &t).expect("2x2");
        t0 = d.get(0, 0).arg();
        t1 = d.get(1, 1).arg();
        debug_assert!(l0.norm() > 0.0 && l1.norm() > 0.0);
    }
    (t, t0, t1)
}

/// The single-qubit gate matrices of a circuit in gate order, with the
/// wire each sits on. Parameterized slots materialize through su2_zyz.
pub fn single_qubit_layers(c: &Circuit) -> Vec<(usize, CMat)> {
    c.gates
        .iter()
        .filter_map(|g| match g {
            GateInstance::NamedSingle { gate, wire } => Some((*wire, gate.matrix())),
            GateInstance::ParamSingle {
                wire,
                phi,
                theta,
                lam,
            } => Some((*wire, su2_zyz(*phi, *theta, *lam))),
            _ => None,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Circuit text format: one gate per line ("G 0", "CNOT 1 0",
// "SU2 0 0.12 1.57 -0.3"), comments with '#'.

pub fn circuit_text(c: &Circuit) -> Result<String, CircuitError> {
    let mut s = String::new();
    for g in &c.gates {
        match g {
            GateInstance::NamedSingle { gate, wire } => {
                s.push_str(&format!("{} {}\n", gate.token(), wire));
            }
            GateInstance::ParamSingle {
                wire,
                phi,
                theta,
                lam,
            } => {
                s.push_str(&format!("SU2 {wire} {phi} {theta} {lam}\n"));
            }
            GateInstance::Cnot { control, target } => {
                s.push_str(&format!("CNOT {control} {target}\n"));
            }
            GateInstance::ControlledU { .. } => {
                return Err(CircuitError::Parse(
                    "controlled-U gates have no text form".into(),
                ));
            }
        }
    }
    Ok(s)
}

pub fn parse_circuit_text(text: &str) -> Result<Circuit, CircuitError> {
    let mut gates = Vec::new();
    let mut max_wire = 1usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let op = toks.next().expect("nonempty line");
        let bad = |msg: &str| CircuitError::Parse(format!("line {}: {msg}", lineno + 1));
        let mut wire_arg = |toks: &mut std::str::SplitWhitespace| -> Result<usize, CircuitError> {
            let w: usize = toks
                .next()
                .ok_or_else(|| bad("missing wire"))?
                .parse()
                .map_err(|_| bad("bad wire"))?;
            max_wire = max_wire.max(w);
            Ok(w)
        };
        let gate = match op {
            "X" | "Z" | "Y" | "H" | "G" | "GDAG" => {
                let gate = match op {
                    "X" => Named::X,
                    "Z" => Named::Z,
                    "Y" => Named::Y,
                    "H" => Named::H,
                    "G" => Named::G,
                    _ => Named::GDag,
                };
                GateInstance::NamedSingle {
                    gate,
                    wire: wire_arg(&mut toks)?,
                }
            }
            "SU2" => {
                let wire = wire_arg(&mut toks)?;
                let mut angle = || -> Result<f64, CircuitError> {
                    toks.next()
                        .ok_or_else(|| bad("missing angle"))?
                        .parse()
                        .map_err(|_| bad("bad angle"))
                };
                GateInstance::ParamSingle {
                    wire,
                    phi: angle()?,
                    theta: angle()?,
                    lam: angle()?,
                }
            }
            "CNOT" => {
                let control = wire_arg(&mut toks)?;
                let target = wire_arg(&mut toks)?;
                GateInstance::Cnot { control, target }
            }
            other => return Err(bad(&format!("unknown gate '{other}'"))),
        };
        if toks.next().is_some() {
            return Err(bad("trailing tokens"));
        }
        gates.push(gate);
    }
    let n_wires = if max_wire <= 1 { 2 } else { 3 };
    Circuit::new(n_wires, gates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{
        frob_dist, haar_unitary, is_sparse, kron, phase_dist, trace, CVec, COS_PI_8,
    };
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn controlled_u_matrix(u: &CMat) -> CMat {
        embed_controlled(2, 1, 0, u).unwrap()
    }

    #[test]
    fn embed_single_matches_kron_form() {
        let i2 = CMat::identity(2);
        let expect = kron(&i2, &kron(&qmat::z(), &i2).unwrap()).unwrap();
        let got = embed_single(3, 1, &qmat::z()).unwrap();
        assert_eq!(frob_dist(&got, &expect).unwrap(), 0.0);
    }

    #[test]
    fn cnot_basis_action() {
        let c20 = cnot_matrix(3, 2, 0).unwrap();
        let out = c20.apply(&CVec::basis(8, 0b100)).unwrap();
        assert_eq!(out, CVec::basis(8, 0b101));
        let c10 = cnot_matrix(3, 1, 0).unwrap();
        let out = c10.apply(&CVec::basis(8, 0b010)).unwrap();
        assert_eq!(out, CVec::basis(8, 0b011));
        assert_eq!(
            c10.apply(&CVec::basis(8, 0b100)).unwrap(),
            CVec::basis(8, 0b100)
        );
    }

    #[test]
    fn gate_matrix_g_entry() {
        let g = gate_matrix(
            &GateInstance::NamedSingle {
                gate: Named::G,
                wire: 0,
            },
            2,
        )
        .unwrap();
        assert_eq!(g.get(0, 0), c(COS_PI_8, 0.0));
    }

    #[test]
    fn gate_matrix_rejects_bad_wires() {
        assert!(matches!(
            gate_matrix(
                &GateInstance::NamedSingle {
                    gate: Named::X,
                    wire: 3
                },
                3
            ),
            Err(CircuitError::BadWire { wire: 3, .. })
        ));
        assert!(matches!(
            gate_matrix(
                &GateInstance::Cnot {
                    control: 1,
                    target: 1
                },
                3
            ),
            Err(CircuitError::ControlIsTarget(1))
        ));
    }

    #[test]
    fn su2_zyz_identity_and_g() {
        assert_eq!(
            frob_dist(&su2_zyz(0.0, 0.0, 0.0), &CMat::identity(2)).unwrap(),
            0.0
        );
        // Ry(pi/4) is exactly the pi/8 rotation gate.
        let got = su2_zyz(0.0, FRAC_PI_4, 0.0);
        assert!(frob_dist(&got, &qmat::g()).unwrap() < 1e-15);
        assert!(got.is_unitary(1e-12));
    }

    #[test]
    fn su2_zyz_pi_pi_is_x_up_to_phase() {
        let got = su2_zyz(PI, PI, 0.0);
        // Oracle: the explicit product is [[0, i], [i, 0]] = i·X.
        let ix = qmat::x().scale(c(0.0, 1.0));
        assert!(frob_dist(&got, &ix).unwrap() < 1e-15);
        assert!(phase_dist(&got, &qmat::x()).unwrap() < 1e-12);
    }

    #[test]
    fn zyz_angles_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut cases = vec![
            qmat::x(),
            qmat::z(),
            qmat::y(),
            qmat::h(),
            qmat::g(),
            CMat::identity(2),
            CMat::identity(2).scale(c(0.0, 1.0)),
            rz(1.3),
            ry(-2.1),
        ];
        for _ in 0..50 {
            cases.push(haar_unitary(2, &mut rng));
        }
        for u in cases {
            let (alpha, phi, theta, lam) = zyz_angles(&u).unwrap();
            let rebuilt = su2_zyz(phi, theta, lam).scale(C64::from_polar(1.0, alpha));
            assert!(
                frob_dist(&rebuilt, &u).unwrap() < 1e-12,
                "round trip failed for {u:?}"
            );
        }
    }

    #[test]
    fn zyz_angles_x_case() {
        let (alpha, _, theta, _) = zyz_angles(&qmat::x()).unwrap();
        assert!((alpha - PI / 2.0).abs() < 1e-12);
        assert!((theta - PI).abs() < 1e-12);
    }

    #[test]
    fn eval_empty_circuit_is_identity() {
        let c = Circuit::new(3, vec![]).unwrap();
        assert_eq!(
            frob_dist(&eval_circuit(&c), &CMat::identity(8)).unwrap(),
            0.0
        );
    }

    #[test]
    fn eval_cnot_involution() {
        let g = GateInstance::Cnot {
            control: 1,
            target: 0,
        };
        let c = Circuit::new(3, vec![g.clone(), g]).unwrap();
        assert_eq!(
            frob_dist(&eval_circuit(&c), &CMat::identity(8)).unwrap(),
            0.0
        );
    }

    #[test]
    fn eval_order_is_left_to_right() {
        // X then Z on one wire is the product Z·X = Y.
        let c = Circuit::new(
            2,
            vec![
                GateInstance::NamedSingle {
                    gate: Named::X,
                    wire: 0,
                },
                GateInstance::NamedSingle {
                    gate: Named::Z,
                    wire: 0,
                },
            ],
        )
        .unwrap();
        let expect = embed_single(2, 0, &qmat::y()).unwrap();
        assert_eq!(frob_dist(&eval_circuit(&c), &expect).unwrap(), 0.0);
    }

    #[test]
    fn margolus_target_basis_table() {
        let m = margolus_target();
        let expect: [(usize, f64); 8] = [
            (0b000, 1.0),
            (0b001, 1.0),
            (0b010, 1.0),
            (0b011, 1.0),
            (0b100, 1.0),
            (0b101, -1.0),
            (0b111, 1.0), // |110> -> |111>
            (0b110, 1.0), // |111> -> |110>
        ];
        for (input, (output, sign)) in expect.iter().enumerate() {
            let got = m.apply(&CVec::basis(8, input)).unwrap();
            assert_eq!(got.amp(*output), c(*sign, 0.0), "input {input:03b}");
            assert!((got.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn margolus_target_is_hermitian_involution() {
        let m = margolus_target();
        assert!(m.is_unitary(1e-15));
        assert_eq!(frob_dist(&m, &m.adjoint()).unwrap(), 0.0);
        let mm = mat_mul(&m, &m).unwrap();
        assert_eq!(frob_dist(&mm, &CMat::identity(8)).unwrap(), 0.0);
    }

    #[test]
    fn margolus_reference_circuit_shape() {
        let circ = margolus_reference_circuit();
        let cnots = circ
            .gates()
            .iter()
            .filter(|g| matches!(g, GateInstance::Cnot { .. }))
            .count();
        assert_eq!(cnots, 3);
        assert_eq!(circ.gates().len() - cnots, 4);
    }

    #[test]
    fn margolus_reference_circuit_evaluates_to_target() {
        let got = eval_circuit(&margolus_reference_circuit());
        let d = phase_dist(&got, &margolus_target()).unwrap();
        assert!(d <= 1e-12, "distance {d}");
        // The sign shows up without any phase alignment as well.
        let out = got.apply(&CVec::basis(8, 0b101)).unwrap();
        assert!((out.amp(0b101) - c(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn ccy_cz_equals_margolus_exactly() {
        assert_eq!(
            frob_dist(&ccy_cz_target(), &margolus_target()).unwrap(),
            0.0
        );
    }

    #[test]
    fn toffoli_relation() {
        let m = margolus_target();
        let tof = toffoli_target();
        assert!(qmat::is_diag_phase_equiv(&m, &tof, 1e-12));
        let prod = mat_mul(&m, &tof.adjoint()).unwrap();
        for i in 0..8 {
            let expect = if i == 0b101 { -1.0 } else { 1.0 };
            assert!((prod.get(i, i) - c(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn permuted_target_moves_the_sign() {
        let mp = permuted_target(true);
        let out = mp.apply(&CVec::basis(8, 0b011)).unwrap();
        assert_eq!(out.amp(0b011), c(-1.0, 0.0));
        // Self-inverse like the original.
        let sq = mat_mul(&mp, &mp).unwrap();
        assert_eq!(frob_dist(&sq, &CMat::identity(8)).unwrap(), 0.0);
        assert_eq!(
            frob_dist(&permuted_target(false), &margolus_target()).unwrap(),
            0.0
        );
    }

    #[test]
    fn permuted_target_equals_swap_conjugation() {
        // Build the swap of wires 2 and 1 as three CNOTs and conjugate.
        let c21 = cnot_matrix(3, 2, 1).unwrap();
        let c12 = cnot_matrix(3, 1, 2).unwrap();
        let swap = mat_mul(&c21, &mat_mul(&c12, &c21).unwrap()).unwrap();
        let conj = mat_mul(&swap, &mat_mul(&margolus_target(), &swap).unwrap()).unwrap();
        assert_eq!(frob_dist(&conj, &permuted_target(true)).unwrap(), 0.0);
    }

    #[test]
    fn flip_cnot_two_wire_identity() {
        let circ = Circuit::new(
            2,
            vec![GateInstance::Cnot {
                control: 0,
                target: 1,
            }],
        )
        .unwrap();
        let flipped = flip_cnot(&circ, 0).unwrap();
        assert_eq!(flipped.gates().len(), 5);
        let d = frob_dist(&eval_circuit(&flipped), &eval_circuit(&circ)).unwrap();
        assert!(d <= 1e-12);
    }

    #[test]
    fn flip_cnot_twice_preserves_evaluation() {
        let circ = Circuit::new(
            2,
            vec![GateInstance::Cnot {
                control: 1,
                target: 0,
            }],
        )
        .unwrap();
        let once = flip_cnot(&circ, 0).unwrap();
        // After one flip the CNOT sits at index 2.
        let twice = flip_cnot(&once, 2).unwrap();
        let d = frob_dist(&eval_circuit(&twice), &eval_circuit(&circ)).unwrap();
        assert!(d <= 1e-12);
    }

    #[test]
    fn flip_cnot_inside_margolus_circuit() {
        let circ = margolus_reference_circuit();
        for idx in [1, 3, 5] {
            let flipped = flip_cnot(&circ, idx).unwrap();
            let d = phase_dist(&eval_circuit(&flipped), &margolus_target()).unwrap();
            assert!(d <= 1e-12, "flip at {idx}: {d}");
        }
    }

    #[test]
    fn flip_cnot_rejects_non_cnot_positions() {
        let circ = margolus_reference_circuit();
        assert!(matches!(flip_cnot(&circ, 0), Err(CircuitError::NotACnot(0))));
        assert!(matches!(
            flip_cnot(&circ, 99),
            Err(CircuitError::GateIndexOutOfRange(99, 7))
        ));
    }

    #[test]
    fn config_template_shapes() {
        let cfg = CnotConfig::parse("0,1,0").unwrap();
        let t = config_to_template(&cfg);
        let slots = t
            .gates()
            .iter()
            .filter(|g| matches!(g, GateInstance::ParamSingle { .. }))
            .count();
        assert_eq!(slots, 12);
        assert_eq!(t.gates().len(), 15);
        let single = config_to_template(&CnotConfig::new(vec![0]).unwrap());
        assert_eq!(single.gates().len(), 7);
    }

    #[test]
    fn config_template_zero_angles_gives_bare_cnot_product() {
        let cfg = CnotConfig::parse("0,1,0").unwrap();
        let got = eval_circuit(&config_to_template(&cfg));
        // q0 ^= q1, then q0 ^= q2, then q0 ^= q1 collapses to q0 ^= q2.
        let expect = cnot_matrix(3, 2, 0).unwrap();
        assert_eq!(frob_dist(&got, &expect).unwrap(), 0.0);
    }

    #[test]
    fn bare_cnot_product_distance_to_margolus() {
        // Frozen oracle for the all-zero synthesis cost in template (0,1,0):
        // tr(M† · CNOT(2,0)) = 6, so the distance is sqrt(1 - 6/8) = 0.5.
        let cfg = CnotConfig::parse("0,1,0").unwrap();
        let bare = eval_circuit(&config_to_template(&cfg));
        let t = trace(&mat_mul(&margolus_target().adjoint(), &bare).unwrap());
        assert!((t.norm() - 6.0).abs() < 1e-12);
        let d = phase_dist(&bare, &margolus_target()).unwrap();
        assert!((d - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cnot_config_parse_and_display() {
        let cfg = CnotConfig::parse("0,1,0").unwrap();
        assert_eq!(cfg.codes(), &[0, 1, 0]);
        assert_eq!(cfg.to_string(), "0,1,0");
        assert_eq!(CnotConfig::control_target(0), (1, 0));
        assert_eq!(CnotConfig::control_target(1), (2, 0));
        assert_eq!(CnotConfig::control_target(2), (2, 1));
        assert!(CnotConfig::parse("0,3").is_err());
        assert!(CnotConfig::parse("").is_err());
        assert!(CnotConfig::parse("0,1,0,1").is_err());
    }

    #[test]
    fn decompose_controlled_z_round_trips() {
        let circ = decompose_controlled_u(&qmat::z()).unwrap();
        let got = eval_circuit(&circ);
        let expect = controlled_u_matrix(&qmat::z());
        assert!(phase_dist(&got, &expect).unwrap() <= 1e-12);
    }

    #[test]
    fn decompose_controlled_x_round_trips() {
        let circ = decompose_controlled_u(&qmat::x()).unwrap();
        let got = eval_circuit(&circ);
        let expect = cnot_matrix(2, 1, 0).unwrap();
        assert!(phase_dist(&got, &expect).unwrap() <= 1e-12);
    }

    #[test]
    fn decompose_controlled_u_haar_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let u = haar_unitary(2, &mut rng);
            let circ = decompose_controlled_u(&u).unwrap();
            let d = phase_dist(&eval_circuit(&circ), &controlled_u_matrix(&u)).unwrap();
            assert!(d <= 1e-10, "round trip {d}");
        }
    }

    #[test]
    fn decompose_shape_matches_template() {
        let circ = decompose_controlled_u(&qmat::g()).unwrap();
        assert_eq!(circ.gates().len(), 8);
        let template = controlled_u_template();
        for (got, tpl) in circ.gates().iter().zip(template.gates()) {
            match (got, tpl) {
                (
                    GateInstance::ParamSingle { wire: a, .. },
                    GateInstance::ParamSingle { wire: b, .. },
                ) => assert_eq!(a, b),
                (GateInstance::Cnot { .. }, GateInstance::Cnot { .. }) => {}
                other => panic!("shape mismatch: {other:?}"),
            }
        }
    }

    #[test]
    fn decompose_control_wire_gates_are_sparse() {
        // The canonical construction puts only z-rotations on the control
        // wire, the sparse shape the first-gate-sparse law propagates.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..20 {
            let u = haar_unitary(2, &mut rng);
            let circ = decompose_controlled_u(&u).unwrap();
            for (wire, m) in single_qubit_layers(&circ) {
                if wire == 1 {
                    assert!(is_sparse(&m, 1e-10));
                }
            }
        }
    }

    #[test]
    fn decompose_rejects_non_unitary() {
        let bad = CMat::identity(2).scale(c(1.5, 0.0));
        assert!(matches!(
            decompose_controlled_u(&bad),
            Err(CircuitError::NotUnitary(_))
        ));
    }

    #[test]
    fn flipped_decomposition_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut cases = vec![qmat::z(), qmat::x(), qmat::g(), qmat::h()];
        for _ in 0..30 {
            cases.push(haar_unitary(2, &mut rng));
        }
        for u in cases {
            let circ = decompose_controlled_u_flipped(&u).unwrap();
            let d = phase_dist(&eval_circuit(&circ), &controlled_u_matrix(&u)).unwrap();
            assert!(d <= 1e-10, "flipped round trip {d}");
        }
    }

    #[test]
    fn flipped_decomposition_control_gates_non_sparse() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut cases = vec![qmat::z(), qmat::g()];
        for _ in 0..20 {
            cases.push(haar_unitary(2, &mut rng));
        }
        for u in cases {
            let circ = decompose_controlled_u_flipped(&u).unwrap();
            for (wire, m) in single_qubit_layers(&circ) {
                if wire == 1 {
                    assert!(!is_sparse(&m, 1e-6), "sparse control gate for {u:?}");
                }
            }
        }
    }

    #[test]
    fn eigensystem_reconstructs_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let mut cases = vec![qmat::z(), qmat::x(), qmat::h(), CMat::identity(2)];
        for _ in 0..50 {
            cases.push(haar_unitary(2, &mut rng));
        }
        for u in cases {
            let (t, t0, t1) = unitary_eigensystem(&u);
            assert!(t.is_unitary(1e-10));
            let d = CMat::from_raw(
                2,
                vec![
                    C64::from_polar(1.0, t0),
                    c(0.0, 0.0),
                    c(0.0, 0.0),
                    C64::from_polar(1.0, t1),
                ],
            );
            let rebuilt = mat_mul(&mat_mul(&t, &d).unwrap(), &t.adjoint()).unwrap();
            assert!(frob_dist(&rebuilt, &u).unwrap() < 1e-9);
        }
    }

    #[test]
    fn circuit_text_round_trip() {
        let circ = decompose_controlled_u(&qmat::g()).unwrap();
        let text = circuit_text(&circ).unwrap();
        let parsed = parse_circuit_text(&text).unwrap();
        let d = frob_dist(&eval_circuit(&parsed), &eval_circuit(&circ)).unwrap();
        assert!(d < 1e-12);
        let named = margolus_reference_circuit();
        let text = circuit_text(&named).unwrap();
        assert!(text.contains("G 0") && text.contains("CNOT 1 0") && text.contains("GDAG 0"));
        let parsed = parse_circuit_text(&text).unwrap();
        assert_eq!(parsed, named);
    }

    #[test]
    fn circuit_text_rejects_malformed_lines() {
        assert!(parse_circuit_text("BOGUS 0\n").is_err());
        assert!(parse_circuit_text("CNOT 1\n").is_err());
        assert!(parse_circuit_text("SU2 0 1.0 2.0\n").is_err());
        assert!(parse_circuit_text("G 0 extra\n").is_err());
        // Comments and blank lines are fine.
        let parsed = parse_circuit_text("# top\n\nG 0  # rotation\nCNOT 1 0\n").unwrap();
        assert_eq!(parsed.gates().len(), 2);
    }

    #[test]
    fn circuit_new_validates_gates() {
        assert!(Circuit::new(4, vec![]).is_err());
        assert!(Circuit::new(
            2,
            vec![GateInstance::NamedSingle {
                gate: Named::X,
                wire: 2
            }]
        )
        .is_err());
        assert!(Circuit::new(
            2,
            vec![GateInstance::ParamSingle {
                wire: 0,
                phi: f64::NAN,
                theta: 0.0,
                lam: 0.0
            }]
        )
        .is_err());
    }

    fn arb_gate() -> impl Strategy<Value = GateInstance> {
        let named = (0usize..3).prop_map(|wire| GateInstance::NamedSingle {
            gate: Named::H,
            wire,
        });
        let param = (0usize..3, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(
            |(wire, phi, theta, lam)| GateInstance::ParamSingle {
                wire,
                phi,
                theta,
                lam,
            },
        );
        let cnot = prop::sample::select(vec![(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)])
            .prop_map(|(control, target)| GateInstance::Cnot { control, target });
        prop_oneof![named, param, cnot]
    }

    proptest! {
        #[test]
        fn flip_preserves_evaluation_everywhere(
            gates in proptest::collection::vec(arb_gate(), 1..7)
        ) {
            let circ = Circuit::new(3, gates).unwrap();
            let reference = eval_circuit(&circ);
            for (i, g) in circ.gates().iter().enumerate() {
                if matches!(g, GateInstance::Cnot { .. }) {
                    let flipped = flip_cnot(&circ, i).unwrap();
                    let d = frob_dist(&eval_circuit(&flipped), &reference).unwrap();
                    prop_assert!(d <= 1e-12);
                }
            }
        }

        #[test]
        fn su2_zyz_always_unitary(
            phi in -7.0f64..7.0, theta in -7.0f64..7.0, lam in -7.0f64..7.0
        ) {
            prop_assert!(su2_zyz(phi, theta, lam).is_unitary(1e-13));
        }
    }
}
