//! Numerical synthesis over CNOT templates.
//!
//! A [`SynthesisProblem`] pairs a template circuit (CNOTs interleaved with
//! single-qubit slots) with a target unitary. Each slot is either free
//! (three Euler angles to optimize), pinned to the identity, or pinned to a
//! fixed gate. [`synthesize`] runs a deterministic multi-start local search
//! and classifies the outcome as [`Verdict::Feasible`],
//! [`Verdict::EvidenceInfeasible`], or [`Verdict::Unresolved`].
//!
//! The objective is distance up to global phase. Internally the optimizer
//! minimizes the smooth square `q = 1 - |tr(target^dag V)| / d`, with an
//! analytic gradient assembled from prefix/suffix products, under an
//! L-BFGS two-loop recursion with Armijo backtracking. Everything is
//! sequential and seeded, so results are bit-reproducible.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{embed_single, gate_matrix, param_gate, su2_zyz, zyz_angles, Circuit, GateInstance};
use crate::qmat::{matmul_into, C64, CMat, UNITARY_CHECK_TOL};

/// Default number of random restarts.
pub const DEFAULT_RESTARTS: usize = 50;
/// Default objective-evaluation budget per restart.
pub const DEFAULT_MAX_EVALS: u64 = 20_000;
/// Default convergence tolerance on the reported cost.
pub const DEFAULT_CONVERGE_TOL: f64 = 1e-12;
/// Best cost at or below this is declared feasible.
pub const DEFAULT_FEASIBLE_TOL: f64 = 1e-8;
/// Best cost at or above this, after all restarts, is evidence of infeasibility.
pub const DEFAULT_INFEASIBLE_FLOOR: f64 = 1e-2;
/// Default master seed.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("template has {expected} single-qubit slots, got {got} slot specs")]
    SlotCount { expected: usize, got: usize },
    #[error("target dimension {got} does not match template dimension {expected}")]
    TargetDim { expected: usize, got: usize },
    #[error("fixed slot gate must be 2x2, got dimension {0}")]
    FixedGateDim(usize),
    #[error("{what} is not unitary (residual {residual:.3e})")]
    NotUnitary { what: &'static str, residual: f64 },
    #[error("invalid optimizer settings: {0}")]
    Settings(String),
}

/// What a single-qubit slot in the template is allowed to hold.
#[derive(Debug, Clone)]
pub enum SlotSpec {
    /// Three free Euler angles.
    Free,
    /// Pinned to the identity; contributes nothing to the product.
    Identity,
    /// Pinned to a fixed 2x2 unitary.
    FixedGate(CMat),
}

/// Equivalence relation under which the target must be matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equivalence {
    /// Match up to a single global phase.
    GlobalPhase,
}

/// Knobs for [`optimize_local`] and [`synthesize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub restarts: usize,
    /// Objective-evaluation budget per restart, line-search probes included.
    pub max_evals: u64,
    /// Stop after two consecutive accepted steps improve cost by less than this.
    pub converge_tol: f64,
    pub feasible_tol: f64,
    pub infeasible_floor: f64,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            restarts: DEFAULT_RESTARTS,
            max_evals: DEFAULT_MAX_EVALS,
            converge_tol: DEFAULT_CONVERGE_TOL,
            feasible_tol: DEFAULT_FEASIBLE_TOL,
            infeasible_floor: DEFAULT_INFEASIBLE_FLOOR,
            seed: DEFAULT_SEED,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.restarts == 0 {
            return Err(SynthError::Settings("restarts must be positive".into()));
        }
        if self.max_evals == 0 {
            return Err(SynthError::Settings("max_evals must be positive".into()));
        }
        for (name, v) in [
            ("converge_tol", self.converge_tol),
            ("feasible_tol", self.feasible_tol),
            ("infeasible_floor", self.infeasible_floor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SynthError::Settings(format!("{name} must be positive and finite")));
            }
        }
        if self.feasible_tol >= self.infeasible_floor {
            return Err(SynthError::Settings(
                "feasible_tol must be strictly below infeasible_floor".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome classification for a multi-start synthesis run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    EvidenceInfeasible,
    Unresolved,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Feasible => "Feasible",
            Verdict::EvidenceInfeasible => "EvidenceInfeasible",
            Verdict::Unresolved => "Unresolved",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub best_cost: f64,
    pub best_params: Vec<f64>,
    pub verdict: Verdict,
    /// Restarts actually executed (early exit stops at the first feasible hit).
    pub restarts_run: usize,
    /// Objective evaluations summed over all restarts.
    pub evals: u64,
}

/// One compiled factor of the template product, in application order.
enum Factor {
    /// Run of constant gates premultiplied into a single matrix.
    Const(Vec<C64>),
    /// A free slot: su2_zyz(params[base..base+3]) acting on `wire`.
    Slot { wire: usize, param_base: usize },
}

/// A template circuit, per-slot specs, and the unitary the dressed template
/// should reproduce up to global phase.
pub struct SynthesisProblem {
    template: Circuit,
    slots: Vec<SlotSpec>,
    target: CMat,
    equivalence: Equivalence,
    dim: usize,
    factors: Vec<Factor>,
    n_free: usize,
    /// Row-major target entries, for the overlap trace.
    target_rows: Vec<C64>,
}

impl SynthesisProblem {
    /// Compile a template, slot assignment, and target into a problem.
    ///
    /// Consecutive constant gates (CNOTs, identity slots, fixed slots) are
    /// premultiplied so each evaluation touches as few factors as possible.
    pub fn new(template: Circuit, slots: Vec<SlotSpec>, target: CMat) -> Result<Self, SynthError> {
        let dim = template.dim();
        let n_slots = template
            .gates()
            .iter()
            .filter(|g| matches!(g, GateInstance::ParamSingle { .. }))
            .count();
        if slots.len() != n_slots {
            return Err(SynthError::SlotCount { expected: n_slots, got: slots.len() });
        }
        if target.dim() != dim {
            return Err(SynthError::TargetDim { expected: dim, got: target.dim() });
        }
        if !target.is_unitary(UNITARY_CHECK_TOL) {
            return Err(SynthError::NotUnitary { what: "target", residual: unitary_residual(&target) });
        }
        for spec in &slots {
            if let SlotSpec::FixedGate(g) = spec {
                if g.dim() != 2 {
                    return Err(SynthError::FixedGateDim(g.dim()));
                }
                if !g.is_unitary(UNITARY_CHECK_TOL) {
                    return Err(SynthError::NotUnitary {
                        what: "fixed slot gate",
                        residual: unitary_residual(g),
                    });
                }
            }
        }

        let mut factors: Vec<Factor> = Vec::new();
        let mut pending: Option<Vec<C64>> = None;
        let mut n_free = 0usize;
        let mut slot_idx = 0usize;
        let fold_const = |pending: &mut Option<Vec<C64>>, mat: &CMat| {
            let m = rows_of(mat);
            *pending = Some(match pending.take() {
                // Later gates multiply from the left.
                Some(prev) => {
                    let mut out = vec![C64::new(0.0, 0.0); dim * dim];
                    matmul_into(dim, &m, &prev, &mut out);
                    out
                }
                None => m,
            });
        };
        for gate in template.gates() {
            match gate {
                GateInstance::ParamSingle { wire, .. } => {
                    let spec = &slots[slot_idx];
                    slot_idx += 1;
                    match spec {
                        SlotSpec::Free => {
                            if let Some(m) = pending.take() {
                                factors.push(Factor::Const(m));
                            }
                            factors.push(Factor::Slot { wire: *wire, param_base: 3 * n_free });
                            n_free += 1;
                        }
                        SlotSpec::Identity => {}
                        SlotSpec::FixedGate(g) => {
                            let embedded = embed_single(template.n_wires(), *wire, g)
                                .expect("validated 2x2 gate");
                            fold_const(&mut pending, &embedded);
                        }
                    }
                }
                other => {
                    let embedded = gate_matrix(other, template.n_wires())
                        .expect("validated template gate");
                    fold_const(&mut pending, &embedded);
                }
            }
        }
        if let Some(m) = pending.take() {
            factors.push(Factor::Const(m));
        }
        if factors.is_empty() {
            // Empty template evaluates to the identity.
            factors.push(Factor::Const(rows_of(&CMat::identity(dim))));
        }

        let target_rows = rows_of(&target);
        Ok(SynthesisProblem {
            template,
            slots,
            target,
            equivalence: Equivalence::GlobalPhase,
            dim,
            factors,
            n_free,
            target_rows,
        })
    }

    /// Problem with every slot free.
    pub fn all_free(template: Circuit, target: CMat) -> Result<Self, SynthError> {
        let n = template
            .gates()
            .iter()
            .filter(|g| matches!(g, GateInstance::ParamSingle { .. }))
            .count();
        SynthesisProblem::new(template, vec![SlotSpec::Free; n], target)
    }

    pub fn template(&self) -> &Circuit {
        &self.template
    }

    pub fn slots(&self) -> &[SlotSpec] {
        &self.slots
    }

    pub fn target(&self) -> &CMat {
        &self.target
    }

    pub fn equivalence(&self) -> Equivalence {
        self.equivalence
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Number of free parameters (three per free slot).
    pub fn n_params(&self) -> usize {
        3 * self.n_free
    }

    /// Wire carried by each slot, in template order.
    pub fn slot_wires(&self) -> Vec<usize> {
        self.template
            .gates()
            .iter()
            .filter_map(|g| match g {
                GateInstance::ParamSingle { wire, .. } => Some(*wire),
                _ => None,
            })
            .collect()
    }

    /// The 2x2 gate each slot contributes under `params`.
    pub fn slot_gates(&self, params: &[f64]) -> Result<Vec<CMat>, SynthError> {
        self.check_params(params)?;
        let mut out = Vec::with_capacity(self.slots.len());
        let mut base = 0usize;
        for spec in &self.slots {
            out.push(match spec {
                SlotSpec::Free => {
                    let g = su2_zyz(params[base], params[base + 1], params[base + 2]);
                    base += 3;
                    g
                }
                SlotSpec::Identity => CMat::identity(2),
                SlotSpec::FixedGate(g) => g.clone(),
            });
        }
        Ok(out)
    }

    /// Substitute `params` into the template, yielding a concrete circuit.
    ///
    /// Fixed gates are re-expressed through their Euler angles, so the
    /// instantiated circuit can differ from the compiled product by a global
    /// phase; cost is phase-blind, so both evaluate to the same cost.
    pub fn instantiate(&self, params: &[f64]) -> Result<Circuit, SynthError> {
        self.check_params(params)?;
        let mut gates = Vec::with_capacity(self.template.gates().len());
        let mut slot_idx = 0usize;
        let mut base = 0usize;
        for gate in self.template.gates() {
            match gate {
                GateInstance::ParamSingle { wire, .. } => {
                    let spec = &self.slots[slot_idx];
                    slot_idx += 1;
                    let g = match spec {
                        SlotSpec::Free => {
                            let g = param_gate(*wire, params[base], params[base + 1], params[base + 2]);
                            base += 3;
                            g
                        }
                        SlotSpec::Identity => param_gate(*wire, 0.0, 0.0, 0.0),
                        SlotSpec::FixedGate(m) => {
                            let (_, phi, theta, lam) = zyz_angles(m).expect("validated unitary");
                            param_gate(*wire, phi, theta, lam)
                        }
                    };
                    gates.push(g);
                }
                other => gates.push(other.clone()),
            }
        }
        Ok(Circuit::new(self.template.n_wires(), gates).expect("template stays valid"))
    }

    fn check_params(&self, params: &[f64]) -> Result<(), SynthError> {
        if params.len() != self.n_params() {
            return Err(SynthError::ParamCount { expected: self.n_params(), got: params.len() });
        }
        Ok(())
    }
}

fn unitary_residual(m: &CMat) -> f64 {
    let d = m.dim();
    let prod = crate::qmat::mat_mul(&m.adjoint(), m).expect("same dim");
    let eye = CMat::identity(d);
    crate::qmat::frob_dist(&prod, &eye).expect("same dim")
}

fn rows_of(m: &CMat) -> Vec<C64> {
    let d = m.dim();
    let mut out = Vec::with_capacity(d * d);
    for r in 0..d {
        for c in 0..d {
            out.push(m.get(r, c));
        }
    }
    out
}

/// Cached per-slot gate data for one evaluation.
#[derive(Clone, Copy)]
struct SlotCache {
    /// [u00, u01, u10, u11]
    u: [C64; 4],
    /// Entry-wise derivative with respect to theta.
    dtheta: [C64; 4],
}

impl SlotCache {
    fn zero() -> Self {
        let z = C64::new(0.0, 0.0);
        SlotCache { u: [z; 4], dtheta: [z; 4] }
    }

    fn from_angles(phi: f64, theta: f64, lam: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        let e_sum_n = C64::from_polar(1.0, -(phi + lam) / 2.0);
        let e_diff_n = C64::from_polar(1.0, -(phi - lam) / 2.0);
        let e_diff = e_diff_n.conj();
        let e_sum = e_sum_n.conj();
        SlotCache {
            u: [e_sum_n.scale(c), e_diff_n.scale(-s), e_diff.scale(s), e_sum.scale(c)],
            dtheta: [
                e_sum_n.scale(-s / 2.0),
                e_diff_n.scale(-c / 2.0),
                e_diff.scale(c / 2.0),
                e_sum.scale(-s / 2.0),
            ],
        }
    }
}

/// Reusable buffers for repeated evaluations of one problem.
struct Workspace {
    /// prefixes[i] = product of factors [0, i), row-major; prefixes[0] = I.
    prefixes: Vec<Vec<C64>>,
    /// suffixes[i] = product of factors [i, m), row-major; suffixes[m] = I.
    suffixes: Vec<Vec<C64>>,
    /// dv[k] = derivative of the full product with respect to parameter k.
    dv: Vec<Vec<C64>>,
    scratch: Vec<C64>,
    slot_cache: Vec<SlotCache>,
}

impl Workspace {
    fn new(problem: &SynthesisProblem) -> Self {
        let d = problem.dim;
        let m = problem.factors.len();
        let mut prefixes = vec![vec![C64::new(0.0, 0.0); d * d]; m + 1];
        let mut suffixes = vec![vec![C64::new(0.0, 0.0); d * d]; m + 1];
        for k in 0..d {
            prefixes[0][k * d + k] = C64::new(1.0, 0.0);
            suffixes[m][k * d + k] = C64::new(1.0, 0.0);
        }
        Workspace {
            prefixes,
            suffixes,
            dv: vec![vec![C64::new(0.0, 0.0); d * d]; problem.n_params()],
            scratch: vec![C64::new(0.0, 0.0); d * d],
            slot_cache: vec![SlotCache::zero(); problem.n_free],
        }
    }
}

/// out = embed(u on wire) * input, both row-major d x d.
fn apply_slot_left(d: usize, wire: usize, u: &[C64; 4], input: &[C64], out: &mut [C64]) {
    let bit = 1usize << wire;
    for r0 in 0..d {
        if r0 & bit != 0 {
            continue;
        }
        let r1 = r0 | bit;
        for col in 0..d {
            let a = input[r0 * d + col];
            let b = input[r1 * d + col];
            out[r0 * d + col] = u[0] * a + u[1] * b;
            out[r1 * d + col] = u[2] * a + u[3] * b;
        }
    }
}

/// out = input * embed(u on wire), both row-major d x d.
fn apply_slot_right(d: usize, wire: usize, u: &[C64; 4], input: &[C64], out: &mut [C64]) {
    let bit = 1usize << wire;
    for r in 0..d {
        let row = r * d;
        for c0 in 0..d {
            if c0 & bit != 0 {
                continue;
            }
            let c1 = c0 | bit;
            let a = input[row + c0];
            let b = input[row + c1];
            out[row + c0] = a * u[0] + b * u[2];
            out[row + c1] = a * u[1] + b * u[3];
        }
    }
}

/// Evaluate the cost at `params`; with `want_jac` also fill `ws.dv` with the
/// derivative of the evaluated product with respect to every parameter.
///
/// The cost is the phase-aligned Frobenius distance divided by sqrt(2d),
/// mathematically sqrt(1 - |t|/d) but numerically exact near zero where that
/// form loses half the significant digits. Returns (cost, t, c_phase) with
/// t the overlap trace and c_phase = conj(t)/|t| the aligning phase.
fn eval_full(
    problem: &SynthesisProblem,
    params: &[f64],
    ws: &mut Workspace,
    want_jac: bool,
) -> (f64, C64, C64) {
    let d = problem.dim;
    let m = problem.factors.len();
    debug_assert_eq!(params.len(), problem.n_params());

    for (i, factor) in problem.factors.iter().enumerate() {
        let (done, rest) = ws.prefixes.split_at_mut(i + 1);
        let src = &done[i];
        let dst = &mut rest[0];
        match factor {
            Factor::Const(mat) => matmul_into(d, mat, src, dst),
            Factor::Slot { wire, param_base } => {
                let sc = SlotCache::from_angles(
                    params[*param_base],
                    params[*param_base + 1],
                    params[*param_base + 2],
                );
                ws.slot_cache[param_base / 3] = sc;
                apply_slot_left(d, *wire, &sc.u, src, dst);
            }
        }
    }
    let v = &ws.prefixes[m];

    let mut t = C64::new(0.0, 0.0);
    for k in 0..d * d {
        t += problem.target_rows[k].conj() * v[k];
    }
    let tn = t.norm();
    let c_phase = if tn > 1e-300 { t.conj().unscale(tn) } else { C64::new(1.0, 0.0) };
    let mut sum = 0.0;
    for k in 0..d * d {
        sum += (problem.target_rows[k] - c_phase * v[k]).norm_sqr();
    }
    let cost = (sum / (2.0 * d as f64)).sqrt();

    if want_jac {
        for i in (0..m).rev() {
            let (head, tail) = ws.suffixes.split_at_mut(i + 1);
            let src = &tail[0];
            let dst = &mut head[i];
            match &problem.factors[i] {
                Factor::Const(mat) => matmul_into(d, src, mat, dst),
                Factor::Slot { wire, param_base } => {
                    apply_slot_right(d, *wire, &ws.slot_cache[param_base / 3].u, src, dst)
                }
            }
        }
        let half_i = C64::new(0.0, 0.5);
        for (i, factor) in problem.factors.iter().enumerate() {
            if let Factor::Slot { wire, param_base } = factor {
                let sc = ws.slot_cache[param_base / 3];
                let [u00, u01, u10, u11] = sc.u;
                // d/dphi = (-i/2) Z u, d/dlam = u (-i/2) Z, entrywise.
                let du_phi = [-half_i * u00, -half_i * u01, half_i * u10, half_i * u11];
                let du_lam = [-half_i * u00, half_i * u01, -half_i * u10, half_i * u11];
                let dus = [du_phi, sc.dtheta, du_lam];
                for (j, du) in dus.iter().enumerate() {
                    apply_slot_left(d, *wire, du, &ws.prefixes[i], &mut ws.scratch);
                    matmul_into(d, &ws.suffixes[i + 1], &ws.scratch, &mut ws.dv[param_base + j]);
                }
            }
        }
    }
    (cost, t, c_phase)
}

/// Cost plus the gradient of q = cost^2; the gradient path is shared with the
/// least-squares Jacobian so the finite-difference test covers both.
fn eval(problem: &SynthesisProblem, params: &[f64], ws: &mut Workspace, grad: Option<&mut [f64]>) -> f64 {
    let want = grad.is_some();
    let (cost, _, c_phase) = eval_full(problem, params, ws, want);
    if let Some(grad) = grad {
        let d = problem.dim;
        let inv_d = 1.0 / d as f64;
        for k in 0..problem.n_params() {
            let mut tk = C64::new(0.0, 0.0);
            for j in 0..d * d {
                tk += problem.target_rows[j].conj() * ws.dv[k][j];
            }
            grad[k] = -(c_phase * tk).re * inv_d;
        }
    }
    cost
}

/// Distance (up to global phase) between the dressed template and the target.
pub fn cost(params: &[f64], problem: &SynthesisProblem) -> Result<f64, SynthError> {
    problem.check_params(params)?;
    let mut ws = Workspace::new(problem);
    Ok(eval(problem, params, &mut ws, None))
}

/// Outcome of one local optimization run.
#[derive(Debug, Clone)]
pub struct LocalRun {
    pub cost: f64,
    pub params: Vec<f64>,
    /// Objective evaluations consumed, trial steps included.
    pub evals: u64,
    /// Accepted cost after each iteration, starting cost first; non-increasing.
    pub trace: Vec<f64>,
}

/// Cholesky solve of (a + mu * damp) x = b for symmetric positive definite a.
/// Returns None when the damped matrix is not numerically positive definite.
fn solve_damped(n: usize, a: &[f64], damp: &[f64], mu: f64, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = a.to_vec();
    for i in 0..n {
        l[i * n + i] += mu * damp[i];
    }
    // In-place lower Cholesky.
    for i in 0..n {
        for j in 0..=i {
            let mut s = l[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] = x[i] - l[i * n + k] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] = x[i] - l[k * n + i] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    Some(x)
}

/// Local least-squares descent (Levenberg-Marquardt) from `start`.
///
/// The residual is target - e^{i psi} V(x) with the global phase treated as
/// an extra column of the Jacobian and re-optimized in closed form at every
/// evaluation; the damped normal equations therefore stay honest about the
/// phase freedom while only the angle components of each step are applied.
/// Deterministic; the reported cost sequence is non-increasing and the
/// evaluation budget is respected exactly (a budget of 1 spends it on the
/// start point and returns it).
pub fn optimize_local(problem: &SynthesisProblem, start: &[f64], settings: &OptimizerSettings) -> LocalRun {
    assert_eq!(start.len(), problem.n_params(), "start has wrong parameter count");
    const MU_INIT: f64 = 1e-3;
    const MU_SHRINK: f64 = 1.0 / 3.0;
    const MU_GROW: f64 = 4.0;
    const MU_MAX: f64 = 1e14;

    let n = start.len();
    let d = problem.dim;
    let dd = d * d;
    let nb = n + 1;
    let mut ws = Workspace::new(problem);
    let budget = settings.max_evals;
    let mut evals: u64 = 0;

    let mut x = start.to_vec();
    let (mut f, _, mut c_lin) = eval_full(problem, &x, &mut ws, true);
    evals += 1;
    let mut trace = vec![f];

    let mut mu = MU_INIT;
    let mut small_drops = 0u32;
    let mut normal = vec![0.0; nb * nb];
    let mut damp = vec![0.0; nb];
    let mut rhs = vec![0.0; nb];
    let mut xn = vec![0.0; n];

    'outer: while evals < budget {
        // Already at the requested depth; nothing left to resolve.
        if f <= settings.converge_tol {
            break;
        }

        // Normal equations of the phase-bordered Jacobian. Columns are
        // -c dV/dx_k and -i c V; the unit phase c cancels from every
        // Gram entry, so it never appears below.
        let v = &ws.prefixes[problem.factors.len()];
        for k in 0..n {
            for l in k..n {
                let mut s = C64::new(0.0, 0.0);
                for j in 0..dd {
                    s += ws.dv[k][j].conj() * ws.dv[l][j];
                }
                normal[k * nb + l] = s.re;
                normal[l * nb + k] = s.re;
            }
            let mut sv = C64::new(0.0, 0.0);
            let mut st = C64::new(0.0, 0.0);
            for j in 0..dd {
                sv += ws.dv[k][j].conj() * v[j];
                st += ws.dv[k][j].conj() * problem.target_rows[j];
            }
            // Phase column: Re((c dv_k)^dag (i c V)) = -Im(tr(dv_k^dag V)).
            normal[k * nb + n] = -sv.im;
            normal[n * nb + k] = -sv.im;
            // Residual projection; the aligning phase is where c survives.
            rhs[k] = (st * c_lin.conj()).re - sv.re;
        }
        normal[n * nb + n] = d as f64;
        rhs[n] = 0.0;

        let rhs_inf = rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if rhs_inf <= 1e-14 {
            break;
        }
        for k in 0..nb {
            let dk = normal[k * nb + k];
            damp[k] = if dk > 1e-12 { dk } else { 1e-12 };
        }

        let mut accepted = false;
        while evals < budget {
            if let Some(step) = solve_damped(nb, &normal, &damp, mu, &rhs) {
                for i in 0..n {
                    xn[i] = x[i] + step[i];
                }
                let (f_try, _, _) = eval_full(problem, &xn, &mut ws, false);
                evals += 1;
                if f_try < f {
                    let drop = f - f_try;
                    x.copy_from_slice(&xn);
                    f = f_try;
                    trace.push(f);
                    mu = (mu * MU_SHRINK).max(1e-15);
                    accepted = true;
                    if drop < settings.converge_tol {
                        small_drops += 1;
                        if small_drops >= 2 {
                            break 'outer;
                        }
                    } else {
                        small_drops = 0;
                    }
                    break;
                }
            }
            mu *= MU_GROW;
            if mu > MU_MAX {
                break 'outer;
            }
        }
        if !accepted || evals >= budget {
            break;
        }
        // Re-linearize at the accepted point.
        let (f_lin, _, c_new) = eval_full(problem, &x, &mut ws, true);
        evals += 1;
        debug_assert!((f_lin - f).abs() <= 1e-12 * (1.0 + f));
        f = f_lin;
        c_lin = c_new;
    }

    LocalRun { cost: f, params: x, evals, trace }
}

/// splitmix64 finalizer; bijective on u64.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream seed from a master seed and an index.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(splitmix64(index)))
}

/// Multi-start synthesis. Restart r draws its start uniformly from
/// [-pi, pi) per angle using a stream seeded by mix_seed(seed, r); the best
/// result wins, earliest restart breaking ties. Stops early once the best
/// cost reaches feasible_tol. Bit-reproducible for fixed settings.
pub fn synthesize(problem: &SynthesisProblem, settings: &OptimizerSettings) -> SynthesisResult {
    settings.validate().expect("optimizer settings must be valid");
    let n = problem.n_params();
    let mut best_cost = f64::INFINITY;
    let mut best_params = vec![0.0; n];
    let mut total_evals = 0u64;
    let mut restarts_run = 0usize;

    for r in 0..settings.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(settings.seed, r as u64));
        let start: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
        let run = optimize_local(problem, &start, settings);
        total_evals += run.evals;
        restarts_run += 1;
        if run.cost < best_cost {
            best_cost = run.cost;
            best_params = run.params;
        }
        if best_cost <= settings.feasible_tol {
            break;
        }
    }

    let verdict = if best_cost <= settings.feasible_tol {
        Verdict::Feasible
    } else if restarts_run == settings.restarts && best_cost >= settings.infeasible_floor {
        Verdict::EvidenceInfeasible
    } else {
        Verdict::Unresolved
    };
    SynthesisResult { best_cost, best_params, verdict, restarts_run, evals: total_evals }
}
