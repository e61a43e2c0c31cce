//! Configuration surveys and verification batteries: which CNOT layouts can
//! carry the simplified Toffoli gate, how few dressed single-qubit gates
//! suffice on the working layout, and the exact identities the verdicts
//! lean on.
//!
//! Reports serialize byte-identically for identical seeds regardless of
//! worker count: every work item derives its own seed from the master seed
//! and its canonical index, and wall-clock time never enters the report
//! body (the `wall_time_s` field is pinned to 0.0; measured time is the
//! caller's business).

use crate::circuit::{
    config_to_template, controlled_u_template, decompose_controlled_u,
    decompose_controlled_u_flipped, embed_controlled, embed_single, eval_circuit, flip_cnot,
    margolus_reference_circuit, margolus_target, rz, single_qubit_layers, toffoli_target,
    unitary_eigensystem, zyz_angles, Circuit, CircuitError, CnotConfig, GateInstance,
};
use crate::entangle::{
    entangling_connectivity, lemma1_predicate, lemma2_output, schmidt_rank, Bipartition,
};
use crate::qmat::{
    self, frob_dist, haar_unitary, kron, kron_vec, mat_mul, phase_dist, random_state, C64, CMat,
    CVec,
};
use crate::synth::{
    mix_seed, synthesize, OptimizerSettings, SlotSpec, SynthError, SynthesisProblem,
    SynthesisResult, Verdict,
};
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use std::f64::consts::FRAC_1_SQRT_2;
use thiserror::Error;

/// A solved free slot counts as a gate when it is at least this far from
/// the identity (global phase ignored).
pub const NONTRIVIAL_TOL: f64 = 1e-6;

// Seed domain tags keeping the two batch commands' random streams apart
// even for equal item indices.
const SEED_DOMAIN_SURVEY: u64 = 0x5355_5256;
const SEED_DOMAIN_MINGATES: u64 = 0x4D49_4E47;

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("cnot count {0} is outside 1..=3")]
    CnotCountRange(usize),
    #[error("gate budget {0} exceeds the {1} slots of the template")]
    GateBudgetRange(usize, usize),
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

// ---------------------------------------------------------------------------
// Enumeration, exclusion, case labels.

/// All 3^k placement-code sequences of length k, lexicographic.
pub fn enumerate_configs(k: usize) -> Result<Vec<CnotConfig>, SurveyError> {
    if !(1..=3).contains(&k) {
        return Err(SurveyError::CnotCountRange(k));
    }
    Ok((0..k)
        .map(|_| 0u8..3)
        .multi_cartesian_product()
        .map(|codes| CnotConfig::new(codes).expect("codes in range"))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclusionKind {
    /// Fewer than two CNOTs have their target on wire 0.
    TargetUnderTouched,
    /// The placement graph does not connect all three wires.
    NotConnecting,
}

impl ExclusionKind {
    pub fn label(self) -> &'static str {
        match self {
            ExclusionKind::TargetUnderTouched => "TargetUnderTouched",
            ExclusionKind::NotConnecting => "NotConnecting",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusionReason {
    pub kind: ExclusionKind,
    pub detail: String,
}

/// Applies the two pruning rules in order: wire 0 must be the CNOT target
/// at least twice, and the placements must connect all three wires.
pub fn exclusion_filter(cfg: &CnotConfig) -> Option<ExclusionReason> {
    let touches = cfg.codes().iter().filter(|&&c| c != 2).count();
    if touches < 2 {
        return Some(ExclusionReason {
            kind: ExclusionKind::TargetUnderTouched,
            detail: format!(
                "wire 0 is the target of {touches} of {} placements; at least 2 are needed",
                cfg.len()
            ),
        });
    }
    if !entangling_connectivity(cfg) {
        return Some(ExclusionReason {
            kind: ExclusionKind::NotConnecting,
            detail: "the placements leave the three wires disconnected".into(),
        });
    }
    None
}

/// Grouping of the synthesized three-CNOT layouts: "final" is the single
/// workable configuration, case1/2/3 name the pictogram families (one code
/// 2 with a distinct {0,1} pair, one code 2 with an equal pair, all codes
/// in {0,1}). Shorter configurations and the all-equal layouts get none.
pub fn classify_case(cfg: &CnotConfig) -> Option<&'static str> {
    if cfg.len() != 3 {
        return None;
    }
    let codes = cfg.codes();
    match codes.iter().filter(|&&c| c == 2).count() {
        0 if codes.iter().all_equal() => None,
        0 if matches!(codes, [0, 1, 0]) => Some("final"),
        0 => Some("case3"),
        1 => {
            let pair: Vec<u8> = codes.iter().copied().filter(|&c| c != 2).collect();
            Some(if pair[0] == pair[1] { "case2" } else { "case1" })
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Reports.

/// One work item of a survey or gate-budget search. `excluded` and `result`
/// are mutually exclusive; the nontrivial counts appear only on feasible
/// gate-budget records.
#[derive(Debug, Clone)]
pub struct SurveyRecord {
    /// CNOT placement codes (configuration surveys).
    pub config: Option<CnotConfig>,
    /// Freed slot indices (gate-budget searches).
    pub slots: Option<Vec<usize>>,
    pub case: Option<&'static str>,
    pub excluded: Option<ExclusionReason>,
    pub result: Option<SynthesisResult>,
    /// Solved free slots visibly different from the identity.
    pub nontrivial_raw: Option<usize>,
    /// Same count minus sparse gates an adjacent CNOT on the wire absorbs.
    pub nontrivial_merged: Option<usize>,
}

impl SurveyRecord {
    pub fn verdict(&self) -> Option<Verdict> {
        self.result.as_ref().map(|r| r.verdict)
    }

    pub fn is_feasible(&self) -> bool {
        self.verdict() == Some(Verdict::Feasible)
    }
}

#[derive(Debug, Clone)]
pub struct SurveyReport {
    pub command: String,
    pub seed: u64,
    pub settings: OptimizerSettings,
    pub records: Vec<SurveyRecord>,
}

impl SurveyReport {
    pub fn feasible_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_feasible()).count()
    }

    pub fn excluded_count(&self) -> usize {
        self.records.iter().filter(|r| r.excluded.is_some()).count()
    }

    pub fn to_json(&self) -> String {
        let records = self.records.iter().map(record_value).collect();
        render_json(&report_value(
            &self.command,
            self.seed,
            settings_value(&self.settings),
            records,
        ))
    }

    pub fn to_markdown(&self) -> String {
        let s = &self.settings;
        let mut out = format!(
            "# {}\n\nsettings: restarts={} max_evals={} converge_tol={:e} \
             feasible_tol={:e} infeasible_floor={:e}\n\n",
            self.command,
            s.restarts,
            s.max_evals,
            s.converge_tol,
            s.feasible_tol,
            s.infeasible_floor
        );
        let budget_search = self.records.iter().any(|r| r.slots.is_some());
        if budget_search {
            out.push_str("| slots | verdict | best_cost | evals | nontrivial_raw | nontrivial_merged |\n");
            out.push_str("| --- | --- | --- | --- | --- | --- |\n");
            for r in &self.records {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} |\n",
                    r.slots.as_ref().map(|s| s.iter().join(",")).unwrap_or_default(),
                    r.verdict().map(|v| v.to_string()).unwrap_or_default(),
                    r.result.as_ref().map(|x| format!("{:.3e}", x.best_cost)).unwrap_or_default(),
                    r.result.as_ref().map(|x| x.evals.to_string()).unwrap_or_default(),
                    r.nontrivial_raw.map(|n| n.to_string()).unwrap_or_default(),
                    r.nontrivial_merged.map(|n| n.to_string()).unwrap_or_default(),
                ));
            }
        } else {
            out.push_str("| config | case | excluded | verdict | best_cost | evals |\n");
            out.push_str("| --- | --- | --- | --- | --- | --- |\n");
            for r in &self.records {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} |\n",
                    r.config.as_ref().map(config_string).unwrap_or_default(),
                    r.case.unwrap_or_default(),
                    r.excluded.as_ref().map(|e| e.kind.label()).unwrap_or_default(),
                    r.verdict().map(|v| v.to_string()).unwrap_or_default(),
                    r.result.as_ref().map(|x| format!("{:.3e}", x.best_cost)).unwrap_or_default(),
                    r.result.as_ref().map(|x| x.evals.to_string()).unwrap_or_default(),
                ));
            }
        }
        out.push_str(&format!(
            "\nsummary: {} records, {} excluded, {} feasible\n",
            self.records.len(),
            self.excluded_count(),
            self.feasible_count()
        ));
        out
    }
}

pub fn config_string(cfg: &CnotConfig) -> String {
    cfg.codes().iter().join(",")
}

fn settings_value(s: &OptimizerSettings) -> Value {
    json!({
        "restarts": s.restarts,
        "max_evals": s.max_evals,
        "converge_tol": s.converge_tol,
        "feasible_tol": s.feasible_tol,
        "infeasible_floor": s.infeasible_floor,
    })
}

fn report_value(command: &str, seed: u64, settings: Value, records: Vec<Value>) -> Value {
    json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "settings": settings,
        "records": records,
        "wall_time_s": 0.0,
    })
}

fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("string keys only");
    s.push('\n');
    s
}

fn record_value(r: &SurveyRecord) -> Value {
    let mut m = Map::new();
    if let Some(cfg) = &r.config {
        m.insert("config".into(), Value::String(config_string(cfg)));
    }
    if let Some(slots) = &r.slots {
        m.insert("slots".into(), Value::String(slots.iter().join(",")));
    }
    if let Some(case) = r.case {
        m.insert("case".into(), Value::String(case.into()));
    }
    let excluded = match &r.excluded {
        Some(e) => json!({ "kind": e.kind.label(), "detail": e.detail }),
        None => Value::Null,
    };
    m.insert("excluded".into(), excluded);
    let (verdict, best_cost, evals) = match &r.result {
        Some(res) => (
            Value::String(res.verdict.to_string()),
            json!(res.best_cost),
            json!(res.evals),
        ),
        None => (Value::Null, Value::Null, Value::Null),
    };
    m.insert("verdict".into(), verdict);
    m.insert("best_cost".into(), best_cost);
    m.insert("evals".into(), evals);
    if let Some(n) = r.nontrivial_raw {
        m.insert("nontrivial_raw".into(), json!(n));
    }
    if let Some(n) = r.nontrivial_merged {
        m.insert("nontrivial_merged".into(), json!(n));
    }
    Value::Object(m)
}

// ---------------------------------------------------------------------------
// Batch runners.

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool, SurveyError> {
    if workers == 0 {
        return Err(SurveyError::NoWorkers);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SurveyError::Pool(e.to_string()))
}

fn derived_settings(base: &OptimizerSettings, domain: u64, index: usize) -> OptimizerSettings {
    let mut s = *base;
    s.seed = mix_seed(mix_seed(base.seed, domain), index as u64);
    s
}

/// Synthesizes every non-excluded k-CNOT configuration against `target`.
/// Records keep enumeration order; `target_label` only feeds the command
/// echo.
pub fn run_survey(
    k: usize,
    settings: &OptimizerSettings,
    target: &CMat,
    target_label: &str,
    workers: usize,
) -> Result<SurveyReport, SurveyError> {
    settings.validate()?;
    if target.dim() != 8 {
        return Err(SurveyError::Synth(SynthError::TargetDim {
            expected: 8,
            got: target.dim(),
        }));
    }
    let configs = enumerate_configs(k)?;
    let command = format!(
        "survey --cnots {k} --target {target_label} --seed {} --restarts {}",
        settings.seed, settings.restarts
    );
    let pool = worker_pool(workers)?;
    let records = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(index, cfg)| {
                let mut record = SurveyRecord {
                    config: Some(cfg.clone()),
                    slots: None,
                    case: None,
                    excluded: exclusion_filter(cfg),
                    result: None,
                    nontrivial_raw: None,
                    nontrivial_merged: None,
                };
                if record.excluded.is_some() {
                    return Ok(record);
                }
                let problem =
                    SynthesisProblem::all_free(config_to_template(cfg), target.clone())?;
                let per_item = derived_settings(settings, SEED_DOMAIN_SURVEY, index);
                record.case = classify_case(cfg);
                record.result = Some(synthesize(&problem, &per_item));
                Ok(record)
            })
            .collect::<Result<Vec<_>, SurveyError>>()
    })?;
    Ok(SurveyReport {
        command,
        seed: settings.seed,
        settings: *settings,
        records,
    })
}

/// Frees every size-`k_gates` subset of the template's single-qubit slots
/// (the rest pinned to identity) and synthesizes against the simplified
/// Toffoli gate. Subsets run in lexicographic order of their slot indices.
pub fn min_single_qubit_search(
    cfg: &CnotConfig,
    k_gates: usize,
    settings: &OptimizerSettings,
    workers: usize,
) -> Result<SurveyReport, SurveyError> {
    settings.validate()?;
    let template = config_to_template(cfg);
    let n_slots = 3 * (cfg.len() + 1);
    if k_gates > n_slots {
        return Err(SurveyError::GateBudgetRange(k_gates, n_slots));
    }
    let target = margolus_target();
    let subsets: Vec<Vec<usize>> = (0..n_slots).combinations(k_gates).collect();
    let command = format!(
        "mingates --k {k_gates} --config {} --seed {} --restarts {}",
        config_string(cfg),
        settings.seed,
        settings.restarts
    );
    let pool = worker_pool(workers)?;
    let records = pool.install(|| {
        subsets
            .par_iter()
            .enumerate()
            .map(|(index, subset)| {
                let specs: Vec<SlotSpec> = (0..n_slots)
                    .map(|s| {
                        if subset.contains(&s) {
                            SlotSpec::Free
                        } else {
                            SlotSpec::Identity
                        }
                    })
                    .collect();
                let problem = SynthesisProblem::new(template.clone(), specs, target.clone())?;
                let per_item = derived_settings(settings, SEED_DOMAIN_MINGATES, index);
                let result = synthesize(&problem, &per_item);
                let (raw, merged) = if result.verdict == Verdict::Feasible {
                    let (a, b) = nontrivial_counts(cfg, &problem, &result.best_params)?;
                    (Some(a), Some(b))
                } else {
                    (None, None)
                };
                Ok(SurveyRecord {
                    config: None,
                    slots: Some(subset.clone()),
                    case: None,
                    excluded: None,
                    result: Some(result),
                    nontrivial_raw: raw,
                    nontrivial_merged: merged,
                })
            })
            .collect::<Result<Vec<_>, SurveyError>>()
    })?;
    Ok(SurveyReport {
        command,
        seed: settings.seed,
        settings: *settings,
        records,
    })
}

/// Raw and merged counts of solved slots that differ visibly from the
/// identity. A sparse (diagonal or antidiagonal) gate next to a CNOT
/// touching its wire commutes into the CNOT's frame, so the merged count
/// drops it.
fn nontrivial_counts(
    cfg: &CnotConfig,
    problem: &SynthesisProblem,
    params: &[f64],
) -> Result<(usize, usize), SurveyError> {
    let gates = problem.slot_gates(params)?;
    let wires = problem.slot_wires();
    let eye = CMat::identity(2);
    let absorbable = |slot: usize, wire: usize| {
        let layer = slot / 3;
        let touched = |l: usize| {
            let (c, t) = CnotConfig::control_target(cfg.codes()[l]);
            c == wire || t == wire
        };
        (layer > 0 && touched(layer - 1)) || (layer < cfg.len() && touched(layer))
    };
    let mut raw = 0;
    let mut merged = 0;
    for (slot, gate) in gates.iter().enumerate() {
        if phase_dist(gate, &eye).expect("2x2") <= NONTRIVIAL_TOL {
            continue;
        }
        raw += 1;
        if gate.is_sparse(NONTRIVIAL_TOL) && absorbable(slot, wires[slot]) {
            continue;
        }
        merged += 1;
    }
    Ok((raw, merged))
}

// ---------------------------------------------------------------------------
// Verification batteries.

#[derive(Debug, Clone)]
pub struct CheckRecord {
    pub check: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub command: String,
    pub seed: u64,
    /// Sweep length knob, echoed into the settings block when present.
    pub samples: Option<u64>,
    pub records: Vec<CheckRecord>,
    /// Extra plain-text rows under the check table, with their heading:
    /// the basis action for the build verification, the circuit listing
    /// for decompositions.
    pub table_label: &'static str,
    pub table: Vec<String>,
}

impl CheckReport {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> String {
        let settings = match self.samples {
            Some(n) => json!({ "samples": n }),
            None => json!({}),
        };
        let records = self
            .records
            .iter()
            .map(|r| json!({ "check": r.check, "pass": r.pass, "detail": r.detail }))
            .collect();
        render_json(&report_value(&self.command, self.seed, settings, records))
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("# {}\n\n", self.command);
        out.push_str("| check | pass | detail |\n| --- | --- | --- |\n");
        for r in &self.records {
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                r.check,
                if r.pass { "pass" } else { "FAIL" },
                md_cell(&r.detail)
            ));
        }
        if !self.table.is_empty() {
            out.push_str(&format!("\n{}:\n\n", self.table_label));
            for row in &self.table {
                out.push_str(&format!("    {row}\n"));
            }
        }
        let passed = self.records.iter().filter(|r| r.pass).count();
        out.push_str(&format!(
            "\nsummary: {passed}/{} checks pass\n",
            self.records.len()
        ));
        out
    }
}

fn md_cell(s: &str) -> String {
    s.replace('\n', "; ").replace('|', "\\|")
}

fn dump(m: &CMat) -> String {
    let mut s = String::new();
    for r in 0..m.dim() {
        let row = (0..m.dim())
            .map(|c| {
                let e = m.get(r, c);
                format!("{:+.3}{:+.3}i", e.re, e.im)
            })
            .join(" ");
        s.push_str(&row);
        s.push('\n');
    }
    s
}

/// Checks that the reference build really is the simplified Toffoli gate:
/// the circuit evaluates to it, the basis action matches row for row, the
/// controlled-Y-then-controlled-Z build agrees exactly, and the gate is the
/// Toffoli up to one diagonal sign.
pub fn verify_margolus() -> CheckReport {
    verify_with_circuit(&margolus_reference_circuit())
}

fn verify_with_circuit(reference: &Circuit) -> CheckReport {
    let m = margolus_target();
    let built = eval_circuit(reference);
    let mut records = Vec::new();

    let d = phase_dist(&built, &m).expect("equal dims");
    records.push(CheckRecord {
        check: "margolus_exact",
        pass: d <= 1e-12,
        detail: if d <= 1e-12 {
            format!("phase_dist {d:.3e}")
        } else {
            format!("phase_dist {d:.3e}\nbuilt:\n{}", dump(&built))
        },
    });

    let (table, table_ok) = basis_action_table(&built);
    records.push(CheckRecord {
        check: "basis_action",
        pass: table_ok,
        detail: if table_ok {
            table.join("; ")
        } else {
            format!("{}\nbuilt:\n{}", table.join("; "), dump(&built))
        },
    });

    let alt = crate::circuit::ccy_cz_target();
    let d_alt = frob_dist(&alt, &m).expect("equal dims");
    records.push(CheckRecord {
        check: "ccy_cz_build",
        pass: d_alt <= 1e-12,
        detail: if d_alt <= 1e-12 {
            format!("frob_dist {d_alt:.3e}")
        } else {
            format!("frob_dist {d_alt:.3e}\nalternate:\n{}", dump(&alt))
        },
    });

    let toffoli = toffoli_target();
    let ratio = mat_mul(&m, &toffoli.adjoint()).expect("equal dims");
    let (diag, diag_ok) = signed_diagonal(&ratio);
    let equiv_ok =
        diag_ok && qmat::is_diag_phase_equiv(&m, &toffoli, 1e-12) && diag == "1,1,1,1,1,-1,1,1";
    records.push(CheckRecord {
        check: "toffoli_diag_equiv",
        pass: equiv_ok,
        detail: if equiv_ok {
            format!("diagonal {diag}")
        } else {
            format!("diagonal {diag}\nratio:\n{}", dump(&ratio))
        },
    });

    CheckReport {
        command: "verify".into(),
        seed: 0,
        samples: None,
        records,
        table_label: "basis action",
        table,
    }
}

/// Renders each column of `u` as a signed basis state; flags anything that
/// is not one, and compares against the expected action.
fn basis_action_table(u: &CMat) -> (Vec<String>, bool) {
    let expected = [
        "|000> -> |000>",
        "|001> -> |001>",
        "|010> -> |010>",
        "|011> -> |011>",
        "|100> -> |100>",
        "|101> -> -|101>",
        "|110> -> |111>",
        "|111> -> |110>",
    ];
    let mut rows = Vec::new();
    let mut ok = true;
    for c in 0..8 {
        let mut image = None;
        for r in 0..8 {
            let e = u.get(r, c);
            if e.norm() > 0.5 {
                let clean = e.im.abs() <= 1e-12 && (e.re.abs() - 1.0).abs() <= 1e-12;
                image = Some((r, e.re < 0.0, clean));
            } else if e.norm() > 1e-12 {
                ok = false;
            }
        }
        match image {
            Some((r, negative, true)) => {
                let sign = if negative { "-" } else { "" };
                rows.push(format!("|{c:03b}> -> {sign}|{r:03b}>"));
            }
            _ => {
                ok = false;
                rows.push(format!("|{c:03b}> -> (not a signed basis column)"));
            }
        }
    }
    let ok = ok && rows.iter().map(String::as_str).eq(expected);
    (rows, ok)
}

/// Formats the diagonal of `m` as integers when every off-diagonal entry
/// vanishes and every diagonal entry is real within 1e-12.
fn signed_diagonal(m: &CMat) -> (String, bool) {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in 0..m.dim() {
        for c in 0..m.dim() {
            let e = m.get(r, c);
            if r == c {
                if e.im.abs() > 1e-12 || (e.re.abs() - 1.0).abs() > 1e-12 {
                    ok = false;
                }
                parts.push(format!("{:.0}", e.re));
            } else if e.norm() > 1e-12 {
                ok = false;
            }
        }
    }
    (parts.join(","), ok)
}

/// Seeded battery re-checking the circuit identities behind the survey:
/// the control/target flip, the entanglement predicate against the rank
/// oracle, the eigenvector output formula, rank invariance under local
/// unitaries, controlled-U round trips, and the two sparsity propagation
/// statements.
pub fn check_identities(seed: u64, samples: u64) -> CheckReport {
    let records = vec![
        flip_identity_check(),
        lemma1_sweep(seed, samples),
        lemma2_check(seed, (samples / 10).max(10)),
        lemma7_sweep(seed, (samples / 2).max(10)),
        cu_round_trip(seed, (samples / 10).max(10)),
        sparse_control_check(seed),
        nonsparse_control_check(seed),
    ];
    CheckReport {
        command: format!("identities --seed {seed} --samples {samples}"),
        seed,
        samples: Some(samples),
        records,
        table_label: "",
        table: Vec::new(),
    }
}

/// The Hadamard-conjugated, control/target-swapped CNOT equals the original
/// exactly, for each of the three normalized placements.
fn flip_identity_check() -> CheckRecord {
    let mut worst = 0.0f64;
    for code in 0..3u8 {
        let (control, target) = CnotConfig::control_target(code);
        let base = Circuit::new(3, vec![GateInstance::Cnot { control, target }]).expect("valid");
        let flipped = flip_cnot(&base, 0).expect("index 0 is a cnot");
        let d = frob_dist(&eval_circuit(&base), &eval_circuit(&flipped)).expect("equal dims");
        worst = worst.max(d);
    }
    CheckRecord {
        check: "flip_identity",
        pass: worst <= 1e-12,
        detail: format!("max frob_dist {worst:.3e} over 3 placements"),
    }
}

fn eigencolumn<R: Rng>(u: &CMat, rng: &mut R) -> CVec {
    let (t, _, _) = unitary_eigensystem(u);
    let col = rng.gen_range(0..2);
    CVec::new(vec![t.get(0, col), t.get(1, col)]).expect("unit column")
}

/// The entanglement predicate (control superposed and target not an
/// eigenvector) against the Schmidt-rank oracle, swept over generic and
/// deliberately degenerate samples.
fn lemma1_sweep(seed: u64, samples: u64) -> CheckRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
    let cut = Bipartition::new(2, &[1]).expect("valid cut");
    let mut agree = 0u64;
    for trial in 0..samples {
        let u = haar_unitary(2, &mut rng);
        let psi = if trial % 4 == 2 {
            CVec::basis(2, rng.gen_range(0..2))
        } else {
            random_state(2, &mut rng)
        };
        let phi = if trial % 4 == 1 || trial % 4 == 3 {
            eigencolumn(&u, &mut rng)
        } else {
            random_state(2, &mut rng)
        };
        let cu = embed_controlled(2, 1, 0, &u).expect("valid wires");
        let out = cu
            .apply(&kron_vec(&psi, &phi).expect("2x2"))
            .expect("dim 4");
        let predicted = lemma1_predicate(&psi, &phi, &u, 1e-8);
        let rank = schmidt_rank(&out, &cut, 1e-8).expect("valid state");
        if predicted == (rank == 2) {
            agree += 1;
        }
    }
    CheckRecord {
        check: "lemma1_entanglement_predicate",
        pass: agree == samples,
        detail: format!("{agree}/{samples} agree with the rank oracle"),
    }
}

/// The closed-form output for eigenvector targets against direct
/// application, plus one frozen spot value.
fn lemma2_check(seed: u64, samples: u64) -> CheckRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = haar_unitary(2, &mut rng);
        let phi = eigencolumn(&u, &mut rng);
        let psi = random_state(2, &mut rng);
        let formula = lemma2_output(&psi, &phi, &u).expect("phi is an eigenvector");
        let cu = embed_controlled(2, 1, 0, &u).expect("valid wires");
        let direct = cu
            .apply(&kron_vec(&psi, &phi).expect("2x2"))
            .expect("dim 4");
        worst = worst.max(vec_dist(&formula, &direct));
    }
    // Spot value: control (|0>+|1>)/sqrt2, target |1> under Z picks up the
    // relative sign: amplitudes [0, 1/sqrt2, 0, -1/sqrt2].
    let s = FRAC_1_SQRT_2;
    let psi = CVec::new(vec![C64::new(s, 0.0), C64::new(s, 0.0)]).expect("unit");
    let phi = CVec::basis(2, 1);
    let out = lemma2_output(&psi, &phi, &qmat::z()).expect("eigenvector of Z");
    let frozen = CVec::new(vec![
        C64::new(0.0, 0.0),
        C64::new(s, 0.0),
        C64::new(0.0, 0.0),
        C64::new(-s, 0.0),
    ])
    .expect("unit");
    worst = worst.max(vec_dist(&out, &frozen));
    CheckRecord {
        check: "lemma2_eigenvector_output",
        pass: worst <= 1e-12,
        detail: format!("max deviation {worst:.3e} over {samples} samples plus the spot value"),
    }
}

fn vec_dist(a: &CVec, b: &CVec) -> f64 {
    a.amps()
        .iter()
        .zip(b.amps())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Schmidt rank is invariant under unitaries acting within the sides of
/// the cut. Even trials move a 2x4 product across the top-wire cut, odd
/// trials move per-wire locals across a rotating single-wire cut.
fn lemma7_sweep(seed: u64, samples: u64) -> CheckRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 3));
    let mut preserved = 0u64;
    for trial in 0..samples {
        let state = random_state(8, &mut rng);
        let (cut, moved) = if trial % 2 == 0 {
            let local = kron(&haar_unitary(2, &mut rng), &haar_unitary(4, &mut rng))
                .expect("2x4 kron");
            (
                Bipartition::new(3, &[2]).expect("valid cut"),
                local.apply(&state).expect("dim 8"),
            )
        } else {
            let wire = (trial as usize / 2) % 3;
            let mut moved = state.clone();
            for w in 0..3 {
                let g = embed_single(3, w, &haar_unitary(2, &mut rng)).expect("valid wire");
                moved = g.apply(&moved).expect("dim 8");
            }
            (Bipartition::new(3, &[wire]).expect("valid cut"), moved)
        };
        let before = schmidt_rank(&state, &cut, 1e-8).expect("valid state");
        let after = schmidt_rank(&moved, &cut, 1e-8).expect("valid state");
        if before == after {
            preserved += 1;
        }
    }
    CheckRecord {
        check: "lemma7_local_invariance",
        pass: preserved == samples,
        detail: format!("{preserved}/{samples} ranks preserved"),
    }
}

/// Both controlled-U decompositions reproduce their target up to global
/// phase on Haar-random payloads.
fn cu_round_trip(seed: u64, samples: u64) -> CheckRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 4));
    let mut worst = 0.0f64;
    for trial in 0..samples {
        let u = haar_unitary(2, &mut rng);
        let circuit = if trial % 2 == 0 {
            decompose_controlled_u(&u)
        } else {
            decompose_controlled_u_flipped(&u)
        }
        .expect("unitary input");
        let target = embed_controlled(2, 1, 0, &u).expect("valid wires");
        worst = worst.max(phase_dist(&eval_circuit(&circuit), &target).expect("equal dims"));
    }
    CheckRecord {
        check: "cu_round_trip",
        pass: worst <= 1e-10,
        detail: format!("max phase_dist {worst:.3e} over {samples} gates"),
    }
}

fn su2_slot(wire: usize, g: &CMat) -> GateInstance {
    let (_, phi, theta, lam) = zyz_angles(g).expect("2x2 unitary");
    GateInstance::ParamSingle {
        wire,
        phi,
        theta,
        lam,
    }
}

/// In the two-CNOT controlled-U decomposition a sparse first control-wire
/// gate forces the other control-wire gates sparse; diagonal regauging
/// (sliding a diagonal across a CNOT's control) cannot escape.
fn sparse_control_check(seed: u64) -> CheckRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 5));
    let mut subjects = vec![qmat::z(), qmat::x()];
    for _ in 0..8 {
        subjects.push(haar_unitary(2, &mut rng));
    }
    let mut constructions = 0;
    let mut ok = true;
    for u in &subjects {
        let circuit = decompose_controlled_u(u).expect("unitary input");
        let control_gates: Vec<CMat> = single_qubit_layers(&circuit)
            .into_iter()
            .filter(|(w, _)| *w == 1)
            .map(|(_, g)| g)
            .collect();
        if control_gates[0].is_sparse(1e-8) {
            constructions += 1;
            ok &= control_gates.iter().all(|g| g.is_sparse(1e-8));
        }
    }
    // Regauged controlled-Z realizations: A2 -> A2 D, A1 -> adjoint(D) A1
    // with D = Rz(gamma) leaves the product fixed and everything diagonal.
    let base = decompose_controlled_u(&qmat::z()).expect("unitary input");
    let layers = single_qubit_layers(&base);
    let target = embed_controlled(2, 1, 0, &qmat::z()).expect("valid wires");
    let mut variants = 0;
    let mut worst = 0.0f64;
    for _ in 0..6 {
        let gamma: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let a1 = mat_mul(&rz(-gamma), &layers[1].1).expect("2x2");
        let a2 = mat_mul(&layers[3].1, &rz(gamma)).expect("2x2");
        let mut gates = base.gates().to_vec();
        gates[1] = su2_slot(1, &a1);
        gates[4] = su2_slot(1, &a2);
        let varied = Circuit::new(2, gates).expect("same shape");
        worst = worst.max(phase_dist(&eval_circuit(&varied), &target).expect("equal dims"));
        ok &= a1.is_sparse(1e-8) && a2.is_sparse(1e-8);
        variants += 1;
    }
    ok &= worst <= 1e-10;
    CheckRecord {
        check: "sparse_control_propagation",
        pass: ok,
        detail: format!(
            "{constructions} constructions and {variants} regauged variants stay sparse; \
             max regauged round trip {worst:.3e}"
        ),
    }
}

/// The flipped decomposition keeps every control-wire gate away from the
/// sparse set, and an independent re-solve with the first control slot
/// frozen to a Hadamard lands with the other control slots non-sparse too.
fn nonsparse_control_check(seed: u64) -> CheckRecord {
    let subject = qmat::z();
    let circuit = decompose_controlled_u_flipped(&subject).expect("unitary input");
    let control_gates: Vec<CMat> = single_qubit_layers(&circuit)
        .into_iter()
        .filter(|(w, _)| *w == 1)
        .map(|(_, g)| g)
        .collect();
    let construction_margin = control_gates
        .iter()
        .map(off_pattern_mass)
        .fold(f64::INFINITY, f64::min);
    let target = embed_controlled(2, 1, 0, &subject).expect("valid wires");
    let round = phase_dist(&eval_circuit(&circuit), &target).expect("equal dims");

    let mut slots = vec![SlotSpec::Free; 6];
    slots[1] = SlotSpec::FixedGate(qmat::h());
    let problem = SynthesisProblem::new(controlled_u_template(), slots, target)
        .expect("valid problem");
    let settings = OptimizerSettings {
        restarts: 12,
        max_evals: 6000,
        seed: mix_seed(seed, 6),
        ..OptimizerSettings::default()
    };
    let result = synthesize(&problem, &settings);
    let gates = problem.slot_gates(&result.best_params).expect("param count");
    let solve_margin = off_pattern_mass(&gates[3]).min(off_pattern_mass(&gates[5]));
    let pass = construction_margin > 1e-3
        && round <= 1e-10
        && result.verdict == Verdict::Feasible
        && solve_margin > 1e-3;
    CheckRecord {
        check: "nonsparse_control_propagation",
        pass,
        detail: format!(
            "construction off-pattern margin {construction_margin:.3e}, round trip {round:.3e}; \
             re-solve {} with margin {solve_margin:.3e}",
            result.verdict
        ),
    }
}

/// Frobenius mass of the entries outside the nearer of the two sparse
/// patterns (diagonal, antidiagonal); zero exactly on sparse gates.
fn off_pattern_mass(g: &CMat) -> f64 {
    let off = (g.get(0, 1).norm_sqr() + g.get(1, 0).norm_sqr()).sqrt();
    let on = (g.get(0, 0).norm_sqr() + g.get(1, 1).norm_sqr()).sqrt();
    off.min(on)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_settings() -> OptimizerSettings {
        OptimizerSettings {
            restarts: 3,
            max_evals: 1500,
            seed: 7,
            ..OptimizerSettings::default()
        }
    }

    #[test]
    fn enumeration_counts_and_order() {
        assert_eq!(enumerate_configs(1).unwrap().len(), 3);
        assert_eq!(enumerate_configs(2).unwrap().len(), 9);
        let all = enumerate_configs(3).unwrap();
        assert_eq!(all.len(), 27);
        assert_eq!(all[0].codes(), [0, 0, 0]);
        assert_eq!(all[1].codes(), [0, 0, 1]);
        assert_eq!(all[26].codes(), [2, 2, 2]);
        assert!(enumerate_configs(0).is_err());
        assert!(enumerate_configs(4).is_err());
    }

    #[test]
    fn exclusion_set_is_exactly_the_nine() {
        let expected: Vec<Vec<u8>> = [
            [0, 0, 0],
            [0, 2, 2],
            [1, 1, 1],
            [1, 2, 2],
            [2, 0, 2],
            [2, 1, 2],
            [2, 2, 0],
            [2, 2, 1],
            [2, 2, 2],
        ]
        .iter()
        .map(|c| c.to_vec())
        .collect();
        let excluded: Vec<Vec<u8>> = enumerate_configs(3)
            .unwrap()
            .iter()
            .filter(|cfg| exclusion_filter(cfg).is_some())
            .map(|cfg| cfg.codes().to_vec())
            .collect();
        assert_eq!(excluded, expected);
        // The under-touched rule fires first even when the wires are also
        // disconnected.
        let r = exclusion_filter(&CnotConfig::new(vec![2, 2, 2]).unwrap()).unwrap();
        assert_eq!(r.kind, ExclusionKind::TargetUnderTouched);
        for codes in [[0u8, 0, 0], [1, 1, 1]] {
            let r = exclusion_filter(&CnotConfig::new(codes.to_vec()).unwrap()).unwrap();
            assert_eq!(r.kind, ExclusionKind::NotConnecting);
        }
    }

    #[test]
    fn case_split_is_six_six_six() {
        let mut counts = std::collections::HashMap::new();
        for cfg in enumerate_configs(3).unwrap() {
            if exclusion_filter(&cfg).is_some() {
                continue;
            }
            let label = classify_case(&cfg).expect("synthesized configs carry a case");
            *counts.entry(label).or_insert(0usize) += 1;
        }
        assert_eq!(counts["case1"], 6);
        assert_eq!(counts["case2"], 6);
        assert_eq!(counts["case3"] + counts["final"], 6);
        assert_eq!(counts["final"], 1);
        assert_eq!(
            classify_case(&CnotConfig::new(vec![0, 1, 0]).unwrap()),
            Some("final")
        );
    }

    #[test]
    fn two_cnot_survey_has_two_synthesized_configs() {
        let report = run_survey(2, &quick_settings(), &margolus_target(), "m", 2).unwrap();
        assert_eq!(report.records.len(), 9);
        assert_eq!(report.excluded_count(), 7);
        let synthesized: Vec<String> = report
            .records
            .iter()
            .filter(|r| r.result.is_some())
            .map(|r| config_string(r.config.as_ref().unwrap()))
            .collect();
        assert_eq!(synthesized, ["0,1", "1,0"]);
        for r in &report.records {
            assert_eq!(r.excluded.is_some(), r.result.is_none());
            assert!(r.case.is_none());
        }
    }

    #[test]
    fn survey_is_deterministic_across_worker_counts() {
        let a = run_survey(2, &quick_settings(), &margolus_target(), "m", 1).unwrap();
        let b = run_survey(2, &quick_settings(), &margolus_target(), "m", 3).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_markdown(), b.to_markdown());
    }

    #[test]
    fn survey_json_shape_and_round_trip() {
        let report = run_survey(2, &quick_settings(), &margolus_target(), "m", 2).unwrap();
        let text = report.to_json();
        let value: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(render_json(&value), text);
        let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
        assert_eq!(
            keys,
            [
                "tool_version",
                "command",
                "seed",
                "settings",
                "records",
                "wall_time_s"
            ]
        );
        assert_eq!(value["wall_time_s"], json!(0.0));
        assert_eq!(value["seed"], json!(7));
        let records = value["records"].as_array().unwrap();
        assert_eq!(records.len(), 9);
        // Excluded rows carry explicit nulls, synthesized rows real values.
        assert!(records[0]["excluded"].is_object());
        assert!(records[0]["verdict"].is_null());
        assert!(records[0]["best_cost"].is_null());
        let row01 = &records[1];
        assert_eq!(row01["config"], json!("0,1"));
        assert!(row01["excluded"].is_null());
        assert!(row01["verdict"].is_string());
        assert!(row01["best_cost"].is_number());
    }

    #[test]
    fn survey_rejects_bad_inputs() {
        let settings = quick_settings();
        assert!(matches!(
            run_survey(0, &settings, &margolus_target(), "m", 2),
            Err(SurveyError::CnotCountRange(0))
        ));
        assert!(matches!(
            run_survey(2, &settings, &margolus_target(), "m", 0),
            Err(SurveyError::NoWorkers)
        ));
        assert!(matches!(
            run_survey(2, &settings, &qmat::z(), "m", 2),
            Err(SurveyError::Synth(SynthError::TargetDim { .. }))
        ));
        let cfg = CnotConfig::new(vec![0, 1, 0]).unwrap();
        assert!(matches!(
            min_single_qubit_search(&cfg, 13, &settings, 2),
            Err(SurveyError::GateBudgetRange(13, 12))
        ));
    }

    #[test]
    fn gate_budget_zero_is_a_single_infeasible_record() {
        let cfg = CnotConfig::new(vec![0, 1, 0]).unwrap();
        let report = min_single_qubit_search(&cfg, 0, &quick_settings(), 1).unwrap();
        assert_eq!(report.records.len(), 1);
        let r = &report.records[0];
        assert_eq!(r.slots.as_deref(), Some(&[][..]));
        assert_eq!(r.verdict(), Some(Verdict::EvidenceInfeasible));
        assert!(r.result.as_ref().unwrap().best_cost >= 1e-2);
        assert!(r.nontrivial_raw.is_none());
    }

    #[test]
    fn gate_budget_subsets_enumerate_lexicographically() {
        let cfg = CnotConfig::new(vec![0, 1, 0]).unwrap();
        let tiny = OptimizerSettings {
            restarts: 1,
            max_evals: 40,
            ..quick_settings()
        };
        let report = min_single_qubit_search(&cfg, 1, &tiny, 2).unwrap();
        assert_eq!(report.records.len(), 12);
        let slots: Vec<Vec<usize>> = report
            .records
            .iter()
            .map(|r| r.slots.clone().unwrap())
            .collect();
        let expected: Vec<Vec<usize>> = (0..12).map(|s| vec![s]).collect();
        assert_eq!(slots, expected);
    }

    #[test]
    fn wire_zero_quartet_solves_the_gate() {
        // The slots one per layer on wire 0 admit the known four-rotation
        // solution; freeing exactly those must come back feasible.
        let cfg = CnotConfig::new(vec![0, 1, 0]).unwrap();
        let template = config_to_template(&cfg);
        let specs: Vec<SlotSpec> = (0..12)
            .map(|s| {
                if s % 3 == 0 {
                    SlotSpec::Free
                } else {
                    SlotSpec::Identity
                }
            })
            .collect();
        let problem = SynthesisProblem::new(template, specs, margolus_target()).unwrap();
        let settings = OptimizerSettings {
            restarts: 10,
            max_evals: 6000,
            seed: 7,
            ..OptimizerSettings::default()
        };
        let result = synthesize(&problem, &settings);
        assert_eq!(result.verdict, Verdict::Feasible, "cost {}", result.best_cost);
        let (raw, merged) = nontrivial_counts(&cfg, &problem, &result.best_params).unwrap();
        assert_eq!(raw, 4);
        assert_eq!(merged, 4);
    }

    #[test]
    fn nontrivial_counts_drop_absorbable_sparse_gates() {
        // Freeze slot 0 (wire 0, ahead of a CNOT targeting wire 0) to X:
        // sparse and absorbable, so it counts raw but not merged.
        let cfg = CnotConfig::new(vec![0, 1, 0]).unwrap();
        let template = config_to_template(&cfg);
        let mut specs = vec![SlotSpec::Identity; 12];
        specs[0] = SlotSpec::FixedGate(qmat::x());
        specs[4] = SlotSpec::FixedGate(qmat::h());
        let target = margolus_target();
        let problem = SynthesisProblem::new(template, specs, target).unwrap();
        let (raw, merged) = nontrivial_counts(&cfg, &problem, &[]).unwrap();
        assert_eq!(raw, 2);
        // The Hadamard on slot 4 (wire 1, layer 1) is not sparse and stays.
        assert_eq!(merged, 1);
    }

    #[test]
    fn verify_passes_and_reports_the_sign_row() {
        let report = verify_margolus();
        assert!(report.all_pass(), "{}", report.to_markdown());
        assert_eq!(report.records.len(), 4);
        assert_eq!(report.table.len(), 8);
        assert_eq!(report.table[5], "|101> -> -|101>");
        assert_eq!(report.table[6], "|110> -> |111>");
        let json: Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["command"], json!("verify"));
        assert_eq!(json["records"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn verify_flags_a_corrupted_build_with_a_dump() {
        // Wrong rotation angle in the first slot: the build check and the
        // basis table must both fail, and the failure carries a matrix dump.
        let mut gates = margolus_reference_circuit().gates().to_vec();
        gates[0] = GateInstance::ParamSingle {
            wire: 0,
            phi: 0.0,
            theta: std::f64::consts::FRAC_PI_3,
            lam: 0.0,
        };
        let corrupted = Circuit::new(3, gates).unwrap();
        let report = verify_with_circuit(&corrupted);
        assert!(!report.all_pass());
        let exact = &report.records[0];
        assert!(!exact.pass);
        assert!(exact.detail.contains('\n'), "dump expected: {}", exact.detail);
        assert!(!report.records[1].pass);
    }

    #[test]
    fn identities_pass_on_a_short_sweep() {
        let report = check_identities(7, 80);
        assert!(report.all_pass(), "{}", report.to_markdown());
        assert_eq!(report.records.len(), 7);
    }

    #[test]
    fn identities_are_seed_deterministic() {
        let a = check_identities(11, 40);
        let b = check_identities(11, 40);
        assert_eq!(a.to_json(), b.to_json());
        let json: Value = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(json["settings"]["samples"], json!(40));
    }

    #[test]
    fn markdown_tables_cover_both_shapes() {
        let survey = run_survey(2, &quick_settings(), &margolus_target(), "m", 2).unwrap();
        let md = survey.to_markdown();
        assert!(md.contains("| config | case | excluded | verdict | best_cost | evals |"));
        assert!(md.contains("| 2,2 |  | TargetUnderTouched |  |  |  |"));
        assert!(md.contains("summary: 9 records, 7 excluded,"));

        let cfg = CnotConfig::new(vec![0, 1, 0]).unwrap();
        let budget = min_single_qubit_search(&cfg, 0, &quick_settings(), 1).unwrap();
        let md = budget.to_markdown();
        assert!(md.contains("| slots | verdict | best_cost | evals |"));
        assert!(md.contains("EvidenceInfeasible"));
    }
}
