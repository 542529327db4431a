use std::fmt::Write as _;

use serde::Serialize;

use crate::cauchy::Condition2Report;
use crate::chained::{AnsatzInfo, ChainedReport};
use crate::flags::Condition1Report;
use crate::harness::RoundTrip;
use crate::triangular::{FlatOutput, ParamDependence};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdicts {
    /// pass / fail / inconclusive
    pub condition1: String,
    /// pass / fail / vacuous / not-run
    pub condition2: String,
    /// pass / fail / inconclusive
    pub overall: String,
    /// ok / failed / skipped / not-run
    pub construction: String,
    /// pass / fail / not-run
    pub verification: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputPairReport {
    pub h1: String,
    pub h2: String,
    pub ansatz: Option<AnsatzInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionReport {
    /// "chart" (user-supplied), "output-pair" (user h1/h2) or "search".
    pub source: String,
    pub output_pair: Option<OutputPairReport>,
    pub chart_symbols: Vec<String>,
    pub chart: Vec<String>,
    pub inverse: Option<Vec<String>>,
    pub min_abs_jacobian_det: f64,
    pub beta: Vec<String>,
    pub alpha_bar: Vec<String>,
    pub alpha: Vec<String>,
    /// φ_1 … φ_{n−2} in z (absent without a closed-form inverse).
    pub phi: Option<Vec<String>>,
    pub phi_x: Vec<String>,
    pub structure_check: String,
    pub chained_check: ChainedReport,
    pub flat_output: FlatOutput,
    pub parameter_dependence: Vec<ParamDependence>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Construction {
    Built(Box<ConstructionReport>),
    Failed { error: String },
}

impl Construction {
    pub fn built(&self) -> Option<&ConstructionReport> {
        match self {
            Construction::Built(c) => Some(c),
            Construction::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketOracle {
    pub brackets: Vec<String>,
    pub points: usize,
    pub step: f64,
    pub max_rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopCheck {
    pub samples: usize,
    pub max_rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub z0: Vec<f64>,
    pub x0: Vec<f64>,
    pub inputs: [String; 2],
    pub dt: f64,
    pub horizon: f64,
    pub steps: usize,
    pub min_regularity: Vec<f64>,
    /// max |z − φ(x)| between the z- and x-space integrations.
    pub consistency: f64,
    pub csv: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessRoundTrip {
    pub runs: Vec<RoundTrip>,
    pub monotone: bool,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct VerificationReport {
    pub bracket_oracle: Option<BracketOracle>,
    pub closed_loop: Option<ClosedLoopCheck>,
    pub simulation: Option<SimulationSummary>,
    pub flatness_round_trip: Option<FlatnessRoundTrip>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub rank: f64,
    pub projection: f64,
    pub equivalence: f64,
    pub regularity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamBinding {
    pub name: String,
    pub value: f64,
    /// "given" or "seeded".
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub spec: String,
    pub seed: u64,
    pub samples: usize,
    pub degree: u32,
    pub tolerances: Tolerances,
    pub dt: f64,
    pub horizon: f64,
    pub sample_box: Vec<(f64, f64)>,
    pub parameters: Vec<ParamBinding>,
    /// Sampled points stand in for the open neighbourhood; nothing here is
    /// a proof of validity on a region.
    pub region_note: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub verdicts: Verdicts,
    pub condition1: Option<Condition1Report>,
    pub condition2: Option<Condition2Report>,
    pub construction: Option<Construction>,
    pub verification: Option<VerificationReport>,
    pub provenance: Provenance,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable rendering of the same record.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let v = &self.verdicts;
        let _ = writeln!(s, "flatcheck {} on {}", self.provenance.command, self.provenance.spec);
        let _ = writeln!(s, "  condition 1: {}", v.condition1);
        if let Some(c1) = &self.condition1 {
            let _ = writeln!(
                s,
                "    {} points checked, {} rejected",
                c1.points_checked, c1.points_rejected
            );
            if let Some(f) = &c1.first_failure {
                let _ = writeln!(
                    s,
                    "    first failure: point {} level {}: dim F = {}, dim G = {}, expected {}",
                    f.point_index, f.level, f.dim_f, f.dim_g, f.expected
                );
            }
        }
        let _ = writeln!(s, "  condition 2: {}", v.condition2);
        if let Some(c2) = &self.condition2 {
            for l in &c2.levels {
                let _ = writeln!(
                    s,
                    "    k = {}: {} ({}), max residual {:.3e}, {}/{} points failing",
                    l.k,
                    if l.pass { "pass" } else { "fail" },
                    l.method,
                    l.max_residual,
                    l.failing_points,
                    l.points_checked
                );
            }
            if let Some(e) = &c2.error {
                let _ = writeln!(s, "    error: {e}");
            }
        }
        let _ = writeln!(s, "  overall: {}", v.overall);
        let _ = writeln!(s, "  construction: {}", v.construction);
        if let Some(Construction::Failed { error }) = &self.construction {
            let _ = writeln!(s, "    {error}");
        }
        if let Some(c) = self.construction.as_ref().and_then(Construction::built) {
            if let Some(p) = &c.output_pair {
                let _ = writeln!(s, "    h1 = {}\n    h2 = {}", p.h1, p.h2);
            }
            for (sym, z) in c.chart_symbols.iter().zip(&c.chart) {
                let _ = writeln!(s, "    {sym} = {z}");
            }
            let _ = writeln!(s, "    beta = [{}]", c.beta.join(", "));
            let _ = writeln!(s, "    alpha = ({})", c.alpha.join(", "));
            if let Some(phi) = &c.phi {
                for (i, p) in phi.iter().enumerate() {
                    let _ = writeln!(s, "    phi{} = {p}", i + 1);
                }
            }
            let _ = writeln!(s, "    flat output y = ({}, {})", c.flat_output.y[0], c.flat_output.y[1]);
            let mut seen = std::collections::BTreeSet::new();
            for r in c.flat_output.regularity_u.iter().filter(|r| seen.insert(r.as_str())) {
                let _ = writeln!(s, "    regular where {r} != 0");
            }
            if !c.chained_check.pass {
                for m in &c.chained_check.mismatches {
                    let _ = writeln!(
                        s,
                        "    chained form mismatch: {} component {}: got {}, expected {}",
                        m.field, m.component, m.got, m.expected
                    );
                }
            }
        }
        if let Some(ver) = &self.verification {
            let _ = writeln!(s, "  verification: {}", v.verification);
            if let Some(b) = &ver.bracket_oracle {
                let _ = writeln!(s, "    bracket oracle: max rel error {:.3e} over {} points", b.max_rel_error, b.points);
            }
            if let Some(c) = &ver.closed_loop {
                let _ = writeln!(s, "    closed loop x vs z: max rel error {:.3e}", c.max_rel_error);
            }
            if let Some(sim) = &ver.simulation {
                let _ = writeln!(s, "    simulation: {} steps, x/z gap {:.3e}", sim.steps, sim.consistency);
                if let Some(e) = &sim.error {
                    let _ = writeln!(s, "      error: {e}");
                }
            }
            if let Some(rt) = &ver.flatness_round_trip {
                for r in &rt.runs {
                    let _ = writeln!(s, "    round trip dt = {:e}: max rel error {:.3e}", r.dt, r.max_rel_error);
                }
                if let Some(e) = &rt.error {
                    let _ = writeln!(s, "      error: {e}");
                }
            }
        }
        s
    }

    /// The JSON report with the timestamp blanked, for reproducibility
    /// comparisons.
    pub fn to_json_without_timestamp(&self) -> String {
        let mut r = self.clone();
        r.provenance.timestamp.clear();
        r.to_json()
    }
}
