//! Front end for the amplification laboratory: synthesize plans, execute
//! them against leaf models, tabulate the achievable-region iteration, and
//! run the oracle suites.
//!
//! Exit codes: 0 success, 1 usage error, 2 refused request (provably
//! impossible or outside the known-achievable region), 3 a verification or
//! assertion failed. Identical flags and seed give byte-identical stdout.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use otlab_cli::parse_prob;

use otlab::analysis::{enumerate_sampler_joint, measure_wot_params, uot_hash_closeness};
use otlab::engine::{
    enumerate_runs, run_session, serialize_transcript, trial_seed, Endpoint, RandSource,
    RandState,
};
use otlab::hashing::{
    collision_rate_exhaustive, distributed_lhl_verify, lhl_verify, EntropySource,
    PairEntropySource,
};
use otlab::planner::{
    execute_plan_capped, plan, region_checkpoints, region_iterate, step_map,
    AmplificationPlan, ExecMode, ExecReport, PlanError, PlanNode, RegionTable, Triple,
};
use otlab::prob::{statistical_distance, FiniteDist, JointBitDist, Outcome};
use otlab::primitives::{simwot_sample, AdversaryDist, OtSpec};
use otlab::reductions::{
    e_reduce_session, r_reduce_session, rot_from_ot_session, rotor_session,
    s_reduce_session, ReductionStep, WotModel,
};

#[derive(Parser)]
#[command(name = "otlab", version, about = "Oblivious-transfer amplification laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize an amplification plan for a weak-transfer triple
    Plan(PlanArgs),
    /// Execute a plan file against a leaf model and check every claim
    Simulate(SimArgs),
    /// Iterate the achievable-region tables and emit one round as a grid
    Region(RegionArgs),
    /// Run an oracle suite and print a summary table
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct PlanArgs {
    /// Choice-bit leakage toward the sender
    #[arg(long, value_parser = parse_prob)]
    p: f64,
    /// Unchosen-message leakage toward the receiver
    #[arg(long, value_parser = parse_prob)]
    q: f64,
    /// Output error rate
    #[arg(long, value_parser = parse_prob)]
    eps: f64,
    /// Security exponent: every parameter must land at or below 2^-k
    #[arg(long, default_value_t = 8)]
    k: u32,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    MonteCarlo,
}

#[derive(Args)]
struct SimArgs {
    /// Plan file as emitted by `plan` (JSON)
    #[arg(long, value_name = "FILE")]
    plan: PathBuf,
    /// Leaf model: "event:p,q,eps" or "erasure:p,q"
    #[arg(long)]
    source: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Monte Carlo sample count per stage
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Master seed; required for monte-carlo mode and transcript dumps
    #[arg(long)]
    seed: Option<u64>,
    /// Shard Monte Carlo trials over this many threads; results do not
    /// depend on the count
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Largest exact-mode input-tuple count per stage
    #[arg(long, default_value_t = 1 << 22)]
    exact_cap: u128,
    /// Also run one live session per plan step and append the transcripts
    /// to this file
    #[arg(long, value_name = "FILE")]
    dump_transcript: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
}

#[derive(Args)]
struct RegionArgs {
    /// Grid resolution (at least 64)
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    /// Iteration rounds to compute
    #[arg(long, default_value_t = 11)]
    rounds: usize,
    /// Which round's table to emit; defaults to the last
    #[arg(long)]
    round: Option<usize>,
    /// Enforce the round-8 and round-11 reference margins at this resolution
    #[arg(long)]
    assert_paper: bool,
    #[arg(long, value_enum, default_value_t = Output::Csv)]
    output: Output,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    ProbOracles,
    HashLhl,
    ReductionsExact,
    UotTheorem,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    /// Which oracle suite to run
    #[arg(value_enum)]
    suite: SuiteArg,
    /// Master seed for the randomized checks
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Output::Text)]
    output: Output,
}

// A finished command either printed its object and succeeded, or carries an
// exit code and an optional stderr line.
struct Exit {
    code: u8,
    msg: Option<String>,
}

fn usage(msg: impl Into<String>) -> Exit {
    Exit { code: 1, msg: Some(msg.into()) }
}

fn failed(msg: impl Into<String>) -> Exit {
    Exit { code: 3, msg: Some(msg.into()) }
}

fn from_plan_error(e: PlanError) -> Exit {
    match e {
        PlanError::Impossible { .. } | PlanError::OutsideKnownRegion { .. } => {
            Exit { code: 2, msg: Some(e.to_string()) }
        }
        other => usage(other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Plan(a) => cmd_plan(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Region(a) => cmd_region(a),
        Cmd::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(exit) => {
            if let Some(msg) = exit.msg {
                eprintln!("error: {msg}");
            }
            ExitCode::from(exit.code)
        }
    }
}

#[derive(Clone, Copy)]
enum SourceSpec {
    Event { p: f64, q: f64, eps: f64 },
    Erasure { p: f64, q: f64 },
}

impl SourceSpec {
    fn model(&self) -> WotModel {
        match *self {
            SourceSpec::Event { p, q, eps } => WotModel::Event { p, q, eps },
            SourceSpec::Erasure { p, q } => WotModel::Erasure { p, q },
        }
    }
}

fn parse_source(s: &str) -> Result<SourceSpec, String> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| format!("source {s:?} needs the form kind:params"))?;
    let parts: Vec<f64> = rest
        .split(',')
        .map(parse_prob)
        .collect::<Result<_, _>>()
        .map_err(|e| format!("source {s:?}: {e}"))?;
    match (kind, parts.as_slice()) {
        ("event", [p, q, eps]) => Ok(SourceSpec::Event { p: *p, q: *q, eps: *eps }),
        ("erasure", [p, q]) if *p + *q <= 1.0 => Ok(SourceSpec::Erasure { p: *p, q: *q }),
        ("erasure", [p, q]) => Err(format!("erasure source needs p + q <= 1, got {}", p + q)),
        _ => Err(format!("source {s:?}: expected event:p,q,eps or erasure:p,q")),
    }
}

fn step_name(step: ReductionStep) -> &'static str {
    match step {
        ReductionStep::RotFromOt => "RotFromOt",
        ReductionStep::OtFromRot => "OtFromRot",
        ReductionStep::Rotor => "Rotor",
        ReductionStep::RotFromUot { .. } => "RotFromUot",
        ReductionStep::RReduce { .. } => "RReduce",
        ReductionStep::SReduce { .. } => "SReduce",
        ReductionStep::EReduce { .. } => "EReduce",
    }
}

// All stdout goes through here; a reader that hangs up mid-stream is not
// an error worth a panic.
fn emit(s: &str) {
    use std::io::Write;
    let out = std::io::stdout();
    let mut lock = out.lock();
    if lock.write_all(s.as_bytes()).is_err() || lock.flush().is_err() {
        std::process::exit(0);
    }
}

fn json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn cmd_plan(a: PlanArgs) -> Result<(), Exit> {
    match plan(a.p, a.q, a.eps, a.k) {
        Ok(p) => {
            emit(&render_plan(&p, a.output));
            Ok(())
        }
        Err(e @ PlanError::Impossible { .. }) => {
            emit(&render_refusal("impossible", &e, a.output));
            Err(Exit { code: 2, msg: None })
        }
        Err(e @ PlanError::OutsideKnownRegion { .. }) => {
            emit(&render_refusal("outside-known-region", &e, a.output));
            Err(Exit { code: 2, msg: None })
        }
        Err(e) => Err(usage(e.to_string())),
    }
}

fn render_refusal(kind: &str, e: &PlanError, output: Output) -> String {
    match output {
        Output::Json => json_string(&serde_json::json!({
            "refused": kind,
            "reason": e.to_string(),
        })),
        Output::Csv | Output::Text => format!("refused: {kind}: {e}\n"),
    }
}

fn render_plan(p: &AmplificationPlan, output: Output) -> String {
    match output {
        Output::Json => json_string(&p.to_json()),
        Output::Csv => {
            let mut out = String::from("stage,kind,n,p,q,eps\n");
            let _ = writeln!(out, "0,input,,{},{},{}", p.input.p, p.input.q, p.input.eps);
            for (i, node) in p.tree.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    i + 1,
                    step_name(node.step),
                    node.step.arity(),
                    node.claimed.p,
                    node.claimed.q,
                    node.claimed.eps
                );
            }
            out
        }
        Output::Text => {
            let root = p.root();
            let mut out = String::new();
            let _ = writeln!(out, "theorem: {}", p.theorem);
            let _ = writeln!(out, "input: p={} q={} eps={}", p.input.p, p.input.q, p.input.eps);
            let _ = writeln!(out, "target: 2^-{} = {}", p.target_k, p.target());
            let _ = writeln!(out, "steps: {}, leaves: {}", p.tree.len(), p.leaf_count);
            for (i, node) in p.tree.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "  {}. {} n={} -> p={} q={} eps={}",
                    i + 1,
                    step_name(node.step),
                    node.step.arity(),
                    node.claimed.p,
                    node.claimed.q,
                    node.claimed.eps
                );
            }
            let _ = writeln!(out, "root: p={} q={} eps={}", root.p, root.q, root.eps);
            out
        }
    }
}

fn cmd_simulate(a: SimArgs) -> Result<(), Exit> {
    let text = std::fs::read_to_string(&a.plan)
        .map_err(|e| usage(format!("cannot read {}: {e}", a.plan.display())))?;
    let plan = AmplificationPlan::from_json(&text).map_err(from_plan_error)?;
    let spec = parse_source(&a.source).map_err(usage)?;
    let mode = match a.mode {
        ModeArg::Exact => ExecMode::Exact,
        ModeArg::MonteCarlo => {
            let seed = a
                .seed
                .ok_or_else(|| usage("--seed is required for monte-carlo mode"))?;
            ExecMode::MonteCarlo { trials: a.trials, seed, jobs: a.jobs }
        }
    };
    if let Some(path) = &a.dump_transcript {
        let seed = a
            .seed
            .ok_or_else(|| usage("--seed is required for --dump-transcript"))?;
        let dump = step_transcripts(&plan, spec, seed).map_err(from_plan_error)?;
        std::fs::write(path, dump)
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    }
    let report =
        execute_plan_capped(&plan, &spec.model(), mode, a.exact_cap).map_err(from_plan_error)?;
    emit(&render_report(&report, a.output));
    if report.ok {
        Ok(())
    } else {
        Err(failed("a measured stage exceeded its claim"))
    }
}

// One live session per plan step, innermost first, each on a fresh seed
// stream; the concatenation stays line-parsable.
fn step_transcripts(
    plan: &AmplificationPlan,
    spec: SourceSpec,
    seed: u64,
) -> Result<String, PlanError> {
    let mut out = String::new();
    for (i, node) in plan.tree.iter().enumerate() {
        let models = |n: usize| (0..n).map(|_| spec.model()).collect::<Vec<_>>();
        let parts = match node.step {
            ReductionStep::RReduce { n } => r_reduce_session(n, models(n))?,
            ReductionStep::SReduce { n } => s_reduce_session(n, models(n))?,
            ReductionStep::EReduce { n } => e_reduce_session(n, models(n))?,
            ReductionStep::Rotor => rotor_session(),
            other => {
                return Err(PlanError::BadPlan(format!(
                    "no live session for step {other:?}"
                )))
            }
        };
        let t = run_session(parts, RandSource::Seeded(trial_seed(seed, i as u64)))
            .map_err(|e| PlanError::BadPlan(format!("live session failed: {e}")))?;
        out.push_str(&serialize_transcript(&t));
    }
    Ok(out)
}

fn render_report(report: &ExecReport, output: Output) -> String {
    match output {
        Output::Json => json_string(report),
        Output::Csv => {
            let mut out = String::from(
                "stage,label,claimed_p,claimed_q,claimed_eps,measured_p,measured_q,measured_eps,radius,within\n",
            );
            for (i, s) in report.stages.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    i,
                    s.label.replace(',', ";"),
                    s.claimed.p,
                    s.claimed.q,
                    s.claimed.eps,
                    s.measured.p,
                    s.measured.q,
                    s.measured.eps,
                    s.radius,
                    s.within
                );
            }
            out
        }
        Output::Text => {
            let mut out = String::new();
            for (i, s) in report.stages.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "stage {i} [{}] claimed=({}, {}, {}) measured=({}, {}, {}) radius={} within={}",
                    s.label,
                    s.claimed.p,
                    s.claimed.q,
                    s.claimed.eps,
                    s.measured.p,
                    s.measured.q,
                    s.measured.eps,
                    s.radius,
                    s.within
                );
            }
            let _ = writeln!(
                out,
                "result: {}",
                if report.ok { "all stages within claims" } else { "claim exceeded" }
            );
            out
        }
    }
}

fn cmd_region(a: RegionArgs) -> Result<(), Exit> {
    let table = region_iterate(a.resolution, a.rounds).map_err(from_plan_error)?;
    let round = a.round.unwrap_or_else(|| table.rounds());
    if round > table.rounds() {
        return Err(usage(format!(
            "round {round} exceeds computed rounds {}",
            table.rounds()
        )));
    }
    let checkpoints = if a.assert_paper {
        Some(region_checkpoints(a.resolution).map_err(from_plan_error)?)
    } else {
        None
    };
    match a.output {
        Output::Csv => {
            emit(&table.to_csv(round));
            if let Some(c) = &checkpoints {
                eprintln!(
                    "checkpoints: first_margin={} second_margin={} ok={}",
                    c.first_margin, c.second_margin, c.ok
                );
            }
        }
        Output::Json => {
            let n = table.resolution() + 1;
            let mut rows = Vec::with_capacity(n * n);
            for a_idx in 0..n {
                for b_idx in 0..n {
                    let p = a_idx as f64 / table.resolution() as f64;
                    let q = b_idx as f64 / table.resolution() as f64;
                    rows.push(serde_json::json!([p, q, table.value(round, a_idx, b_idx)]));
                }
            }
            emit(&json_string(&serde_json::json!({
                "resolution": table.resolution(),
                "rounds": table.rounds(),
                "round": round,
                "rows": rows,
                "checkpoints": checkpoints,
            })));
        }
        Output::Text => {
            let (min, max) = table_range(&table, round);
            let mut out = String::new();
            let _ = writeln!(
                out,
                "region iteration: resolution {}, rounds {}",
                table.resolution(),
                table.rounds()
            );
            let _ = writeln!(out, "round {round}: min {min}, max {max}");
            if let Some(c) = &checkpoints {
                let _ = writeln!(
                    out,
                    "checkpoints: first_margin={} second_margin={} ok={}",
                    c.first_margin, c.second_margin, c.ok
                );
            }
            emit(&out);
        }
    }
    match checkpoints {
        Some(c) if !c.ok => Err(failed("checkpoint margins violated")),
        _ => Ok(()),
    }
}

fn table_range(table: &RegionTable, round: usize) -> (f64, f64) {
    let n = table.resolution() + 1;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for a in 0..n {
        for b in 0..n {
            let v = table.value(round, a, b);
            min = min.min(v);
            max = max.max(v);
        }
    }
    (min, max)
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    ok: bool,
    detail: String,
}

#[derive(Serialize)]
struct SuiteReport {
    suite: &'static str,
    checks: Vec<Check>,
    ok: bool,
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Exit> {
    let wanted: Vec<SuiteArg> = match a.suite {
        SuiteArg::All => vec![
            SuiteArg::ProbOracles,
            SuiteArg::HashLhl,
            SuiteArg::ReductionsExact,
            SuiteArg::UotTheorem,
        ],
        one => vec![one],
    };
    let mut reports = Vec::new();
    for suite in wanted {
        let (name, checks) = match suite {
            SuiteArg::ProbOracles => ("prob-oracles", suite_prob_oracles(a.seed)),
            SuiteArg::HashLhl => ("hash-lhl", suite_hash_lhl()),
            SuiteArg::ReductionsExact => ("reductions-exact", suite_reductions_exact()),
            SuiteArg::UotTheorem => ("uot-theorem", suite_uot_theorem()),
            SuiteArg::All => unreachable!(),
        };
        let checks = checks.map_err(usage)?;
        let ok = checks.iter().all(|c| c.ok);
        reports.push(SuiteReport { suite: name, checks, ok });
    }
    emit(&render_verify(&reports, a.output));
    if reports.iter().all(|r| r.ok) {
        Ok(())
    } else {
        Err(failed("verification failed"))
    }
}

fn render_verify(reports: &[SuiteReport], output: Output) -> String {
    match output {
        Output::Json => json_string(&reports),
        Output::Csv => {
            let mut out = String::from("suite,check,ok,detail\n");
            for r in reports {
                for c in &r.checks {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        r.suite,
                        c.name,
                        c.ok,
                        c.detail.replace(',', ";")
                    );
                }
            }
            out
        }
        Output::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "{:<18} {:<34} result", "suite", "check");
            let mut failures = 0usize;
            let mut total = 0usize;
            for r in reports {
                for c in &r.checks {
                    total += 1;
                    if !c.ok {
                        failures += 1;
                    }
                    let _ = writeln!(
                        out,
                        "{:<18} {:<34} {}",
                        r.suite,
                        c.name,
                        if c.ok { "ok".into() } else { format!("FAIL ({})", c.detail) }
                    );
                }
            }
            let _ = writeln!(out, "{total} checks, {failures} failures");
            out
        }
    }
}

fn bit_tuple(v: u64, n: usize) -> Outcome {
    (0..n).map(|i| ((v >> (n - 1 - i)) & 1) as u32).collect()
}

fn uniform_bits(n: usize) -> FiniteDist {
    FiniteDist::uniform((0..(1u64 << n)).map(|v| bit_tuple(v, n)).collect())
        .expect("nonempty domain")
}

// The advantage-distance identity on seeded random joints, and the
// erasure-protocol parameter values on a dyadic grid point.
fn suite_prob_oracles(seed: u64) -> Result<Vec<Check>, String> {
    let mut checks = Vec::new();
    let mut rng = RandState::new(RandSource::Seeded(seed));
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let side = 1 + rng.draw_range(Endpoint::Func, 16).map_err(|e| e.to_string())? as u32;
        let mut entries = Vec::new();
        let mut total = 0.0;
        for bit in 0..2u32 {
            for y in 0..side {
                let w = rng.draw_unit(Endpoint::Func).map_err(|e| e.to_string())? + 1e-3;
                total += w;
                entries.push((vec![bit, y], w));
            }
        }
        let joint = JointBitDist::from_weighted(
            entries.into_iter().map(|(o, w)| (o, w / total)),
        )
        .map_err(|e| e.to_string())?;
        let dist = statistical_distance(joint.dist(), &joint.uniform_times_side())
            .map_err(|e| e.to_string())?;
        worst = worst.max((joint.pred_adv() - 2.0 * dist).abs());
    }
    checks.push(Check {
        name: "advantage-equals-distance",
        ok: worst <= 1e-12,
        detail: format!("worst gap {worst:e} over 40 joints"),
    });

    let joint = enumerate_sampler_joint(6, |r| simwot_sample(0.25, 0.25, r))
        .map_err(|e| e.to_string())?;
    let params = measure_wot_params(&joint).map_err(|e| e.to_string())?;
    let gap = (params.p - 0.25)
        .abs()
        .max((params.q - 0.25).abs())
        .max((params.eps - 0.25).abs());
    checks.push(Check {
        name: "erasure-quarter-exact",
        ok: gap <= 1e-12,
        detail: format!("p={} q={} eps={}", params.p, params.q, params.eps),
    });
    Ok(checks)
}

// Universality of the GF(2) hash and both extraction lemmas on small
// exhaustive sources.
fn suite_hash_lhl() -> Result<Vec<Check>, String> {
    let mut checks = Vec::new();
    let mut worst: f64 = 0.0;
    for (x0, x1) in [(1u64, 2u64), (5, 63), (17, 42)] {
        let rate = collision_rate_exhaustive(6, 3, x0, x1).map_err(|e| e.to_string())?;
        worst = worst.max(rate);
    }
    checks.push(Check {
        name: "toeplitz-collision-rate",
        ok: worst <= 0.125 + 1e-12,
        detail: format!("worst rate {worst} against 1/8"),
    });

    let src = EntropySource::with_computed_floor(uniform_bits(8)).map_err(|e| e.to_string())?;
    let report = lhl_verify(&src, 4, 0.25).map_err(|e| e.to_string())?;
    checks.push(Check {
        name: "extraction-uniform-byte",
        ok: report.ok,
        detail: format!("measured {} against {}", report.measured, report.bound),
    });

    let src = PairEntropySource::with_computed_floors(uniform_bits(8), 4)
        .map_err(|e| e.to_string())?;
    let report = distributed_lhl_verify(&src, 2, 2, 0.5).map_err(|e| e.to_string())?;
    checks.push(Check {
        name: "distributed-extraction-pair",
        ok: report.ok,
        detail: format!("measured {} against {}", report.measured, report.bound_tight),
    });
    Ok(checks)
}

fn single_step_plan(input: Triple, step: ReductionStep) -> Result<AmplificationPlan, String> {
    let claimed = step_map(step, input).map_err(|e| e.to_string())?;
    let plan = AmplificationPlan {
        target_k: 1,
        input,
        tree: vec![PlanNode { step, claimed }],
        leaf_count: step.arity() as u64,
        theorem: "single-step probe".into(),
    };
    plan.validate().map_err(|e| e.to_string())?;
    Ok(plan)
}

// Closed-form propagation against exact execution, plus the three perfect
// reductions on every random tape.
fn suite_reductions_exact() -> Result<Vec<Check>, String> {
    let mut checks = Vec::new();

    let input = Triple::new(0.05, 0.08, 0.1).map_err(|e| e.to_string())?;
    let model = WotModel::Event { p: 0.05, q: 0.08, eps: 0.1 };
    let mut worst: f64 = 0.0;
    for step in [
        ReductionStep::RReduce { n: 2 },
        ReductionStep::RReduce { n: 3 },
        ReductionStep::SReduce { n: 2 },
        ReductionStep::SReduce { n: 3 },
        ReductionStep::EReduce { n: 3 },
        ReductionStep::Rotor,
    ] {
        let plan = single_step_plan(input, step)?;
        let report = execute_plan_capped(&plan, &model, ExecMode::Exact, 1 << 22)
            .map_err(|e| e.to_string())?;
        let s = &report.stages[1];
        worst = worst
            .max((s.measured.p - s.claimed.p).abs())
            .max((s.measured.q - s.claimed.q).abs())
            .max((s.measured.eps - s.claimed.eps).abs());
    }
    checks.push(Check {
        name: "closed-forms-event-model",
        ok: worst <= 1e-9,
        detail: format!("worst gap {worst:e} over six steps"),
    });

    let plan = single_step_plan(
        Triple::new(0.0, 0.0, 0.1).map_err(|e| e.to_string())?,
        ReductionStep::EReduce { n: 3 },
    )?;
    let model = WotModel::Event { p: 0.0, q: 0.0, eps: 0.1 };
    let report = execute_plan_capped(&plan, &model, ExecMode::Exact, 1 << 22)
        .map_err(|e| e.to_string())?;
    let eps = report.stages[1].measured.eps;
    checks.push(Check {
        name: "majority-three-at-a-tenth",
        ok: (eps - 0.028).abs() <= 1e-12,
        detail: format!("measured eps {eps}"),
    });

    let dist = enumerate_runs(
        || rot_from_ot_session(OtSpec::pair()),
        3,
        |t| {
            let a = t.output_a.as_ref().expect("sender output");
            let b = t.output_b.as_ref().expect("receiver output");
            vec![a[0] as u32, a[1] as u32, b[0] as u32, b[1] as u32]
        },
    )
    .map_err(|e| e.to_string())?;
    let ideal = dist.outcomes().len() == 8
        && dist.iter().all(|(o, m)| {
            m == 0.125 && o[3] == if o[2] == 0 { o[0] } else { o[1] }
        });
    checks.push(Check {
        name: "randomize-matches-ideal",
        ok: ideal,
        detail: format!("{} outcomes", dist.outcomes().len()),
    });

    let dist = enumerate_runs(
        rotor_session,
        3,
        |t| {
            let a = t.output_a.as_ref().expect("receiver-side output");
            let b = t.output_b.as_ref().expect("sender-side output");
            vec![a[0] as u32, a[1] as u32, b[0] as u32, b[1] as u32]
        },
    )
    .map_err(|e| e.to_string())?;
    let aligned = dist
        .iter()
        .all(|(o, _)| o[1] == if o[0] == 0 { o[2] } else { o[3] });
    checks.push(Check {
        name: "reversal-stays-consistent",
        ok: aligned,
        detail: format!("{} outcomes", dist.outcomes().len()),
    });
    Ok(checks)
}

// The hashing-protocol closeness values on uniform and pinned adversaries.
fn suite_uot_theorem() -> Result<Vec<Check>, String> {
    let mut checks = Vec::new();

    // 2n-bit tuples: the two strings concatenated
    let pair_uniform = |n: usize| uniform_bits(2 * n);

    let d = AdversaryDist::explicit(4, pair_uniform(4))
        .map_err(|e| e.to_string())?;
    let report = uot_hash_closeness(&d, 8.0, 1, 0.25).map_err(|e| e.to_string())?;
    checks.push(Check {
        name: "uniform-pair-short",
        ok: (report.closeness - 1.0 / 32.0).abs() <= 1e-15 && report.ok,
        detail: format!("closeness {} against {}", report.closeness, report.bound),
    });

    let d = AdversaryDist::explicit(6, pair_uniform(6))
        .map_err(|e| e.to_string())?;
    let report = uot_hash_closeness(&d, 8.0, 1, 0.25).map_err(|e| e.to_string())?;
    checks.push(Check {
        name: "uniform-pair-long",
        ok: (report.closeness - 1.0 / 128.0).abs() <= 1e-15 && report.ok,
        detail: format!("closeness {} against {}", report.closeness, report.bound),
    });

    let d = AdversaryDist::fixed_bits(4, vec![(0, 1), (2, 0)]).map_err(|e| e.to_string())?;
    let alpha = d.entropy().map_err(|e| e.to_string())?;
    let report = uot_hash_closeness(&d, alpha, 1, 0.25).map_err(|e| e.to_string())?;
    checks.push(Check {
        name: "pinned-bits-bounded",
        ok: report.ok,
        detail: format!("closeness {} against {}", report.closeness, report.bound),
    });
    Ok(checks)
}
