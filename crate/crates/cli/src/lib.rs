//! Argument handling and dispatch for the `pg3` binary.
//!
//! Every invocation is first resolved into a [`RunConfig`], which is then executed. The config
//! is plain data: `--dump-config` prints it and `pg3 run --config FILE` executes a saved one.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use pg3::clifford::{spread_audit, AuditReport, CliffordParallelism, ShearedWitness};
use pg3::dynamics::{
    line_orbit_limit, point_orbit_limit, replay_a1, replay_c1, replay_c3, replay_c4, replay_c5, replay_discrete,
    replay_lemma_c1, CaseReplayReport, Schedule,
};
use pg3::flows::{
    classify_generator, fixed_lines, FlowParams, FlowSpec, JordanCase, OneParamFlow, DEFAULT_CLASSIFY_TOL,
};
use pg3::projective::{matrix_from_rows, Line, ProjPoint, Tolerances};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayCase {
    A1,
    C1,
    C1Lemma,
    C3,
    C4,
    C5,
    Discrete,
}

/// A line as the user gave it: two spanning vectors or six Plücker coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LineInput {
    Span([[f64; 4]; 2]),
    Plucker { plucker: [f64; 6] },
}

impl LineInput {
    fn line(&self) -> Result<Line, Failure> {
        match self {
            LineInput::Span([u, v]) => Line::span(&(*u).into(), &(*v).into()),
            LineInput::Plucker { plucker } => Line::plucker_lift(&(*plucker).into()),
        }
        .map_err(|e| usage(format!("invalid line: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Classify,
    Replay,
    CliffordParallel,
    AuditSpread,
    Limits,
    FixedLines,
}

/// Everything one run needs. Fields a command does not use keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    /// Which replay, for `replay`.
    pub replay: Option<ReplayCase>,
    /// Normal form used by `replay discrete`.
    pub discrete_case: Option<JordanCase>,
    /// Flow for `limits` and `fixed-lines`, or the parameters of a replay.
    pub flow: Option<FlowSpec>,
    /// Generator to classify.
    pub matrix: Option<[[f64; 4]; 4]>,
    pub tolerances: Tolerances,
    pub classify_tol: f64,
    pub limit_tol: f64,
    pub fixed_tol: f64,
    pub schedule: Schedule,
    pub samples: usize,
    pub seed: u64,
    pub n_max: usize,
    pub grid: Option<usize>,
    pub point: Option<[f64; 4]>,
    pub line: Option<LineInput>,
    pub mutated: bool,
    pub format: Format,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: CommandKind::Classify,
            replay: None,
            discrete_case: None,
            flow: None,
            matrix: None,
            tolerances: Tolerances::default(),
            classify_tol: DEFAULT_CLASSIFY_TOL,
            limit_tol: 1e-8,
            fixed_tol: 1e-9,
            schedule: Schedule::default(),
            samples: 100,
            seed: 7,
            n_max: 1000,
            grid: None,
            point: None,
            line: None,
            mutated: false,
            format: Format::Json,
            output: None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pg3", version, about = "Line geometry of PG(3,R): flows, Clifford parallelism and orbit-limit replays")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Report format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Print the resolved run configuration as JSON and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
    /// Meet/equal decision threshold.
    #[arg(long, global = true, env = "PG3_DECISION_TOL", default_value_t = 1e-8)]
    pub decision_tol: f64,
    /// Bound on derived residuals.
    #[arg(long, global = true, env = "PG3_RESIDUAL_TOL", default_value_t = 1e-10)]
    pub residual_tol: f64,
    /// Storage noise allowed in representation invariants.
    #[arg(long, global = true, env = "PG3_REPR_TOL", default_value_t = 1e-12)]
    pub repr_tol: f64,
    /// Eigenvalue clustering tolerance of the classifier.
    #[arg(long, global = true, env = "PG3_CLASSIFY_TOL", default_value_t = DEFAULT_CLASSIFY_TOL)]
    pub classify_tol: f64,
    /// Cauchy tolerance of orbit limits.
    #[arg(long, global = true, env = "PG3_LIMIT_TOL", default_value_t = 1e-8)]
    pub limit_tol: f64,
    /// Kernel tolerance for fixed lines.
    #[arg(long, global = true, env = "PG3_FIXED_TOL", default_value_t = 1e-9)]
    pub fixed_tol: f64,
}

#[derive(Debug, Args, Default)]
pub struct FlowArgs {
    /// Flow as JSON: {"case":"a1","params":{...}} or {"matrix":[[...]]}.
    #[arg(long)]
    pub flow: Option<String>,
    /// File holding the flow JSON.
    #[arg(long)]
    pub flow_file: Option<PathBuf>,
    /// Normal form tag (a1 … c5).
    #[arg(long)]
    pub case: Option<String>,
    /// Parameters as key=value list, e.g. a=1,b=1,c=2.
    #[arg(long)]
    pub params: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a 4×4 generator into one of the nine normal forms.
    Classify {
        /// JSON file with the matrix as rows, or {"matrix": rows}.
        #[arg(long)]
        matrix_file: Option<PathBuf>,
        /// The matrix inline, as JSON rows.
        #[arg(long)]
        matrix: Option<String>,
    },
    /// Run a numerical replay of one of the limit arguments.
    Replay {
        #[arg(value_enum)]
        which: ReplayCase,
        /// Parameters as key=value list; defaults depend on the replay.
        #[arg(long)]
        params: Option<String>,
        /// Normal form for `discrete`: a1, a2, b1 or b2.
        #[arg(long)]
        case: Option<String>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Largest index for the c1 replays.
        #[arg(long, default_value_t = 1000)]
        n_max: usize,
        /// Grid size for the pencil censuses (c3 default 201, c4 default 51).
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Clifford parallelism operations.
    Clifford {
        #[command(subcommand)]
        op: CliffordOp,
    },
    /// Sample-based audits.
    Audit {
        #[command(subcommand)]
        op: AuditOp,
    },
    /// Orbit limit of a line or point under a flow.
    Limits {
        #[command(flatten)]
        flow: FlowArgs,
        /// Start line as JSON: [[u],[v]] or {"plucker":[...]}.
        #[arg(long)]
        line: Option<String>,
        /// Start point as JSON [x0,x1,x2,x3].
        #[arg(long)]
        point: Option<String>,
        /// Schedule as JSON, e.g. {"kind":"geometric","t0":0.5,"ratio":1.3,"steps":40}.
        #[arg(long)]
        schedule: Option<String>,
        /// Run the schedule at negative times.
        #[arg(long)]
        backward: bool,
    },
    /// Lines fixed by a flow.
    FixedLines {
        #[command(flatten)]
        flow: FlowArgs,
    },
    /// Execute a saved run configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum CliffordOp {
    /// The Clifford parallel to a line through a point.
    Parallel {
        /// Point as JSON [x0,x1,x2,x3].
        #[arg(long)]
        point: String,
        /// Line as JSON: [[u],[v]] or {"plucker":[...]}.
        #[arg(long)]
        line: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum AuditOp {
    /// Spread and dual-spread audit of the Clifford parallelism.
    Spread {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Audit a deliberately broken witness instead.
        #[arg(long)]
        mutated: bool,
    },
}

/// A failure that ends the run before a report exists.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

impl From<pg3::Error> for Failure {
    fn from(e: pg3::Error) -> Self {
        use pg3::Error as E;
        let code = match e {
            E::InvalidParams(_) | E::Precondition(_) | E::NotClassifiable | E::ZeroVector | E::NonFinite
            | E::OffQuadric { .. } | E::DegenerateJoin { .. } | E::Singular => EXIT_USAGE,
            _ => EXIT_FAIL,
        };
        Failure { code, message: e.to_string() }
    }
}

fn input_point(p: [f64; 4]) -> Result<ProjPoint, Failure> {
    ProjPoint::from_array(p).map_err(|e| usage(format!("invalid point: {e}")))
}

fn parse_json<T: for<'de> Deserialize<'de>>(what: &str, text: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| usage(format!("malformed {what}: {e}")))
}

fn read_file(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn parse_case(s: &str) -> Result<JordanCase, Failure> {
    s.parse().map_err(|e: pg3::Error| usage(e.to_string()))
}

fn parse_params(s: &str) -> Result<FlowParams, Failure> {
    FlowParams::parse_list(s).map_err(|e| usage(e.to_string()))
}

fn flow_spec(args: &FlowArgs) -> Result<FlowSpec, Failure> {
    let given = [args.flow.is_some(), args.flow_file.is_some(), args.case.is_some()].iter().filter(|x| **x).count();
    if given != 1 {
        return Err(usage("give exactly one of --flow, --flow-file or --case"));
    }
    if let Some(text) = &args.flow {
        return parse_json("flow", text);
    }
    if let Some(path) = &args.flow_file {
        return parse_json("flow file", &read_file(path)?);
    }
    let case = parse_case(args.case.as_deref().unwrap_or_default())?;
    let params = match &args.params {
        Some(p) => parse_params(p)?,
        None => *OneParamFlow::canonical(case).params(),
    };
    Ok(FlowSpec::Case { case, params })
}

fn default_params(which: ReplayCase) -> FlowParams {
    match which {
        ReplayCase::A1 => FlowParams::new(1.0, 1.0, 2.0, 0.0),
        ReplayCase::C3 => FlowParams::new(1.0, 0.0, 0.0, 0.0),
        ReplayCase::C4 => FlowParams::new(0.0, 1.0, 2.0, 0.0),
        ReplayCase::C5 => FlowParams::new(0.0, 1.0, 2.0, 3.0),
        ReplayCase::C1 | ReplayCase::C1Lemma | ReplayCase::Discrete => FlowParams::default(),
    }
}

fn matrix_rows(text: &str) -> Result<[[f64; 4]; 4], Failure> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum M {
        Rows([[f64; 4]; 4]),
        Wrapped { matrix: [[f64; 4]; 4] },
    }
    Ok(match parse_json::<M>("matrix", text)? {
        M::Rows(r) | M::Wrapped { matrix: r } => r,
    })
}

impl RunConfig {
    /// Resolves command-line arguments into a config.
    pub fn from_cli(cli: Cli) -> Result<Self, Failure> {
        let g = cli.global;
        let mut c = RunConfig {
            tolerances: Tolerances { repr: g.repr_tol, residual: g.residual_tol, decision: g.decision_tol },
            classify_tol: g.classify_tol,
            limit_tol: g.limit_tol,
            fixed_tol: g.fixed_tol,
            format: g.format.unwrap_or_default(),
            output: g.output,
            ..RunConfig::default()
        };
        match cli.command {
            Command::Classify { matrix_file, matrix } => {
                c.command = CommandKind::Classify;
                let text = match (matrix_file, matrix) {
                    (Some(path), None) => read_file(&path)?,
                    (None, Some(m)) => m,
                    _ => return Err(usage("give exactly one of --matrix-file or --matrix")),
                };
                c.matrix = Some(matrix_rows(&text)?);
            }
            Command::Replay { which, params, case, samples, seed, n_max, grid } => {
                c.command = CommandKind::Replay;
                c.replay = Some(which);
                c.samples = samples;
                c.seed = seed;
                c.n_max = n_max;
                c.grid = grid;
                if which == ReplayCase::Discrete {
                    let case = parse_case(case.as_deref().ok_or_else(|| usage("replay discrete needs --case"))?)?;
                    c.discrete_case = Some(case);
                }
                let params = match params {
                    Some(p) => parse_params(&p)?,
                    None => match c.discrete_case {
                        Some(case) => *OneParamFlow::canonical(case).params(),
                        None => default_params(which),
                    },
                };
                let case = match which {
                    ReplayCase::A1 => JordanCase::A1,
                    ReplayCase::C1 | ReplayCase::C1Lemma => JordanCase::C1,
                    ReplayCase::C3 => JordanCase::C3,
                    ReplayCase::C4 => JordanCase::C4,
                    ReplayCase::C5 => JordanCase::C5,
                    ReplayCase::Discrete => c.discrete_case.expect("set above"),
                };
                c.flow = Some(FlowSpec::Case { case, params });
            }
            Command::Clifford { op: CliffordOp::Parallel { point, line } } => {
                c.command = CommandKind::CliffordParallel;
                c.point = Some(parse_json("point", &point)?);
                c.line = Some(parse_json("line", &line)?);
            }
            Command::Audit { op: AuditOp::Spread { samples, seed, mutated } } => {
                c.command = CommandKind::AuditSpread;
                c.samples = samples;
                c.seed = seed;
                c.mutated = mutated;
            }
            Command::Limits { flow, line, point, schedule, backward } => {
                c.command = CommandKind::Limits;
                c.flow = Some(flow_spec(&flow)?);
                match (line, point) {
                    (Some(l), None) => c.line = Some(parse_json("line", &l)?),
                    (None, Some(p)) => c.point = Some(parse_json("point", &p)?),
                    _ => return Err(usage("give exactly one of --line or --point")),
                }
                if let Some(s) = schedule {
                    c.schedule = parse_json("schedule", &s)?;
                }
                if backward {
                    c.schedule = c.schedule.backward();
                }
            }
            Command::FixedLines { flow } => {
                c.command = CommandKind::FixedLines;
                c.flow = Some(flow_spec(&flow)?);
            }
            Command::Run { config } => {
                let mut loaded: RunConfig = parse_json("config", &read_file(&config)?)?;
                // output options given on this command line win over the saved ones
                if c.output.is_some() {
                    loaded.output = c.output.take();
                }
                if let Some(f) = g.format {
                    loaded.format = f;
                }
                c = loaded;
            }
        }
        Ok(c)
    }
}

/// A finished report with its exit code.
pub struct Report {
    pub code: i32,
    pub json: Value,
    pub csv: String,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

/// Shortest round-trip form, with `-0` printed as `0`.
fn num(x: f64) -> String {
    format!("{:?}", x + 0.0)
}

fn replay_report(r: CaseReplayReport) -> Report {
    let mut csv = String::from("section,name,value,bound,relation,passed\n");
    for c in &r.checks {
        let _ = writeln!(csv, "check,{},{},{},{},{}", c.name, num(c.value), num(c.bound), c.relation, c.passed);
    }
    for (k, v) in &r.max_residuals {
        let _ = writeln!(csv, "residual,{k},{},,,", num(*v));
    }
    let _ = writeln!(csv, "summary,passes,{},{},ge,{}", r.passes, r.samples, r.passed);
    Report { code: if r.passed { EXIT_PASS } else { EXIT_FAIL }, json: to_value(&r), csv }
}

fn used_params(case: JordanCase, p: &FlowParams) -> Value {
    let mut m = serde_json::Map::new();
    for (i, (k, v)) in [("a", p.a), ("b", p.b), ("c", p.c), ("d", p.d)].into_iter().enumerate() {
        if case.used_params()[i] {
            m.insert(k.into(), json!(v));
        }
    }
    Value::Object(m)
}

fn line_csv(lines: &[Line]) -> String {
    let mut csv = String::from("p01,p02,p03,p23,p31,p12\n");
    for l in lines {
        let p = l.plucker();
        let _ = writeln!(csv, "{}", p.iter().map(|x| num(*x)).collect::<Vec<_>>().join(","));
    }
    csv
}

fn audit_report(a: AuditReport) -> Report {
    let mut csv = String::from("name,value\n");
    for (k, v) in &a.max_residuals {
        let _ = writeln!(csv, "{k},{}", num(*v));
    }
    let _ = writeln!(csv, "violations,{}", a.violations.len());
    Report { code: if a.passed() { EXIT_PASS } else { EXIT_FAIL }, json: to_value(&a), csv }
}

fn resolve_flow(c: &RunConfig) -> Result<OneParamFlow, Failure> {
    let spec = c.flow.as_ref().ok_or_else(|| usage("no flow given"))?;
    Ok(spec.resolve(c.classify_tol)?.0)
}

fn replay_params(c: &RunConfig) -> Result<FlowParams, Failure> {
    match &c.flow {
        Some(FlowSpec::Case { params, .. }) => Ok(*params),
        Some(FlowSpec::Matrix { .. }) => Err(usage("replays take parameters, not a matrix")),
        None => Ok(c.replay.map(default_params).unwrap_or_default()),
    }
}

/// Runs a resolved config.
pub fn execute(c: &RunConfig) -> Result<Report, Failure> {
    match c.command {
        CommandKind::Classify => {
            let rows = c.matrix.ok_or_else(|| usage("no matrix given"))?;
            let r = classify_generator(&matrix_from_rows(&rows), c.classify_tol)?;
            let json = json!({
                "schema_version": 1,
                "case": r.case,
                "params": used_params(r.case, &r.params),
                "shift": r.shift,
                "residual": r.residual,
                "ambiguous": r.ambiguous,
                "conjugator": to_value(&r)["conjugator"],
                "eigenvalues": r.eigenvalues,
            });
            let mut csv = String::from("name,value\n");
            let _ = writeln!(csv, "case,{}", r.case);
            if let Value::Object(m) = &json["params"] {
                for (k, v) in m {
                    let _ = writeln!(csv, "{k},{v}");
                }
            }
            let _ = writeln!(csv, "shift,{}\nresidual,{}\nambiguous,{}", num(r.shift), num(r.residual), r.ambiguous);
            Ok(Report { code: EXIT_PASS, json, csv })
        }
        CommandKind::Replay => {
            let which = c.replay.ok_or_else(|| usage("no replay given"))?;
            let p = replay_params(c)?;
            let r = match which {
                ReplayCase::A1 => replay_a1(p, c.samples, c.seed)?,
                ReplayCase::C1 => replay_c1(c.n_max)?,
                ReplayCase::C1Lemma => replay_lemma_c1(c.n_max)?,
                ReplayCase::C3 => replay_c3(p.a, c.grid.unwrap_or(201))?,
                ReplayCase::C4 => replay_c4(p, c.grid.unwrap_or(51))?,
                ReplayCase::C5 => replay_c5(p, c.samples, c.seed)?,
                ReplayCase::Discrete => {
                    let case = c.discrete_case.ok_or_else(|| usage("replay discrete needs a case"))?;
                    replay_discrete(case, p, c.samples, c.seed)?
                }
            };
            Ok(replay_report(r))
        }
        CommandKind::CliffordParallel => {
            let point = input_point(c.point.ok_or_else(|| usage("no point given"))?)?;
            let line = c.line.as_ref().ok_or_else(|| usage("no line given"))?.line()?;
            let m = pg3::clifford::clifford_parallel(&point, &line);
            Ok(Report { code: EXIT_PASS, json: json!({ "schema_version": 1, "line": m }), csv: line_csv(&[m]) })
        }
        CommandKind::AuditSpread => {
            if c.samples == 0 {
                return Err(usage("audit needs at least one sample"));
            }
            let inner = CliffordParallelism;
            let a = if c.mutated {
                spread_audit(&ShearedWitness::new(&inner), c.samples, c.seed, &c.tolerances)
            } else {
                spread_audit(&inner, c.samples, c.seed, &c.tolerances)
            };
            Ok(audit_report(a))
        }
        CommandKind::Limits => {
            let flow = resolve_flow(c)?;
            let (json, csv, converged) = match (&c.line, c.point) {
                (Some(l), None) => {
                    let r = line_orbit_limit(&flow, &l.line()?, &c.schedule, c.limit_tol)?;
                    (to_value(&r), r.trace_csv(), r.converged)
                }
                (None, Some(p)) => {
                    let r = point_orbit_limit(&flow, &input_point(p)?, &c.schedule, c.limit_tol)?;
                    (to_value(&r), r.trace_csv(), r.converged)
                }
                _ => return Err(usage("give exactly one start line or point")),
            };
            let mut json = json;
            json["schema_version"] = json!(1);
            Ok(Report { code: if converged { EXIT_PASS } else { EXIT_FAIL }, json, csv })
        }
        CommandKind::FixedLines => {
            let flow = resolve_flow(c)?;
            let set = fixed_lines(&flow, c.fixed_tol);
            let mut json = to_value(&set);
            json["schema_version"] = json!(1);
            json["case"] = json!(flow.case());
            Ok(Report { code: EXIT_PASS, json, csv: line_csv(&set.lines) })
        }
    }
}

fn emit(c: &RunConfig, text: &str) -> Result<(), Failure> {
    match &c.output {
        Some(path) => std::fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses `argv`, runs and writes the report. Returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let dump = cli.global.dump_config;
    let result = RunConfig::from_cli(cli).and_then(|c| {
        if dump {
            let text = serde_json::to_string_pretty(&c).expect("config serializes") + "\n";
            emit(&c, &text)?;
            return Ok(EXIT_PASS);
        }
        let report = execute(&c)?;
        let text = match c.format {
            Format::Json => serde_json::to_string_pretty(&report.json).expect("report serializes") + "\n",
            Format::Csv => report.csv,
        };
        emit(&c, &text)?;
        Ok(report.code)
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("pg3: {}", f.message);
            f.code
        }
    }
}
