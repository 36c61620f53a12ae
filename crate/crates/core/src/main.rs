use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use polyred::affine::Bindings;
use polyred::codegen::{emit_c, plan_privatization, ParallelChoice, Placement, PrivatizationPlan};
use polyred::deps::{analyze, analyze_values, DepError, Dependence, DependenceSet, Granularity};
use polyred::detect::{describe, detect};
use polyred::exec::{differential_check, Memory};
use polyred::frontend::{parse, print_scop};
use polyred::ir::{InstKind, Operand, Scop};
use polyred::schedule::{classify_dims, parse_rows, search, validate, DimClassification, LegalityMode, Schedule, ScheduleError, SearchConfig, Validated};

#[derive(Parser)]
#[command(name = "polyred", version, about = "Reduction detection, modeling and privatized parallelization for affine loop nests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Kernel in the .scop language.
    file: PathBuf,
    /// Fuse consecutive statements of a block into one compound statement.
    #[arg(long)]
    fuse: bool,
    /// Machine-readable output on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, default_value = "privatized", value_parser = parse_mode)]
    mode: LegalityMode,
    /// Maximum number of transformation moves per statement.
    #[arg(long, default_value_t = 2)]
    search_depth: usize,
    /// Maximum number of emptiness checks before giving up.
    #[arg(long, default_value_t = 50_000)]
    budget: usize,
    /// Explicit rows for one statement, e.g. `S=i, 1, -j, 0`. Repeatable.
    #[arg(long = "theta", value_name = "STMT=ROWS")]
    theta: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Original,
    Search,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a kernel and print it back, or dump the lowered IR.
    Parse {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        dump_ir: bool,
    },
    /// List detected reductions.
    Detect {
        #[command(flatten)]
        input: Input,
    },
    /// Dependences and their reduction / non-reduction / privatization split.
    Deps {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "hybrid", value_parser = parse_granularity)]
        granularity: Granularity,
        /// Enumerated value-based dependences; needs --params.
        #[arg(long)]
        value_based: bool,
        #[arg(long, value_parser = parse_params)]
        params: Option<Bindings>,
    },
    /// Search for a schedule (or validate one given with --theta) and classify its dimensions.
    Schedule {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sched: ScheduleArgs,
    },
    /// Emit C with OpenMP pragmas and privatized reductions.
    Codegen {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sched: ScheduleArgs,
        /// Schedule to generate from when no --theta is given.
        #[arg(long, value_enum, default_value = "search")]
        schedule: Source,
        #[arg(long, default_value = "auto", value_parser = parse_placement)]
        placement: Placement,
        /// Parallel loop: auto, none, dim=K or an iterator name.
        #[arg(long, default_value = "auto", value_parser = parse_parallel)]
        parallel: ParallelChoice,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Compare scheduled, privatized, interleaved execution against the original order.
    Verify {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sched: ScheduleArgs,
        /// Only this schedule (default: the original one when legal, and the search result).
        #[arg(long, value_enum)]
        schedule: Option<Source>,
        #[arg(long, default_value = "auto", value_parser = parse_placement)]
        placement: Placement,
        #[arg(long, default_value = "auto", value_parser = parse_parallel)]
        parallel: ParallelChoice,
        #[arg(long, value_parser = parse_params)]
        params: Bindings,
        /// Context counts, comma separated.
        #[arg(long, default_value = "4", value_delimiter = ',')]
        contexts: Vec<usize>,
        /// Number of interleaving seeds.
        #[arg(long, default_value_t = 50)]
        seeds: u64,
    },
    /// Wall-time of the dependence analysis at the three granularities.
    Report {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 5)]
        repeat: usize,
    },
}

fn parse_mode(s: &str) -> Result<LegalityMode, String> {
    s.parse()
}

fn parse_granularity(s: &str) -> Result<Granularity, String> {
    s.parse()
}

fn parse_placement(s: &str) -> Result<Placement, String> {
    s.parse()
}

fn parse_parallel(s: &str) -> Result<ParallelChoice, String> {
    s.parse()
}

fn parse_params(s: &str) -> Result<Bindings, String> {
    let mut out = Bindings::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, found `{part}`"))?;
        let v: i64 = v.trim().parse().map_err(|_| format!("bad value in `{part}`"))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// Failure with its exit code: 1 for analysis refusals, 2 for bad input.
enum Failure {
    Refused(String),
    Usage(String),
}

impl Failure {
    fn refused(e: impl std::fmt::Display) -> Self {
        Failure::Refused(e.to_string())
    }
}

impl From<DepError> for Failure {
    fn from(e: DepError) -> Self {
        Failure::refused(e)
    }
}

impl From<ScheduleError> for Failure {
    fn from(e: ScheduleError) -> Self {
        match e {
            ScheduleError::Shape { .. } => Failure::Usage(e.to_string()),
            _ => Failure::refused(e),
        }
    }
}

type Outcome = Result<(), Failure>;

fn load(input: &Input) -> Result<Scop, Failure> {
    let text = std::fs::read_to_string(&input.file).map_err(|e| Failure::Usage(format!("{}: {e}", input.file.display())))?;
    parse(&text, input.fuse).map_err(|e| Failure::Usage(format!("{}:{e}", input.file.display())))
}

fn seed() -> Result<u64, Failure> {
    match std::env::var("POLYRED_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| Failure::Usage(format!("POLYRED_SEED must be an unsigned integer, found `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn check_params(scop: &Scop, b: &Bindings) -> Result<(), Failure> {
    let missing: Vec<&str> = scop.params.iter().filter(|p| !b.contains_key(*p)).map(String::as_str).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--params is missing {}", missing.join(", "))))
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn operand_text(o: &Operand) -> String {
    match o {
        Operand::Inst(id) => format!("%{id}"),
        Operand::Const(v) => v.to_string(),
        Operand::Affine(e) => format!("({e})"),
    }
}

fn instruction_text(scop: &Scop, stmt: usize, id: usize) -> String {
    let st = &scop.statements[stmt];
    match &st.instructions[id].kind {
        InstKind::Load { .. } => format!("%{id} = load {}", st.access_text(id)),
        InstKind::BinOp { operator, lhs, rhs } => format!("%{id} = {operator} {}, {}", operand_text(lhs), operand_text(rhs)),
        InstKind::Store { value, .. } => format!("store {} = {}", st.access_text(id), operand_text(value)),
    }
}

fn cmd_parse(input: &Input, dump_ir: bool) -> Outcome {
    let scop = load(input)?;
    if input.json {
        let theta = scop.original_schedule();
        let stmts: Vec<Value> = scop
            .statements
            .iter()
            .enumerate()
            .map(|(s, st)| {
                json!({
                    "name": st.name,
                    "labels": st.labels,
                    "iterators": st.iterators,
                    "domain": st.domain.to_string(),
                    "schedule": theta.rows(s).iter().map(ToString::to_string).collect::<Vec<_>>(),
                    "instructions": (0..st.instructions.len()).map(|i| instruction_text(&scop, s, i)).collect::<Vec<_>>(),
                })
            })
            .collect();
        let arrays: Vec<Value> = scop
            .arrays
            .iter()
            .map(|a| json!({"name": a.name, "extents": a.extents.iter().map(|e| e.as_ref().map(ToString::to_string)).collect::<Vec<_>>()}))
            .collect();
        print_json(&json!({"name": scop.name, "params": scop.params, "arrays": arrays, "statements": stmts, "fused": scop.fused}));
    } else if dump_ir {
        let theta = scop.original_schedule();
        println!("scop {}({})", scop.name, scop.params.join(", "));
        for (s, st) in scop.statements.iter().enumerate() {
            let rows: Vec<String> = theta.rows(s).iter().map(ToString::to_string).collect();
            println!("{}({}) -> ({})", st.name, st.iterators.join(", "), rows.join(", "));
            println!("  domain {}", st.domain);
            for i in 0..st.instructions.len() {
                println!("  {}", instruction_text(&scop, s, i));
            }
        }
    } else {
        print!("{}", print_scop(&scop));
    }
    Ok(())
}

fn cmd_detect(input: &Input) -> Outcome {
    let scop = load(input)?;
    let reds = detect(&scop).map_err(Failure::refused)?;
    if input.json {
        let v: Vec<Value> = reds
            .iter()
            .map(|r| {
                let st = &scop.statements[r.statement];
                json!({"statement": st.name, "load": st.access_text(r.load), "operator": r.operator.symbol(), "store": st.access_text(r.store)})
            })
            .collect();
        print_json(&Value::Array(v));
    } else {
        for r in &reds {
            println!("{}", describe(&scop, r));
        }
        eprintln!("{} reduction(s)", reds.len());
    }
    Ok(())
}

fn endpoint(scop: &Scop, stmt: usize, access: Option<usize>) -> String {
    let st = &scop.statements[stmt];
    match access {
        Some(a) => format!("{}:{}", st.name, st.access_text(a)),
        None => st.name.clone(),
    }
}

fn dep_json(scop: &Scop, d: &Dependence) -> Value {
    json!({
        "source": endpoint(scop, d.source, d.source_access),
        "target": endpoint(scop, d.target, d.target_access),
        "kind": d.kind,
        "relation": d.relation.to_string(),
    })
}

fn dep_line(scop: &Scop, d: &Dependence) -> String {
    format!("{} {} -> {}: {}", d.kind, endpoint(scop, d.source, d.source_access), endpoint(scop, d.target, d.target_access), d.relation)
}

fn cmd_deps(input: &Input, granularity: Granularity, value_based: bool, params: Option<Bindings>) -> Outcome {
    let scop = load(input)?;
    let deps = if value_based {
        let b = params.ok_or_else(|| Failure::Usage("--value-based needs --params".into()))?;
        check_params(&scop, &b)?;
        analyze_values(&scop, granularity, &b)?
    } else {
        analyze(&scop, granularity)?
    };
    let part = deps.partitioned().expect("analysis partitions");
    if input.json {
        let list = |ds: &[Dependence]| ds.iter().map(|d| dep_json(&scop, d)).collect::<Vec<_>>();
        let closures: Vec<Value> = part
            .closures
            .iter()
            .map(|c| json!({"statement": scop.statements[c.statement].name, "relation": c.relation.to_string(), "exact": c.exact}))
            .collect();
        print_json(&json!({
            "granularity": deps.granularity,
            "basis": deps.basis,
            "params": deps.bindings,
            "dependences": list(&deps.all),
            "rho": list(&part.rho),
            "nu": list(&part.nu),
            "tau": list(&part.tau),
            "closures": closures,
        }));
    } else {
        println!("{} dependences ({} based)", deps.granularity, if value_based { "value" } else { "memory" });
        for (name, ds) in [("rho", &part.rho), ("nu", &part.nu), ("tau", &part.tau)] {
            println!("{name}: {}", ds.len());
            for d in ds.iter() {
                println!("  {}", dep_line(&scop, d));
            }
        }
        for c in &part.closures {
            println!("closure {}: {}{}", scop.statements[c.statement].name, c.relation, if c.exact { "" } else { " (approximate)" });
        }
    }
    Ok(())
}

fn schedule_json(scop: &Scop, schedule: &Schedule) -> Value {
    let rows: Vec<Value> = scop
        .statements
        .iter()
        .enumerate()
        .map(|(s, st)| {
            let rows = schedule.rows(s);
            let matrix = polyred::schedule::transform::loop_matrix(rows, &st.iterators);
            json!({
                "statement": st.name,
                "iterators": st.iterators,
                "rows": rows.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "loop_matrix": matrix.as_ref().map(|m| &m.0),
                "loop_offsets": matrix.as_ref().map(|m| &m.1),
            })
        })
        .collect();
    Value::Array(rows)
}

fn schedule_text(scop: &Scop, schedule: &Schedule, class: &DimClassification) -> String {
    let mut out = String::new();
    for (s, st) in scop.statements.iter().enumerate() {
        let rows: Vec<String> = schedule.rows(s).iter().map(ToString::to_string).collect();
        let dims: Vec<String> = class.statements[s].dims.iter().filter(|d| d.is_loop).map(|d| format!("{} {}", d.row, d.class)).collect();
        writeln!(out, "{}({}) -> ({})  [{}]", st.name, st.iterators.join(", "), rows.join(", "), dims.join(", ")).unwrap();
    }
    out
}

/// Applies `--theta` overrides to the original schedule.
fn given(scop: &Scop, theta: &[String]) -> Result<Option<Schedule>, Failure> {
    if theta.is_empty() {
        return Ok(None);
    }
    let mut sched = scop.original_schedule();
    for t in theta {
        let (name, rows) = t.split_once('=').ok_or_else(|| Failure::Usage(format!("--theta expects STMT=ROWS, found `{t}`")))?;
        let (idx, _) = scop.statement(name.trim()).ok_or_else(|| Failure::Usage(format!("no statement named `{}`", name.trim())))?;
        let rows = parse_rows(rows).map_err(|e| Failure::Usage(format!("--theta {t}: {e}")))?;
        sched = sched.with_rows(idx, rows);
    }
    Ok(Some(sched))
}

fn searched(scop: &Scop, deps: &DependenceSet, args: &ScheduleArgs) -> Result<(Schedule, Option<String>), Failure> {
    let out = search(scop, deps, args.mode, SearchConfig { depth: args.search_depth, budget: args.budget })?;
    Ok((out.schedule, out.diagnostic))
}

fn refuse_violation(e: ScheduleError, json_out: bool) -> Failure {
    if json_out {
        if let ScheduleError::Violation(v) = &e {
            print_json(&json!({"legal": false, "violation": v}));
        }
    }
    Failure::from(e)
}

fn cmd_schedule(input: &Input, args: &ScheduleArgs) -> Outcome {
    let scop = load(input)?;
    let deps = analyze(&scop, Granularity::Hybrid)?;
    let (schedule, moves, score, diagnostic) = match given(&scop, &args.theta)? {
        Some(s) => {
            validate(&scop, &s, &deps, args.mode).map_err(|e| refuse_violation(e, input.json))?;
            (s, None, None, None)
        }
        None => {
            let out = search(&scop, &deps, args.mode, SearchConfig { depth: args.search_depth, budget: args.budget })?;
            (out.schedule, Some(out.moves), Some(out.score), out.diagnostic)
        }
    };
    let class = classify_dims(&scop, &schedule, &deps, args.mode)?;
    if let Some(d) = &diagnostic {
        eprintln!("{d}");
    }
    if input.json {
        print_json(&json!({
            "legal": true,
            "mode": args.mode,
            "schedule": schedule_json(&scop, &schedule),
            "classification": class,
            "moves": moves.map(|m| m.iter().map(|ms| ms.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>()),
            "score": score,
        }));
    } else {
        println!("mode: {}", args.mode);
        print!("{}", schedule_text(&scop, &schedule, &class));
        if let Some(s) = score {
            println!("score: {s}");
        }
    }
    Ok(())
}

fn chosen(scop: &Scop, deps: &DependenceSet, args: &ScheduleArgs, source: Source) -> Result<Schedule, Failure> {
    if let Some(s) = given(scop, &args.theta)? {
        return Ok(s);
    }
    match source {
        Source::Original => Ok(scop.original_schedule()),
        Source::Search => {
            let (s, diag) = searched(scop, deps, args)?;
            if let Some(d) = diag {
                eprintln!("{d}");
            }
            Ok(s)
        }
    }
}

fn plan_for(scop: &Scop, v: &Validated, deps: &DependenceSet, choice: &ParallelChoice, placement: Placement) -> Result<(DimClassification, PrivatizationPlan), Failure> {
    let class = classify_dims(scop, v.schedule(), deps, v.mode())?;
    let reds = detect(scop).map_err(Failure::refused)?;
    let plan = plan_privatization(scop, v.schedule(), &class, &reds, choice, placement).map_err(Failure::refused)?;
    Ok((class, plan))
}

#[allow(clippy::too_many_arguments)]
fn cmd_codegen(input: &Input, args: &ScheduleArgs, source: Source, placement: Placement, parallel: &ParallelChoice, output: Option<&PathBuf>) -> Outcome {
    let scop = load(input)?;
    let deps = analyze(&scop, Granularity::Hybrid)?;
    let schedule = chosen(&scop, &deps, args, source)?;
    let v = validate(&scop, &schedule, &deps, args.mode).map_err(|e| refuse_violation(e, input.json))?;
    let (class, plan) = plan_for(&scop, &v, &deps, parallel, placement)?;
    let code = emit_c(&scop, &schedule, &class, &plan).map_err(Failure::refused)?;
    if let Some(path) = output {
        std::fs::write(path, &code).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    if input.json {
        print_json(&json!({
            "output": output.map(|p| p.display().to_string()),
            "mode": args.mode,
            "schedule": schedule_json(&scop, &schedule),
            "plan": plan,
            "code": if output.is_none() { Some(&code) } else { None },
        }));
    } else if output.is_none() {
        print!("{code}");
    } else {
        eprintln!("wrote {}", output.expect("checked").display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    input: &Input,
    args: &ScheduleArgs,
    source: Option<Source>,
    placement: Placement,
    parallel: &ParallelChoice,
    params: &Bindings,
    contexts: &[usize],
    seeds: u64,
) -> Outcome {
    let scop = load(input)?;
    check_params(&scop, params)?;
    if contexts.contains(&0) {
        return Err(Failure::Usage("--contexts values must be at least 1".into()));
    }
    let base = seed()?;
    let deps = analyze(&scop, Granularity::Hybrid)?;
    let mut candidates: Vec<(String, Schedule, bool)> = Vec::new();
    if let Some(s) = given(&scop, &args.theta)? {
        candidates.push(("given".into(), s, true));
    } else {
        if matches!(source, None | Some(Source::Original)) {
            candidates.push(("original".into(), scop.original_schedule(), source.is_some()));
        }
        if matches!(source, None | Some(Source::Search)) {
            candidates.push(("search".into(), chosen(&scop, &deps, args, Source::Search)?, true));
        }
    }
    let mut configs = Vec::new();
    for (label, sched, required) in candidates {
        match validate(&scop, &sched, &deps, args.mode) {
            Ok(v) => {
                let (_, plan) = plan_for(&scop, &v, &deps, parallel, placement)?;
                configs.push((label, v, plan));
            }
            Err(e) if required => return Err(refuse_violation(e, input.json)),
            Err(e) => eprintln!("skipping {label} schedule: {e}"),
        }
    }
    let seed_list: Vec<u64> = (0..seeds).map(|k| base.wrapping_add(k)).collect();
    let report = differential_check(&scop, &configs, params, contexts, &seed_list, &Memory::seeded(base)).map_err(Failure::refused)?;
    if input.json {
        print_json(&json!({"mode": args.mode, "params": params, "all_equal": report.all_equal(), "entries": report.entries}));
    } else {
        for (label, _, plan) in &configs {
            for &p in contexts {
                let runs: Vec<_> = report.entries.iter().filter(|e| &e.label == label && e.contexts == p).collect();
                let bad: Vec<_> = runs.iter().filter(|e| !e.equal).collect();
                let what = match plan.parallel_dim {
                    Some(k) => format!("parallel dim {k}, {} privatized", plan.privatized.len()),
                    None => "sequential".into(),
                };
                match bad.first() {
                    None => println!("{label} ({what}), p={p}: {} seed(s) equal", runs.len()),
                    Some(e) => println!(
                        "{label} ({what}), p={p}: {} of {} seed(s) differ; seed {}: {}",
                        bad.len(),
                        runs.len(),
                        e.seed,
                        e.first_difference.as_deref().unwrap_or("")
                    ),
                }
            }
        }
    }
    if report.all_equal() {
        Ok(())
    } else {
        Err(Failure::Refused("scheduled execution differs from the original order".into()))
    }
}

fn cmd_report(input: &Input, repeat: usize) -> Outcome {
    let scop = load(input)?;
    let mut rows = Vec::new();
    for g in [Granularity::Statement, Granularity::Hybrid, Granularity::Access] {
        let mut times = Vec::new();
        let mut result = None;
        for _ in 0..repeat.max(1) {
            let t = Instant::now();
            let r = analyze(&scop, g);
            times.push(t.elapsed().as_secs_f64() * 1e3);
            result = Some(r);
        }
        times.sort_by(f64::total_cmp);
        let median = times[times.len() / 2];
        let row = match result.expect("ran at least once") {
            Ok(d) => {
                let p = d.partitioned().expect("analysis partitions");
                json!({"granularity": g, "millis": median, "dependences": d.all.len(), "rho": p.rho.len(), "nu": p.nu.len(), "tau": p.tau.len(), "refused": null})
            }
            Err(e) => json!({"granularity": g, "millis": median, "refused": e.to_string()}),
        };
        rows.push(row);
    }
    if input.json {
        print_json(&json!({"kernel": scop.name, "repeat": repeat.max(1), "granularities": rows}));
    } else {
        println!("{:<12} {:>10} {:>6} {:>5} {:>5} {:>5}", "granularity", "ms", "deps", "rho", "nu", "tau");
        for r in &rows {
            let g = r["granularity"].as_str().unwrap_or("?");
            let ms = r["millis"].as_f64().unwrap_or(0.0);
            match r["refused"].as_str() {
                Some(why) => println!("{g:<12} {ms:>10.3} refused: {why}"),
                None => {
                    let n = |k: &str| r[k].as_u64().unwrap_or(0);
                    println!("{g:<12} {ms:>10.3} {:>6} {:>5} {:>5} {:>5}", n("dependences"), n("rho"), n("nu"), n("tau"))
                }
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Parse { input, dump_ir } => cmd_parse(input, *dump_ir),
        Command::Detect { input } => cmd_detect(input),
        Command::Deps { input, granularity, value_based, params } => cmd_deps(input, *granularity, *value_based, params.clone()),
        Command::Schedule { input, sched } => cmd_schedule(input, sched),
        Command::Codegen { input, sched, schedule, placement, parallel, output } => cmd_codegen(input, sched, *schedule, *placement, parallel, output.as_ref()),
        Command::Verify { input, sched, schedule, placement, parallel, params, contexts, seeds } => {
            cmd_verify(input, sched, *schedule, *placement, parallel, params, contexts, *seeds)
        }
        Command::Report { input, repeat } => cmd_report(input, *repeat),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Refused(m)) => {
            eprintln!("polyred: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("polyred: {m}");
            ExitCode::from(2)
        }
    }
}
