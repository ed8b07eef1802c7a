use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use linmon::checker::check_certificate_dir;
use linmon::connectivity::{check_lambda_connectivity, strong_components_all, value_id, verify_strong_path, StrongComponents};
use linmon::counts::{compare, gaussian_binomial, gl_order, idempotent_count, rank_gap_check};
use linmon::deltagraph::{build_delta, build_spanning_tree, closure_hypothesis, color_closure, to_dot, ClosureSummary};
use linmon::enumeration::enumerate_y;
use linmon::presentation::{
    build_presentation, export_presentation, run_pipeline, ExportMode, RunOptions, TheoremRun,
};
use linmon::squares::is_singular_from_labels;
use linmon::tables::{build_p, build_t_full, ProductTable, DEFAULT_CELL_BUDGET, DEFAULT_MK_SIDE_BUDGET};
use linmon::textfmt::write_trace;
use linmon::{make_field, Error, Field, Mat};

/// Rank-r structure of the full linear monoid M_n(F_q) and certified
/// presentations of its maximal subgroups.
#[derive(Parser)]
#[command(name = "linmon", version)]
struct Cli {
    /// Largest product table to build, in cells.
    #[arg(long, global = true, env = "LINMON_BUDGET", default_value_t = DEFAULT_CELL_BUDGET)]
    budget: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (a directory for verify-theorem) instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct Params {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    q: u32,
    /// Modulus coefficients, constant term first, for prime powers without
    /// a built-in one.
    #[arg(long, value_delimiter = ',')]
    poly: Option<Vec<u32>>,
}

impl Params {
    fn field(&self) -> Result<Field, Error> {
        Ok(make_field(self.q, self.poly.as_deref())?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    TreeOnly,
    CertificateSquares,
    FullEnumeration,
}

#[derive(Subcommand)]
enum Command {
    /// Count (and optionally list) the RRE row labels.
    Enumerate {
        #[command(flatten)]
        p: Params,
        #[arg(long)]
        dump: bool,
    },
    /// Build the Rees table, or every product with --full.
    Rees {
        #[command(flatten)]
        p: Params,
        #[arg(long)]
        full: bool,
        /// Include per-value occurrence counts.
        #[arg(long)]
        stats: bool,
    },
    /// The identity-cell graph and its spanning tree.
    Delta {
        #[command(flatten)]
        p: Params,
        #[arg(long)]
        dot: bool,
    },
    /// Run the square closure from the spanning tree.
    Closure {
        #[command(flatten)]
        p: Params,
        /// Write the closure trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// λ-graph components of every value of T_{m,k}.
    Lambda {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        q: u32,
        #[arg(long, value_delimiter = ',')]
        poly: Option<Vec<u32>>,
    },
    /// Strong components of the values of T_{n,r}.
    Strong {
        #[command(flatten)]
        p: Params,
        /// Restrict to one value, e.g. "2 2 2 : 1 1 0 1".
        #[arg(long)]
        value: Option<String>,
        /// Use the Rees table instead of every product.
        #[arg(long)]
        rees: bool,
        /// Sample paths reported per value.
        #[arg(long, default_value_t = 1)]
        paths: usize,
    },
    /// Export the presentation in the line format.
    Presentation {
        #[command(flatten)]
        p: Params,
        #[arg(long, value_enum, default_value = "tree-only")]
        mode: Mode,
        /// Largest number of candidate squares for full enumeration.
        #[arg(long, default_value_t = 10_000_000)]
        cap: u64,
    },
    /// Closed-form counts and the rank comparison.
    Counts {
        #[command(flatten)]
        p: Params,
    },
    /// Re-check a certificate directory written by verify-theorem.
    Check {
        dir: PathBuf,
    },
    /// Certify that the maximal subgroup at rank r is GL_r(F_q).
    VerifyTheorem {
        #[command(flatten)]
        p: Params,
        /// Allow n <= 3r; stages run and report but nothing is asserted.
        #[arg(long)]
        exploratory: bool,
        /// Seed for the sampled re-check of cited squares.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of cited squares to re-check at random.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

/// Exit status: 0 pass, 1 failed assertion, 2 usage or bad input, 3 budget.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Budget { .. } => 3,
        Error::Param(_) | Error::Field(_) | Error::Mat(_) | Error::Parse { .. } | Error::Io(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

struct Output {
    body: String,
    passed: bool,
}

impl Output {
    fn json(v: Value, passed: bool) -> Self {
        Output {
            body: serde_json::to_string_pretty(&v).expect("json values serialize") + "\n",
            passed,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = run(&cli).and_then(|out| {
        match (&cli.out, &cli.cmd) {
            (_, Command::VerifyTheorem { .. }) | (None, _) => {
                let mut stdout = std::io::stdout().lock();
                match stdout.write_all(out.body.as_bytes()).and_then(|_| stdout.flush()) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                    _ => {}
                }
            }
            (Some(path), _) => fs::write(path, &out.body)?,
        }
        Ok(out.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn params_json(p: &Params) -> Value {
    json!({"n": p.n, "r": p.r, "q": p.q})
}

fn rees_setup(p: &Params, budget: u64) -> Result<(Arc<linmon::enumeration::Enumeration>, ProductTable), Error> {
    let f = p.field()?;
    let en = Arc::new(enumerate_y(p.n, p.r, &f)?);
    let table = build_p(&en, budget)?;
    Ok((en, table))
}

fn run(cli: &Cli) -> Result<Output, Error> {
    match &cli.cmd {
        Command::Enumerate { p, dump } => {
            let f = p.field()?;
            let en = enumerate_y(p.n, p.r, &f)?;
            let gaussian = gaussian_binomial(p.n as u32, p.r as u32, p.q as u64)?;
            let regions: Vec<Value> = en
                .regions()
                .iter()
                .map(|reg| json!({"subset": reg.subset.to_string(), "count": reg.ids.len()}))
                .collect();
            let mut v = json!({
                "schema": 1,
                "params": params_json(p),
                "count": en.len(),
                "gaussian": gaussian.to_string(),
                "regions": regions,
            });
            if *dump {
                let labels: Vec<Value> = (0..en.len())
                    .map(|id| {
                        let y = en.y(id);
                        json!({"id": id, "region": y.region.to_string(), "y": y.mat.to_text()})
                    })
                    .collect();
                v["labels"] = Value::Array(labels);
            }
            Ok(Output::json(v, gaussian == en.len().into()))
        }
        Command::Rees { p, full, stats } => {
            let f = p.field()?;
            let en = Arc::new(enumerate_y(p.n, p.r, &f)?);
            let t = if *full { build_t_full(&en, cli.budget)? } else { build_p(&en, cli.budget)? };
            let mut v = json!({
                "schema": 1,
                "params": params_json(p),
                "table": t.kind(),
                "policy": t.policy(),
                "stats": t.stats(),
            });
            if *stats {
                let values: Vec<Value> = (0..t.value_count() as u16)
                    .map(|vid| {
                        json!({
                            "value": if t.is_zero_marker(vid) { "0".to_string() } else { t.value(vid).to_text() },
                            "occurrences": t.occurrences(vid).len(),
                        })
                    })
                    .collect();
                v["values"] = Value::Array(values);
            }
            Ok(Output::json(v, true))
        }
        Command::Delta { p, dot } => {
            let (en, t) = rees_setup(p, cli.budget)?;
            let delta = build_delta(&t)?;
            let tree = build_spanning_tree(&en, &delta)?;
            if *dot {
                return Ok(Output {
                    body: to_dot(&en, &delta, &tree),
                    passed: true,
                });
            }
            let v = json!({
                "schema": 1,
                "params": params_json(p),
                "x_labels": delta.nx(),
                "y_labels": delta.ny(),
                "edges": delta.edge_count(),
                "tree_edges": tree.len(),
            });
            Ok(Output::json(v, true))
        }
        Command::Closure { p, trace } => {
            let (en, t) = rees_setup(p, cli.budget)?;
            let delta = build_delta(&t)?;
            let tree = build_spanning_tree(&en, &delta)?;
            let state = color_closure(&delta, &tree);
            if let Some(path) = trace {
                fs::write(path, write_trace(&state.trace))?;
            }
            let summary = ClosureSummary::new(&delta, &tree, &state);
            let expected = closure_hypothesis(p.n, p.r);
            let passed = !expected || summary.all_blue;
            let mut v = serde_json::to_value(&summary)?;
            v["schema"] = json!(1);
            v["params"] = params_json(p);
            v["all_blue_expected"] = json!(expected);
            Ok(Output::json(v, passed))
        }
        Command::Lambda { m, k, q, poly } => {
            let f = make_field(*q, poly.as_deref())?;
            let rep = check_lambda_connectivity(*m, *k, &f, DEFAULT_MK_SIDE_BUDGET)?;
            let passed = rep.passed;
            let mut v = serde_json::to_value(&rep)?;
            v["schema"] = json!(1);
            Ok(Output::json(v, passed))
        }
        Command::Strong { p, value, rees, paths } => cmd_strong(cli, p, value.as_deref(), *rees, *paths),
        Command::Presentation { p, mode, cap } => {
            let (en, t) = rees_setup(p, cli.budget)?;
            let delta = build_delta(&t)?;
            let tree = build_spanning_tree(&en, &delta)?;
            let pres = build_presentation(&t, &tree)?;
            let file = match mode {
                Mode::TreeOnly => export_presentation(&pres, &t, None, ExportMode::TreeOnly)?,
                Mode::FullEnumeration => export_presentation(&pres, &t, None, ExportMode::FullEnumeration { cap: *cap })?,
                Mode::CertificateSquares => {
                    let opts = RunOptions {
                        cell_budget: cli.budget,
                        exploratory: false,
                    };
                    let run = run_pipeline(p.n, p.r, en.field(), opts)?;
                    let Some(chain) = &run.chain else {
                        let stage = run.failed_stage().map(|s| s.name).unwrap_or("pipeline");
                        return Err(Error::Verification(format!("{stage} failed; no certificate to export")));
                    };
                    export_presentation(&pres, &t, Some(chain), ExportMode::CertificateSquares)?
                }
            };
            Ok(Output {
                body: file.to_text(),
                passed: true,
            })
        }
        Command::Counts { p } => {
            if linmon::gf::prime_power(p.q).is_none() {
                return Err(linmon::gf::FieldError::NotPrimePower(p.q).into());
            }
            let (n, r, q) = (p.n as u32, p.r as u32, p.q as u64);
            let mut v = json!({
                "schema": 1,
                "params": params_json(p),
                "gaussian": gaussian_binomial(n, r, q)?.to_string(),
                "gl_order": gl_order(r, q)?.to_string(),
                "idempotents": idempotent_count(n, r, q)?.to_string(),
                "generators_vs_group": compare(n, r, q)?,
            });
            let mut passed = true;
            if (n, r, q) == (7, 5, 2) {
                let rep = rank_gap_check()?;
                passed = rep.passed;
                v["rank_comparison"] = serde_json::to_value(&rep)?;
            }
            Ok(Output::json(v, passed))
        }
        Command::Check { dir } => {
            let check = check_certificate_dir(dir)?;
            let passed = check.passed;
            let mut v = serde_json::to_value(&check)?;
            v["schema"] = json!(1);
            Ok(Output::json(v, passed))
        }
        Command::VerifyTheorem {
            p,
            exploratory,
            seed,
            samples,
        } => cmd_verify(cli, p, *exploratory, *seed, *samples),
    }
}

fn component_json(t: &ProductTable, sc: &StrongComponents, paths: usize) -> Value {
    let occ = t.occurrences(sc.vid);
    let mut sample = Vec::new();
    let mut verified = true;
    if sc.count == 1 && occ.len() > 1 {
        let stride = (occ.len() - 1) / paths.max(1);
        let targets: Vec<_> = (0..paths.min(occ.len() - 1))
            .map(|i| occ.cells[(1 + i * stride.max(1)).min(occ.len() - 1)])
            .collect();
        for path in sc.paths_from(t, occ.cells[0], &targets).into_iter().flatten() {
            verified &= verify_strong_path(t, &path);
            sample.push(serde_json::to_value(&path).expect("paths serialize"));
        }
    }
    json!({
        "value": t.value(sc.vid).to_text(),
        "rank": t.value(sc.vid).rank(),
        "occurrences": occ.len(),
        "components": sc.count,
        "paths": sample,
        "paths_verified": verified,
    })
}

fn cmd_strong(cli: &Cli, p: &Params, value: Option<&str>, rees: bool, paths: usize) -> Result<Output, Error> {
    let f = p.field()?;
    let en = Arc::new(enumerate_y(p.n, p.r, &f)?);
    let t = if rees { build_p(&en, cli.budget)? } else { build_t_full(&en, cli.budget)? };
    let comps = strong_components_all(&t)?;
    let selected: Vec<&StrongComponents> = match value {
        Some(text) => {
            let m = Mat::parse_text(&f, text)?;
            let vid = value_id(&t, &m)?;
            comps[vid as usize].iter().collect()
        }
        None => comps.iter().flatten().collect(),
    };
    let values: Vec<Value> = selected.iter().map(|sc| component_json(&t, sc, paths)).collect();
    let passed = selected.iter().all(|sc| sc.count == 1)
        && values.iter().all(|v| v["paths_verified"] == json!(true));
    let d = p.r as u32;
    let absent = (p.q as u64).pow(d * d).saturating_sub(comps.iter().flatten().count() as u64);
    let v = json!({
        "schema": 1,
        "params": params_json(p),
        "table": t.kind(),
        "values": values,
        "absent_values": if value.is_some() { Value::Null } else { json!(absent) },
        "passed": passed,
    });
    Ok(Output::json(v, passed))
}

fn stage_lines(run: &TheoremRun) {
    for s in &run.stages {
        eprintln!("{:<14} {}  {}", s.name, if s.passed { "PASS" } else { "FAIL" }, s.detail);
    }
}

fn cmd_verify(cli: &Cli, p: &Params, exploratory: bool, seed: u64, samples: usize) -> Result<Output, Error> {
    let f = p.field()?;
    let opts = RunOptions {
        cell_budget: cli.budget,
        exploratory,
    };
    let run = run_pipeline(p.n, p.r, &f, opts)?;
    stage_lines(&run);
    let mut v = json!({
        "schema": 1,
        "params": params_json(p),
        "exploratory": exploratory,
        "stages": run.stages,
        "strong": run.strong_report.as_ref().map(|t| json!({
            "values": t.values.len(),
            "absent": t.absent,
            "passed": t.passed,
        })),
    });
    let Some(chain) = &run.chain else {
        v["certified"] = json!(false);
        return Ok(Output::json(v, exploratory));
    };

    let en = enumerate_y(p.n, p.r, &f)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = chain.cited_square_count();
    let mut sample_failures = 0usize;
    for _ in 0..samples.min(total) {
        let sq = chain.cited_square(rng.gen_range(0..total)).expect("index in range");
        if !is_singular_from_labels(&en, sq)? {
            sample_failures += 1;
        }
    }
    v["sampled_squares"] = json!({"seed": seed, "checked": samples.min(total), "failures": sample_failures});

    let tmp;
    let dir: &Path = match &cli.out {
        Some(d) => d,
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path()
        }
    };
    chain.write(dir)?;
    let check = check_certificate_dir(dir)?;
    eprintln!(
        "{:<14} {}  {} cells, {} classes",
        "checker",
        if check.passed { "PASS" } else { "FAIL" },
        check.covered_cells,
        check.classes
    );
    let certified = run.certified && check.passed && sample_failures == 0;
    let order = gl_order(p.r as u32, p.q as u64)?;
    v["checker"] = serde_json::to_value(&check)?;
    v["classes"] = json!(chain.class_values.len());
    v["group_order"] = json!(order.to_string());
    v["certified"] = json!(certified);
    if certified {
        eprintln!("PASS: the maximal subgroup is GL_{}(F_{}), of order {order}", p.r, p.q);
    } else {
        eprintln!("FAIL");
    }
    Ok(Output::json(v, certified))
}
