use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rifs_lab::bowen::{bowen_parameter, dimension_report, DEFAULT_TRUNCATION};
use rifs_lab::cover::{box_exponents, emit_points, enumerate_cylinders, osc_check, run_boundaries, DEFAULT_BUDGET};
use rifs_lab::frame::{Frame, FrameDocument};
use rifs_lab::numerics::HybridNumber;
use rifs_lab::pressure::{
    dim_upper_estimate, special_times, subsequence_bound_check, write_trace, BranchProfile,
};
use rifs_lab::rifs::{check_bowen_hypothesis, validate_spec, Family, ProbVector, RifsSpec, SpecDocument};
use rifs_lab::sampler::{find_n_omega, lemma_sequences, LemmaStatus, SamplerConfig, SceneryPath, SymbolSampler};
use rifs_lab::SCHEMA;

/// Exponents probed by the subsequence bound check.
const BOUND_EXPONENTS: [f64; 3] = [0.0, 0.5, 1.0];

#[derive(Parser)]
#[command(name = "rifs-lab", version, about = "Bowen parameters and counterexample experiments for random IFSs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base seed; seeds run as base, base+1, ...
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of seeds.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// Directory for CSV and summary files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root-finding tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Maximum number of enumerated cylinders.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Scenery length.
    #[arg(long, global = true, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    /// Frame levels to generate.
    #[arg(long, global = true, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    levels: u64,
    /// Ambient dimension.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    d: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or validate frames.
    #[command(subcommand)]
    Frame(FrameCmd),
    /// Bowen parameter, Mauldin dimension and hypothesis check for a spec file.
    Dimensions {
        spec: PathBuf,
        /// Truncation level for the divergence verdicts.
        #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
        truncation: u64,
    },
    /// Per-seed special times, bound checks and dimension estimates for the frame family.
    Counterexample {
        /// Frame-family spec; defaults to the minimal frame with inverse-square weights.
        spec: Option<PathBuf>,
        /// Number of lemma pairs (special times) per seed.
        #[arg(long, default_value_t = 3)]
        count: usize,
    },
    /// Cylinder cubes along a scenery.
    #[command(subcommand)]
    Cover(CoverCmd),
    /// Sample sceneries and their lemma sequences.
    Sample {
        /// Spec whose probabilities are sampled; defaults to inverse-square.
        spec: Option<PathBuf>,
        /// Number of lemma pairs per seed.
        #[arg(long, default_value_t = 3)]
        count: usize,
    },
}

#[derive(Subcommand)]
enum FrameCmd {
    /// Print a generated frame.
    Gen {
        /// Take every frame inequality with equality (the default rule).
        #[arg(long, conflicts_with = "slack")]
        minimal: bool,
        /// Per-level multipliers for a slack frame; the last one repeats.
        #[arg(long, value_delimiter = ',')]
        slack: Option<Vec<u64>>,
    },
    /// Check a frame file and report violated clauses.
    Validate { file: PathBuf },
}

#[derive(Args)]
struct CoverSource {
    /// Fixed scenery prefix, e.g. 1,2,1; sampled from --seed otherwise.
    #[arg(long, value_delimiter = ',')]
    omega: Option<Vec<u64>>,
    /// Frame file; defaults to the minimal frame.
    #[arg(long)]
    frame: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CoverCmd {
    /// List the level-m cylinder cubes as JSON.
    Enum {
        #[command(flatten)]
        source: CoverSource,
        #[arg(long)]
        depth: u64,
    },
    /// Covering exponents d·B_m/m at the given depths or at every run boundary.
    Exponents {
        #[command(flatten)]
        source: CoverSource,
        /// Depths (decimal or log2:x); defaults to run boundaries.
        #[arg(long, value_delimiter = ',')]
        depths: Option<Vec<String>>,
    },
    /// Cube corners and sides as CSV.
    Points {
        #[command(flatten)]
        source: CoverSource,
        #[arg(long)]
        depth: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            let doc = json!({ "schema": SCHEMA, "error": format!("{err:#}") });
            eprintln!("{}", serde_json::to_string_pretty(&doc).unwrap());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let g = &cli.global;
    if !(g.tol > 0.0 && g.tol.is_finite()) {
        bail!("--tol must be positive, got {}", g.tol);
    }
    match &cli.command {
        Command::Frame(FrameCmd::Gen { slack, .. }) => cmd_frame_gen(g, slack.as_deref()),
        Command::Frame(FrameCmd::Validate { file }) => cmd_frame_validate(file),
        Command::Dimensions { spec, truncation } => cmd_dimensions(g, spec, *truncation),
        Command::Counterexample { spec, count } => cmd_counterexample(g, spec.as_deref(), *count),
        Command::Cover(cmd) => cmd_cover(g, cmd),
        Command::Sample { spec, count } => cmd_sample(g, spec.as_deref(), *count),
    }
}

fn print_json(value: &Value) -> Result<()> {
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes through a temporary sibling so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn out_dir(g: &Global) -> Result<Option<&Path>> {
    match &g.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            Ok(Some(dir))
        }
        None => Ok(None),
    }
}

fn seeds(g: &Global) -> impl Iterator<Item = u64> {
    let base = g.seed;
    (0..g.seeds).map(move |i| base.wrapping_add(i))
}

fn cmd_frame_gen(g: &Global, slack: Option<&[u64]>) -> Result<ExitCode> {
    let levels = g.levels as usize;
    let frame = match slack {
        Some(m) => Frame::with_slack(levels, m.to_vec())?,
        None => Frame::minimal(levels),
    };
    let report = frame.validate();
    print_json(&json!({
        "schema": SCHEMA,
        "rule": frame.to_document(),
        "frame": frame.expanded_document(),
        "validation": report,
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn frame_document(value: Value) -> Result<FrameDocument> {
    // accept both a bare frame and the output of `frame gen`
    let inner = match value {
        Value::Object(mut map) if map.contains_key("frame") => map.remove("frame").unwrap(),
        other => other,
    };
    serde_json::from_value(inner).context("not a frame document")
}

fn cmd_frame_validate(file: &Path) -> Result<ExitCode> {
    let doc = frame_document(read_json(file)?)?;
    let report = doc.validate()?;
    let valid = report.is_valid();
    print_json(&json!({ "schema": SCHEMA, "valid": valid, "report": report }))?;
    Ok(if valid { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn load_spec(path: &Path) -> Result<RifsSpec> {
    let doc: SpecDocument =
        serde_json::from_value(read_json(path)?).with_context(|| format!("{} is not a spec document", path.display()))?;
    validate_spec(&doc).with_context(|| format!("invalid spec {}", path.display()))
}

fn cmd_dimensions(g: &Global, spec: &Path, truncation: u64) -> Result<ExitCode> {
    if truncation == 0 {
        bail!("--truncation must be positive");
    }
    let spec = load_spec(spec)?;
    let report = dimension_report(&spec, g.tol, truncation)?;
    let hypothesis = check_bowen_hypothesis(&spec)?;
    let mut value = serde_json::to_value(&report)?;
    value["hypothesis"] = serde_json::to_value(&hypothesis)?;
    print_json(&value)?;
    Ok(ExitCode::SUCCESS)
}

fn counterexample_spec(g: &Global, spec: Option<&Path>) -> Result<RifsSpec> {
    let spec = match spec {
        Some(path) => load_spec(path)?,
        None => RifsSpec::counterexample(Arc::new(Frame::minimal(g.levels as usize)), g.d)?,
    };
    if !spec.is_frame_family() || spec.probabilities.is_finite() {
        bail!("counterexample needs a frame family with inverse-square probabilities");
    }
    Ok(spec)
}

fn run_seed(
    spec: &RifsSpec,
    sampler: &mut SymbolSampler,
    seed: u64,
    horizon: usize,
    count: usize,
    out: Option<&Path>,
) -> Result<Value> {
    let Family::Frame { frame, d } = &spec.family else { unreachable!("checked frame family") };
    let path = sampler.sample_path(horizon, seed)?;
    let seqs = lemma_sequences(&path, count);
    let reach = seqs.pairs.iter().map(|p| p.b).max().unwrap_or(0);
    let profile = BranchProfile::from_symbols(&path.symbols[..reach], frame, *d)?;
    let st = special_times(&profile, &seqs);
    let checks: Vec<_> = st
        .times
        .iter()
        .flat_map(|time| BOUND_EXPONENTS.iter().map(|&t| subsequence_bound_check(&profile, time, t)))
        .collect();
    let estimate = dim_upper_estimate(&profile, &st.times)?;
    if let Some(dir) = out {
        let mut buf = Vec::new();
        write_trace(&mut buf, &st.times, &checks)?;
        write_atomic(&dir.join(format!("seed_{seed}.csv")), &buf)?;
    }
    Ok(json!({
        "seed": seed,
        "n_omega": seqs.n_omega,
        "lemma_status": seqs.status,
        "special_times": st.times.len(),
        "truncated": st.truncated || seqs.status == LemmaStatus::Truncated,
        "bounds_hold": checks.iter().all(|c| c.holds),
        "bounds_hold_scaled": checks.iter().all(|c| c.holds_scaled),
        "ratio_checks_hold": checks.iter().all(|c| c.ratio_check != Some(false)),
        "estimate": estimate.estimate,
        "late_estimate": estimate.late_estimate,
    }))
}

fn cmd_counterexample(g: &Global, spec: Option<&Path>, count: usize) -> Result<ExitCode> {
    if count == 0 {
        bail!("--count must be positive");
    }
    let spec = counterexample_spec(g, spec)?;
    let bowen = bowen_parameter(&spec, g.tol)?;
    let out = out_dir(g)?;
    let mut sampler = SymbolSampler::new(&spec.probabilities, SamplerConfig::from_env()?)?;
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for seed in seeds(g) {
        match run_seed(&spec, &mut sampler, seed, g.horizon as usize, count, out) {
            Ok(row) => rows.push(row),
            Err(err) => failed.push(json!({ "seed": seed, "error": format!("{err:#}") })),
        }
    }
    let estimates: Vec<f64> = rows.iter().filter_map(|r| r["estimate"].as_f64()).collect();
    let late: Vec<f64> = rows.iter().filter_map(|r| r["late_estimate"].as_f64()).collect();
    let summary = json!({
        "schema": SCHEMA,
        "d": spec.dimension(),
        "bowen": bowen,
        "horizon": g.horizon,
        "count": count,
        "label": "subsequence upper-bound estimate",
        "seeds": rows,
        "failed_seeds": failed,
        "truncated_seeds": rows.iter().filter(|r| r["truncated"] == true).count(),
        "degenerate_seeds": rows.iter().filter(|r| r["lemma_status"] == "degenerate").count(),
        "estimates": stats(&estimates),
        "late_estimates": stats(&late),
    });
    if let Some(dir) = out {
        write_atomic(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    }
    print_json(&summary)?;
    Ok(if rows.is_empty() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn stats(values: &[f64]) -> Value {
    if values.is_empty() {
        return json!({ "count": 0 });
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    json!({ "count": values.len(), "min": min, "max": max, "mean": mean })
}

fn cover_profile(g: &Global, source: &CoverSource) -> Result<(SceneryPath, BranchProfile)> {
    let frame = match &source.frame {
        Some(path) => Frame::from_document(&frame_document(read_json(path)?)?)?,
        None => Frame::minimal(g.levels as usize),
    };
    let path = match &source.omega {
        Some(symbols) => {
            if symbols.is_empty() || symbols.contains(&0) {
                bail!("--omega symbols must be positive");
            }
            SceneryPath::from_symbols(symbols.clone())
        }
        None => SymbolSampler::new(&ProbVector::InverseSquare, SamplerConfig::from_env()?)?
            .sample_path(g.horizon as usize, g.seed)?,
    };
    let profile = BranchProfile::from_symbols(&path.symbols, &frame, g.d)?;
    Ok((path, profile))
}

fn cmd_cover(g: &Global, cmd: &CoverCmd) -> Result<ExitCode> {
    match cmd {
        CoverCmd::Enum { source, depth } => {
            let (path, profile) = cover_profile(g, source)?;
            let cubes = enumerate_cylinders(&profile, *depth, g.budget)?;
            let osc = osc_check(&cubes)?;
            let listed: Vec<Value> = cubes
                .iter()
                .map(|c| json!({ "level": c.level, "corner": c.corner.iter().map(|x| x.to_string()).collect::<Vec<_>>() }))
                .collect();
            print_json(&json!({
                "schema": SCHEMA,
                "omega": path.symbols,
                "d": g.d,
                "depth": depth,
                "branch_steps": profile.b_at_u64(*depth)?,
                "count": cubes.len(),
                "osc": osc,
                "cubes": listed,
            }))?;
            Ok(if osc { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        CoverCmd::Points { source, depth } => {
            let (_, profile) = cover_profile(g, source)?;
            let cubes = enumerate_cylinders(&profile, *depth, g.budget)?;
            match out_dir(g)? {
                Some(dir) => {
                    let mut buf = Vec::new();
                    let rows = emit_points(&mut buf, &cubes)?;
                    let file = dir.join("points.csv");
                    write_atomic(&file, &buf)?;
                    print_json(&json!({ "schema": SCHEMA, "rows": rows, "file": file }))?;
                }
                None => {
                    emit_points(io::stdout().lock(), &cubes)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        CoverCmd::Exponents { source, depths } => {
            let (_, profile) = cover_profile(g, source)?;
            let mut buf = Vec::new();
            match depths {
                Some(list) => {
                    let parsed = list
                        .iter()
                        .map(|s| s.parse::<HybridNumber>().map_err(|e| anyhow!("depth {s:?}: {e}")))
                        .collect::<Result<Vec<_>>>()?;
                    writeln!(buf, "m,m_form,exponent")?;
                    for (m, e) in box_exponents(&profile, &parsed)? {
                        writeln!(buf, "{m},{},{e}", m.form().as_str())?;
                    }
                }
                None => {
                    // corner_end rows must dip below the previous run end
                    writeln!(buf, "run,kind,m,m_form,exponent,below_previous_run_end")?;
                    let mut previous_end: Option<f64> = None;
                    for (run, corner_end, run_end) in run_boundaries(&profile) {
                        let e = box_exponents(&profile, &[corner_end.clone(), run_end.clone()])?;
                        let below = previous_end.map_or(String::new(), |p| (e[0].1 < p).to_string());
                        writeln!(buf, "{run},corner_end,{corner_end},{},{},{below}", corner_end.form().as_str(), e[0].1)?;
                        writeln!(buf, "{run},run_end,{run_end},{},{},", run_end.form().as_str(), e[1].1)?;
                        previous_end = Some(e[1].1);
                    }
                }
            }
            match out_dir(g)? {
                Some(dir) => {
                    let file = dir.join("exponents.csv");
                    write_atomic(&file, &buf)?;
                    print_json(&json!({ "schema": SCHEMA, "file": file }))?;
                }
                None => io::stdout().lock().write_all(&buf)?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_sample(g: &Global, spec: Option<&Path>, count: usize) -> Result<ExitCode> {
    if count == 0 {
        bail!("--count must be positive");
    }
    let probs = match spec {
        Some(path) => load_spec(path)?.probabilities,
        None => ProbVector::InverseSquare,
    };
    let out = out_dir(g)?;
    let mut sampler = SymbolSampler::new(&probs, SamplerConfig::from_env()?)?;
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for seed in seeds(g) {
        let path = match sampler.sample_path(g.horizon as usize, seed) {
            Ok(p) => p,
            Err(err) => {
                failed.push(json!({ "seed": seed, "error": err.to_string() }));
                continue;
            }
        };
        let mut buf = Vec::new();
        path.write_csv(&mut buf)?;
        match out {
            Some(dir) => write_atomic(&dir.join(format!("scenery_{seed}.csv")), &buf)?,
            None => io::stdout().lock().write_all(&buf)?,
        }
        let total: u128 = path.symbols.iter().map(|&s| u128::from(s)).sum();
        rows.push(json!({
            "seed": seed,
            "n_omega": find_n_omega(&path),
            "lemma": lemma_sequences(&path, count),
            "max_symbol": path.symbols.iter().max(),
            "final_prefix_mean": total as f64 / path.horizon() as f64,
        }));
    }
    let summary = json!({ "schema": SCHEMA, "horizon": g.horizon, "seeds": rows, "failed_seeds": failed });
    match out {
        Some(dir) => {
            write_atomic(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
            print_json(&summary)?;
        }
        // stdout already carries the CSV; keep it parseable
        None => eprintln!("{}", serde_json::to_string_pretty(&summary)?),
    }
    Ok(if rows.is_empty() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}
