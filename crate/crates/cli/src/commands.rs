use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use overlap_witness::contextuality::{self, Branch};
use overlap_witness::graphs::{self, InequalitySpec, OverlapSet};
use overlap_witness::mesh::{self, AngleNoise, CircuitFamily, MeshConfig, SweepPoint};
use overlap_witness::optimize::{self, MaximizeConfig, SdpConfig, ThresholdConfig};
use overlap_witness::state::{CMatrix, DensityMatrix, PureState};
use overlap_witness::Seed;

use crate::output::{num, opt, Outputs};
use crate::{Cli, Command, Format, GlobalArgs};

/// Radians, or degrees with a `deg` suffix.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (body, deg) = match t.strip_suffix("deg") {
        Some(b) => (b.trim(), true),
        None => (t, false),
    };
    let v: f64 = body
        .parse()
        .map_err(|_| format!("`{s}` is not an angle (radians, or degrees with a `deg` suffix)"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(if deg { v.to_radians() } else { v })
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// JSON file with `overlaps`, `matrix`, `states` or `density_matrices`.
    #[arg(long, required_unless_present = "set", conflicts_with = "set")]
    pub input: Option<PathBuf>,
    /// Built-in state set instead of a file (see `states`).
    #[arg(long)]
    pub set: Option<String>,
    /// Inequality name (`h4`, `hn:7`, `h_mzi`) or a JSON file.
    #[arg(long, default_value = "h4")]
    pub inequality: String,
    /// Largest dimension whose threshold is used for classification.
    #[arg(long, default_value_t = 10)]
    pub d_max: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TableArgs {
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    #[arg(long, default_value_t = 10)]
    pub d_max: usize,
    /// Rows above this `n` use only the SDP bound.
    #[arg(long, default_value_t = 10)]
    pub pure_n_max: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InterrogationArgs {
    /// Preparation angle of the robustness analysis.
    #[arg(long, value_parser = parse_angle, default_value = "150deg", conflicts_with = "r")]
    pub theta: f64,
    /// Reflectivity; sets `theta` through `r = cos^2 theta`.
    #[arg(long)]
    pub r: Option<f64>,
    /// Depolarization strengths (comma separated); defaults to an even grid.
    #[arg(long, value_delimiter = ',')]
    pub nu: Option<Vec<f64>>,
    #[arg(long, default_value_t = 101)]
    pub nu_steps: usize,
    #[arg(long, default_value_t = 101)]
    pub r_steps: usize,
    /// Reflectivity mismatch of the noisy efficiency band.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub n1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub n2: f64,
    /// Report the curves even when `theta` offers no contextual advantage.
    #[arg(long)]
    pub allow_no_gap: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long, default_value = "h6")]
    pub inequality: String,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct StatesArgs {
    /// `pentagon`, `h4-qutrit`, `h5-ququart` or `h6-5mode`.
    #[arg(long)]
    pub set: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write the outputs here instead of the recorded directory.
    #[arg(long)]
    pub into: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshCommand {
    /// Photon-count measurement of every overlap of a built-in set.
    Simulate(SimulateArgs),
    /// Unitary realized by a mesh configuration.
    Compose(ComposeArgs),
    /// Mesh configuration realizing a unitary.
    Decompose(DecomposeArgs),
    /// Witness spread under angle-setting errors.
    Dispersion(DispersionArgs),
    /// Fit the thermo-optic model to heater sweeps.
    Calibrate(CalibrateArgs),
    /// Fidelity of meshes set with random phase errors.
    Fidelity(FidelityArgs),
}

impl MeshCommand {
    pub fn name(&self) -> &'static str {
        match self {
            MeshCommand::Simulate(_) => "simulate",
            MeshCommand::Compose(_) => "compose",
            MeshCommand::Decompose(_) => "decompose",
            MeshCommand::Dispersion(_) => "dispersion",
            MeshCommand::Calibrate(_) => "calibrate",
            MeshCommand::Fidelity(_) => "fidelity",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value = "pentagon")]
    pub set: String,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta_deg: f64,
    #[arg(long, default_value_t = 1.0)]
    pub efficiency: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dark_probability: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ComposeArgs {
    /// MeshConfig JSON.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DecomposeArgs {
    /// Unitary JSON (`modes`, row-major `entries`).
    #[arg(long, required_unless_present = "haar", conflicts_with = "haar")]
    pub unitary: Option<PathBuf>,
    /// Decompose a Haar-random unitary of this size instead.
    #[arg(long)]
    pub haar: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DispersionArgs {
    #[arg(long, default_value = "h5-ququart")]
    pub set: String,
    #[arg(long, default_value_t = 0.005)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta_deg: f64,
    /// Photons per overlap of the reference count experiment.
    #[arg(long, default_value_t = 100_000)]
    pub photons: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    /// Sweep CSV (`heater,mzi,current,cross_power`).
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub sweeps: Option<PathBuf>,
    /// Generate sweeps from a random model of a mesh with this many modes.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Mode count of the mesh the sweeps belong to.
    #[arg(long, default_value_t = 6)]
    pub modes: usize,
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    #[arg(long, default_value_t = 0.035)]
    pub max_current: f64,
    /// Multiplicative Gaussian error on synthetic power readings.
    #[arg(long, default_value_t = 0.0)]
    pub power_noise: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FidelityArgs {
    #[arg(long, default_value_t = 6)]
    pub modes: usize,
    #[arg(long, default_value_t = mesh::DEFAULT_PHASE_SIGMA)]
    pub sigma: f64,
}

pub fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    if let Command::Replay(r) = &cli.command {
        return replay(r);
    }
    if let Some(n) = cli.global.threads {
        if n == 0 {
            bail!(overlap_witness::Error::InvalidParameter {
                name: "threads",
                reason: "need at least one thread".into()
            });
        }
        // Fails only if a pool already exists, which then stays in use.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let g = &cli.global;
    let mut out = Outputs::new(&g.out_dir)?;
    match &cli.command {
        Command::Evaluate(a) => evaluate(g, a, &mut out)?,
        Command::Table(a) => table(g, a, &mut out)?,
        Command::Interrogation(a) => interrogation(g, a, &mut out)?,
        Command::Sample(a) => sample(g, a, &mut out)?,
        Command::States(a) => {
            let (_, _, states) = reference_set(&a.set)?;
            out.json(&format!("{}.json", a.set), &serde_json::json!({ "states": states }))?;
        }
        Command::Mesh(m) => match m {
            MeshCommand::Simulate(a) => mesh_simulate(g, a, &mut out)?,
            MeshCommand::Compose(a) => mesh_compose(g, a, &mut out)?,
            MeshCommand::Decompose(a) => mesh_decompose(g, a, &mut out)?,
            MeshCommand::Dispersion(a) => mesh_dispersion(g, a, &mut out)?,
            MeshCommand::Calibrate(a) => mesh_calibrate(g, a, &mut out)?,
            MeshCommand::Fidelity(a) => mesh_fidelity(g, a, &mut out)?,
        },
        Command::Replay(_) => unreachable!(),
    }
    out.finish(&argv, g, &cli.command)
}

fn replay(r: &ReplayArgs) -> Result<()> {
    let text = fs::read_to_string(&r.manifest).with_context(|| format!("reading {}", r.manifest.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", r.manifest.display()))?;
    let argv: Vec<String> = serde_json::from_value(
        v.get("argv")
            .cloned()
            .ok_or_else(|| anyhow!("manifest has no `argv`"))?,
    )
    .context("manifest `argv` must be a list of strings")?;
    let mut args: Vec<String> = Vec::with_capacity(argv.len() + 3);
    args.push("overlap-witness".into());
    let mut skip = false;
    for a in &argv {
        if skip {
            skip = false;
            continue;
        }
        if r.into.is_some() && a == "--out-dir" {
            skip = true;
            continue;
        }
        if r.into.is_some() && a.starts_with("--out-dir=") {
            continue;
        }
        args.push(a.clone());
    }
    if let Some(dir) = &r.into {
        args.push("--out-dir".into());
        args.push(dir.display().to_string());
    }
    let cli = Cli::try_parse_from(&args).context("the recorded arguments no longer parse")?;
    if matches!(cli.command, Command::Replay(_)) {
        bail!("a manifest cannot replay another replay");
    }
    run(cli, args[1..].to_vec())
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))
}

fn inequality(name: &str) -> Result<InequalitySpec> {
    let p = Path::new(name);
    if p.is_file() {
        let v = read_json(p)?;
        return serde_json::from_value(v)
            .with_context(|| format!("{name} does not match schemas/inequality_spec.schema.json"));
    }
    Ok(graphs::by_name(name)?)
}

/// Built-in state sets: the inequality they maximize, the circuit family
/// that prepares them, and the states.
fn reference_set(name: &str) -> Result<(InequalitySpec, CircuitFamily, Vec<PureState>)> {
    Ok(match name {
        "pentagon" => (graphs::make_h_mzi(), CircuitFamily::Qubit, mesh::pentagon_states()),
        "h4-qutrit" => (graphs::make_hn(4)?, CircuitFamily::Qutrit, mesh::h4_qutrit_states()),
        "h5-ququart" => (graphs::make_hn(5)?, CircuitFamily::Ququart, mesh::hn_simplex_states(5)?),
        "h6-5mode" => (
            graphs::make_hn(6)?,
            CircuitFamily::FiveMode,
            mesh::hn_simplex_states(6)?,
        ),
        other => bail!(overlap_witness::Error::InvalidParameter {
            name: "set",
            reason: format!("unknown set `{other}` (pentagon, h4-qutrit, h5-ququart, h6-5mode)"),
        }),
    })
}

fn overlaps_from_input(v: &Value, path: &Path) -> Result<OverlapSet> {
    let ctx = || format!("{} does not match schemas/evaluate_input.schema.json", path.display());
    if v.get("overlaps").is_some() {
        return serde_json::from_value(v.clone()).with_context(ctx);
    }
    if let Some(m) = v.get("matrix") {
        let rows: Vec<Vec<f64>> = serde_json::from_value(m.clone()).with_context(ctx)?;
        return Ok(OverlapSet::from_matrix(&rows)?);
    }
    if let Some(s) = v.get("states") {
        let states: Vec<PureState> = serde_json::from_value(s.clone()).with_context(ctx)?;
        return Ok(OverlapSet::from_pure(&states)?);
    }
    if let Some(s) = v.get("density_matrices") {
        let states: Vec<DensityMatrix> = serde_json::from_value(s.clone()).with_context(ctx)?;
        return Ok(OverlapSet::from_states(&states)?);
    }
    Err(anyhow!(
        "expected an object with one of `overlaps`, `matrix`, `states`, `density_matrices`"
    ))
    .with_context(ctx)
}

#[derive(Serialize)]
struct EvaluateReport {
    inequality: String,
    n: usize,
    overlaps: OverlapSet,
    verdict: graphs::WitnessVerdict,
}

fn evaluate(g: &GlobalArgs, a: &EvaluateArgs, out: &mut Outputs) -> Result<()> {
    let spec = inequality(&a.inequality)?;
    let overlaps = match (&a.input, &a.set) {
        (Some(path), _) => overlaps_from_input(&read_json(path)?, path)?,
        (None, Some(set)) => OverlapSet::from_pure(&reference_set(set)?.2)?,
        (None, None) => unreachable!("clap requires one of the inputs"),
    };
    let value = graphs::evaluate(&spec, &overlaps)?;
    let thresholds = optimize::default_thresholds(&spec, a.d_max, Seed(g.seed))?;
    let slack = g.tol.unwrap_or(0.0);
    let verdict = graphs::classify(&spec, value, &thresholds, slack)?;
    println!(
        "{} = {:.9} (classical bound {}), coherence witnessed: {}, dimension >= {}",
        spec.name, value, spec.classical_bound, verdict.coherence_witnessed, verdict.min_dimension
    );
    let report = EvaluateReport {
        inequality: spec.name.clone(),
        n: spec.n,
        overlaps: overlaps.clone(),
        verdict,
    };
    match g.format {
        Format::Json => {
            out.json("evaluate.json", &report)?;
        }
        Format::Csv => {
            let v = &report.verdict;
            let rows = vec![
                vec!["inequality".into(), report.inequality.clone()],
                vec!["value".into(), num(v.value)],
                vec!["classical_bound".into(), num(v.classical_bound)],
                vec!["coherence_witnessed".into(), v.coherence_witnessed.to_string()],
                vec!["min_dimension".into(), v.min_dimension.to_string()],
                vec!["thresholds_missing".into(), v.thresholds_missing.to_string()],
            ];
            out.csv("evaluate.csv", &["key", "value"], &rows)?;
            let m = overlaps.to_matrix();
            let header: Vec<String> = (0..m.len()).map(|j| format!("s{j}")).collect();
            let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let rows: Vec<Vec<String>> = m.iter().map(|r| r.iter().map(|&x| num(x)).collect()).collect();
            out.csv("overlaps.csv", &header, &rows)?;
        }
    }
    Ok(())
}

fn table(g: &GlobalArgs, a: &TableArgs, out: &mut Outputs) -> Result<()> {
    let mut cfg = ThresholdConfig {
        seed: Seed(g.seed),
        pure_n_max: a.pure_n_max,
        ..ThresholdConfig::default()
    };
    if let Some(r) = g.restarts {
        cfg.maximize = MaximizeConfig {
            restarts: r,
            ..cfg.maximize
        };
    }
    if let Some(t) = g.tol {
        cfg.sdp = SdpConfig { tol: t, ..cfg.sdp };
    }
    let cells = optimize::dimension_thresholds(a.n_max, a.d_max, &cfg)?;
    for n in 3..=a.n_max {
        let row: Vec<String> = cells
            .iter()
            .filter(|c| c.n == n)
            .map(|c| format!("{:7.3}", c.max_value))
            .collect();
        println!("h{n:<3}{}", row.join(" "));
    }
    match g.format {
        Format::Json => {
            out.json("table.json", &cells)?;
        }
        Format::Csv => {
            let d_top = a.d_max.min(a.n_max);
            let mut header = vec!["inequality".to_string()];
            header.extend((2..=d_top).map(|d| format!("d={d}")));
            let rows: Vec<Vec<String>> = (3..=a.n_max)
                .map(|n| {
                    let mut row = vec![format!("h{n}")];
                    row.extend((2..=d_top).map(|d| {
                        cells
                            .iter()
                            .find(|c| c.n == n && c.d == d)
                            .map(|c| format!("{:.6}", c.max_value))
                            .unwrap_or_default()
                    }));
                    row
                })
                .collect();
            let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            out.csv("table.csv", &header, &rows)?;
            let rows: Vec<Vec<String>> = cells
                .iter()
                .map(|c| {
                    vec![
                        c.n.to_string(),
                        c.d.to_string(),
                        num(c.max_value),
                        opt(c.pure_value),
                        opt(c.sdp_value),
                        format!("{:?}", c.method).to_lowercase(),
                        c.agree.map(|b| b.to_string()).unwrap_or_default(),
                        c.monotone.to_string(),
                    ]
                })
                .collect();
            out.csv(
                "table_cells.csv",
                &[
                    "n",
                    "d",
                    "max_value",
                    "pure_value",
                    "sdp_value",
                    "method",
                    "agree",
                    "monotone",
                ],
                &rows,
            )?;
        }
    }
    Ok(())
}

fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
        .collect()
}

#[derive(Serialize)]
struct EfficiencyRow {
    r: f64,
    eta_ideal: f64,
    eta_plus: Option<f64>,
    eta_minus: Option<f64>,
}

#[derive(Serialize)]
struct InterrogationReport {
    theta: f64,
    r: f64,
    eta_ideal: f64,
    crossover_nu: Option<f64>,
    /// Efficiency at the crossover, where both curves meet.
    crossover_efficiency: Option<f64>,
    robustness: Vec<RobustnessRow>,
    efficiency: Vec<EfficiencyRow>,
}

#[derive(Serialize)]
struct RobustnessRow {
    nu: f64,
    eta_quantum: f64,
    eta_nc: f64,
    worst_case: f64,
    h3_robust: f64,
}

fn interrogation(g: &GlobalArgs, a: &InterrogationArgs, out: &mut Outputs) -> Result<()> {
    let theta = match a.r {
        Some(r) => contextuality::r_to_theta(r)?,
        None => a.theta,
    };
    let r = contextuality::theta_to_r(theta);
    let nus = a.nu.clone().unwrap_or_else(|| grid(0.0, 1.0, a.nu_steps));
    let curve = contextuality::robustness_curve(theta, &nus)?;
    if curve.crossover_nu.is_none() && !a.allow_no_gap {
        bail!(overlap_witness::Error::NoContextualGap { theta });
    }
    let robustness = curve
        .points
        .iter()
        .map(|p| {
            Ok(RobustnessRow {
                nu: p.nu,
                eta_quantum: p.eta_quantum,
                eta_nc: p.eta_nc,
                worst_case: p.eta_quantum.min(p.eta_nc),
                h3_robust: contextuality::h3_robust(&contextuality::hexagon(theta, p.nu)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let efficiency = grid(0.0, 1.0, a.r_steps)
        .into_iter()
        .map(|r| {
            let band = |b| {
                if r < 1.0 {
                    contextuality::eta_noisy(r, a.eps, a.n1, a.n2, b).ok()
                } else {
                    None
                }
            };
            Ok(EfficiencyRow {
                r,
                eta_ideal: contextuality::eta_ideal(r)?,
                eta_plus: band(Branch::Plus),
                eta_minus: band(Branch::Minus),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = InterrogationReport {
        theta,
        r,
        eta_ideal: contextuality::eta_ideal(r)?,
        crossover_nu: curve.crossover_nu,
        crossover_efficiency: curve
            .crossover_nu
            .map(|nu| contextuality::worst_case_efficiency(theta, nu))
            .transpose()?,
        robustness,
        efficiency,
    };
    println!(
        "theta = {:.6} rad, r = {:.6}, eta_ideal = {:.6}, crossover nu = {}",
        theta,
        r,
        report.eta_ideal,
        report
            .crossover_nu
            .map(|x| format!("{x:.6}"))
            .unwrap_or_else(|| "none".into())
    );
    match g.format {
        Format::Json => {
            out.json("interrogation.json", &report)?;
        }
        Format::Csv => {
            out.serialize_csv("robustness.csv", &report.robustness)?;
            out.serialize_csv("efficiency.csv", &report.efficiency)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SampleSummary {
    inequality: String,
    n: usize,
    d: usize,
    num_sets: usize,
    seed: u64,
    classical_bound: f64,
    max_value: f64,
    violation_count: usize,
}

fn sample(g: &GlobalArgs, a: &SampleArgs, out: &mut Outputs) -> Result<()> {
    let spec = inequality(&a.inequality)?;
    let num_sets = g.trials.unwrap_or(5000) as usize;
    let report = optimize::haar_experiment(&spec, a.d, num_sets, Seed(g.seed))?;
    let lo = report
        .values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .min(spec.classical_bound);
    let hi = report.max_value.max(spec.classical_bound);
    let hist = optimize::histogram(&report.values, lo, hi, a.bins)?;
    println!(
        "{} at d = {}: {} sets, max {:.6}, {} violations of {}",
        spec.name, a.d, num_sets, report.max_value, report.violation_count, spec.classical_bound
    );
    let hist_rows: Vec<Vec<String>> = hist
        .iter()
        .map(|(l, h, c)| vec![num(*l), num(*h), c.to_string()])
        .collect();
    match g.format {
        Format::Json => {
            out.json("sample.json", &report)?;
        }
        Format::Csv => {
            let summary = SampleSummary {
                inequality: report.inequality.clone(),
                n: report.n,
                d: report.d,
                num_sets: report.num_sets,
                seed: g.seed,
                classical_bound: report.classical_bound,
                max_value: report.max_value,
                violation_count: report.violation_count,
            };
            out.serialize_csv("sample.csv", &[summary])?;
            let rows: Vec<Vec<String>> = report.values.iter().map(|v| vec![num(*v)]).collect();
            out.csv("values.csv", &["value"], &rows)?;
        }
    }
    out.csv("histogram.csv", &["lo", "hi", "count"], &hist_rows)?;
    Ok(())
}

#[derive(Serialize)]
struct OverlapCounts {
    i: usize,
    j: usize,
    ideal: f64,
    counts: Vec<u64>,
    estimate: f64,
    sigma_c: f64,
}

#[derive(Serialize)]
struct SimulateReport {
    set: String,
    inequality: String,
    ideal_value: f64,
    estimate: f64,
    sigma: f64,
    photons_per_overlap: u64,
    overlaps: Vec<OverlapCounts>,
}

fn mesh_simulate(g: &GlobalArgs, a: &SimulateArgs, out: &mut Outputs) -> Result<()> {
    let (spec, _, states) = reference_set(&a.set)?;
    let trials = g.trials.unwrap_or(100_000);
    let noise = AngleNoise::new(a.eps, a.delta_deg)?;
    let detection = mesh::Detection {
        efficiency: a.efficiency,
        dark_probability: a.dark_probability,
    };
    let seed = Seed(g.seed);
    let n = states.len();
    let mut upper = Vec::new();
    let mut records = Vec::new();
    let mut variance = 0.0;
    for (k, (i, j)) in graphs::edges(n).enumerate() {
        let rec = mesh::overlap_via_counts_with(
            &states[i],
            &states[j],
            trials,
            seed.derive(k as u64),
            Some(&noise),
            &detection,
        )?;
        let w = spec.weight(i, j);
        variance += w * w * rec.sigma() * rec.sigma();
        upper.push(rec.estimate().clamp(0.0, 1.0));
        records.push(OverlapCounts {
            i,
            j,
            ideal: states[i].overlap(&states[j])?,
            counts: rec.counts.clone(),
            estimate: rec.estimate(),
            sigma_c: rec.sigma(),
        });
    }
    let estimate = graphs::evaluate(&spec, &OverlapSet::new(n, upper)?)?;
    let ideal_value = graphs::evaluate_pure(&spec, &states)?;
    let report = SimulateReport {
        set: a.set.clone(),
        inequality: spec.name.clone(),
        ideal_value,
        estimate,
        sigma: variance.sqrt(),
        photons_per_overlap: trials,
        overlaps: records,
    };
    println!(
        "{} on {}: estimate {:.6} +- {:.6} (ideal {:.6})",
        spec.name, a.set, estimate, report.sigma, ideal_value
    );
    match g.format {
        Format::Json => {
            out.json("simulate.json", &report)?;
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .overlaps
                .iter()
                .map(|o| {
                    vec![
                        o.i.to_string(),
                        o.j.to_string(),
                        num(o.ideal),
                        o.counts[0].to_string(),
                        o.counts.iter().sum::<u64>().to_string(),
                        trials.to_string(),
                        num(o.estimate),
                        num(o.sigma_c),
                    ]
                })
                .collect();
            out.csv(
                "counts.csv",
                &[
                    "i",
                    "j",
                    "ideal",
                    "port0_counts",
                    "detected",
                    "total_trials",
                    "estimate",
                    "sigma_c",
                ],
                &rows,
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct UnitaryFile {
    modes: usize,
    /// Row-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
}

impl UnitaryFile {
    fn from_matrix(u: &CMatrix) -> Self {
        let m = u.nrows();
        let mut entries = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                entries.push([u[(i, j)].re, u[(i, j)].im]);
            }
        }
        Self { modes: m, entries }
    }

    fn to_matrix(&self) -> Result<CMatrix> {
        let m = self.modes;
        if self.entries.len() != m * m {
            bail!(overlap_witness::Error::DimensionMismatch {
                expected: m * m,
                found: self.entries.len(),
            });
        }
        Ok(CMatrix::from_row_iterator(
            m,
            m,
            self.entries.iter().map(|&[re, im]| Complex64::new(re, im)),
        ))
    }
}

fn mesh_compose(g: &GlobalArgs, a: &ComposeArgs, out: &mut Outputs) -> Result<()> {
    let config: MeshConfig = serde_json::from_value(read_json(&a.config)?)
        .with_context(|| format!("{} does not match schemas/mesh_config.schema.json", a.config.display()))?;
    let u = mesh::compose(&config)?;
    let powers: Vec<Vec<f64>> = (0..u.nrows())
        .map(|i| (0..u.ncols()).map(|j| u[(i, j)].norm_sqr()).collect())
        .collect();
    println!(
        "composed a {}-mode unitary, deviation {:.2e}",
        u.nrows(),
        mesh::unitary_deviation(&u)
    );
    match g.format {
        Format::Json => {
            out.json("unitary.json", &UnitaryFile::from_matrix(&u))?;
        }
        Format::Csv => {
            let header: Vec<String> = (0..u.ncols()).map(|j| format!("in{j}")).collect();
            let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let rows: Vec<Vec<String>> = powers.iter().map(|r| r.iter().map(|&x| num(x)).collect()).collect();
            out.csv("powers.csv", &header, &rows)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct DecomposeReport {
    config: MeshConfig,
    roundtrip_error: f64,
}

fn mesh_decompose(g: &GlobalArgs, a: &DecomposeArgs, out: &mut Outputs) -> Result<()> {
    let u = match (&a.unitary, a.haar) {
        (Some(p), _) => {
            let f: UnitaryFile = serde_json::from_value(read_json(p)?)
                .with_context(|| format!("{} does not match schemas/unitary.schema.json", p.display()))?;
            f.to_matrix()?
        }
        (None, Some(m)) => {
            if m < 2 {
                bail!(overlap_witness::Error::InvalidParameter {
                    name: "haar",
                    reason: "a mesh needs at least two modes".into()
                });
            }
            overlap_witness::state::haar_random_unitary(m, &mut Seed(g.seed).rng())
        }
        (None, None) => unreachable!("clap requires one of the inputs"),
    };
    let config = mesh::decompose(&u)?;
    let back = mesh::compose(&config)?;
    let roundtrip_error = global_phase_distance(&u, &back);
    println!("{} cells, roundtrip error {:.2e}", config.cells.len(), roundtrip_error);
    match g.format {
        Format::Json => {
            out.json("mesh_config.json", &config)?;
            out.json(
                "decompose.json",
                &DecomposeReport {
                    config,
                    roundtrip_error,
                },
            )?;
        }
        Format::Csv => {
            out.serialize_csv("cells.csv", &config.cells)?;
        }
    }
    Ok(())
}

/// Frobenius distance after removing the best global phase.
fn global_phase_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let inner: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| y.conj() * x).sum();
    let phase = if inner.norm() > 0.0 {
        inner / inner.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    (a - b.map(|z| z * phase)).norm()
}

#[derive(Serialize)]
struct DispersionReport {
    set: String,
    inequality: String,
    eps: f64,
    delta_deg: f64,
    trials: usize,
    ideal: f64,
    min: f64,
    max: f64,
    half_width: f64,
    count_sigma: f64,
    samples: Vec<f64>,
}

fn mesh_dispersion(g: &GlobalArgs, a: &DispersionArgs, out: &mut Outputs) -> Result<()> {
    let (spec, family, states) = reference_set(&a.set)?;
    let params = states
        .iter()
        .map(|s| family.params_from_state(s))
        .collect::<overlap_witness::Result<Vec<_>>>()?;
    let trials = g.trials.unwrap_or(2000) as usize;
    let noise = AngleNoise::new(a.eps, a.delta_deg)?;
    let d = mesh::dispersion(&spec, family, &params, &noise, trials, Seed(g.seed))?;
    if a.photons == 0 {
        bail!(overlap_witness::Error::InvalidParameter {
            name: "photons",
            reason: "need at least one photon".into()
        });
    }
    // Poissonian spread of the witness from per-overlap counts.
    let ideal_set = OverlapSet::from_pure(&states)?;
    let count_sigma = graphs::edges(spec.n)
        .map(|(i, j)| spec.weight(i, j).powi(2) * ideal_set.get(i, j) / a.photons as f64)
        .sum::<f64>()
        .sqrt();
    println!(
        "{} on {}: ideal {:.6}, envelope [{:.6}, {:.6}], half-width {:.6} = {:.2} sigma_c",
        spec.name,
        a.set,
        d.ideal,
        d.min,
        d.max,
        d.half_width,
        d.half_width / count_sigma
    );
    let report = DispersionReport {
        set: a.set.clone(),
        inequality: spec.name.clone(),
        eps: a.eps,
        delta_deg: a.delta_deg,
        trials,
        ideal: d.ideal,
        min: d.min,
        max: d.max,
        half_width: d.half_width,
        count_sigma,
        samples: d.samples,
    };
    match g.format {
        Format::Json => {
            out.json("dispersion.json", &report)?;
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = report.samples.iter().map(|v| vec![num(*v)]).collect();
            out.csv("dispersion_samples.csv", &["value"], &rows)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CalibrationReport {
    model: mesh::CalibrationModel,
    residual_rms: f64,
    recovery: Option<mesh::RecoveryError>,
}

fn mesh_calibrate(g: &GlobalArgs, a: &CalibrateArgs, out: &mut Outputs) -> Result<()> {
    let (points, columns, truth) = match (&a.sweeps, a.synthetic) {
        (Some(path), _) => {
            let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
            let points = rdr
                .deserialize()
                .collect::<std::result::Result<Vec<SweepPoint>, _>>()
                .with_context(|| format!("{} must have columns heater,mzi,current,cross_power", path.display()))?;
            let columns: Vec<usize> = mesh::rectangular_layout(a.modes)?.iter().map(|&(_, c)| c).collect();
            (points, columns, None)
        }
        (None, Some(m)) => {
            let seed = Seed(g.seed);
            let truth = mesh::synthetic_model(m, seed.derive(0))?;
            let points = mesh::simulate_all_sweeps(&truth, a.max_current, a.points, a.power_noise, seed.derive(1))?;
            out.serialize_csv("sweeps.csv", &points)?;
            out.json("true_model.json", &truth)?;
            (points, truth.columns.clone(), Some(truth))
        }
        (None, None) => unreachable!("clap requires one of the inputs"),
    };
    let model = mesh::calibration_fit(&points, &columns)?;
    let residual_rms = mesh::sweep_residual(&model, &points)?;
    let recovery = truth.as_ref().map(|t| mesh::recovery_error(t, &model)).transpose()?;
    println!("fitted {} heaters, residual rms {:.3e}", model.len(), residual_rms);
    if let Some(r) = &recovery {
        println!(
            "recovery: theta0 {:.2e} rad, alpha {:.2e}, beta {:.2e}, crosstalk {:.2e}",
            r.theta0, r.alpha, r.beta, r.crosstalk
        );
    }
    out.json(
        "calibration.json",
        &CalibrationReport {
            model,
            residual_rms,
            recovery,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct FidelityRow {
    index: usize,
    fidelity: f64,
}

fn mesh_fidelity(g: &GlobalArgs, a: &FidelityArgs, out: &mut Outputs) -> Result<()> {
    let count = g.trials.unwrap_or(100) as usize;
    let study = mesh::perturbed_mesh_study(a.modes, count, a.sigma, Seed(g.seed))?;
    println!(
        "{} unitaries on {} modes, phase sigma {}: mean fidelity {:.5} (min {:.5})",
        count, a.modes, a.sigma, study.mean, study.min
    );
    match g.format {
        Format::Json => {
            out.json("fidelity.json", &study)?;
        }
        Format::Csv => {
            let rows: Vec<FidelityRow> = study
                .fidelities
                .iter()
                .enumerate()
                .map(|(index, &fidelity)| FidelityRow { index, fidelity })
                .collect();
            out.serialize_csv("fidelity.csv", &rows)?;
        }
    }
    Ok(())
}
