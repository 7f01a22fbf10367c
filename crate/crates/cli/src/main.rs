use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::info;

use hetero_dp::data_pipeline::{
    stratified_sample, DatasetDescriptor, DatasetFormat, HeterogeneityProfile, SyntheticSpec,
    DEFAULT_SAMPLE_FRACTION,
};
use hetero_dp::error_analysis::Statistic;
use hetero_dp::experiment::{
    compare_rows, run_calibrate, run_experiment_on, write_comparison_csv, write_csv, write_svg_charts,
    CalibrationRow, ExperimentPlan, ResultRow, DEFAULT_EPSILON_GRID, DEFAULT_TRIALS, SWEEP_DELTA,
};
use hetero_dp::gaussian_mech::Mechanism;
use hetero_dp::hetero_measures::measure;
use hetero_dp::private_estimators::Setting;

/// Differentially private heterogeneity measures over bounded vectors.
#[derive(Parser, Debug)]
#[command(name = "hetero-dp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print σ for both Gaussian mechanisms over an (ε, δ, Δ) grid.
    Calibrate(CalibrateArgs),
    /// Compute the noise-free dispersion, Q and I² of a dataset.
    Measure(MeasureArgs),
    /// Run a trial sweep and write one CSV row per plan cell.
    Experiment(ExperimentArgs),
    /// Percentage change of EMSE between paired heterogeneity profiles.
    CompareHeterogeneity(CompareArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MechanismChoice {
    Agm,
    Cgm,
    Both,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, value_delimiter = ',', value_parser = positive, default_values_t = DEFAULT_EPSILON_GRID.to_vec())]
    epsilons: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = unit_open, default_values_t = vec![SWEEP_DELTA])]
    deltas: Vec<f64>,
    /// L2 sensitivities.
    #[arg(long = "sensitivity", value_delimiter = ',', value_parser = positive, default_values_t = vec![1.0])]
    sensitivities: Vec<f64>,
    #[arg(long, value_enum, default_value_t = MechanismChoice::Both)]
    mechanism: MechanismChoice,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatChoice {
    Synthetic,
    Idx,
    Cifar10,
    Cifar100,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    #[arg(long, value_enum, default_value_t = FormatChoice::Synthetic)]
    format: FormatChoice,
    /// Dataset file or directory of standard file names.
    #[arg(long, env = "HETERO_DP_DATA_DIR")]
    data: Option<PathBuf>,
    /// Dataset label used in outputs (defaults to the format name).
    #[arg(long)]
    name: Option<String>,
    /// Vector dimension; defaults to 16 for synthetic data and the format's native size otherwise.
    #[arg(long)]
    dim: Option<usize>,
    /// Synthetic pool size.
    #[arg(long, default_value_t = 20_000)]
    pool_size: usize,
    /// Synthetic heterogeneity level in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    heterogeneity: f64,
    /// Seed of the synthetic generator.
    #[arg(long, default_value_t = 7)]
    data_seed: u64,
}

impl DatasetArgs {
    fn descriptor(&self) -> Result<DatasetDescriptor> {
        let format = match self.format {
            FormatChoice::Synthetic => {
                let spec = SyntheticSpec {
                    pool_size: self.pool_size,
                    heterogeneity: self.heterogeneity,
                    seed: self.data_seed,
                };
                let name = self.name.clone().unwrap_or_else(|| "synthetic".into());
                return Ok(DatasetDescriptor::synthetic(name, self.dim.unwrap_or(16), spec));
            }
            FormatChoice::Idx => DatasetFormat::IdxImages,
            FormatChoice::Cifar10 => DatasetFormat::Cifar10Bin,
            FormatChoice::Cifar100 => DatasetFormat::Cifar100Bin,
        };
        let Some(path) = self.data.clone() else {
            usage_error(ErrorKind::MissingRequiredArgument, "--data (or HETERO_DP_DATA_DIR) is required for on-disk formats");
        };
        let name = self
            .name
            .clone()
            .unwrap_or_else(|| format!("{:?}", self.format).to_lowercase());
        let mut ds = DatasetDescriptor::on_disk(name, format, path)?;
        if let Some(d) = self.dim {
            ds.d = d;
        }
        Ok(ds)
    }
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Measure a stratified subset drawn with this profile instead of the whole dataset.
    #[arg(long, value_parser = parse_profile)]
    profile: Option<ProfileSpec>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_FRACTION, value_parser = unit_closed)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dispersion exponent.
    #[arg(long, default_value_t = 2.0)]
    exponent: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Profiles: canonical names (balanced-10, skewed-2, ...) or NAME=R1:R2:...; default all six.
    #[arg(long, value_delimiter = ',', value_parser = parse_profile)]
    profiles: Vec<ProfileSpec>,
    /// Fraction of the pool each profile samples.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_FRACTION, value_parser = unit_closed)]
    fraction: f64,
    #[arg(long, value_delimiter = ',', value_parser = parse_statistic)]
    statistics: Vec<Statistic>,
    #[arg(long, value_delimiter = ',', value_parser = parse_mechanism)]
    mechanisms: Vec<Mechanism>,
    #[arg(long, value_delimiter = ',', value_parser = parse_setting)]
    settings: Vec<Setting>,
    /// Use the single fixed privacy level (ε = 0.25, δ = 0.1, both mechanisms) instead of the ε sweep.
    #[arg(long)]
    fixed: bool,
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    epsilons: Vec<f64>,
    #[arg(long, value_parser = unit_open)]
    delta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative budget weights of the two dispersion/Q stages.
    #[arg(long, value_delimiter = ',', value_parser = positive, num_args = 2)]
    split2: Option<Vec<f64>>,
    /// Relative budget weights of the three I² stages.
    #[arg(long, value_delimiter = ',', value_parser = positive, num_args = 3)]
    split3: Option<Vec<f64>>,
    /// Disable all noise (debugging).
    #[arg(long)]
    zero_noise: bool,
}

impl PlanArgs {
    fn plan(&self) -> Result<ExperimentPlan> {
        let dataset = self.dataset.descriptor()?;
        let profiles = if self.profiles.is_empty() {
            HeterogeneityProfile::canonical(self.fraction)?
        } else {
            self.profiles
                .iter()
                .map(|p| p.resolve(self.fraction))
                .collect::<Result<_>>()?
        };
        let mut plan = if self.fixed {
            ExperimentPlan::fixed(dataset, profiles)
        } else {
            ExperimentPlan::sweep(dataset, profiles)
        };
        if !self.statistics.is_empty() {
            plan.statistics = self.statistics.clone();
        }
        if !self.mechanisms.is_empty() {
            plan.mechanisms = self.mechanisms.clone();
        }
        if !self.settings.is_empty() {
            plan.settings = self.settings.clone();
        }
        if !self.epsilons.is_empty() {
            plan.epsilons = self.epsilons.clone();
        }
        if let Some(delta) = self.delta {
            plan.delta = delta;
        }
        if let Some(s) = &self.split2 {
            plan.split2 = s.clone();
        }
        if let Some(s) = &self.split3 {
            plan.split3 = s.clone();
        }
        plan.trials = self.trials;
        plan.seed = self.seed;
        plan.zero_noise = self.zero_noise;
        if let Err(e) = plan.validate() {
            usage_error(ErrorKind::ValueValidation, &e.to_string());
        }
        Ok(plan)
    }
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    plan: PlanArgs,
    /// CSV output; the resolved plan is written next to it as `<stem>.plan.json`.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Directory for EMSE-vs-ε SVG charts.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Print the rows as JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    plan: PlanArgs,
    /// Comparison CSV output.
    #[arg(long, default_value = "comparison.csv")]
    out: PathBuf,
    /// Also write the underlying per-cell rows here.
    #[arg(long)]
    rows_out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

/// A profile flag before the sample fraction is applied.
#[derive(Clone, Debug)]
enum ProfileSpec {
    Named(String),
    Custom(String, Vec<u32>),
}

impl ProfileSpec {
    fn resolve(&self, fraction: f64) -> Result<HeterogeneityProfile> {
        Ok(match self {
            ProfileSpec::Named(name) => HeterogeneityProfile::named(name, fraction)?,
            ProfileSpec::Custom(name, ratios) => HeterogeneityProfile::new(name.clone(), ratios.clone(), fraction)?,
        })
    }
}

fn parse_profile(s: &str) -> std::result::Result<ProfileSpec, String> {
    match s.split_once('=') {
        None => {
            HeterogeneityProfile::named(s, DEFAULT_SAMPLE_FRACTION).map_err(|e| e.to_string())?;
            Ok(ProfileSpec::Named(s.to_string()))
        }
        Some((name, ratios)) => {
            let ratios = ratios
                .split(':')
                .map(|r| r.trim().parse::<u32>().map_err(|e| format!("ratio '{r}': {e}")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            HeterogeneityProfile::new(name, ratios.clone(), DEFAULT_SAMPLE_FRACTION).map_err(|e| e.to_string())?;
            Ok(ProfileSpec::Custom(name.to_string(), ratios))
        }
    }
}

fn parse_statistic(s: &str) -> std::result::Result<Statistic, String> {
    s.parse().map_err(|e: hetero_dp::Error| e.to_string())
}

fn parse_mechanism(s: &str) -> std::result::Result<Mechanism, String> {
    s.parse().map_err(|e: hetero_dp::Error| e.to_string())
}

fn parse_setting(s: &str) -> std::result::Result<Setting, String> {
    s.parse().map_err(|e: hetero_dp::Error| e.to_string())
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("'{s}': {e}"))
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not a positive number"))
    }
}

fn unit_open(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

fn unit_closed(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1]"))
    }
}

fn usage_error(kind: ErrorKind, msg: &str) -> ! {
    Cli::command().error(kind, msg).exit()
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let rows = run_calibrate(&args.epsilons, &args.deltas, &args.sensitivities)?;
    let (show_agm, show_cgm) = match args.mechanism {
        MechanismChoice::Agm => (true, false),
        MechanismChoice::Cgm => (false, true),
        MechanismChoice::Both => (true, true),
    };
    if args.json {
        let out: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                let mut v = serde_json::json!({
                    "epsilon": r.epsilon,
                    "delta": r.delta,
                    "delta_l2": r.delta_l2,
                });
                if show_agm {
                    v["sigma_agm"] = r.sigma_agm.into();
                }
                if show_cgm {
                    v["sigma_cgm"] = r.sigma_cgm.into();
                    v["cgm_in_range"] = r.sigma_cgm.is_some().into();
                }
                if show_agm && show_cgm {
                    v["ratio"] = r.ratio.into();
                }
                v
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(());
    }
    print!("{:>8} {:>10} {:>10}", "epsilon", "delta", "l2_sens");
    if show_agm {
        print!(" {:>22}", "sigma_agm");
    }
    if show_cgm {
        print!(" {:>22}", "sigma_cgm");
    }
    if show_agm && show_cgm {
        print!(" {:>10}", "agm/cgm");
    }
    println!();
    for r in &rows {
        print_calibration_row(r, show_agm, show_cgm);
    }
    Ok(())
}

fn print_calibration_row(r: &CalibrationRow, show_agm: bool, show_cgm: bool) {
    const OUT_OF_RANGE: &str = "out of CGM range";
    print!("{:>8} {:>10e} {:>10}", r.epsilon, r.delta, r.delta_l2);
    if show_agm {
        print!(" {:>22.15e}", r.sigma_agm);
    }
    if show_cgm {
        match r.sigma_cgm {
            Some(s) => print!(" {s:>22.15e}"),
            None => print!(" {OUT_OF_RANGE:>22}"),
        }
    }
    if show_agm && show_cgm {
        match r.ratio {
            Some(q) => print!(" {q:>10.6}"),
            None => print!(" {:>10}", "-"),
        }
    }
    println!();
}

fn cmd_measure(args: &MeasureArgs) -> Result<()> {
    let descriptor = args.dataset.descriptor()?;
    let mut data = descriptor.load().with_context(|| format!("loading dataset '{}'", descriptor.name))?;
    let profile = match &args.profile {
        Some(spec) => {
            let p = spec.resolve(args.fraction)?;
            data = stratified_sample(&data, &p, args.seed)?;
            Some(p.name)
        }
        None => None,
    };
    let report = measure(&data, args.exponent)?;
    // Reported as-is; the threshold is stated for unnormalized Q.
    let q_below = report.q_value < 0.1;
    if args.json {
        let v = serde_json::json!({
            "dataset": descriptor.name,
            "profile": profile,
            "n": data.n(),
            "d": data.d(),
            "dispersion_exponent": report.dispersion_exponent,
            "dispersion": report.dispersion,
            "q": report.q_value,
            "i_squared": report.i_squared,
            "q_below_0_1": q_below,
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("dataset     {}", descriptor.name);
        if let Some(p) = &profile {
            println!("profile     {p}");
        }
        println!("n           {}", data.n());
        println!("d           {}", data.d());
        println!("dispersion  {:.12e} (p = {})", report.dispersion, report.dispersion_exponent);
        println!("q           {:.12e}", report.q_value);
        println!("i_squared   {:.12}", report.i_squared);
        println!("q < 0.1     {q_below}");
    }
    Ok(())
}

fn plan_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    out.with_file_name(format!("{stem}.plan.json"))
}

fn execute(plan: &ExperimentPlan, out: &Path) -> Result<Vec<ResultRow>> {
    let path = plan_path(out);
    plan.write_json(&path).with_context(|| format!("writing {}", path.display()))?;
    info!("plan: {}", serde_json::to_string(plan)?);
    let data = plan
        .dataset
        .load()
        .with_context(|| format!("loading dataset '{}'", plan.dataset.name))?;
    Ok(run_experiment_on(plan, &data)?)
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let plan = args.plan.plan()?;
    let rows = execute(&plan, &args.out)?;
    write_csv(&args.out, &rows).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(dir) = &args.svg {
        std::fs::create_dir_all(dir)?;
        for f in write_svg_charts(dir, &rows)? {
            info!("chart {}", f.display());
        }
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(());
    }
    println!(
        "{:<11} {:<4} {:<12} {:<12} {:>6} {:>12} {:>12} {:>12}",
        "statistic", "mech", "setting", "profile", "eps", "emse", "tmse", "cmse"
    );
    for r in &rows {
        println!(
            "{:<11} {:<4} {:<12} {:<12} {:>6} {:>12.4e} {:>12.4e} {:>12.4e}",
            r.statistic.label(),
            r.mechanism.label(),
            r.setting.label(),
            r.profile,
            r.epsilon,
            r.emse,
            r.tmse,
            r.cmse
        );
    }
    println!("{} rows written to {}", rows.len(), args.out.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let plan = args.plan.plan()?;
    // Reject unpaired profiles before spending time on trials.
    if let Err(e) = hetero_dp::experiment::comparison_pairs(&plan) {
        usage_error(ErrorKind::ValueValidation, &e.to_string());
    }
    let rows = execute(&plan, &args.out)?;
    if let Some(path) = &args.rows_out {
        write_csv(path, &rows)?;
    }
    let cmp = compare_rows(&plan, &rows)?;
    write_comparison_csv(&args.out, &cmp).with_context(|| format!("writing {}", args.out.display()))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&cmp)?);
        return Ok(());
    }
    println!(
        "{:<11} {:<4} {:<12} {:<20} {:>10}",
        "statistic", "mech", "setting", "comparison", "mean_pct"
    );
    for c in &cmp {
        println!(
            "{:<11} {:<4} {:<12} {:<20} {:>10.3}",
            c.statistic.label(),
            c.mechanism.label(),
            c.setting.label(),
            c.comparison,
            c.mean_pct_change
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::CompareHeterogeneity(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
