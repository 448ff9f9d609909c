//! `fairacq` command line: synthetic data, acquisition runs, theory checks
//! and weight sweeps.

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairacq::bounds::{analytic_round, lemma_checks, random_analytic_instance, LemmaReport};
use fairacq::datagen::{gen_gamma, gen_guyon, GammaConfig, GuyonConfig};
use fairacq::harness::{self, emit, error_line, ExperimentConfig, Format, Report};
use fairacq::{AucSource, Batch, Error, Result, ScoringKind, Strategy};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fairacq", version, about = "Fairness-aware feature acquisition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Run an acquisition experiment and write its report.
    Acquire(AcquireArgs),
    /// Check the improvement bounds and lemmas on random analytic instances.
    Verify(VerifyArgs),
    /// Run the weighted objective over a grid of weights.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Guyon,
    Gamma1,
    Gamma2,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "guyon")]
    kind: SynthKind,
    #[arg(long, env = "FAIRACQ_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of rows.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_features: Option<usize>,
    #[arg(long)]
    n_informative: Option<usize>,
    #[arg(long)]
    group_a_fraction: Option<f64>,
    #[arg(long)]
    base_rate: Option<f64>,
    /// Class-mean gap per informative feature (guyon only).
    #[arg(long)]
    separation: Option<f64>,
    /// Relative spread of the informative gaps, in [0, 1) (guyon only).
    #[arg(long)]
    separation_spread: Option<f64>,
    /// Both groups share one parameter draw (guyon only).
    #[arg(long)]
    shared_groups: bool,
    #[arg(long)]
    output: PathBuf,
    /// Also write the generating parameters as JSON (guyon only).
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    FairAuc,
    MaxAuc,
    MinBias,
    Random,
    Weighted,
    BiasPenalty,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoringArg {
    Fld,
    Logistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum BatchArg {
    Single,
    PairSimultaneous,
    PairSequential,
}

#[derive(Clone, Copy, ValueEnum)]
enum AucSourceArg {
    Empirical,
    Analytic,
}

/// Flags shared by `acquire` and `sweep`; names follow ExperimentConfig.
#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    aux: Option<PathBuf>,
    /// Comma-separated owned columns; default is one at random.
    #[arg(long, value_delimiter = ',')]
    owned: Vec<String>,
    #[arg(long, default_value = "group")]
    group_col: String,
    #[arg(long, default_value = "class")]
    class_col: String,
    #[arg(long)]
    log1p: bool,
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    use_protected: bool,
    #[arg(long, default_value_t = 0.0)]
    holdout: f64,
    #[arg(long)]
    zero_correlation: bool,
    #[arg(long)]
    noisy: bool,
    #[arg(long, value_enum, default_value = "logistic")]
    scoring: ScoringArg,
    #[arg(long, value_enum, default_value = "single")]
    batch: BatchArg,
    #[arg(long, value_enum, default_value = "empirical")]
    auc_source: AucSourceArg,
    #[arg(long, env = "FAIRACQ_SEED", default_value_t = 0)]
    seed: u64,
    /// Bootstrap resamples per round (0 disables intervals).
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the round table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct AcquireArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, value_enum, default_value = "fair-auc")]
    strategy: StrategyArg,
    /// Weight for the weighted and bias-penalty strategies.
    #[arg(long, default_value_t = 0.5)]
    weight: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    weights: Vec<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    /// Largest number of owned columns.
    #[arg(long, default_value_t = 5)]
    max_dim: usize,
    #[arg(long, default_value_t = 10)]
    candidates: usize,
    #[arg(long, env = "FAIRACQ_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-12)]
    slack: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn strategy(s: StrategyArg, w: f64) -> Strategy {
    match s {
        StrategyArg::FairAuc => Strategy::FairAuc,
        StrategyArg::MaxAuc => Strategy::MaxAuc,
        StrategyArg::MinBias => Strategy::MinBias,
        StrategyArg::Random => Strategy::Random,
        StrategyArg::Weighted => Strategy::Weighted(w),
        StrategyArg::BiasPenalty => Strategy::BiasPenalty(w),
    }
}

impl ExperimentArgs {
    fn config(&self, strategy: Strategy, sweep: Vec<f64>) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(&self.data);
        c.aux = self.aux.clone();
        c.owned = self.owned.clone();
        c.group_col = self.group_col.clone();
        c.class_col = self.class_col.clone();
        c.log1p = self.log1p;
        c.strategy = strategy;
        c.rounds = self.rounds;
        c.epsilon = self.epsilon;
        c.use_protected = self.use_protected;
        c.holdout = self.holdout;
        c.zero_correlation = self.zero_correlation;
        c.noisy = self.noisy;
        c.scoring = match self.scoring {
            ScoringArg::Fld => ScoringKind::Fld,
            ScoringArg::Logistic => ScoringKind::Logistic,
        };
        c.batch = match self.batch {
            BatchArg::Single => Batch::Single,
            BatchArg::PairSimultaneous => Batch::PairSimultaneous,
            BatchArg::PairSequential => Batch::PairSequential,
        };
        c.auc_source = match self.auc_source {
            AucSourceArg::Empirical => AucSource::Empirical,
            AucSourceArg::Analytic => AucSource::Analytic,
        };
        c.seed = self.seed;
        c.bootstrap = self.bootstrap;
        c.sweep = sweep;
        c.output = self.output.clone();
        c
    }

    fn write(&self, report: &Report) -> Result<()> {
        match &self.output {
            Some(p) => emit(report, Format::Json, p)?,
            None => print!("{}", harness::to_json(report)?),
        }
        if let Some(p) = &self.csv {
            emit(report, Format::Csv, p)?;
        }
        Ok(())
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let data = match a.kind {
        SynthKind::Guyon => {
            let d = GuyonConfig::default();
            let cfg = GuyonConfig {
                n: a.n.unwrap_or(d.n),
                n_features: a.n_features.unwrap_or(d.n_features),
                n_informative: a.n_informative.unwrap_or(d.n_informative),
                group_a_fraction: a.group_a_fraction.unwrap_or(d.group_a_fraction),
                base_rate: a.base_rate.unwrap_or(d.base_rate),
                separation: a.separation.unwrap_or(d.separation),
                separation_spread: a.separation_spread.unwrap_or(d.separation_spread),
                shared_groups: a.shared_groups,
                seed: a.seed,
            };
            let (data, truth) = gen_guyon(&cfg)?;
            if let Some(p) = &a.truth {
                let body = serde_json::to_string_pretty(&truth).map_err(|e| Error::Data(e.to_string()))?;
                std::fs::write(p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            }
            data
        }
        SynthKind::Gamma1 | SynthKind::Gamma2 => {
            let base = match a.kind {
                SynthKind::Gamma1 => GammaConfig::dataset1(a.seed),
                _ => GammaConfig::dataset2(a.seed),
            };
            let n_features = a.n_features.unwrap_or(base.n_informative + base.n_uninformative);
            let n_informative = a.n_informative.unwrap_or(base.n_informative).min(n_features);
            let cfg = GammaConfig {
                n: a.n.unwrap_or(base.n),
                group_a_fraction: a.group_a_fraction.unwrap_or(base.group_a_fraction),
                base_rate: a.base_rate.unwrap_or(base.base_rate),
                n_informative,
                n_uninformative: n_features - n_informative,
                ..base
            };
            gen_gamma(&cfg)?
        }
    };
    harness::write_csv(&data, &a.output)
}

#[derive(serde::Serialize)]
struct VerifySummary {
    instances: usize,
    checked_rounds: usize,
    disadvantaged_min_margin: f64,
    advantaged_min_margin: Option<f64>,
    violations: Vec<fairacq::bounds::BoundViolation>,
    lemmas: LemmaReport,
}

fn verify(a: &VerifyArgs) -> Result<bool> {
    let mut t1 = f64::INFINITY;
    let mut t2: Option<f64> = None;
    let mut violations = Vec::new();
    for i in 0..a.instances {
        let d = 1 + i % a.max_dim.max(1);
        let inst = random_analytic_instance(a.seed.wrapping_add(i as u64), d, a.candidates);
        let round = analytic_round(&inst, 0.0)?;
        match round.verify(a.slack) {
            Ok(r) => {
                t1 = t1.min(r.improvement - r.max_bound);
                if r.advantaged_in_premise {
                    let m = r.advantaged_improvement - r.advantaged_bound;
                    t2 = Some(t2.map_or(m, |v| v.min(m)));
                }
            }
            Err(v) => violations.push(v),
        }
    }
    let lemmas = lemma_checks();
    let ok = violations.is_empty() && lemmas.inverting.violations == 0 && lemmas.lower_bound.violations == 0;
    let summary = VerifySummary {
        instances: a.instances,
        checked_rounds: a.instances - violations.len(),
        disadvantaged_min_margin: t1,
        advantaged_min_margin: t2,
        violations,
        lemmas,
    };
    let mut body = serde_json::to_string_pretty(&summary).map_err(|e| Error::Data(e.to_string()))?;
    body.push('\n');
    match &a.output {
        Some(p) => std::fs::write(p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => print!("{body}"),
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => synth(a).map(|_| true),
        Command::Acquire(a) => {
            let cfg = a.exp.config(strategy(a.strategy, a.weight), Vec::new());
            harness::run_experiment(&cfg)
                .and_then(|r| a.exp.write(&r))
                .map(|_| true)
        }
        Command::Sweep(a) => {
            let cfg = a.exp.config(Strategy::FairAuc, a.weights.clone());
            harness::run_experiment(&cfg)
                .and_then(|r| a.exp.write(&r))
                .map(|_| true)
        }
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": "bound-violation", "message": "verification failed" })
            );
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
