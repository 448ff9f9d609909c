//! CSV ingestion, experiment configuration and report emission.

use crate::acquisition::{
    self, round_rng, AcquisitionState, AucSource, Batch, RoundRecord, Split, Strategy, BOOTSTRAP_STREAM, OWNED_STREAM,
};
use crate::auc::{bootstrap_ci, ConfidenceInterval};
use crate::error::{domain, Error, Result};
use crate::moments::{Group, GroupedColumns};
use crate::noisy::NoisePlan;
use crate::scoring::ScoringKind;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "FAIRACQ_SEED";

/// Seed from [`SEED_ENV`], or 0 when unset.
pub fn default_seed() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Column transforms applied at ingest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// log1p on every numeric column.
    pub log1p: bool,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
    }
    Ok(Table { header, rows })
}

fn column_index(t: &Table, name: &str) -> Result<usize> {
    t.header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Data(format!("column {name:?} not found")))
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

fn parse_groups(t: &Table, col: usize) -> Result<(Vec<Group>, [String; 2])> {
    let mut labels: Vec<&str> = t.rows.iter().map(|r| r[col].as_str()).collect();
    if let Some(i) = labels.iter().position(|l| l.is_empty()) {
        return Err(Error::Data(format!("row {}: empty group label", i + 1)));
    }
    labels.sort_unstable();
    labels.dedup();
    if labels.len() != 2 {
        return Err(Error::UnsupportedGroups(labels.len()));
    }
    let names = [labels[0].to_string(), labels[1].to_string()];
    let groups = t
        .rows
        .iter()
        .map(|r| if r[col] == names[0] { Group::A } else { Group::B })
        .collect();
    Ok((groups, names))
}

fn parse_classes(t: &Table, col: usize) -> Result<Vec<u8>> {
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| match r[col].parse::<f64>() {
            Ok(0.0) => Ok(0),
            Ok(1.0) => Ok(1),
            _ => Err(domain(format!("row {}: class value {:?} is not 0 or 1", i + 1, r[col]))),
        })
        .collect()
}

/// Feature columns of `t`, skipping `skip`: numeric columns as parsed
/// (optionally log1p, then group-mean imputed), other columns one-hot
/// encoded with the first-seen level dropped.
fn feature_columns(
    t: &Table,
    skip: &[usize],
    groups: &[Group],
    opts: IngestOptions,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (mut names, mut cols) = (Vec::new(), Vec::new());
    for (j, name) in t.header.iter().enumerate() {
        if skip.contains(&j) {
            continue;
        }
        let cells: Vec<&str> = t.rows.iter().map(|r| r[j].as_str()).collect();
        let numeric: Option<Vec<Option<f64>>> = cells
            .iter()
            .map(|c| {
                if is_missing(c) {
                    Some(None)
                } else {
                    c.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
                }
            })
            .collect();
        match numeric {
            Some(mut vals) => {
                if opts.log1p {
                    for (i, v) in vals.iter_mut().enumerate() {
                        if let Some(x) = v {
                            if *x <= -1.0 {
                                return Err(domain(format!("row {}, column {name:?}: log1p of {x}", i + 1)));
                            }
                            *x = x.ln_1p();
                        }
                    }
                }
                cols.push(impute(name, &vals, groups)?);
                names.push(name.clone());
            }
            None => {
                let mut levels: Vec<&str> = Vec::new();
                for (i, c) in cells.iter().enumerate() {
                    if is_missing(c) {
                        return Err(Error::Data(format!("row {}, column {name:?}: missing category", i + 1)));
                    }
                    if !levels.contains(c) {
                        levels.push(c);
                    }
                }
                for level in levels.iter().skip(1) {
                    names.push(format!("{name}={level}"));
                    cols.push(cells.iter().map(|c| f64::from(u8::from(c == level))).collect());
                }
            }
        }
    }
    Ok((names, cols))
}

fn impute(name: &str, vals: &[Option<f64>], groups: &[Group]) -> Result<Vec<f64>> {
    let mut mean = [0.0; 2];
    for g in Group::BOTH {
        let obs: Vec<f64> = vals
            .iter()
            .zip(groups)
            .filter(|(_, &gr)| gr == g)
            .filter_map(|(v, _)| *v)
            .collect();
        mean[g.index()] = if obs.is_empty() {
            f64::NAN
        } else {
            obs.iter().sum::<f64>() / obs.len() as f64
        };
    }
    vals.iter()
        .zip(groups)
        .enumerate()
        .map(|(i, (v, g))| match v {
            Some(x) => Ok(*x),
            None if mean[g.index()].is_finite() => Ok(mean[g.index()]),
            None => Err(Error::Data(format!(
                "row {}, column {name:?}: missing and group {g} has no observed values",
                i + 1
            ))),
        })
        .collect()
}

/// Reads a CSV with a header row. Group labels are assigned in sorted
/// order: the smaller label becomes group a.
pub fn ingest_labeled(
    path: &Path,
    group_col: &str,
    class_col: &str,
    opts: IngestOptions,
) -> Result<(GroupedColumns, [String; 2])> {
    let t = read_table(path)?;
    let gi = column_index(&t, group_col)?;
    let ci = column_index(&t, class_col)?;
    let (groups, labels) = parse_groups(&t, gi)?;
    let classes = parse_classes(&t, ci)?;
    let (names, cols) = feature_columns(&t, &[gi, ci], &groups, opts)?;
    Ok((GroupedColumns::new(names, cols, groups, classes)?, labels))
}

pub fn ingest(path: &Path, group_col: &str, class_col: &str, opts: IngestOptions) -> Result<GroupedColumns> {
    Ok(ingest_labeled(path, group_col, class_col, opts)?.0)
}

/// Appends the columns of an auxiliary CSV (same rows, same order).
/// Group and class columns in the auxiliary file are ignored.
pub fn append_aux(
    data: &GroupedColumns,
    path: &Path,
    group_col: &str,
    class_col: &str,
    opts: IngestOptions,
) -> Result<GroupedColumns> {
    let t = read_table(path)?;
    if t.rows.len() != data.n_rows() {
        return Err(Error::Data(format!(
            "{}: {} rows, main data has {}",
            path.display(),
            t.rows.len(),
            data.n_rows()
        )));
    }
    let skip: Vec<usize> = [group_col, class_col]
        .iter()
        .filter_map(|c| t.header.iter().position(|h| h == c))
        .collect();
    let (aux_names, aux_cols) = feature_columns(&t, &skip, data.groups(), opts)?;
    let mut names = data.names().to_vec();
    names.extend(aux_names);
    let mut cols: Vec<Vec<f64>> = (0..data.n_features()).map(|j| data.feature(j).to_vec()).collect();
    cols.extend(aux_cols);
    GroupedColumns::new(names, cols, data.groups().to_vec(), data.classes().to_vec())
}

/// Writes `data` as CSV with trailing `group` (a/b) and `class` columns.
/// Values use the shortest round-trip representation.
pub fn write_csv(data: &GroupedColumns, path: &Path) -> Result<()> {
    if data.names().iter().any(|n| n == "group" || n == "class") {
        return Err(Error::Data("feature named group or class".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header: Vec<&str> = data.names().iter().map(String::as_str).collect();
    header.extend(["group", "class"]);
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..data.n_rows() {
        row.clear();
        for j in 0..data.n_features() {
            row.push(format!("{:?}", data.feature(j)[i]));
        }
        row.push(data.groups()[i].to_string());
        row.push(data.classes()[i].to_string());
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Everything one experiment needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    /// Auxiliary source; when set every main-file column is owned.
    pub aux: Option<PathBuf>,
    /// Owned column names when there is no auxiliary file. Empty picks
    /// one column at random.
    pub owned: Vec<String>,
    pub group_col: String,
    pub class_col: String,
    pub log1p: bool,
    pub strategy: Strategy,
    pub rounds: usize,
    pub epsilon: f64,
    pub use_protected: bool,
    /// Fraction of rows held out for evaluation; 0 is in-sample.
    pub holdout: f64,
    pub zero_correlation: bool,
    pub noisy: bool,
    pub scoring: ScoringKind,
    pub batch: Batch,
    pub auc_source: AucSource,
    pub seed: u64,
    /// Bootstrap resamples per round; 0 skips intervals.
    pub bootstrap: usize,
    /// Weights for the weighted-objective sweep.
    pub sweep: Vec<f64>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(data: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            data: data.into(),
            aux: None,
            owned: Vec::new(),
            group_col: "group".into(),
            class_col: "class".into(),
            log1p: false,
            strategy: Strategy::FairAuc,
            rounds: 10,
            epsilon: 1e-6,
            use_protected: true,
            holdout: 0.0,
            zero_correlation: false,
            noisy: false,
            scoring: ScoringKind::Logistic,
            batch: Batch::Single,
            auc_source: AucSource::Empirical,
            seed: 0,
            bootstrap: 1000,
            sweep: Vec::new(),
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(domain("epsilon must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return Err(domain("holdout must lie in [0, 1)"));
        }
        if self.aux.is_some() && !self.owned.is_empty() {
            return Err(domain("owned columns and an auxiliary file are mutually exclusive"));
        }
        if let Some(w) = self.sweep.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(domain(format!("sweep weight {w} outside [0, 1]")));
        }
        self.strategy.validate()
    }

    fn state(&self, owned: Vec<usize>) -> AcquisitionState {
        let mut st = AcquisitionState::new(owned, self.seed);
        st.scoring = self.scoring;
        st.use_protected = self.use_protected;
        st.epsilon = self.epsilon;
        st.zero_correlation = self.zero_correlation;
        st.batch = self.batch;
        st.noisy = self.noisy;
        st.auc_source = self.auc_source;
        st
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundCi {
    pub round: usize,
    pub auc_a: ConfidenceInterval,
    pub auc_b: ConfidenceInterval,
    pub auc_all: ConfidenceInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub round: usize,
    pub bias: f64,
    pub auc_all: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoTrajectory {
    pub weight: f64,
    pub points: Vec<ParetoPoint>,
}

/// Realized improvement of the previously disadvantaged group against
/// the bound recorded for the selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryMargin {
    pub round: usize,
    pub group: Group,
    pub bound: f64,
    pub improvement: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub group_labels: [String; 2],
    pub features: Vec<String>,
    pub owned: Vec<usize>,
    pub rounds: Vec<RoundRecord>,
    pub confidence: Vec<RoundCi>,
    pub pareto: Vec<ParetoTrajectory>,
    pub theory: Vec<TheoryMargin>,
    pub noise: Vec<NoisePlan>,
    pub perfect_separation: bool,
}

/// The owned column picked when none is configured.
pub fn random_owned(seed: u64, n_features: usize) -> usize {
    round_rng(seed, 0, OWNED_STREAM).random_range(0..n_features)
}

fn resolve_owned(cfg: &ExperimentConfig, data: &GroupedColumns, n_main: usize) -> Result<Vec<usize>> {
    if cfg.aux.is_some() {
        return Ok((0..n_main).collect());
    }
    if cfg.owned.is_empty() {
        if data.n_features() == 0 {
            return Err(Error::Data("no feature columns".into()));
        }
        return Ok(vec![random_owned(cfg.seed, data.n_features())]);
    }
    cfg.owned
        .iter()
        .map(|n| {
            data.names()
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| Error::Data(format!("owned column {n:?} not found")))
        })
        .collect()
}

/// Loads the configured data and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let opts = IngestOptions { log1p: cfg.log1p };
    let (mut data, labels) = ingest_labeled(&cfg.data, &cfg.group_col, &cfg.class_col, opts)?;
    let n_main = data.n_features();
    if let Some(aux) = &cfg.aux {
        data = append_aux(&data, aux, &cfg.group_col, &cfg.class_col, opts)?;
    }
    let owned = resolve_owned(cfg, &data, n_main)?;
    run_on(cfg, &data, owned, labels)
}

/// Runs the configured experiment on in-memory data.
pub fn run_on(
    cfg: &ExperimentConfig,
    data: &GroupedColumns,
    owned: Vec<usize>,
    group_labels: [String; 2],
) -> Result<Report> {
    cfg.validate()?;
    if let Some(&j) = owned.iter().find(|&&j| j >= data.n_features()) {
        return Err(domain(format!("owned feature {j} out of range")));
    }
    let state = cfg.state(owned.clone());
    let split = if cfg.holdout > 0.0 {
        Some(Split::stratified(data, cfg.holdout, cfg.seed)?)
    } else {
        None
    };
    let out = acquisition::run_detailed(&state, data, &cfg.strategy, cfg.rounds, split.as_ref())?;

    let eval = match &split {
        Some(s) => data.subset(&s.eval)?,
        None => data.clone(),
    };
    let mut confidence = Vec::new();
    if cfg.bootstrap > 0 {
        for (rec, scores) in out.records.iter().zip(&out.scores) {
            let mut rng = round_rng(cfg.seed, rec.round, BOOTSTRAP_STREAM);
            let mut ci = |g: Option<Group>| -> Result<ConfidenceInterval> {
                let rows: Vec<usize> = match g {
                    Some(g) => eval.group_rows(g),
                    None => (0..eval.n_rows()).collect(),
                };
                let s: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
                let y: Vec<u8> = rows.iter().map(|&i| eval.classes()[i]).collect();
                bootstrap_ci(&s, &y, cfg.bootstrap, &mut rng)
            };
            confidence.push(RoundCi {
                round: rec.round,
                auc_a: ci(Some(Group::A))?,
                auc_b: ci(Some(Group::B))?,
                auc_all: ci(None)?,
            });
        }
    }

    let mut pareto = Vec::with_capacity(cfg.sweep.len());
    for &w in &cfg.sweep {
        let run = acquisition::run_detailed(&state, data, &Strategy::Weighted(w), cfg.rounds, split.as_ref())?;
        pareto.push(ParetoTrajectory {
            weight: w,
            points: run
                .records
                .iter()
                .map(|r| ParetoPoint {
                    round: r.round,
                    bias: r.bias,
                    auc_all: r.auc_all,
                })
                .collect(),
        });
    }

    let theory = out
        .records
        .windows(2)
        .filter_map(|w| {
            let bound = w[1].theory_bound?;
            let g = w[0].disadvantaged;
            let auc = |r: &RoundRecord| if g == Group::A { r.auc_a } else { r.auc_b };
            let improvement = auc(&w[1]) - auc(&w[0]);
            Some(TheoryMargin {
                round: w[1].round,
                group: g,
                bound,
                improvement,
                margin: improvement - bound,
            })
        })
        .collect();

    Ok(Report {
        config: cfg.clone(),
        group_labels,
        features: data.names().to_vec(),
        owned,
        rounds: out.records,
        confidence,
        pareto,
        theory,
        noise: out.noise,
        perfect_separation: out.perfect_separation,
    })
}

/// Output format for [`emit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

pub fn to_json(report: &Report) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Data(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(s: &str) -> Result<Report> {
    serde_json::from_str(s).map_err(|e| Error::Data(e.to_string()))
}

/// Round table: Round, Feature, AUC_a, AUC_b, AUC_All, Bias, Disadv.
/// The baseline row lists the owned features.
pub fn to_csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(["Round", "Feature", "AUC_a", "AUC_b", "AUC_All", "Bias", "Disadv"])
        .map_err(err)?;
    for r in &report.rounds {
        let idx = if r.round == 0 { &report.owned } else { &r.features };
        let feature = idx
            .iter()
            .map(|&j| report.features.get(j).cloned().unwrap_or_else(|| j.to_string()))
            .collect::<Vec<_>>()
            .join("+");
        w.write_record([
            r.round.to_string(),
            feature,
            format!("{:.4}", r.auc_a),
            format!("{:.4}", r.auc_b),
            format!("{:.4}", r.auc_all),
            format!("{:.4}", r.bias),
            r.disadvantaged.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// Writes the report in `format` to `path`.
pub fn emit(report: &Report, format: Format, path: &Path) -> Result<()> {
    let body = match format {
        Format::Json => to_json(report)?,
        Format::Csv => to_csv(report)?,
    };
    std::fs::write(path, body).map_err(|e| io_err(path, e))
}

/// One-line JSON error record for the diagnostic stream.
pub fn error_line(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}
