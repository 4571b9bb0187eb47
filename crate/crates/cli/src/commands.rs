use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use cohortfair::cohort::{self, AgeBand, Cell, CellCounts, CohortTable, Label, ParseOptions, Sex};
use cohortfair::eval::{self, ComparisonMode, GroupComparison, PredictionRow, PredictionSet};
use cohortfair::lp::LpSolution;
use cohortfair::scenario::{self, PlanSummary, RoundedTargets, ScenarioError, ScenarioSpec, REFERENCE_SEX_COUNTS};
use cohortfair::strategies::{self, Example, Network, Strategy, TrainLog};
use serde::{Deserialize, Serialize};

use crate::args::{BuildArgs, EvalArgs, SolveArgs, TableArgs, TrainToyArgs};
use crate::config::{load_config, RunConfig};
use crate::error::CliError;
use crate::output::Artifacts;

pub struct Context {
    pub quiet: bool,
}

impl Context {
    fn progress(&self, message: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", message.as_ref());
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn config_or_default(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => load_config(p),
        None => Ok(RunConfig::default()),
    }
}

pub fn build(ctx: &Context, args: &BuildArgs) -> Result<(), CliError> {
    let mut config = config_or_default(args.config.as_deref())?;
    if let Some(seeds) = &args.seeds {
        config.scenarios.seeds = seeds.clone();
    }
    if let Some(per_cell) = args.per_cell {
        config.scenarios.per_cell = per_cell;
    }
    config.validate()?;

    let options = ParseOptions {
        delimiter: config.cohort.delimiter as u8,
        columns: config.cohort.columns.clone(),
    };
    let cohort_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Cohort { path, source }
    };
    let (parsed, skip) = cohort::parse_metadata(open(&args.metadata)?, &options).map_err(cohort_err(&args.metadata))?;
    let duplicates = match &args.duplicates {
        Some(p) => cohort::parse_duplicate_pairs(open(p)?, options.delimiter).map_err(cohort_err(p))?,
        None => Vec::new(),
    };
    let cutoff = config.cohort.age_cutoff;
    let (kept, report) = cohort::filter_pipeline(&parsed, skip, &duplicates, config.cohort.selection_seed, cutoff)
        .map_err(cohort_err(&args.metadata))?;
    ctx.progress(format!(
        "cohort: {} rows read, {} records after filtering",
        report.skip.rows_read, report.final_size
    ));

    let plans = scenario::build_all_scenarios(&kept, &config.scenario_specs(), cutoff)?;

    let mut artifacts = Artifacts::default();
    artifacts.add_json("config.json", &config)?;
    let mut cohort_csv = Vec::new();
    cohort::write_metadata(&kept, &mut cohort_csv, &options).map_err(cohort_err(&args.metadata))?;
    artifacts.add("cohort.csv", cohort_csv);
    artifacts.add_json("filter_report.json", &report)?;
    let mut index = Vec::with_capacity(plans.len());
    for plan in &plans {
        let stem = plan.file_stem();
        let mut manifest = Vec::new();
        plan.write_manifest(&mut manifest)
            .map_err(|e| CliError::Data(format!("manifest {stem}: {e}")))?;
        artifacts.add(format!("manifests/{stem}.csv"), manifest);
        let summary = plan.summary();
        artifacts.add_json(format!("manifests/{stem}.json"), &summary)?;
        index.push(summary);
    }
    artifacts.add_json("plans.json", &index)?;
    let n = artifacts.len();
    artifacts.commit(&args.out)?;
    ctx.progress(format!("build: {} plans, {n} files under {}", plans.len(), args.out.display()));
    Ok(())
}

/// `M100` is 0, `F100` is 1, `F25M75` is 0.25.
pub fn parse_scenario_name(name: &str) -> Result<f64, CliError> {
    let bad = || CliError::Usage(format!("unrecognised scenario `{name}` (expected e.g. M100, F25M75, F100)"));
    if name == "M100" {
        return Ok(0.0);
    }
    if name == "F100" {
        return Ok(1.0);
    }
    let rest = name.strip_prefix('F').ok_or_else(bad)?;
    let (f, m) = rest.split_once('M').ok_or_else(bad)?;
    let f: u32 = f.parse().map_err(|_| bad())?;
    let m: u32 = m.parse().map_err(|_| bad())?;
    if f + m != 100 {
        return Err(bad());
    }
    Ok(f64::from(f) / 100.0)
}

#[derive(Debug, Deserialize)]
struct BoundRow {
    label: String,
    sex: String,
    age_band: String,
    count: u64,
}

fn parse_band(s: &str) -> Option<AgeBand> {
    match s.trim().to_ascii_lowercase().as_str() {
        "under_cutoff" | "under60" | "<60" => Some(AgeBand::Under60),
        "at_least_cutoff" | "atleast60" | ">=60" => Some(AgeBand::AtLeast60),
        _ => None,
    }
}

/// Reads eight cell counts (`label,sex,age_band,count`), each cell exactly once.
pub fn read_bounds(path: &Path) -> Result<CohortTable, CliError> {
    let mut counts = CellCounts::default();
    let mut seen = HashSet::new();
    let bad = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    for (i, row) in csv::Reader::from_reader(open(path)?).deserialize::<BoundRow>().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let label = Label::parse(&row.label).ok_or_else(|| bad(format!("row {}: label `{}`", i + 1, row.label)))?;
        let sex = match Sex::parse(&row.sex) {
            Sex::Unknown => return Err(bad(format!("row {}: sex `{}`", i + 1, row.sex))),
            s => s,
        };
        let band = parse_band(&row.age_band).ok_or_else(|| bad(format!("row {}: age_band `{}`", i + 1, row.age_band)))?;
        let cell = Cell::new(label, sex, band);
        if !seen.insert(cell) {
            return Err(bad(format!("cell {cell} listed twice")));
        }
        counts.set(cell, row.count);
    }
    if let Some(missing) = Cell::ALL.iter().find(|c| !seen.contains(c)) {
        return Err(bad(format!("cell {missing} missing")));
    }
    Ok(CohortTable {
        counts,
        median_age_cutoff: cohort::DEFAULT_AGE_CUTOFF,
    })
}

fn reserved_table(bounds: Option<&Path>, per_cell: u64) -> Result<CohortTable, CliError> {
    let table = match bounds {
        Some(p) => read_bounds(p)?,
        None => CohortTable::isic_archive_snapshot(),
    };
    table.after_reservation(per_cell).ok_or_else(|| {
        let cell = *Cell::ALL.iter().find(|&&c| table.get(c) < per_cell).expect("some cell is short");
        CliError::Scenario(ScenarioError::Capacity {
            cell,
            needed: per_cell,
            available: table.get(cell),
        })
    })
}

#[derive(Debug, Serialize)]
pub struct Variable {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub scenario: String,
    pub female_fraction: f64,
    pub per_cell: u64,
    pub status: cohortfair::lp::LpStatus,
    pub objective: f64,
    pub variables: Vec<Variable>,
    pub targets: RoundedTargets,
}

fn solve_report(spec: &ScenarioSpec, table: &CohortTable) -> Result<SolveReport, CliError> {
    let (_, solution, targets): (_, LpSolution, _) =
        scenario::plan_targets(table, spec).map_err(|e| CliError::Scenario(wrap(e, spec)))?;
    Ok(SolveReport {
        scenario: spec.name(),
        female_fraction: spec.female_fraction,
        per_cell: spec.test_cell_size,
        status: solution.status,
        objective: solution.objective_value,
        variables: scenario::VARIABLE_NAMES
            .iter()
            .zip(&solution.values)
            .map(|(&name, &value)| Variable { name, value })
            .collect(),
        targets,
    })
}

fn wrap(e: ScenarioError, spec: &ScenarioSpec) -> ScenarioError {
    ScenarioError::Context {
        scenario: spec.name(),
        seed: spec.seeds.first().copied().unwrap_or(0),
        source: Box::new(e),
    }
}

pub fn solve(args: &SolveArgs) -> Result<String, CliError> {
    let fraction = parse_scenario_name(&args.scenario)?;
    let mut spec = ScenarioSpec::new(fraction);
    spec.age_ratio = args.age_ratio;
    spec.test_cell_size = args.per_cell;
    spec.validate()?;
    let table = reserved_table(args.bounds.as_deref(), args.per_cell)?;
    let report = solve_report(&spec, &table)?;
    serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))
}

/// Returns the printed table and whether every scenario matched.
pub fn reproduce_table1(args: &TableArgs) -> Result<(String, bool), CliError> {
    let table = reserved_table(args.bounds.as_deref(), args.per_cell)?;
    let mut out = String::from("scenario   malignant M/F   benign M/F   expected M/F   result\n");
    let mut all_match = true;
    for (spec, (name, male, female)) in ScenarioSpec::standard_set().iter().zip(REFERENCE_SEX_COUNTS) {
        let t = solve_report(spec, &table)?.targets;
        let ok = t.malignant_male == male
            && t.malignant_female == female
            && t.benign_male == male
            && t.benign_female == female;
        all_match &= ok;
        out.push_str(&format!(
            "{:<10} {:>6}/{:<6}   {:>5}/{:<5}  {:>5}/{:<5}     {}\n",
            name,
            t.malignant_male,
            t.malignant_female,
            t.benign_male,
            t.benign_female,
            male,
            female,
            if ok { "match" } else { "MISMATCH" }
        ));
    }
    Ok((out, all_match))
}

/// Synthetic data sizes and composition for one scenario.
#[derive(Debug, Clone, Serialize)]
struct ToyShape {
    scenario: String,
    female_fraction: f64,
    n_train: usize,
    n_val: usize,
    n_test: usize,
}

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    scenario: &'a str,
    strategy: Strategy,
    seed: u64,
    /// Seeds of the train, validation, test and probe-fit draws.
    data_seeds: [u64; 4],
    hidden_dim: usize,
    training: strategies::StrategyConfig,
    train_data: strategies::SyntheticConfig,
    test_diagnosis_auc: Option<f64>,
    probe_sex_auc: Option<f64>,
    log: &'a TrainLog,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    scenario: String,
    strategy: Strategy,
    seed: u64,
    best_epoch: usize,
    stopped_epoch: usize,
    test_diagnosis_auc: Option<f64>,
    probe_sex_auc: Option<f64>,
}

fn strategies_from(arg: &str) -> Result<Vec<Strategy>, CliError> {
    if arg == "all" {
        return Ok(Strategy::ALL.to_vec());
    }
    arg.split(',')
        .map(|s| s.trim().parse::<Strategy>().map_err(CliError::Usage))
        .collect()
}

fn to_eval_sex(e: &Example) -> eval::Sex {
    if e.sex == 1 {
        eval::Sex::Female
    } else {
        eval::Sex::Male
    }
}

pub fn train_toy(ctx: &Context, args: &TrainToyArgs) -> Result<(), CliError> {
    let mut config = config_or_default(args.config.as_deref())?;
    if let Some(l) = args.lambda {
        config.training.lambda = l;
    }
    if let Some(r) = args.rho {
        config.synthetic.sex_label_correlation = r;
    }
    if let Some(d) = args.feature_dim {
        config.synthetic.feature_dim = d;
    }
    if let Some(h) = args.hidden_dim {
        config.training.hidden_dim = h;
    }
    if let Some(seeds) = &args.seeds {
        config.scenarios.seeds = seeds.clone();
    }
    let mut shape = ToyShape {
        scenario: args.scenario.clone().unwrap_or_else(|| "toy".into()),
        female_fraction: config.synthetic.female_fraction,
        n_train: config.synthetic.n_train,
        n_val: config.synthetic.n_val,
        n_test: config.synthetic.n_test,
    };
    if let Some(path) = &args.plan {
        let plan: PlanSummary = serde_json::from_reader(open(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        shape = ToyShape {
            scenario: args.scenario.clone().unwrap_or(plan.scenario),
            female_fraction: plan.female_fraction,
            n_train: plan.train_size,
            n_val: plan.val_size,
            n_test: plan.test_size,
        };
        config.synthetic.female_fraction = plan.female_fraction;
        config.synthetic.n_train = plan.train_size;
        config.synthetic.n_val = plan.val_size;
        config.synthetic.n_test = plan.test_size;
    }
    config.validate()?;
    let strategies = strategies_from(&args.strategy)?;

    let mut artifacts = Artifacts::default();
    let mut summaries = Vec::new();
    for &seed in &config.scenarios.seeds {
        let data_seeds = [0, 1, 2, 3].map(|k| seed.wrapping_mul(4).wrapping_add(k));
        let data_err = |source| CliError::Strategy {
            scenario: shape.scenario.clone(),
            seed,
            strategy: "data".into(),
            source,
        };
        let rho = config.synthetic.sex_label_correlation;
        let train_cfg = config.synthetic_config(shape.n_train, rho, shape.female_fraction, data_seeds[0]);
        // Validation, test and probe data are sex-balanced with no sex-label correlation.
        let train_set = strategies::generate_synthetic(&train_cfg).map_err(data_err)?;
        let val_set =
            strategies::generate_synthetic(&config.synthetic_config(shape.n_val, 0.0, 0.5, data_seeds[1])).map_err(data_err)?;
        let test_set =
            strategies::generate_synthetic(&config.synthetic_config(shape.n_test, 0.0, 0.5, data_seeds[2])).map_err(data_err)?;
        let probe_set =
            strategies::generate_synthetic(&config.synthetic_config(shape.n_test, 0.0, 0.5, data_seeds[3])).map_err(data_err)?;

        for &strategy in &strategies {
            let err = |source| CliError::Strategy {
                scenario: shape.scenario.clone(),
                seed,
                strategy: strategy.as_str().into(),
                source,
            };
            let training = config.strategy_config(strategy, seed);
            let init = Network::init(config.synthetic.feature_dim, config.training.hidden_dim, seed);
            let (net, log) = strategies::train(&init, &train_set, &val_set, &training).map_err(err)?;
            let scores = strategies::predict(&net, &test_set).map_err(err)?;
            let test_auc = strategies::diagnosis_auc(&net, &test_set).map_err(err)?;
            let probe_auc = strategies::probe_sex_auc(&net, &probe_set, &test_set).map_err(err)?;

            let rows: Vec<PredictionRow> = test_set
                .iter()
                .zip(&scores)
                .enumerate()
                .map(|(i, (e, &score))| PredictionRow {
                    id: format!("{}-s{seed}-{i:05}", shape.scenario),
                    score,
                    label: e.diagnosis,
                    sex: to_eval_sex(e),
                    scenario: shape.scenario.clone(),
                    seed,
                    strategy: strategy.as_str().into(),
                })
                .collect();
            let stem = format!("{}_{}_seed{seed}", shape.scenario, strategy.as_str());
            let mut csv = Vec::new();
            eval::write_predictions(&rows, &mut csv)?;
            artifacts.add(format!("predictions/{stem}.csv"), csv);
            artifacts.add_json(
                format!("logs/{stem}.json"),
                &RunRecord {
                    scenario: &shape.scenario,
                    strategy,
                    seed,
                    data_seeds,
                    hidden_dim: config.training.hidden_dim,
                    training,
                    train_data: train_cfg.clone(),
                    test_diagnosis_auc: test_auc,
                    probe_sex_auc: probe_auc,
                    log: &log,
                },
            )?;
            ctx.progress(format!(
                "{} seed {seed} {:<11} epochs {:>2} (best {:>2})  diagnosis AUC {:.3}  sex probe AUC {:.3}",
                shape.scenario,
                strategy.as_str(),
                log.stopped_epoch,
                log.best_epoch,
                test_auc.unwrap_or(f64::NAN),
                probe_auc.unwrap_or(f64::NAN),
            ));
            summaries.push(RunSummary {
                scenario: shape.scenario.clone(),
                strategy,
                seed,
                best_epoch: log.best_epoch,
                stopped_epoch: log.stopped_epoch,
                test_diagnosis_auc: test_auc,
                probe_sex_auc: probe_auc,
            });
        }
    }
    artifacts.add_json("train_summary.json", &summaries)?;
    artifacts.commit(&args.out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub mode: ComparisonMode,
    pub inputs: Vec<String>,
    pub comparisons: Vec<GroupComparison>,
}

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for pattern in patterns {
        let matches = glob::glob(pattern).map_err(|e| CliError::Usage(format!("bad pattern `{pattern}`: {e}")))?;
        let mut found = false;
        for entry in matches {
            let path = entry.map_err(|e| {
                let path = e.path().to_path_buf();
                CliError::io(&path, e.into())
            })?;
            if path.is_file() {
                files.push(path);
                found = true;
            }
        }
        if !found {
            return Err(CliError::Data(format!("no prediction files match `{pattern}`")));
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

pub fn evaluate(ctx: &Context, args: &EvalArgs) -> Result<(), CliError> {
    let files = expand(&args.predictions)?;
    let mut runs: Vec<PredictionSet> = Vec::new();
    for f in &files {
        let sets = eval::read_predictions(open(f)?).map_err(|e| CliError::Data(format!("{}: {e}", f.display())))?;
        runs.extend(sets);
    }
    let mode = if args.per_lesion {
        ComparisonMode::PerLesion
    } else {
        ComparisonMode::PerSeedAuc
    };
    let comparisons = eval::compare_subgroups(&runs, mode)?;
    let boxplot = eval::emit_boxplot_data(&comparisons);

    let mut artifacts = Artifacts::default();
    let mut csv = Vec::new();
    eval::write_boxplot_csv(&boxplot, &mut csv)?;
    artifacts.add("boxplot.csv", csv);
    let report = EvalReport {
        mode,
        inputs: files
            .iter()
            .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()))
            .collect(),
        comparisons,
    };
    artifacts.add_json("report.json", &report)?;
    for c in &report.comparisons {
        ctx.progress(format!(
            "{:<8} {:<11} female {:.3}  male {:.3}  p {:.4} {:<4} {}",
            c.scenario,
            c.strategy,
            c.report.auc_female,
            c.report.auc_male,
            c.significance.p_value,
            c.significance.band.to_string(),
            c.significance.direction.marker()
        ));
    }
    artifacts.commit(&args.out)?;
    Ok(())
}
