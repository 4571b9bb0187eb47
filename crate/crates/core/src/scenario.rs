//! Sex-ratio scenarios: the 14-variable LP that sizes each training pool,
//! balanced test reservation, rounding of the LP optimum into per-cell
//! targets, and seeded sampling into train/val/test manifests.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{self, AgeBand, Cell, CellCounts, Cohort, CohortError, CohortTable, Label, Sex};
use crate::lp::{self, LpError, LpProblem, LpSolution, LpStatus};
use crate::rng::{self, RngId, Stream};

pub const DEFAULT_TEST_CELL_SIZE: u64 = 158;
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const STANDARD_FEMALE_FRACTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// Share of each cell routed to validation.
pub const VAL_FRACTION: f64 = 0.2;

/// Malignant (male, female) counts reported for the standard scenarios on
/// the archive snapshot with 158 test lesions per cell. Benign mirrors them.
pub const REFERENCE_SEX_COUNTS: [(&str, u64, u64); 5] = [
    ("M100", 2206, 0),
    ("F25M75", 2206, 735),
    ("F50M50", 2206, 2206),
    ("F75M25", 809, 2426),
    ("F100", 0, 2426),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("cell {cell} holds {available} records, {needed} required")]
    Capacity { cell: Cell, needed: u64, available: u64 },
    #[error("LP is {0:?}")]
    NotOptimal(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error("scenario {scenario}, seed {seed}: {source}")]
    Context {
        scenario: String,
        seed: u64,
        #[source]
        source: Box<ScenarioError>,
    },
}

impl ScenarioError {
    fn within(self, scenario: &str, seed: u64) -> Self {
        ScenarioError::Context {
            scenario: scenario.to_string(),
            seed,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &ScenarioError {
        match self {
            ScenarioError::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub female_fraction: f64,
    pub age_ratio: f64,
    pub seeds: Vec<u64>,
    pub test_cell_size: u64,
}

impl ScenarioSpec {
    pub fn new(female_fraction: f64) -> Self {
        Self {
            female_fraction,
            age_ratio: 1.0,
            seeds: DEFAULT_SEEDS.to_vec(),
            test_cell_size: DEFAULT_TEST_CELL_SIZE,
        }
    }

    /// The five standard compositions from male-only to female-only.
    pub fn standard_set() -> Vec<Self> {
        STANDARD_FEMALE_FRACTIONS.iter().map(|&f| Self::new(f)).collect()
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    /// `M100`, `F25M75`, ..., `F100`.
    pub fn name(&self) -> String {
        let female = (self.female_fraction * 100.0).round() as u32;
        match female {
            0 => "M100".to_string(),
            100 => "F100".to_string(),
            f => format!("F{f}M{}", 100 - f),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let f = self.female_fraction;
        if !(0.0..=1.0).contains(&f) {
            return Err(ScenarioError::InvalidSpec(format!("female_fraction {f} outside [0, 1]")));
        }
        if !(self.age_ratio.is_finite() && self.age_ratio > 0.0) {
            return Err(ScenarioError::InvalidSpec(format!("age_ratio {} must be > 0", self.age_ratio)));
        }
        if self.seeds.is_empty() {
            return Err(ScenarioError::InvalidSpec("seed list is empty".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(ScenarioError::InvalidSpec("seeds must be distinct".into()));
        }
        Ok(())
    }
}

/// Ratios fixed by a scenario. `None` for the sex ratios of a single-sex scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSet {
    /// Malignant male : female (r).
    pub malignant_sex: Option<f64>,
    /// Malignant male under : over cutoff (s).
    pub malignant_male_age: f64,
    /// Malignant female under : over cutoff (t).
    pub malignant_female_age: f64,
    /// Benign male under : over cutoff (u).
    pub benign_male_age: f64,
    /// Benign female under : over cutoff (v).
    pub benign_female_age: f64,
    /// Benign male : female (w).
    pub benign_sex: Option<f64>,
    pub female_only: bool,
    pub male_only: bool,
}

impl RatioSet {
    fn age_ratio(&self, label: Label, sex: Sex) -> f64 {
        match (label, sex) {
            (Label::Malignant, Sex::Male) => self.malignant_male_age,
            (Label::Malignant, _) => self.malignant_female_age,
            (Label::Benign, Sex::Male) => self.benign_male_age,
            (Label::Benign, _) => self.benign_female_age,
        }
    }
}

pub fn derive_ratios(spec: &ScenarioSpec) -> RatioSet {
    let f = spec.female_fraction;
    let sex = (f > 0.0 && f < 1.0).then(|| (1.0 - f) / f);
    let a = spec.age_ratio;
    RatioSet {
        malignant_sex: sex,
        malignant_male_age: a,
        malignant_female_age: a,
        benign_male_age: a,
        benign_female_age: a,
        benign_sex: sex,
        female_only: f >= 1.0,
        male_only: f <= 0.0,
    }
}

/// Column of each decision variable in the LP.
pub mod var {
    pub const MALIGNANT: usize = 0;
    pub const BENIGN: usize = 1;
    pub const MALIGNANT_MALE: usize = 2;
    pub const MALIGNANT_FEMALE: usize = 3;
    pub const BENIGN_MALE: usize = 4;
    pub const BENIGN_FEMALE: usize = 5;
    /// First of the eight per-cell variables, laid out in `Cell::ALL` order.
    pub const FIRST_CELL: usize = 6;
    pub const COUNT: usize = 14;
}

pub const VARIABLE_NAMES: [&str; var::COUNT] = [
    "malignant",
    "benign",
    "malignant_male",
    "malignant_female",
    "benign_male",
    "benign_female",
    "malignant_male_under",
    "malignant_male_over",
    "malignant_female_under",
    "malignant_female_over",
    "benign_male_under",
    "benign_male_over",
    "benign_female_under",
    "benign_female_over",
];

fn cell_var(cell: Cell) -> usize {
    var::FIRST_CELL + cell.index()
}

fn row(terms: &[(usize, f64)]) -> Vec<f64> {
    let mut r = vec![0.0; var::COUNT];
    for &(j, a) in terms {
        r[j] += a;
    }
    r
}

/// Sex ratio row `ratio * female - male = 0`, or a zero-forcing row for
/// the absent sex of a single-sex scenario.
fn sex_row(ratios: &RatioSet, male: usize, female: usize, ratio: Option<f64>) -> Vec<f64> {
    match (ratio, ratios.male_only, ratios.female_only) {
        (Some(r), _, _) => row(&[(female, r), (male, -1.0)]),
        (None, true, _) => row(&[(female, 1.0)]),
        (None, _, true) => row(&[(male, 1.0)]),
        (None, false, false) => unreachable!("derive_ratios sets a flag when a sex ratio is absent"),
    }
}

/// Maximizes the malignant count subject to class balance, the sex and age
/// ratios, and the per-cell capacities in `table`.
pub fn build_lp(table: &CohortTable, ratios: &RatioSet) -> LpProblem {
    use var::*;
    let mal_m_u = cell_var(Cell::ALL[0]);
    let mal_m_o = cell_var(Cell::ALL[1]);
    let mal_f_u = cell_var(Cell::ALL[2]);
    let mal_f_o = cell_var(Cell::ALL[3]);
    let ben_m_u = cell_var(Cell::ALL[4]);
    let ben_m_o = cell_var(Cell::ALL[5]);
    let ben_f_u = cell_var(Cell::ALL[6]);
    let ben_f_o = cell_var(Cell::ALL[7]);

    let rows = [
        row(&[(MALIGNANT, 1.0), (BENIGN, -1.0)]),
        sex_row(ratios, MALIGNANT_MALE, MALIGNANT_FEMALE, ratios.malignant_sex),
        row(&[(mal_m_o, ratios.malignant_male_age), (mal_m_u, -1.0)]),
        row(&[(mal_f_o, ratios.malignant_female_age), (mal_f_u, -1.0)]),
        row(&[(MALIGNANT, 1.0), (MALIGNANT_MALE, -1.0), (MALIGNANT_FEMALE, -1.0)]),
        row(&[(MALIGNANT_MALE, 1.0), (mal_m_u, -1.0), (mal_m_o, -1.0)]),
        row(&[(MALIGNANT_FEMALE, 1.0), (mal_f_u, -1.0), (mal_f_o, -1.0)]),
        row(&[(ben_m_o, ratios.benign_male_age), (ben_m_u, -1.0)]),
        row(&[(ben_f_o, ratios.benign_female_age), (ben_f_u, -1.0)]),
        row(&[(BENIGN, 1.0), (BENIGN_MALE, -1.0), (BENIGN_FEMALE, -1.0)]),
        row(&[(BENIGN_FEMALE, 1.0), (ben_f_u, -1.0), (ben_f_o, -1.0)]),
        row(&[(BENIGN_MALE, 1.0), (ben_m_u, -1.0), (ben_m_o, -1.0)]),
        sex_row(ratios, BENIGN_MALE, BENIGN_FEMALE, ratios.benign_sex),
    ];

    let mut objective = vec![0.0; COUNT];
    objective[MALIGNANT] = 1.0;
    let mut problem = LpProblem::new(COUNT)
        .maximize(objective)
        .with_names(VARIABLE_NAMES);
    for r in rows {
        problem = problem.with_equality(r, 0.0);
    }
    let c = &table.counts;
    let aggregate = [
        (MALIGNANT, c.sum_where(|x| x.label == Label::Malignant)),
        (BENIGN, c.sum_where(|x| x.label == Label::Benign)),
        (MALIGNANT_MALE, c.label_sex(Label::Malignant, Sex::Male)),
        (MALIGNANT_FEMALE, c.label_sex(Label::Malignant, Sex::Female)),
        (BENIGN_MALE, c.label_sex(Label::Benign, Sex::Male)),
        (BENIGN_FEMALE, c.label_sex(Label::Benign, Sex::Female)),
    ];
    for (j, bound) in aggregate {
        problem = problem.with_upper_bound(j, bound as f64);
    }
    for cell in Cell::ALL {
        problem = problem.with_upper_bound(cell_var(cell), c.get(cell) as f64);
    }
    problem
}

/// Integer sizes derived from an LP optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundedTargets {
    pub malignant: u64,
    pub benign: u64,
    pub malignant_male: u64,
    pub malignant_female: u64,
    pub benign_male: u64,
    pub benign_female: u64,
    pub cells: CellCounts,
}

impl RoundedTargets {
    pub fn total(&self) -> u64 {
        self.malignant + self.benign
    }
}

fn round_count(x: f64) -> u64 {
    // f64::round rounds half away from zero.
    x.max(0.0).round() as u64
}

/// Rounds the sex-level variables to the nearest integer and splits each
/// total over the two age bands by its age ratio; an odd unit goes to the
/// younger band.
pub fn round_solution(solution: &LpSolution, ratios: &RatioSet) -> Result<RoundedTargets, ScenarioError> {
    if solution.status != LpStatus::Optimal {
        return Err(ScenarioError::NotOptimal(solution.status));
    }
    let x = &solution.values;
    let malignant_male = round_count(x[var::MALIGNANT_MALE]);
    let malignant_female = round_count(x[var::MALIGNANT_FEMALE]);
    let benign_male = round_count(x[var::BENIGN_MALE]);
    let benign_female = round_count(x[var::BENIGN_FEMALE]);
    let mut cells = CellCounts::default();
    for (label, sex, total) in [
        (Label::Malignant, Sex::Male, malignant_male),
        (Label::Malignant, Sex::Female, malignant_female),
        (Label::Benign, Sex::Male, benign_male),
        (Label::Benign, Sex::Female, benign_female),
    ] {
        let ratio = ratios.age_ratio(label, sex);
        let share = total as f64 * ratio / (1.0 + ratio);
        let under = ((share + 0.5).floor() as u64).min(total);
        cells.set(Cell::new(label, sex, AgeBand::Under60), under);
        cells.set(Cell::new(label, sex, AgeBand::AtLeast60), total - under);
    }
    Ok(RoundedTargets {
        malignant: malignant_male + malignant_female,
        benign: benign_male + benign_female,
        malignant_male,
        malignant_female,
        benign_male,
        benign_female,
        cells,
    })
}

/// Draws exactly `targets[cell]` records per cell. Returns sorted indices.
fn draw(cohort: &Cohort, targets: &CellCounts, cutoff: u32, rng: &mut ChaCha8Rng) -> Result<Vec<usize>, ScenarioError> {
    let by_cell = cohort.cell_indices(cutoff);
    let mut chosen = Vec::with_capacity(targets.total() as usize);
    for cell in Cell::ALL {
        let members = &by_cell[&cell];
        let needed = targets.get(cell);
        if (members.len() as u64) < needed {
            return Err(ScenarioError::Capacity {
                cell,
                needed,
                available: members.len() as u64,
            });
        }
        for k in index::sample(rng, members.len(), needed as usize) {
            chosen.push(members[k]);
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

fn require_cells(cohort: &Cohort, cutoff: u32) -> Result<(), ScenarioError> {
    cohort::tabulate(cohort, cutoff)?;
    Ok(())
}

fn split_by(cohort: &Cohort, chosen: &[usize]) -> (Vec<cohort::LesionRecord>, Vec<cohort::LesionRecord>) {
    let mut picked = Vec::with_capacity(chosen.len());
    let mut rest = Vec::with_capacity(cohort.len() - chosen.len());
    let mut next = chosen.iter().peekable();
    for (i, r) in cohort.records.iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            picked.push(r.clone());
        } else {
            rest.push(r.clone());
        }
    }
    (picked, rest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reservation {
    pub test: Vec<String>,
    pub remaining: Cohort,
}

/// Holds out `per_cell` uniformly drawn records from each of the eight cells.
pub fn reserve_test_cells(cohort: &Cohort, per_cell: u64, cutoff: u32, seed: u64) -> Result<Reservation, ScenarioError> {
    require_cells(cohort, cutoff)?;
    let targets = CellCounts([per_cell; 8]);
    let chosen = draw(cohort, &targets, cutoff, &mut rng::rng(seed, Stream::TestReservation))?;
    let (test, rest) = split_by(cohort, &chosen);
    let mut remaining = Cohort::new(rest);
    remaining.provenance = cohort.provenance.clone();
    remaining
        .provenance
        .push(format!("reserved {} test records ({per_cell} per cell, seed {seed})", test.len()));
    Ok(Reservation {
        test: test.into_iter().map(|r| r.image_id).collect(),
        remaining,
    })
}

/// Uniform seeded draw of exactly `targets` records per cell.
pub fn sample_dataset(remaining: &Cohort, targets: &CellCounts, cutoff: u32, seed: u64) -> Result<Cohort, ScenarioError> {
    require_cells(remaining, cutoff)?;
    let chosen = draw(remaining, targets, cutoff, &mut rng::rng(seed, Stream::Subsample))?;
    let (picked, _) = split_by(remaining, &chosen);
    Ok(Cohort::new(picked))
}

/// Stratified split: each cell sends `round(0.2 * n)` records (halves up) to
/// validation, the rest to training.
pub fn split_train_val(sample: &Cohort, cutoff: u32, seed: u64) -> Result<(Cohort, Cohort), ScenarioError> {
    require_cells(sample, cutoff)?;
    let table = cohort::tabulate(sample, cutoff)?;
    let mut val_targets = CellCounts::default();
    for cell in Cell::ALL {
        val_targets.set(cell, (table.get(cell) as f64 * VAL_FRACTION + 0.5).floor() as u64);
    }
    let chosen = draw(sample, &val_targets, cutoff, &mut rng::rng(seed, Stream::TrainValSplit))?;
    let (val, train) = split_by(sample, &chosen);
    Ok((Cohort::new(train), Cohort::new(val)))
}

/// LP solution and rounded targets for one scenario on a table of
/// post-reservation capacities.
pub fn plan_targets(table: &CohortTable, spec: &ScenarioSpec) -> Result<(LpProblem, LpSolution, RoundedTargets), ScenarioError> {
    spec.validate()?;
    let ratios = derive_ratios(spec);
    let problem = build_lp(table, &ratios);
    let solution = lp::solve(&problem)?;
    let targets = round_solution(&solution, &ratios)?;
    Ok((problem, solution, targets))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPlan {
    pub scenario: String,
    pub female_fraction: f64,
    pub seed: u64,
    pub test: Vec<String>,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub lp_solution: LpSolution,
    pub targets: RoundedTargets,
    pub rng: Vec<RngId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Val => "val",
            Role::Test => "test",
        })
    }
}

/// Everything about a plan except the id lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub scenario: String,
    pub female_fraction: f64,
    pub seed: u64,
    pub test_size: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub lp_solution: LpSolution,
    pub targets: RoundedTargets,
    pub rng: Vec<RngId>,
}

impl DatasetPlan {
    pub fn summary(&self) -> PlanSummary {
        PlanSummary {
            scenario: self.scenario.clone(),
            female_fraction: self.female_fraction,
            seed: self.seed,
            test_size: self.test.len(),
            train_size: self.train.len(),
            val_size: self.val.len(),
            lp_solution: self.lp_solution.clone(),
            targets: self.targets,
            rng: self.rng.clone(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, Role)> {
        fn tag(ids: &[String], role: Role) -> impl Iterator<Item = (&str, Role)> {
            ids.iter().map(move |id| (id.as_str(), role))
        }
        tag(&self.train, Role::Train)
            .chain(tag(&self.val, Role::Val))
            .chain(tag(&self.test, Role::Test))
    }

    /// Manifest rows `image_id,scenario,seed,role`.
    pub fn write_manifest<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["image_id", "scenario", "seed", "role"])?;
        let seed = self.seed.to_string();
        for (id, role) in self.entries() {
            w.write_record([id, self.scenario.as_str(), seed.as_str(), &role.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// File stem used for this plan's artifacts.
    pub fn file_stem(&self) -> String {
        format!("{}_seed{}", self.scenario, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub image_id: String,
    pub scenario: String,
    pub seed: u64,
    pub role: Role,
}

pub fn read_manifest<R: std::io::Read>(source: R) -> Result<Vec<ManifestRow>, csv::Error> {
    csv::Reader::from_reader(source).deserialize().collect()
}

fn build_plan(
    spec: &ScenarioSpec,
    seed: u64,
    reservation: &Reservation,
    cutoff: u32,
) -> Result<DatasetPlan, ScenarioError> {
    let table = cohort::tabulate(&reservation.remaining, cutoff)?;
    let (_, solution, targets) = plan_targets(&table, spec)?;
    let sample = sample_dataset(&reservation.remaining, &targets.cells, cutoff, seed)?;
    let (train, val) = split_train_val(&sample, cutoff, seed)?;
    Ok(DatasetPlan {
        scenario: spec.name(),
        female_fraction: spec.female_fraction,
        seed,
        test: reservation.test.clone(),
        train: train.image_ids(),
        val: val.image_ids(),
        lp_solution: solution,
        targets,
        rng: [Stream::TestReservation, Stream::Subsample, Stream::TrainValSplit]
            .into_iter()
            .map(|s| RngId::new(seed, s))
            .collect(),
    })
}

/// One plan per (scenario, seed), scenario-major. The test set drawn for a
/// seed is shared by every scenario using that seed and test size.
pub fn build_all_scenarios(cohort: &Cohort, specs: &[ScenarioSpec], cutoff: u32) -> Result<Vec<DatasetPlan>, ScenarioError> {
    let mut reservations: HashMap<(u64, u64), Reservation> = HashMap::new();
    let mut plans = Vec::new();
    for spec in specs {
        let name = spec.name();
        spec.validate().map_err(|e| e.within(&name, spec.seeds.first().copied().unwrap_or(0)))?;
        for &seed in &spec.seeds {
            let key = (seed, spec.test_cell_size);
            let reservation = match reservations.entry(key) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => e.insert(
                    reserve_test_cells(cohort, spec.test_cell_size, cutoff, seed).map_err(|e| e.within(&name, seed))?,
                ),
            };
            let plan = build_plan(spec, seed, reservation, cutoff).map_err(|e| e.within(&name, seed))?;
            plans.push(plan);
        }
    }
    Ok(plans)
}
