//! Subgroup evaluation: rank-based AUC, the Mann-Whitney U test (exact and
//! tie-corrected normal approximation) and significance star bands.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Largest pooled sample the exact test will enumerate.
pub const EXACT_MAX_COMBINED: usize = 16;
/// `Auto` picks the exact test when both samples are at most this large.
pub const AUTO_EXACT_PER_GROUP: usize = 8;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction set is empty")]
    EmptySet,
    #[error("duplicate prediction id `{0}`")]
    DuplicateId(String),
    #[error("prediction `{id}` has invalid score {score}")]
    InvalidScore { id: String, score: f64 },
    #[error("AUC undefined for subgroup {0}: needs at least one positive and one negative")]
    UndefinedAuc(Subgroup),
    #[error("Mann-Whitney U needs two non-empty samples")]
    EmptySample,
    #[error("exact test limited to {limit} pooled observations, got {n}")]
    ExactTooLarge { n: usize, limit: usize },
    #[error("{scenario}/{strategy}: at least two distinct seeds are required, found {found}")]
    TooFewSeeds {
        scenario: String,
        strategy: String,
        found: usize,
    },
    #[error("{scenario}/{strategy}: seed {seed} appears in more than one run")]
    RepeatedSeed {
        scenario: String,
        strategy: String,
        seed: u64,
    },
    #[error("run {scenario}/seed {seed}/{strategy}: {source}")]
    Run {
        scenario: String,
        seed: u64,
        strategy: String,
        #[source]
        source: Box<EvalError>,
    },
    #[error("malformed delimited text: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    #[serde(rename = "F")]
    Female,
    #[serde(rename = "M")]
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subgroup {
    Overall,
    Female,
    Male,
}

impl Subgroup {
    fn admits(self, sex: Sex) -> bool {
        match self {
            Subgroup::Overall => true,
            Subgroup::Female => sex == Sex::Female,
            Subgroup::Male => sex == Sex::Male,
        }
    }
}

impl fmt::Display for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subgroup::Overall => "overall",
            Subgroup::Female => "female",
            Subgroup::Male => "male",
        })
    }
}

/// One row of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub score: f64,
    pub label: u8,
    pub sex: Sex,
    pub scenario: String,
    pub seed: u64,
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: String,
    pub seed: u64,
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub score: f64,
    pub label: bool,
    pub sex: Sex,
}

/// Test-set predictions of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub rows: Vec<Prediction>,
    pub provenance: Provenance,
}

impl PredictionSet {
    pub fn new(rows: Vec<Prediction>, provenance: Provenance) -> Result<Self, EvalError> {
        if rows.is_empty() {
            return Err(EvalError::EmptySet);
        }
        let mut ids = HashSet::new();
        for r in &rows {
            if !ids.insert(r.id.as_str()) {
                return Err(EvalError::DuplicateId(r.id.clone()));
            }
            if !(r.score.is_finite() && (0.0..=1.0).contains(&r.score)) {
                return Err(EvalError::InvalidScore {
                    id: r.id.clone(),
                    score: r.score,
                });
            }
        }
        Ok(Self { rows, provenance })
    }

    fn subset(&self, subgroup: Subgroup) -> (Vec<f64>, Vec<bool>) {
        self.rows
            .iter()
            .filter(|r| subgroup.admits(r.sex))
            .map(|r| (r.score, r.label))
            .unzip()
    }

    pub fn count(&self, subgroup: Subgroup) -> usize {
        self.rows.iter().filter(|r| subgroup.admits(r.sex)).count()
    }
}

/// Average (mid) ranks, 1-based. Tied values share the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i+1 ..= j share rank (i + 1 + j) / 2.
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half. `None` if either class is absent.
pub fn auc_from_scores(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (p, q) = (n_pos as f64, n_neg as f64);
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Some(u / (p * q))
}

pub fn auc(predictions: &PredictionSet, subgroup: Subgroup) -> Result<f64, EvalError> {
    let (scores, labels) = predictions.subset(subgroup);
    auc_from_scores(&scores, &labels).ok_or(EvalError::UndefinedAuc(subgroup))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMode {
    Exact,
    NormalApprox,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Exact,
    NormalApprox,
}

/// Significance band as printed above a box pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Band {
    #[serde(rename = "****")]
    FourStars,
    #[serde(rename = "***")]
    ThreeStars,
    #[serde(rename = "**")]
    TwoStars,
    #[serde(rename = "*")]
    OneStar,
    #[serde(rename = "ns")]
    NotSignificant,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::FourStars => "****",
            Band::ThreeStars => "***",
            Band::TwoStars => "**",
            Band::OneStar => "*",
            Band::NotSignificant => "ns",
        })
    }
}

/// `****` p <= 1e-4, `***` p <= 1e-3, `**` p <= 1e-2, `*` p <= 0.1, else `ns`.
pub fn star_band(p: f64) -> Band {
    if p <= 1e-4 {
        Band::FourStars
    } else if p <= 1e-3 {
        Band::ThreeStars
    } else if p <= 1e-2 {
        Band::TwoStars
    } else if p <= 0.1 {
        Band::OneStar
    } else {
        Band::NotSignificant
    }
}

/// How the first sample compares with the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    FemaleLower,
    FemaleHigher,
    Comparable,
}

impl Direction {
    pub fn marker(self) -> char {
        match self {
            Direction::FemaleLower => '<',
            Direction::FemaleHigher => '>',
            Direction::Comparable => '=',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    /// U of the first sample: its rank sum minus `n_a (n_a + 1) / 2`.
    pub u: f64,
    pub p_value: f64,
    pub method: Method,
    pub band: Band,
    /// First sample relative to the second; `Comparable` when not significant.
    pub direction: Direction,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Two-sided p from the exact permutation distribution of the rank sum,
/// conditional on the observed ties. Doubled midranks keep the arithmetic
/// in integers.
fn exact_p(doubled: &[u64], n_a: usize, observed: u64) -> f64 {
    let max_sum: u64 = doubled.iter().sum();
    let width = max_sum as usize + 1;
    // ways[k][s]: subsets of size k with doubled-rank sum s.
    let mut ways = vec![vec![0u64; width]; n_a + 1];
    ways[0][0] = 1;
    for &r in doubled {
        let r = r as usize;
        for k in (1..=n_a).rev() {
            let (lower, upper) = ways.split_at_mut(k);
            let prev = &lower[k - 1];
            for s in (r..width).rev() {
                upper[0][s] += prev[s - r];
            }
        }
    }
    let dist = &ways[n_a];
    let total: u64 = dist.iter().sum();
    let obs = observed as usize;
    let lower: u64 = dist[..=obs].iter().sum();
    let upper: u64 = dist[obs..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

fn normal_p(u: f64, n_a: usize, n_b: usize, pooled: &[f64]) -> f64 {
    let (a, b) = (n_a as f64, n_b as f64);
    let n = a + b;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let variance = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(variance > 0.0) {
        return 1.0;
    }
    let z = ((u - a * b / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided Mann-Whitney U test of `sample_a` against `sample_b`.
pub fn mann_whitney(sample_a: &[f64], sample_b: &[f64], mode: TestMode) -> Result<SignificanceResult, EvalError> {
    let (n_a, n_b) = (sample_a.len(), sample_b.len());
    if n_a == 0 || n_b == 0 {
        return Err(EvalError::EmptySample);
    }
    let pooled: Vec<f64> = sample_a.iter().chain(sample_b).copied().collect();
    let ranks = midranks(&pooled);
    let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
    let rank_sum2: u64 = doubled[..n_a].iter().sum();
    let offset2 = (n_a * (n_a + 1)) as u64;
    let u = (rank_sum2 - offset2) as f64 / 2.0;

    let method = match mode {
        TestMode::Exact => Method::Exact,
        TestMode::NormalApprox => Method::NormalApprox,
        TestMode::Auto if n_a <= AUTO_EXACT_PER_GROUP && n_b <= AUTO_EXACT_PER_GROUP => Method::Exact,
        TestMode::Auto => Method::NormalApprox,
    };
    let p_value = match method {
        Method::Exact => {
            if n_a + n_b > EXACT_MAX_COMBINED {
                return Err(EvalError::ExactTooLarge {
                    n: n_a + n_b,
                    limit: EXACT_MAX_COMBINED,
                });
            }
            exact_p(&doubled, n_a, rank_sum2)
        }
        Method::NormalApprox => normal_p(u, n_a, n_b, &pooled),
    };
    let band = star_band(p_value);
    let direction = if band == Band::NotSignificant {
        Direction::Comparable
    } else {
        let (ma, mb) = (median(sample_a), median(sample_b));
        let lower = if ma != mb { ma < mb } else { u < (n_a * n_b) as f64 / 2.0 };
        if lower {
            Direction::FemaleLower
        } else {
            Direction::FemaleHigher
        }
    };
    Ok(SignificanceResult {
        u,
        p_value,
        method,
        band,
        direction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAuc {
    pub seed: u64,
    pub overall: f64,
    pub female: f64,
    pub male: f64,
    pub n_female: usize,
    pub n_male: usize,
}

/// AUCs for one run, or means over the runs of a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub auc_overall: f64,
    pub auc_female: f64,
    pub auc_male: f64,
    pub n_overall: usize,
    pub n_female: usize,
    pub n_male: usize,
    pub per_seed: Vec<SeedAuc>,
}

fn seed_auc(set: &PredictionSet) -> Result<SeedAuc, EvalError> {
    let p = &set.provenance;
    let wrap = |e| EvalError::Run {
        scenario: p.scenario.clone(),
        seed: p.seed,
        strategy: p.strategy.clone(),
        source: Box::new(e),
    };
    Ok(SeedAuc {
        seed: p.seed,
        overall: auc(set, Subgroup::Overall).map_err(wrap)?,
        female: auc(set, Subgroup::Female).map_err(wrap)?,
        male: auc(set, Subgroup::Male).map_err(wrap)?,
        n_female: set.count(Subgroup::Female),
        n_male: set.count(Subgroup::Male),
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

impl SubgroupReport {
    fn from_seeds(per_seed: Vec<SeedAuc>) -> Self {
        let n_female = per_seed.iter().map(|s| s.n_female).sum();
        let n_male = per_seed.iter().map(|s| s.n_male).sum();
        Self {
            auc_overall: mean(per_seed.iter().map(|s| s.overall)),
            auc_female: mean(per_seed.iter().map(|s| s.female)),
            auc_male: mean(per_seed.iter().map(|s| s.male)),
            n_overall: n_female + n_male,
            n_female,
            n_male,
            per_seed,
        }
    }
}

/// Overall, female and male AUC of a single run.
pub fn subgroup_report(set: &PredictionSet) -> Result<SubgroupReport, EvalError> {
    Ok(SubgroupReport::from_seeds(vec![seed_auc(set)?]))
}

/// What enters the significance test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonMode {
    /// Female vs male per-seed AUC vectors.
    #[default]
    PerSeedAuc,
    /// Female vs male per-lesion probability of the true class, pooled over seeds.
    PerLesion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub scenario: String,
    pub strategy: String,
    pub mode: ComparisonMode,
    pub report: SubgroupReport,
    pub significance: SignificanceResult,
}

fn true_class_probability(p: &Prediction) -> f64 {
    if p.label {
        p.score
    } else {
        1.0 - p.score
    }
}

/// Groups runs by scenario and strategy and tests female against male.
/// Output is sorted by (scenario, strategy) regardless of input order.
pub fn compare_subgroups(runs: &[PredictionSet], mode: ComparisonMode) -> Result<Vec<GroupComparison>, EvalError> {
    let mut groups: BTreeMap<(String, String), Vec<&PredictionSet>> = BTreeMap::new();
    for run in runs {
        let p = &run.provenance;
        groups
            .entry((p.scenario.clone(), p.strategy.clone()))
            .or_default()
            .push(run);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((scenario, strategy), mut members) in groups {
        members.sort_by_key(|r| r.provenance.seed);
        let mut seeds = BTreeSet::new();
        for m in &members {
            if !seeds.insert(m.provenance.seed) {
                return Err(EvalError::RepeatedSeed {
                    scenario,
                    strategy,
                    seed: m.provenance.seed,
                });
            }
        }
        if mode == ComparisonMode::PerSeedAuc && seeds.len() < 2 {
            return Err(EvalError::TooFewSeeds {
                scenario,
                strategy,
                found: seeds.len(),
            });
        }
        let per_seed = members.iter().map(|m| seed_auc(m)).collect::<Result<Vec<_>, _>>()?;
        let significance = match mode {
            ComparisonMode::PerSeedAuc => {
                let female: Vec<f64> = per_seed.iter().map(|s| s.female).collect();
                let male: Vec<f64> = per_seed.iter().map(|s| s.male).collect();
                mann_whitney(&female, &male, TestMode::Auto)?
            }
            ComparisonMode::PerLesion => {
                let pick = |sex| {
                    members
                        .iter()
                        .flat_map(|m| m.rows.iter())
                        .filter(|r| r.sex == sex)
                        .map(true_class_probability)
                        .collect::<Vec<_>>()
                };
                mann_whitney(&pick(Sex::Female), &pick(Sex::Male), TestMode::Auto)?
            }
        };
        out.push(GroupComparison {
            scenario,
            strategy,
            mode,
            report: SubgroupReport::from_seeds(per_seed),
            significance,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotRow {
    pub scenario: String,
    pub strategy: String,
    pub subgroup: Subgroup,
    pub seed: u64,
    pub auc: f64,
}

/// Long-format rows: per comparison, female seeds then male seeds.
pub fn emit_boxplot_data(comparisons: &[GroupComparison]) -> Vec<BoxplotRow> {
    let mut rows = Vec::new();
    for c in comparisons {
        for (subgroup, pick) in [
            (Subgroup::Female, (|s: &SeedAuc| s.female) as fn(&SeedAuc) -> f64),
            (Subgroup::Male, |s: &SeedAuc| s.male),
        ] {
            for s in &c.report.per_seed {
                rows.push(BoxplotRow {
                    scenario: c.scenario.clone(),
                    strategy: c.strategy.clone(),
                    subgroup,
                    seed: s.seed,
                    auc: pick(s),
                });
            }
        }
    }
    rows
}

pub const BOXPLOT_HEADER: [&str; 5] = ["scenario", "strategy", "subgroup", "seed", "auc"];

pub fn write_boxplot_csv<W: Write>(rows: &[BoxplotRow], sink: W) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(BOXPLOT_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_boxplot_csv<R: Read>(source: R) -> Result<Vec<BoxplotRow>, EvalError> {
    Ok(csv::Reader::from_reader(source).deserialize().collect::<Result<_, _>>()?)
}

pub const PREDICTION_HEADER: [&str; 7] = ["id", "score", "label", "sex", "scenario", "seed", "strategy"];

pub fn write_predictions<W: Write>(rows: &[PredictionRow], sink: W) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(PREDICTION_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads prediction rows and groups them into one set per
/// (scenario, seed, strategy), keeping row order within each set.
pub fn read_predictions<R: Read>(source: R) -> Result<Vec<PredictionSet>, EvalError> {
    let mut grouped: BTreeMap<Provenance, Vec<Prediction>> = BTreeMap::new();
    for row in csv::Reader::from_reader(source).deserialize::<PredictionRow>() {
        let row = row?;
        let label = match row.label {
            0 => false,
            1 => true,
            _ => {
                return Err(EvalError::InvalidScore {
                    id: row.id,
                    score: row.label as f64,
                })
            }
        };
        grouped
            .entry(Provenance {
                scenario: row.scenario,
                seed: row.seed,
                strategy: row.strategy,
            })
            .or_default()
            .push(Prediction {
                id: row.id,
                score: row.score,
                label,
                sex: row.sex,
            });
    }
    grouped
        .into_iter()
        .map(|(provenance, rows)| PredictionSet::new(rows, provenance))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(scores: &[f64], labels: &[u8], sexes: &[Sex]) -> PredictionSet {
        let rows = scores
            .iter()
            .zip(labels)
            .zip(sexes)
            .enumerate()
            .map(|(i, ((&score, &label), &sex))| Prediction {
                id: format!("p{i}"),
                score,
                label: label == 1,
                sex,
            })
            .collect();
        PredictionSet::new(
            rows,
            Provenance {
                scenario: "S".into(),
                seed: 0,
                strategy: "base".into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn perfect_ranking() {
        let s = set(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0], &[Sex::Female; 4]);
        assert_eq!(auc(&s, Subgroup::Overall).unwrap(), 1.0);
    }

    #[test]
    fn all_tied_is_half() {
        let s = set(&[0.3; 6], &[1, 0, 1, 0, 1, 0], &[Sex::Male; 6]);
        assert_eq!(auc(&s, Subgroup::Overall).unwrap(), 0.5);
    }

    #[test]
    fn three_of_four_pairs() {
        let s = set(&[0.9, 0.4, 0.6, 0.1], &[1, 1, 0, 0], &[Sex::Male; 4]);
        assert_eq!(auc(&s, Subgroup::Overall).unwrap(), 0.75);
    }

    #[test]
    fn single_class_subgroup_is_undefined() {
        let s = set(&[0.9, 0.4], &[1, 0], &[Sex::Male, Sex::Female]);
        let err = auc(&s, Subgroup::Female).unwrap_err();
        assert!(matches!(err, EvalError::UndefinedAuc(Subgroup::Female)));
        assert!(err.to_string().contains("female"));
    }

    #[test]
    fn prediction_set_validation() {
        let prov = Provenance {
            scenario: "S".into(),
            seed: 0,
            strategy: "x".into(),
        };
        assert!(matches!(PredictionSet::new(vec![], prov.clone()), Err(EvalError::EmptySet)));
        let row = |id: &str, score| Prediction {
            id: id.into(),
            score,
            label: true,
            sex: Sex::Male,
        };
        assert!(matches!(
            PredictionSet::new(vec![row("a", 0.1), row("a", 0.2)], prov.clone()),
            Err(EvalError::DuplicateId(_))
        ));
        assert!(matches!(
            PredictionSet::new(vec![row("a", 1.5)], prov),
            Err(EvalError::InvalidScore { .. })
        ));
    }

    #[test]
    fn separated_triplets() {
        let r = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], TestMode::Exact).unwrap();
        assert_eq!(r.u, 0.0);
        assert!((r.p_value - 0.1).abs() < 1e-15);
        assert_eq!(r.band, Band::OneStar);
        assert_eq!(r.direction, Direction::FemaleLower);
    }

    #[test]
    fn identical_samples_are_not_significant() {
        let a = [0.7, 0.71, 0.72];
        for mode in [TestMode::Exact, TestMode::NormalApprox] {
            let r = mann_whitney(&a, &a, mode).unwrap();
            assert_eq!(r.p_value, 1.0);
            assert_eq!(r.band, Band::NotSignificant);
            assert_eq!(r.direction, Direction::Comparable);
        }
    }

    #[test]
    fn empty_sample_is_rejected() {
        assert!(matches!(mann_whitney(&[], &[1.0], TestMode::Auto), Err(EvalError::EmptySample)));
    }

    #[test]
    fn exact_guard() {
        let a: Vec<f64> = (0..9).map(f64::from).collect();
        let b: Vec<f64> = (10..19).map(f64::from).collect();
        assert!(matches!(
            mann_whitney(&a, &b, TestMode::Exact),
            Err(EvalError::ExactTooLarge { n: 18, .. })
        ));
        assert_eq!(mann_whitney(&a, &b, TestMode::Auto).unwrap().method, Method::NormalApprox);
        assert_eq!(mann_whitney(&a[..8], &b[..8], TestMode::Auto).unwrap().method, Method::Exact);
    }

    #[test]
    fn bands_at_boundaries() {
        assert_eq!(star_band(0.00005), Band::FourStars);
        assert_eq!(star_band(0.0001), Band::FourStars);
        assert_eq!(star_band(0.001), Band::ThreeStars);
        assert_eq!(star_band(0.01), Band::TwoStars);
        assert_eq!(star_band(0.1), Band::OneStar);
        assert_eq!(star_band(0.2), Band::NotSignificant);
        assert_eq!(Band::FourStars.to_string(), "****");
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn predictions_roundtrip_and_grouping() {
        let rows: Vec<PredictionRow> = (0..4)
            .map(|i| PredictionRow {
                id: format!("e{i}"),
                score: 0.25 * i as f64,
                label: (i % 2) as u8,
                sex: if i < 2 { Sex::Female } else { Sex::Male },
                scenario: "F50M50".into(),
                seed: (i / 2) as u64,
                strategy: "base".into(),
            })
            .collect();
        let mut buf = Vec::new();
        write_predictions(&rows, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("id,score,label,sex,scenario,seed,strategy\ne0,0.0,0,F,"));
        let sets = read_predictions(buf.as_slice()).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[1].provenance.seed, 1);
        assert_eq!(sets[1].rows[0].id, "e2");
    }

    #[test]
    fn empty_boxplot_is_header_only() {
        let mut buf = Vec::new();
        write_boxplot_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "scenario,strategy,subgroup,seed,auc\n");
    }
}
