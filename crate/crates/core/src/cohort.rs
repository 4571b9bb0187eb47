//! Lesion metadata ingestion and the first three filtering steps: drop rows
//! without an age, drop duplicates, keep one image per patient. Ends with
//! the eight-cell (class x sex x age band) tabulation that bounds the LP.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Stream};

pub const DEFAULT_AGE_CUTOFF: u32 = 60;
pub const MAX_AGE: u32 = 130;

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("metadata is missing mandatory column `{0}`")]
    MissingColumn(String),
    #[error("duplicate image_id `{0}`")]
    DuplicateImageId(String),
    #[error("row {row}: empty image_id")]
    EmptyImageId { row: usize },
    #[error("duplicate list references unknown image_id `{0}`")]
    UnknownDuplicate(String),
    #[error("record `{image_id}` cannot be tabulated: {reason}")]
    Untabulatable { image_id: String, reason: &'static str },
    #[error("malformed delimited text: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    Female,
    Male,
    Unknown,
}

impl Sex {
    pub fn parse(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Sex::Female,
            "male" | "m" => Sex::Male,
            _ => Sex::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
            Sex::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Malignant,
    Benign,
}

impl Label {
    /// Only "benign" and "malignant" are admitted.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benign" => Some(Label::Benign),
            "malignant" => Some(Label::Malignant),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Malignant => "malignant",
            Label::Benign => "benign",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBand {
    Under60,
    AtLeast60,
}

impl AgeBand {
    /// `age < cutoff` is the lower band; the cutoff itself belongs to the upper one.
    pub fn of(age: u32, cutoff: u32) -> Self {
        if age < cutoff {
            AgeBand::Under60
        } else {
            AgeBand::AtLeast60
        }
    }
}

/// One of the eight strata. Only known sexes have a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub label: Label,
    pub sex: Sex,
    pub band: AgeBand,
}

impl Cell {
    /// Canonical order: malignant before benign, male before female, younger first.
    /// Matches the LP variables x7..x14.
    pub const ALL: [Cell; 8] = [
        Cell::new(Label::Malignant, Sex::Male, AgeBand::Under60),
        Cell::new(Label::Malignant, Sex::Male, AgeBand::AtLeast60),
        Cell::new(Label::Malignant, Sex::Female, AgeBand::Under60),
        Cell::new(Label::Malignant, Sex::Female, AgeBand::AtLeast60),
        Cell::new(Label::Benign, Sex::Male, AgeBand::Under60),
        Cell::new(Label::Benign, Sex::Male, AgeBand::AtLeast60),
        Cell::new(Label::Benign, Sex::Female, AgeBand::Under60),
        Cell::new(Label::Benign, Sex::Female, AgeBand::AtLeast60),
    ];

    pub const fn new(label: Label, sex: Sex, band: AgeBand) -> Self {
        Self { label, sex, band }
    }

    pub fn index(self) -> usize {
        let l = match self.label {
            Label::Malignant => 0,
            Label::Benign => 4,
        };
        let s = match self.sex {
            Sex::Male => 0,
            Sex::Female => 2,
            Sex::Unknown => panic!("cells exist only for known sex"),
        };
        let b = match self.band {
            AgeBand::Under60 => 0,
            AgeBand::AtLeast60 => 1,
        };
        l + s + b
    }

    pub fn of(record: &LesionRecord, cutoff: u32) -> Option<Cell> {
        let age = record.age?;
        if record.sex == Sex::Unknown {
            return None;
        }
        Some(Cell::new(record.label, record.sex, AgeBand::of(age, cutoff)))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let band = match self.band {
            AgeBand::Under60 => "under_cutoff",
            AgeBand::AtLeast60 => "at_least_cutoff",
        };
        write!(f, "{}/{}/{}", self.label.as_str(), self.sex.as_str(), band)
    }
}

/// Eight non-negative counts indexed by [`Cell`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts(pub [u64; 8]);

impl CellCounts {
    pub fn get(&self, cell: Cell) -> u64 {
        self.0[cell.index()]
    }

    pub fn set(&mut self, cell: Cell, value: u64) {
        self.0[cell.index()] = value;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn sum_where(&self, pred: impl Fn(Cell) -> bool) -> u64 {
        Cell::ALL.iter().filter(|c| pred(**c)).map(|c| self.get(*c)).sum()
    }

    pub fn label_sex(&self, label: Label, sex: Sex) -> u64 {
        self.sum_where(|c| c.label == label && c.sex == sex)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortTable {
    pub counts: CellCounts,
    pub median_age_cutoff: u32,
}

impl CohortTable {
    pub fn get(&self, cell: Cell) -> u64 {
        self.counts.get(cell)
    }

    pub fn total(&self) -> u64 {
        self.counts.total()
    }

    /// Cell counts of the filtered ISIC archive snapshot (one image per
    /// patient, defined age, known sex).
    pub fn isic_archive_snapshot() -> Self {
        let mut counts = CellCounts::default();
        for (cell, n) in Cell::ALL.iter().zip([1261, 2801, 1371, 1641, 12239, 3364, 10810, 2397]) {
            counts.set(*cell, n);
        }
        Self {
            counts,
            median_age_cutoff: DEFAULT_AGE_CUTOFF,
        }
    }

    /// Counts left after removing `per_cell` records from every cell.
    pub fn after_reservation(&self, per_cell: u64) -> Option<Self> {
        let mut counts = self.counts;
        for c in &mut counts.0 {
            *c = c.checked_sub(per_cell)?;
        }
        Some(Self { counts, ..*self })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LesionRecord {
    pub image_id: String,
    pub patient_id: String,
    pub age: Option<u32>,
    pub sex: Sex,
    pub label: Label,
}

impl LesionRecord {
    /// Records without a patient id count as their own patient.
    pub fn patient_key(&self) -> &str {
        if self.patient_id.is_empty() {
            &self.image_id
        } else {
            &self.patient_id
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub records: Vec<LesionRecord>,
    /// One note per applied filter, in order.
    pub provenance: Vec<String>,
}

impl Cohort {
    pub fn new(records: Vec<LesionRecord>) -> Self {
        Self {
            records,
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn image_ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.image_id.clone()).collect()
    }

    fn derive(&self, records: Vec<LesionRecord>, note: String) -> Self {
        let mut provenance = self.provenance.clone();
        provenance.push(note);
        Self {
            records,
            provenance,
        }
    }

    /// Synthetic cohort realizing the given cell counts, one patient per
    /// image. Ages are `cutoff - 10` and `cutoff + 10`.
    pub fn from_table(table: &CohortTable) -> Self {
        let mut records = Vec::with_capacity(table.total() as usize);
        let cutoff = table.median_age_cutoff;
        for cell in Cell::ALL {
            let age = match cell.band {
                AgeBand::Under60 => cutoff.saturating_sub(10),
                AgeBand::AtLeast60 => cutoff + 10,
            };
            for _ in 0..table.get(cell) {
                let id = format!("SYN_{:07}", records.len());
                records.push(LesionRecord {
                    patient_id: format!("P{id}"),
                    image_id: id,
                    age: Some(age),
                    sex: cell.sex,
                    label: cell.label,
                });
            }
        }
        Self {
            records,
            provenance: vec![format!("synthesized from cell counts (cutoff {cutoff})")],
        }
    }

    /// Partition of record indices by cell, each list in cohort order.
    /// Records without a cell are skipped.
    pub fn cell_indices(&self, cutoff: u32) -> BTreeMap<Cell, Vec<usize>> {
        let mut by_cell: BTreeMap<Cell, Vec<usize>> = Cell::ALL.iter().map(|c| (*c, Vec::new())).collect();
        for (i, r) in self.records.iter().enumerate() {
            if let Some(cell) = Cell::of(r, cutoff) {
                by_cell.entry(cell).or_default().push(i);
            }
        }
        by_cell
    }
}

/// Header names for the five mandatory columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub image_id: String,
    pub patient_id: String,
    pub age: String,
    pub sex: String,
    pub label: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            image_id: "image_id".into(),
            patient_id: "patient_id".into(),
            age: "age".into(),
            sex: "sex".into(),
            label: "label".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOptions {
    pub delimiter: u8,
    pub columns: ColumnMapping,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            columns: ColumnMapping::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRow {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub image_id: String,
    pub reason: String,
}

/// Rows rejected or altered while parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    pub rows_read: usize,
    pub rejected: Vec<SkippedRow>,
    /// Image ids whose age field was present but unusable.
    pub unparseable_age: Vec<String>,
    pub unknown_sex: usize,
}

/// Reads delimited metadata. Rows whose label is neither benign nor
/// malignant are rejected into the skip report.
pub fn parse_metadata<R: Read>(source: R, options: &ParseOptions) -> Result<(Cohort, SkipReport), CohortError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CohortError::MissingColumn(name.to_string()))
    };
    let cols = &options.columns;
    let (id_col, patient_col, age_col, sex_col, label_col) = (
        find(&cols.image_id)?,
        find(&cols.patient_id)?,
        find(&cols.age)?,
        find(&cols.sex)?,
        find(&cols.label)?,
    );

    let mut report = SkipReport::default();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let n = i + 1;
        report.rows_read += 1;
        let field = |c: usize| row.get(c).unwrap_or("");
        let image_id = field(id_col).to_string();
        if image_id.is_empty() {
            return Err(CohortError::EmptyImageId { row: n });
        }
        if !seen.insert(image_id.clone()) {
            return Err(CohortError::DuplicateImageId(image_id));
        }
        let Some(label) = Label::parse(field(label_col)) else {
            report.rejected.push(SkippedRow {
                row: n,
                image_id,
                reason: format!("label `{}` is not benign/malignant", field(label_col)),
            });
            continue;
        };
        let age_text = field(age_col);
        let age = parse_age(age_text);
        if age.is_none() && !age_text.is_empty() {
            report.unparseable_age.push(image_id.clone());
        }
        let sex = Sex::parse(field(sex_col));
        if sex == Sex::Unknown {
            report.unknown_sex += 1;
        }
        records.push(LesionRecord {
            image_id,
            patient_id: field(patient_col).to_string(),
            age,
            sex,
            label,
        });
    }
    let note = format!(
        "parsed {} rows, rejected {} by label",
        report.rows_read,
        report.rejected.len()
    );
    Ok((
        Cohort {
            records,
            provenance: vec![note],
        },
        report,
    ))
}

/// Whole years in `0..=130`. Archive exports often write ages as `55.0`.
fn parse_age(text: &str) -> Option<u32> {
    let v: f64 = text.parse().ok()?;
    if v.is_finite() && v.fract() == 0.0 && (0.0..=MAX_AGE as f64).contains(&v) {
        Some(v as u32)
    } else {
        None
    }
}

/// Writes the cohort back out with the same column mapping.
pub fn write_metadata<W: Write>(cohort: &Cohort, sink: W, options: &ParseOptions) -> Result<(), CohortError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(options.delimiter)
        .from_writer(sink);
    let c = &options.columns;
    w.write_record([&c.image_id, &c.patient_id, &c.age, &c.sex, &c.label])?;
    for r in &cohort.records {
        let age = r.age.map(|a| a.to_string()).unwrap_or_default();
        let sex = match r.sex {
            Sex::Unknown => "",
            s => s.as_str(),
        };
        w.write_record([
            r.image_id.as_str(),
            r.patient_id.as_str(),
            age.as_str(),
            sex,
            r.label.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Keeps records with a defined age, in order.
pub fn filter_defined_age(cohort: &Cohort) -> Cohort {
    let kept: Vec<_> = cohort.records.iter().filter(|r| r.age.is_some()).cloned().collect();
    let dropped = cohort.len() - kept.len();
    cohort.derive(kept, format!("removed {dropped} records with undefined age"))
}

/// An externally detected duplicate: `duplicate` is dropped in favour of `original`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicatePair {
    pub original: String,
    pub duplicate: String,
}

/// Reads a two-column delimited duplicate list (header row required).
pub fn parse_duplicate_pairs<R: Read>(source: R, delimiter: u8) -> Result<Vec<DuplicatePair>, CohortError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut pairs = Vec::new();
    for row in reader.records() {
        let row = row?;
        pairs.push(DuplicatePair {
            original: row.get(0).unwrap_or("").to_string(),
            duplicate: row.get(1).unwrap_or("").to_string(),
        });
    }
    Ok(pairs)
}

/// Removes repeated image ids (first occurrence wins) and the second member
/// of every supplied duplicate pair.
pub fn dedup(cohort: &Cohort, pairs: &[DuplicatePair]) -> Result<Cohort, CohortError> {
    let known: HashSet<&str> = cohort.records.iter().map(|r| r.image_id.as_str()).collect();
    let mut flagged = HashSet::new();
    for p in pairs {
        for id in [&p.original, &p.duplicate] {
            if !known.contains(id.as_str()) {
                return Err(CohortError::UnknownDuplicate(id.clone()));
            }
        }
        if p.original != p.duplicate {
            flagged.insert(p.duplicate.as_str());
        }
    }
    let mut seen = HashSet::new();
    let kept: Vec<_> = cohort
        .records
        .iter()
        .filter(|r| seen.insert(r.image_id.as_str()) && !flagged.contains(r.image_id.as_str()))
        .cloned()
        .collect();
    let dropped = cohort.len() - kept.len();
    Ok(cohort.derive(kept, format!("removed {dropped} duplicates")))
}

/// Keeps one uniformly chosen image per patient. Output keeps cohort order.
pub fn one_per_patient(cohort: &Cohort, seed: u64) -> Cohort {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for (i, r) in cohort.records.iter().enumerate() {
        let g = *slot.entry(r.patient_key()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let mut rng = rng::rng(seed, Stream::PatientSelection);
    let mut keep: Vec<usize> = groups
        .iter()
        .map(|g| if g.len() == 1 { g[0] } else { g[rng.gen_range(0..g.len())] })
        .collect();
    keep.sort_unstable();
    let kept: Vec<_> = keep.iter().map(|&i| cohort.records[i].clone()).collect();
    let dropped = cohort.len() - kept.len();
    cohort.derive(
        kept,
        format!("kept one image per patient (seed {seed}), removed {dropped}"),
    )
}

/// A patient whose images disagree on sex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientConflict {
    pub patient_id: String,
    pub image_ids: Vec<String>,
    pub sexes: Vec<Sex>,
}

/// Patients with more than one recorded sex. Surfaced, never resolved.
pub fn patient_conflicts(cohort: &Cohort) -> Vec<PatientConflict> {
    let mut by_patient: BTreeMap<&str, Vec<&LesionRecord>> = BTreeMap::new();
    for r in &cohort.records {
        if !r.patient_id.is_empty() {
            by_patient.entry(&r.patient_id).or_default().push(r);
        }
    }
    by_patient
        .into_iter()
        .filter_map(|(pid, recs)| {
            let mut sexes: Vec<Sex> = recs.iter().map(|r| r.sex).collect();
            sexes.sort();
            sexes.dedup();
            (sexes.len() > 1).then(|| PatientConflict {
                patient_id: pid.to_string(),
                image_ids: recs.iter().map(|r| r.image_id.clone()).collect(),
                sexes,
            })
        })
        .collect()
}

/// Splits off records with unknown sex, which have no LP cell.
pub fn drop_unknown_sex(cohort: &Cohort) -> (Cohort, Vec<String>) {
    let (known, unknown): (Vec<_>, Vec<_>) = cohort.records.iter().cloned().partition(|r| r.sex != Sex::Unknown);
    let ids = unknown.into_iter().map(|r| r.image_id).collect::<Vec<_>>();
    let note = format!("removed {} records with unknown sex", ids.len());
    (cohort.derive(known, note), ids)
}

/// Counts records per cell. Every record must have an age and a known sex.
pub fn tabulate(cohort: &Cohort, cutoff: u32) -> Result<CohortTable, CohortError> {
    let mut counts = CellCounts::default();
    for r in &cohort.records {
        if r.age.is_none() {
            return Err(CohortError::Untabulatable {
                image_id: r.image_id.clone(),
                reason: "age is undefined",
            });
        }
        let cell = Cell::of(r, cutoff).ok_or_else(|| CohortError::Untabulatable {
            image_id: r.image_id.clone(),
            reason: "sex is unknown",
        })?;
        counts.0[cell.index()] += 1;
    }
    Ok(CohortTable {
        counts,
        median_age_cutoff: cutoff,
    })
}

/// Result of running steps one to three plus the unknown-sex drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub parsed: usize,
    pub skip: SkipReport,
    pub after_defined_age: usize,
    pub after_dedup: usize,
    pub after_one_per_patient: usize,
    pub dropped_unknown_sex: Vec<String>,
    pub patient_conflicts: Vec<PatientConflict>,
    pub final_size: usize,
    pub table: CohortTable,
    pub selection_rng: crate::rng::RngId,
}

/// Runs the three filtering steps and tabulates the result.
pub fn filter_pipeline(
    parsed: &Cohort,
    skip: SkipReport,
    duplicates: &[DuplicatePair],
    seed: u64,
    cutoff: u32,
) -> Result<(Cohort, FilterReport), CohortError> {
    let aged = filter_defined_age(parsed);
    let unique = dedup(&aged, duplicates)?;
    let conflicts = patient_conflicts(&unique);
    let single = one_per_patient(&unique, seed);
    let (known, unknown) = drop_unknown_sex(&single);
    let table = tabulate(&known, cutoff)?;
    let report = FilterReport {
        parsed: parsed.len(),
        skip,
        after_defined_age: aged.len(),
        after_dedup: unique.len(),
        after_one_per_patient: single.len(),
        dropped_unknown_sex: unknown,
        patient_conflicts: conflicts,
        final_size: known.len(),
        table,
        selection_rng: crate::rng::RngId::new(seed, Stream::PatientSelection),
    };
    Ok((known, report))
}
