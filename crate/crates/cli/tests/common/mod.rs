#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cohortfair::cohort::{self, Cell, CellCounts, Cohort, CohortTable, ParseOptions};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cohortfair"));
    cmd.env_remove("COHORTFAIR_OUT");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// A tenth of the archive snapshot, plus rows the filters must drop: a
/// missing age, an unknown sex, an excluded label and a second lesion for
/// an existing patient.
pub fn write_metadata(dir: &Path) -> PathBuf {
    let mut counts = CellCounts::default();
    for (cell, n) in Cell::ALL.iter().zip([126, 280, 137, 164, 1223, 336, 1081, 239]) {
        counts.set(*cell, n);
    }
    let table = CohortTable {
        counts,
        median_age_cutoff: cohort::DEFAULT_AGE_CUTOFF,
    };
    let cohort = Cohort::from_table(&table);
    let mut bytes = Vec::new();
    cohort::write_metadata(&cohort, &mut bytes, &ParseOptions::default()).unwrap();
    let mut text = String::from_utf8(bytes).unwrap();
    text.push_str("EXTRA_1,PEXTRA_1,,female,benign\n");
    text.push_str("EXTRA_2,PEXTRA_2,45,,malignant\n");
    text.push_str("EXTRA_3,PEXTRA_3,45,male,indeterminate\n");
    text.push_str("EXTRA_4,PSYN_0000000,45,male,malignant\n");
    let path = dir.join("metadata.csv");
    fs::write(&path, text).unwrap();
    path
}

pub fn write_config(dir: &Path, json: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path
}

/// Relative path to file contents for everything under `root`.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// `build`, `train-toy` on one plan, then `eval`, all under `root`.
pub fn full_pipeline(root: &Path) -> Output {
    let metadata = write_metadata(root);
    let config = write_config(root, r#"{"scenarios": {"seeds": [0, 1, 2], "per_cell": 16}}"#);
    let build = root.join("build");
    let out = run(&[
        "-q",
        "build",
        "--metadata",
        metadata.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        build.to_str().unwrap(),
    ]);
    if !out.status.success() {
        return out;
    }
    let toy = root.join("toy");
    let plan = build.join("manifests/F50M50_seed0.json");
    let out = run(&[
        "-q",
        "train-toy",
        "--config",
        config.to_str().unwrap(),
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        toy.to_str().unwrap(),
    ]);
    if !out.status.success() {
        return out;
    }
    let pattern = format!("{}/predictions/*.csv", toy.display());
    run(&["-q", "eval", "--predictions", &pattern, "--out", root.join("eval").to_str().unwrap()])
}
