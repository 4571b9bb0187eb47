use std::collections::HashSet;

use cohortfair::cohort::{self, Cohort, LesionRecord, ParseOptions, Sex};
use proptest::prelude::*;

fn arb_record() -> impl Strategy<Value = LesionRecord> {
    (
        0u32..40,
        0u32..15,
        proptest::option::weighted(0.8, 0u32..100),
        prop_oneof![Just(Sex::Female), Just(Sex::Male), Just(Sex::Unknown)],
        any::<bool>(),
    )
        .prop_map(|(img, patient, age, sex, malignant)| LesionRecord {
            image_id: format!("ISIC_{img:04}"),
            patient_id: format!("IP_{patient:03}"),
            age,
            sex,
            label: if malignant {
                cohort::Label::Malignant
            } else {
                cohort::Label::Benign
            },
        })
}

fn arb_cohort() -> impl Strategy<Value = Cohort> {
    proptest::collection::vec(arb_record(), 0..60).prop_map(Cohort::new)
}

proptest! {
    #[test]
    fn filters_are_idempotent(c in arb_cohort()) {
        let once = cohort::filter_defined_age(&c);
        prop_assert_eq!(&cohort::filter_defined_age(&once).records, &once.records);
        let d = cohort::dedup(&c, &[]).unwrap();
        prop_assert_eq!(&cohort::dedup(&d, &[]).unwrap().records, &d.records);
    }

    #[test]
    fn one_per_patient_keeps_each_patient_once(c in arb_cohort(), seed in any::<u64>()) {
        let c = cohort::dedup(&c, &[]).unwrap();
        let out = cohort::one_per_patient(&c, seed);
        let patients: HashSet<_> = c.records.iter().map(|r| r.patient_id.clone()).collect();
        prop_assert_eq!(out.len(), patients.len());
        let kept: HashSet<_> = out.records.iter().map(|r| r.patient_id.clone()).collect();
        prop_assert_eq!(kept, patients);
    }

    #[test]
    fn table_sums_to_filtered_size(c in arb_cohort(), seed in any::<u64>()) {
        let (kept, report) = cohort::filter_pipeline(&c, Default::default(), &[], seed, 60).unwrap();
        prop_assert_eq!(report.table.total() as usize, kept.len());
        prop_assert_eq!(report.final_size, kept.len());
        prop_assert_eq!(report.after_one_per_patient, kept.len() + report.dropped_unknown_sex.len());
    }
}

fn fixture() -> String {
    let mut text = String::from("image_id,patient_id,age,sex,label\n");
    for i in 0..200 {
        let age = if i % 17 == 0 { String::new() } else { (20 + i % 60).to_string() };
        let sex = ["female", "male", ""][i % 3];
        let label = if i % 31 == 0 { "indeterminate" } else if i % 2 == 0 { "benign" } else { "malignant" };
        text.push_str(&format!("ISIC_{i:05},IP_{:03},{age},{sex},{label}\n", i / 3));
    }
    text
}

#[test]
fn pipeline_is_byte_identical_across_runs_and_threads() {
    let text = fixture();
    let run = |seed| {
        let (parsed, skip) = cohort::parse_metadata(text.as_bytes(), &ParseOptions::default()).unwrap();
        let (kept, report) = cohort::filter_pipeline(&parsed, skip, &[], seed, 60).unwrap();
        let mut out = Vec::new();
        cohort::write_metadata(&kept, &mut out, &ParseOptions::default()).unwrap();
        (out, serde_json::to_vec(&report).unwrap())
    };
    let reference = run(9);
    let threaded: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4).map(|_| s.spawn(|| run(9))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(threaded.iter().all(|r| *r == reference));
    assert_ne!(run(10).0, reference.0);
}

#[test]
fn fixture_pipeline_counts() {
    let text = fixture();
    let (parsed, skip) = cohort::parse_metadata(text.as_bytes(), &ParseOptions::default()).unwrap();
    // Rows 0, 31, 62, ... carry an excluded label.
    assert_eq!(skip.rejected.len(), 7);
    assert_eq!(parsed.len(), 193);
    let (kept, report) = cohort::filter_pipeline(&parsed, skip, &[], 1, 60).unwrap();
    assert!(kept.records.iter().all(|r| r.age.is_some() && r.sex != Sex::Unknown));
    assert_eq!(report.after_defined_age, parsed.records.iter().filter(|r| r.age.is_some()).count());
}
