use std::path::PathBuf;

use nocturne::ingest::{
    bundle_to_strings, load_ohio_dir, parse_inhouse_bundle, parse_inhouse_sources, parse_ohio_str,
    write_bundle, write_ohio_xml, BundleSources, GlucoseSource, RawCohort, VitalChannel,
};
use proptest::prelude::*;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn bundle_fixture() -> RawCohort {
    let (cohort, report) = parse_inhouse_bundle(&fixtures().join("bundle")).unwrap();
    assert_eq!(report.rows_rejected(), 0, "{report:?}");
    cohort
}

fn ohio_fixture() -> String {
    std::fs::read_to_string(fixtures().join("ohio/559-ws-training.xml")).unwrap()
}

#[test]
fn bundle_fixture_round_trips() {
    let cohort = bundle_fixture();
    assert!(cohort
        .glucose
        .iter()
        .any(|g| g.source == GlucoseSource::Smbg));
    assert!(cohort
        .logbook
        .iter()
        .any(|l| l.remarks.as_deref() == Some("felt shaky, ate candy")));
    let text = bundle_to_strings(&cohort);
    let (again, report) = parse_inhouse_sources(&text).unwrap();
    assert_eq!(report.rows_rejected(), 0);
    assert_eq!(again, cohort);
    assert_eq!(bundle_to_strings(&again), text);

    let dir = tempfile::tempdir().unwrap();
    write_bundle(&cohort, dir.path()).unwrap();
    assert_eq!(parse_inhouse_bundle(dir.path()).unwrap().0, cohort);
}

#[test]
fn ohio_fixture_parses() {
    let (cohort, report) = parse_ohio_str(&ohio_fixture()).unwrap();
    assert_eq!(report.rows_rejected(), 0, "{report:?}");
    assert_eq!(
        cohort
            .glucose
            .iter()
            .filter(|g| g.source == GlucoseSource::Cgm)
            .count(),
        11
    );
    assert_eq!(
        cohort
            .glucose
            .iter()
            .filter(|g| g.source == GlucoseSource::Smbg)
            .count(),
        1
    );
    let hr = cohort
        .vitals
        .iter()
        .filter(|v| v.channel == VitalChannel::BasisHeartRate)
        .count();
    assert_eq!(hr, 2);
    assert!((cohort.glucose[0].value_mmol_l - 101.0 / 18.016).abs() < 1e-12);
    assert_eq!(cohort.meta["559"].weight, Some(99.0));
}

#[test]
fn ohio_fixture_round_trips() {
    let (mut cohort, _) = parse_ohio_str(&ohio_fixture()).unwrap();
    cohort.canonicalize();
    let xml = write_ohio_xml(&cohort, "559");
    let (mut again, report) = parse_ohio_str(&xml).unwrap();
    again.canonicalize();
    assert_eq!(report.rows_rejected(), 0);
    assert_eq!(again.vitals, cohort.vitals);
    assert_eq!(again.meta, cohort.meta);
    assert_eq!(again.glucose.len(), cohort.glucose.len());
    for (a, b) in again.glucose.iter().zip(&cohort.glucose) {
        assert_eq!((a.t_utc, a.source), (b.t_utc, b.source));
        assert!((a.value_mmol_l - b.value_mmol_l).abs() <= 4.0 * f64::EPSILON * b.value_mmol_l);
    }
    // Once in mmol/L form, the text is a fixed point.
    assert_eq!(write_ohio_xml(&again, "559"), xml);
}

#[test]
fn ohio_directory_split() {
    let dir = tempfile::tempdir().unwrap();
    let xml = ohio_fixture();
    std::fs::write(dir.path().join("559-ws-training.xml"), &xml).unwrap();
    std::fs::write(dir.path().join("559-ws-testing.xml"), &xml).unwrap();
    std::fs::write(
        dir.path().join("575-train.xml"),
        xml.replace("\"559\"", "\"575\""),
    )
    .unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    std::fs::write(dir.path().join("559-extra.xml"), &xml).unwrap();
    let split = load_ohio_dir(dir.path()).unwrap();
    assert_eq!(split.train.glucose.len(), 24);
    assert_eq!(split.test.glucose.len(), 12);
    assert_eq!(split.train.patient_ids(), vec!["559", "575"]);
    assert_eq!(split.report.warnings.len(), 1);
}

fn mutate(data: &[u8], ops: &[(u8, usize, u8)]) -> Vec<u8> {
    let mut v = data.to_vec();
    for &(op, pos, byte) in ops {
        if v.is_empty() {
            v.push(byte);
            continue;
        }
        let i = pos % v.len();
        match op % 5 {
            0 => v[i] = byte,
            1 => {
                v.remove(i);
            }
            2 => v.insert(i, byte),
            3 => v.truncate(i),
            _ => {
                let end = (i + 1 + byte as usize).min(v.len());
                let chunk = v[i..end].to_vec();
                v.splice(i..i, chunk);
            }
        }
    }
    v
}

fn ops() -> impl Strategy<Value = Vec<(u8, usize, u8)>> {
    prop::collection::vec((any::<u8>(), any::<usize>(), any::<u8>()), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn mutated_bundles_never_panic(which in 0usize..4, ops in ops()) {
        let mut src = bundle_to_strings(&bundle_fixture());
        let target = match which {
            0 => &mut src.glucose,
            1 => &mut src.vitals,
            2 => &mut src.logbook,
            _ => &mut src.metadata,
        };
        let bytes = mutate(target.as_bytes(), &ops);
        let src = BundleSources {
            glucose: if which == 0 { bytes.clone() } else { src.glucose.into_bytes() },
            vitals: if which == 1 { bytes.clone() } else { src.vitals.into_bytes() },
            logbook: if which == 2 { bytes.clone() } else { src.logbook.into_bytes() },
            metadata: if which == 3 { bytes } else { src.metadata.into_bytes() },
        };
        if let Ok((cohort, report)) = parse_inhouse_sources(&src) {
            prop_assert!(cohort.glucose.iter().all(|g| g.value_mmol_l.is_finite()));
            prop_assert!(report.rows_rejected() <= report.rows_read);
        }
    }

    #[test]
    fn mutated_xml_never_panics(ops in ops()) {
        let bytes = mutate(ohio_fixture().as_bytes(), &ops);
        let text = String::from_utf8_lossy(&bytes);
        if let Ok((cohort, _)) = parse_ohio_str(&text) {
            prop_assert!(cohort.glucose.iter().all(|g| g.value_mmol_l.is_finite() && g.value_mmol_l >= 0.0));
        }
    }

    #[test]
    fn arbitrary_text_never_panics(s in ".{0,300}") {
        let _ = parse_ohio_str(&s);
        let src = BundleSources { glucose: s.clone(), vitals: s.clone(), logbook: s.clone(), metadata: s };
        let _ = parse_inhouse_sources(&src);
    }
}
