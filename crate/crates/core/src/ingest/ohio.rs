use std::fs;
use std::path::Path;

use super::records::*;
use super::{mgdl_to_mmol, IngestError, ParseReport, RejectReason, MGDL_PER_MMOL};
use crate::time::{format_ohio, parse_ohio};

/// Event lists understood by the parser and what they become.
#[derive(Clone, Copy)]
enum ListKind {
    Glucose(GlucoseSource),
    Vital(VitalChannel),
}

const LISTS: &[(&str, ListKind)] = &[
    ("glucose_level", ListKind::Glucose(GlucoseSource::Cgm)),
    ("finger_stick", ListKind::Glucose(GlucoseSource::Smbg)),
    ("basal", ListKind::Vital(VitalChannel::Basal)),
    ("basis_gsr", ListKind::Vital(VitalChannel::BasisGsr)),
    (
        "basis_skin_temperature",
        ListKind::Vital(VitalChannel::BasisSkinTemperature),
    ),
    ("hypo_event", ListKind::Vital(VitalChannel::HypoEvent)),
    (
        "basis_heart_rate",
        ListKind::Vital(VitalChannel::BasisHeartRate),
    ),
    ("basis_steps", ListKind::Vital(VitalChannel::BasisSteps)),
    ("acceleration", ListKind::Vital(VitalChannel::Acceleration)),
];

pub fn parse_ohio_xml(path: &Path) -> Result<(RawCohort, ParseReport), IngestError> {
    if !path.is_file() {
        return Err(IngestError::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path)?;
    let file = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_ohio_bytes(&bytes, &file)
}

/// Parses one Ohio-style patient document. Timestamps carry no zone and are
/// taken as local wall-clock time with a zero offset.
pub fn parse_ohio_str(text: &str) -> Result<(RawCohort, ParseReport), IngestError> {
    parse_ohio_bytes(text.as_bytes(), "<memory>")
}

pub(crate) fn parse_ohio_bytes(
    bytes: &[u8],
    file: &str,
) -> Result<(RawCohort, ParseReport), IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IngestError::Xml(e.to_string()))?;
    let doc = roxmltree::Document::parse(text).map_err(|e| IngestError::Xml(e.to_string()))?;
    let root = doc.root_element();
    let patient_id = match root.attribute("id").map(str::trim) {
        Some(id) if !id.is_empty() => id.to_string(),
        _ => return Err(IngestError::MissingPatientId),
    };

    let mut cohort = RawCohort::empty(Provenance::OhioXml);
    let mut report = ParseReport::default();
    let mut meta = PatientMeta::placeholder(patient_id.clone());
    if let Some(w) = root
        .attribute("weight")
        .and_then(|w| w.trim().parse::<f64>().ok())
    {
        if w.is_finite() && w > 0.0 {
            meta.weight = Some(w);
        }
    }

    for list in root.children().filter(|n| n.is_element()) {
        let Some(&(_, kind)) = LISTS
            .iter()
            .find(|(name, _)| *name == list.tag_name().name())
        else {
            continue;
        };
        for event in list.children().filter(|n| n.is_element()) {
            report.rows_read += 1;
            let line = doc.text_pos_at(event.range().start).row as u64;
            let Some(ts) = event.attribute("ts") else {
                report.reject(
                    file,
                    line,
                    RejectReason::InvalidTimestamp,
                    "missing ts".into(),
                );
                continue;
            };
            let Some(t) = parse_ohio(ts) else {
                report.reject(
                    file,
                    line,
                    RejectReason::InvalidTimestamp,
                    format!("timestamp `{ts}` is not a valid dd-mm-yyyy hh:mm:ss date"),
                );
                continue;
            };
            let raw = event.attribute("value").map(str::trim);
            let value = match (kind, raw) {
                (ListKind::Vital(VitalChannel::HypoEvent), None) => Ok(1.0),
                (_, Some(v)) => match v.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(format!("value `{v}` is not a finite number")),
                },
                (_, None) => Err("missing value".to_string()),
            };
            let value = match value {
                Ok(v) => v,
                Err(e) => {
                    report.reject(file, line, RejectReason::ParseError, e);
                    continue;
                }
            };
            match kind {
                ListKind::Glucose(source) => {
                    let mmol = match mgdl_to_mmol(value) {
                        Ok(v) if v > 0.0 && v < 50.0 => v,
                        _ => {
                            report.reject(
                                file,
                                line,
                                RejectReason::InvariantViolation,
                                format!("glucose {value} mg/dL outside (0, 50) mmol/L"),
                            );
                            continue;
                        }
                    };
                    cohort.glucose.push(GlucoseSample {
                        patient_id: patient_id.clone(),
                        t_utc: t,
                        tz_offset_min: 0,
                        source,
                        value_mmol_l: mmol,
                    });
                }
                ListKind::Vital(channel) => cohort.vitals.push(VitalSample {
                    patient_id: patient_id.clone(),
                    t_utc: t,
                    tz_offset_min: 0,
                    channel,
                    value,
                    quality: None,
                }),
            }
        }
    }
    cohort.meta.insert(patient_id, meta);
    Ok((cohort, report))
}

/// Train and test cohorts assembled from a directory of `*-train.xml` and
/// `*-test.xml` files (`-training` and `-testing` are accepted too).
#[derive(Debug, Clone)]
pub struct OhioSplit {
    pub train: RawCohort,
    pub test: RawCohort,
    pub report: ParseReport,
}

pub fn load_ohio_dir(dir: &Path) -> Result<OhioSplit, IngestError> {
    let mut entries: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "xml"))
        .collect();
    entries.sort();
    let mut split = OhioSplit {
        train: RawCohort::empty(Provenance::OhioXml),
        test: RawCohort::empty(Provenance::OhioXml),
        report: ParseReport::default(),
    };
    for path in entries {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let (cohort, report) = parse_ohio_xml(&path)?;
        split.report.absorb(report);
        if stem.ends_with("-test") || stem.ends_with("-testing") {
            split.test.merge(cohort);
        } else if stem.ends_with("-train") || stem.ends_with("-training") {
            split.train.merge(cohort);
        } else {
            split.report.warnings.push(format!(
                "{} matches neither -train nor -test; skipped",
                path.display()
            ));
        }
    }
    Ok(split)
}

/// Writes the Ohio-representable records of one patient as an XML document.
/// Glucose goes back to mg/dL; wearable channels without an Ohio list are
/// dropped.
pub fn write_ohio_xml(cohort: &RawCohort, patient_id: &str) -> String {
    let mut out = String::new();
    let weight = cohort
        .meta
        .get(patient_id)
        .and_then(|m| m.weight)
        .map(|w| format!(" weight=\"{w}\""))
        .unwrap_or_default();
    out.push_str(&format!(
        "<patient id=\"{}\"{weight}>\n",
        xml_escape(patient_id)
    ));
    for &(name, kind) in LISTS {
        out.push_str(&format!("  <{name}>\n"));
        match kind {
            ListKind::Glucose(source) => {
                for s in cohort.glucose.iter().filter(|s| {
                    s.patient_id == patient_id
                        && (s.source == source
                            || (source == GlucoseSource::Cgm && s.source == GlucoseSource::Iscgm))
                }) {
                    let local = crate::time::local_seconds(s.t_utc, s.tz_offset_min);
                    out.push_str(&format!(
                        "    <event ts=\"{}\" value=\"{}\"/>\n",
                        format_ohio(local),
                        s.value_mmol_l * MGDL_PER_MMOL
                    ));
                }
            }
            ListKind::Vital(channel) => {
                for s in cohort
                    .vitals
                    .iter()
                    .filter(|s| s.patient_id == patient_id && s.channel == channel)
                {
                    let local = crate::time::local_seconds(s.t_utc, s.tz_offset_min);
                    out.push_str(&format!(
                        "    <event ts=\"{}\" value=\"{}\"/>\n",
                        format_ohio(local),
                        s.value
                    ));
                }
            }
        }
        out.push_str(&format!("  </{name}>\n"));
    }
    out.push_str("</patient>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_glucose_event() {
        let xml = r#"<patient id="559" weight="99"><glucose_level>
            <event ts="07-12-2021 01:17:00" value="70"/></glucose_level></patient>"#;
        let (c, r) = parse_ohio_str(xml).unwrap();
        assert_eq!(r.rows_rejected(), 0);
        assert_eq!(c.glucose.len(), 1);
        assert_eq!(c.glucose[0].source, GlucoseSource::Cgm);
        assert!((c.glucose[0].value_mmol_l - 70.0 / 18.016).abs() < 1e-12);
        assert!(c.glucose.iter().all(|g| g.source != GlucoseSource::Smbg));
        assert_eq!(c.meta["559"].weight, Some(99.0));
    }

    #[test]
    fn impossible_date_is_reported() {
        let xml = r#"<patient id="1"><glucose_level>
            <event ts="31-02-2020 01:00:00" value="100"/>
            <event ts="01-02-2020 01:00:00" value="100"/>
            </glucose_level></patient>"#;
        let (c, r) = parse_ohio_str(xml).unwrap();
        assert_eq!(c.glucose.len(), 1);
        assert_eq!(r.count(RejectReason::InvalidTimestamp), 1);
    }

    #[test]
    fn hypo_events_and_missing_root_id() {
        let xml = r#"<patient id="2"><hypo_event><event ts="01-02-2020 03:00:00"/></hypo_event>
            <bolus><event ts_begin="x"/></bolus></patient>"#;
        let (c, r) = parse_ohio_str(xml).unwrap();
        assert_eq!(r.rows_read, 1);
        assert_eq!(c.vitals[0].channel, VitalChannel::HypoEvent);
        assert_eq!(c.vitals[0].value, 1.0);
        assert!(matches!(
            parse_ohio_str("<patient><glucose_level/></patient>"),
            Err(IngestError::MissingPatientId)
        ));
        assert!(matches!(
            parse_ohio_str("<patient id="),
            Err(IngestError::Xml(_))
        ));
    }
}
