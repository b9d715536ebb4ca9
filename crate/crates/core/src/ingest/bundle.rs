use std::fs;
use std::path::Path;

use csv::{ByteRecord, ReaderBuilder, WriterBuilder};

use super::records::*;
use super::{IngestError, ParseReport, RejectReason};
use crate::time::{format_iso_utc, parse_iso_utc};

pub const GLUCOSE_HEADER: &[&str] = &[
    "patient_id",
    "timestamp_utc",
    "tz_offset_min",
    "source",
    "value_mmol_l",
];
pub const VITALS_HEADER: &[&str] = &[
    "patient_id",
    "timestamp_utc",
    "tz_offset_min",
    "channel",
    "value",
    "quality",
];
pub const LOGBOOK_HEADER: &[&str] = &[
    "patient_id",
    "timestamp_utc",
    "tz_offset_min",
    "blood_sugar",
    "sensor_glucose",
    "sgl_trend",
    "basal_insulin",
    "rapid_insulin_meals",
    "rapid_insulin_correction",
    "carbs_mixed",
    "carbs_fast",
    "carbs_slow",
    "hypo_correction",
    "carb_type",
    "exercise_duration_min",
    "exercise_duration_est_min",
    "activity_type",
    "hypo_symptoms",
    "remarks",
];
pub const METADATA_HEADER: &[&str] = &[
    "patient_id",
    "gender",
    "age",
    "weight",
    "height",
    "bmi",
    "basal_percentage",
    "basal_total",
    "hba1c",
    "tdd",
];

const FILES: [&str; 4] = ["glucose.csv", "vitals.csv", "logbook.csv", "metadata.csv"];

/// In-memory contents of the four bundle files.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleSources<B> {
    pub glucose: B,
    pub vitals: B,
    pub logbook: B,
    pub metadata: B,
}

type RowResult<T> = Result<T, (RejectReason, String)>;

/// Reads the bundle directory and parses it.
pub fn parse_inhouse_bundle(dir: &Path) -> Result<(RawCohort, ParseReport), IngestError> {
    let mut contents = Vec::with_capacity(4);
    for name in FILES {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(IngestError::MissingFile(path));
        }
        contents.push(fs::read(&path)?);
    }
    let mut it = contents.into_iter();
    let sources = BundleSources {
        glucose: it.next().unwrap(),
        vitals: it.next().unwrap(),
        logbook: it.next().unwrap(),
        metadata: it.next().unwrap(),
    };
    parse_inhouse_sources(&sources)
}

/// Parses bundle contents already held in memory. Never panics on arbitrary
/// bytes: rows are either accepted, rejected into the report, or the whole
/// call fails with a structural error.
pub fn parse_inhouse_sources<B: AsRef<[u8]>>(
    src: &BundleSources<B>,
) -> Result<(RawCohort, ParseReport), IngestError> {
    let mut report = ParseReport::default();
    let mut cohort = RawCohort::empty(Provenance::InhouseCsv);

    read_table(
        src.glucose.as_ref(),
        "glucose.csv",
        GLUCOSE_HEADER,
        &mut report,
        |f| {
            cohort.glucose.push(parse_glucose_row(f)?);
            Ok(())
        },
    )?;
    read_table(
        src.vitals.as_ref(),
        "vitals.csv",
        VITALS_HEADER,
        &mut report,
        |f| {
            cohort.vitals.push(parse_vital_row(f)?);
            Ok(())
        },
    )?;
    read_table(
        src.logbook.as_ref(),
        "logbook.csv",
        LOGBOOK_HEADER,
        &mut report,
        |f| {
            cohort.logbook.push(parse_logbook_row(f)?);
            Ok(())
        },
    )?;
    read_table(
        src.metadata.as_ref(),
        "metadata.csv",
        METADATA_HEADER,
        &mut report,
        |f| {
            let m = parse_meta_row(f)?;
            if cohort.meta.contains_key(&m.patient_id) {
                return Err((
                    RejectReason::InvariantViolation,
                    format!("duplicate metadata for patient {}", m.patient_id),
                ));
            }
            cohort.meta.insert(m.patient_id.clone(), m);
            Ok(())
        },
    )?;

    for id in cohort.fill_missing_meta() {
        report.warnings.push(format!(
            "patient {id} has samples but no metadata row; placeholder used"
        ));
    }
    Ok((cohort, report))
}

fn read_table(
    bytes: &[u8],
    file: &str,
    header: &[&str],
    report: &mut ParseReport,
    mut on_row: impl FnMut(&[&str]) -> RowResult<()>,
) -> Result<(), IngestError> {
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut record = ByteRecord::new();
    let malformed = |found: String| IngestError::MalformedHeader {
        file: file.to_string(),
        expected: header.join(","),
        found,
    };

    match reader.read_byte_record(&mut record) {
        Ok(true) => {}
        Ok(false) => return Err(malformed(String::new())),
        Err(e) => return Err(malformed(e.to_string())),
    }
    let found: Vec<String> = record
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let f = if i == 0 {
                f.strip_prefix(b"\xef\xbb\xbf").unwrap_or(f)
            } else {
                f
            };
            String::from_utf8_lossy(f).trim().to_string()
        })
        .collect();
    if found.len() != header.len() || found.iter().zip(header).any(|(a, b)| a != b) {
        return Err(malformed(found.join(",")));
    }

    loop {
        let line = reader.position().line() + 1;
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                report.rows_read += 1;
                report.reject(file, line, RejectReason::ParseError, e.to_string());
                // The reader cannot make progress past an I/O-level failure.
                if e.is_io_error() {
                    break;
                }
                continue;
            }
        }
        report.rows_read += 1;
        let line = record.position().map(|p| p.line()).unwrap_or(line);
        if record.len() != header.len() {
            report.reject(
                file,
                line,
                RejectReason::ParseError,
                format!("expected {} fields, found {}", header.len(), record.len()),
            );
            continue;
        }
        let fields: Result<Vec<&str>, _> = record.iter().map(std::str::from_utf8).collect();
        let fields = match fields {
            Ok(f) => f,
            Err(e) => {
                report.reject(file, line, RejectReason::ParseError, e.to_string());
                continue;
            }
        };
        if let Err((reason, detail)) = on_row(&fields) {
            report.reject(file, line, reason, detail);
        }
    }
    Ok(())
}

fn required<'a>(field: &'a str, name: &str) -> RowResult<&'a str> {
    let v = field.trim();
    if v.is_empty() {
        Err((RejectReason::ParseError, format!("{name} is empty")))
    } else {
        Ok(v)
    }
}

fn parse_real(field: &str, name: &str) -> RowResult<f64> {
    let v = required(field, name)?;
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err((
            RejectReason::ParseError,
            format!("{name}: `{v}` is not a finite number"),
        )),
    }
}

fn optional_real(field: &str, name: &str) -> RowResult<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_real(field, name).map(Some)
    }
}

fn optional_text(field: &str) -> Option<String> {
    if field.is_empty() {
        None
    } else {
        Some(field.to_string())
    }
}

fn optional_bool(field: &str, name: &str) -> RowResult<Option<bool>> {
    match field.trim().to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "true" | "yes" | "1" => Ok(Some(true)),
        "false" | "no" | "0" => Ok(Some(false)),
        other => Err((
            RejectReason::ParseError,
            format!("{name}: `{other}` is not a boolean"),
        )),
    }
}

fn parse_timestamp(field: &str) -> RowResult<i64> {
    parse_iso_utc(field.trim()).ok_or_else(|| {
        (
            RejectReason::InvalidTimestamp,
            format!("timestamp `{field}` is not YYYY-MM-DDThh:mm:ssZ"),
        )
    })
}

fn parse_tz(field: &str) -> RowResult<i32> {
    let v = required(field, "tz_offset_min")?;
    let tz: i32 = v.parse().map_err(|_| {
        (
            RejectReason::ParseError,
            format!("tz_offset_min: `{v}` is not an integer"),
        )
    })?;
    if !(-720..=840).contains(&tz) {
        return Err((
            RejectReason::InvariantViolation,
            format!("tz_offset_min {tz} outside [-720, 840]"),
        ));
    }
    Ok(tz)
}

fn parse_glucose_row(f: &[&str]) -> RowResult<GlucoseSample> {
    let patient_id = required(f[0], "patient_id")?.to_string();
    let t_utc = parse_timestamp(f[1])?;
    let tz_offset_min = parse_tz(f[2])?;
    let source: GlucoseSource = f[3].trim().parse().map_err(|_| {
        (
            RejectReason::ParseError,
            format!("unknown glucose source `{}`", f[3]),
        )
    })?;
    let value = parse_real(f[4], "value_mmol_l")?;
    if !(value > 0.0 && value < 50.0) {
        return Err((
            RejectReason::InvariantViolation,
            format!("glucose {value} mmol/L outside (0, 50)"),
        ));
    }
    Ok(GlucoseSample {
        patient_id,
        t_utc,
        tz_offset_min,
        source,
        value_mmol_l: value,
    })
}

fn parse_vital_row(f: &[&str]) -> RowResult<VitalSample> {
    let patient_id = required(f[0], "patient_id")?.to_string();
    let t_utc = parse_timestamp(f[1])?;
    let tz_offset_min = parse_tz(f[2])?;
    let name = f[3].trim();
    let channel = VitalChannel::from_name(name).ok_or_else(|| {
        (
            RejectReason::InvariantViolation,
            format!("unregistered channel `{name}`"),
        )
    })?;
    let value = parse_real(f[4], "value")?;
    let quality = optional_real(f[5], "quality")?;
    if let Some(q) = quality {
        if !(0.0..=100.0).contains(&q) {
            return Err((
                RejectReason::InvariantViolation,
                format!("quality {q} outside [0, 100]"),
            ));
        }
    }
    Ok(VitalSample {
        patient_id,
        t_utc,
        tz_offset_min,
        channel,
        value,
        quality,
    })
}

fn parse_logbook_row(f: &[&str]) -> RowResult<LogbookEntry> {
    let mut e = LogbookEntry::new(
        required(f[0], "patient_id")?,
        parse_timestamp(f[1])?,
        parse_tz(f[2])?,
    );
    e.blood_sugar = optional_real(f[3], "blood_sugar")?;
    e.sensor_glucose = optional_real(f[4], "sensor_glucose")?;
    e.sgl_trend = match f[5].trim() {
        "" => None,
        s => Some(
            s.parse()
                .map_err(|_| (RejectReason::ParseError, format!("unknown sgl_trend `{s}`")))?,
        ),
    };
    e.basal_insulin = optional_real(f[6], "basal_insulin")?;
    e.rapid_insulin_meals = optional_real(f[7], "rapid_insulin_meals")?;
    e.rapid_insulin_correction = optional_real(f[8], "rapid_insulin_correction")?;
    e.carbs_mixed = optional_real(f[9], "carbs_mixed")?;
    e.carbs_fast = optional_real(f[10], "carbs_fast")?;
    e.carbs_slow = optional_real(f[11], "carbs_slow")?;
    e.hypo_correction = optional_bool(f[12], "hypo_correction")?;
    e.carb_type = optional_text(f[13]);
    e.exercise_duration_min = optional_real(f[14], "exercise_duration_min")?;
    e.exercise_duration_est_min = optional_real(f[15], "exercise_duration_est_min")?;
    e.activity_type = optional_text(f[16]);
    e.hypo_symptoms = optional_bool(f[17], "hypo_symptoms")?;
    e.remarks = optional_text(f[18]);
    if e.non_negative_fields().iter().flatten().any(|&v| v < 0.0) {
        return Err((
            RejectReason::InvariantViolation,
            "negative insulin dose or carbohydrate mass".to_string(),
        ));
    }
    Ok(e)
}

fn parse_meta_row(f: &[&str]) -> RowResult<PatientMeta> {
    let mut m = PatientMeta::placeholder(required(f[0], "patient_id")?);
    m.gender = match f[1].trim() {
        "" => None,
        "M" | "m" => Some(Gender::M),
        "F" | "f" => Some(Gender::F),
        g => return Err((RejectReason::ParseError, format!("unknown gender `{g}`"))),
    };
    m.age = optional_real(f[2], "age")?;
    m.weight = optional_real(f[3], "weight")?;
    m.height = optional_real(f[4], "height")?;
    m.bmi = optional_real(f[5], "bmi")?;
    m.basal_percentage = optional_real(f[6], "basal_percentage")?;
    m.basal_total = optional_real(f[7], "basal_total")?;
    m.hba1c = optional_real(f[8], "hba1c")?;
    m.tdd = optional_real(f[9], "tdd")?;
    m.validate()
        .map_err(|e| (RejectReason::InvariantViolation, e))?;
    Ok(m)
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flag(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

fn write_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 fields")
}

/// Serializes a cohort into the four bundle files' contents.
pub fn bundle_to_strings(cohort: &RawCohort) -> BundleSources<String> {
    let glucose = write_csv(
        GLUCOSE_HEADER,
        cohort.glucose.iter().map(|s| {
            vec![
                s.patient_id.clone(),
                format_iso_utc(s.t_utc),
                s.tz_offset_min.to_string(),
                s.source.as_str().to_string(),
                s.value_mmol_l.to_string(),
            ]
        }),
    );
    let vitals = write_csv(
        VITALS_HEADER,
        cohort.vitals.iter().map(|s| {
            vec![
                s.patient_id.clone(),
                format_iso_utc(s.t_utc),
                s.tz_offset_min.to_string(),
                s.channel.name().to_string(),
                s.value.to_string(),
                num(s.quality),
            ]
        }),
    );
    let logbook = write_csv(
        LOGBOOK_HEADER,
        cohort.logbook.iter().map(|e| {
            vec![
                e.patient_id.clone(),
                format_iso_utc(e.t_utc),
                e.tz_offset_min.to_string(),
                num(e.blood_sugar),
                num(e.sensor_glucose),
                e.sgl_trend
                    .map(|t| t.as_str().to_string())
                    .unwrap_or_default(),
                num(e.basal_insulin),
                num(e.rapid_insulin_meals),
                num(e.rapid_insulin_correction),
                num(e.carbs_mixed),
                num(e.carbs_fast),
                num(e.carbs_slow),
                flag(e.hypo_correction),
                e.carb_type.clone().unwrap_or_default(),
                num(e.exercise_duration_min),
                num(e.exercise_duration_est_min),
                e.activity_type.clone().unwrap_or_default(),
                flag(e.hypo_symptoms),
                e.remarks.clone().unwrap_or_default(),
            ]
        }),
    );
    let metadata = write_csv(
        METADATA_HEADER,
        cohort.meta.values().map(|m| {
            vec![
                m.patient_id.clone(),
                m.gender.map(|g| g.as_str().to_string()).unwrap_or_default(),
                num(m.age),
                num(m.weight),
                num(m.height),
                num(m.bmi),
                num(m.basal_percentage),
                num(m.basal_total),
                num(m.hba1c),
                num(m.tdd),
            ]
        }),
    );
    BundleSources {
        glucose,
        vitals,
        logbook,
        metadata,
    }
}

/// Writes the cohort as a bundle directory (created if absent).
pub fn write_bundle(cohort: &RawCohort, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let s = bundle_to_strings(cohort);
    fs::write(dir.join("glucose.csv"), s.glucose)?;
    fs::write(dir.join("vitals.csv"), s.vitals)?;
    fs::write(dir.join("logbook.csv"), s.logbook)?;
    fs::write(dir.join("metadata.csv"), s.metadata)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sources(glucose: &str) -> BundleSources<String> {
        BundleSources {
            glucose: glucose.to_string(),
            vitals: VITALS_HEADER.join(",") + "\n",
            logbook: LOGBOOK_HEADER.join(",") + "\n",
            metadata: METADATA_HEADER.join(",") + "\np1,F,10,35,140,17.9,40,8,7.1,20\n",
        }
    }

    #[test]
    fn header_only_glucose() {
        let (c, r) = parse_inhouse_sources(&sources(&(GLUCOSE_HEADER.join(",") + "\n"))).unwrap();
        assert!(c.glucose.is_empty());
        // Only the metadata row was read.
        assert_eq!(r.rows_read, 1);
        assert_eq!(r.rows_rejected(), 0);
    }

    #[test]
    fn bad_value_is_skipped() {
        let g = format!(
            "{}\np1,2021-07-05T08:00:00Z,120,CGM,5.5\np1,2021-07-05T08:05:00Z,120,CGM,abc\np1,2021-07-05T08:10:00Z,120,CGM,6.1\n",
            GLUCOSE_HEADER.join(",")
        );
        let (c, r) = parse_inhouse_sources(&sources(&g)).unwrap();
        assert_eq!(c.glucose.len(), 2);
        assert_eq!(r.count(RejectReason::ParseError), 1);
        assert_eq!(r.rejections[0].line, 3);
    }

    #[test]
    fn out_of_range_offset_is_invariant_violation() {
        let g = format!(
            "{}\np1,2021-07-05T08:00:00Z,900,CGM,5.5\n",
            GLUCOSE_HEADER.join(",")
        );
        let (c, r) = parse_inhouse_sources(&sources(&g)).unwrap();
        assert!(c.glucose.is_empty());
        assert_eq!(r.count(RejectReason::InvariantViolation), 1);
    }

    #[test]
    fn wrong_header_is_fatal() {
        let err = parse_inhouse_sources(&sources("patient,ts,tz,source,value\n")).unwrap_err();
        assert!(matches!(err, IngestError::MalformedHeader { .. }));
        assert!(parse_inhouse_sources(&sources("")).is_err());
    }

    #[test]
    fn missing_file_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            parse_inhouse_bundle(dir.path()),
            Err(IngestError::MissingFile(_))
        ));
    }

    #[test]
    fn text_fields_with_commas_round_trip() {
        let mut c = RawCohort::empty(Provenance::InhouseCsv);
        let mut e = LogbookEntry::new("p1", 1_625_472_000, 120);
        e.remarks = Some("ate pasta, then \"felt shaky\"".into());
        e.hypo_symptoms = Some(true);
        e.carbs_fast = Some(15.0);
        c.logbook.push(e);
        c.fill_missing_meta();
        let (back, report) = parse_inhouse_sources(&bundle_to_strings(&c)).unwrap();
        assert_eq!(report.rows_rejected(), 0);
        assert_eq!(back.logbook, c.logbook);
        assert_eq!(back.meta, c.meta);
    }
}
