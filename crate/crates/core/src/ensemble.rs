//! Run records, ensembles, and their file formats.
//!
//! An ensemble is an ordered list of run records plus generation metadata.
//! On disk it is JSONL (one record per line) or CSV with the same field
//! order; both start with a `#meta ` sidecar line carrying the metadata as
//! JSON.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quantum::AngleConfig;

/// Experiment geometry that produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    V,
    W,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Geometry::V => write!(f, "V"),
            Geometry::W => write!(f, "W"),
        }
    }
}

/// Selection label attached to a record: the initial Bell state C0..C3 in
/// V-shaped runs, or the Bell-state-measurement outcome M0..M3 in W-shaped
/// runs. C_i and M_i share the index i.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum SelLabel {
    C0,
    C1,
    C2,
    C3,
    M0,
    M1,
    M2,
    M3,
}

impl SelLabel {
    pub fn state(index: usize) -> Option<SelLabel> {
        [SelLabel::C0, SelLabel::C1, SelLabel::C2, SelLabel::C3]
            .get(index)
            .copied()
    }

    pub fn measurement(index: usize) -> Option<SelLabel> {
        [SelLabel::M0, SelLabel::M1, SelLabel::M2, SelLabel::M3]
            .get(index)
            .copied()
    }

    /// Shared four-way index: C_i and M_i both map to i.
    pub fn index(self) -> usize {
        match self {
            SelLabel::C0 | SelLabel::M0 => 0,
            SelLabel::C1 | SelLabel::M1 => 1,
            SelLabel::C2 | SelLabel::M2 => 2,
            SelLabel::C3 | SelLabel::M3 => 3,
        }
    }

    pub fn is_measurement(self) -> bool {
        matches!(
            self,
            SelLabel::M0 | SelLabel::M1 | SelLabel::M2 | SelLabel::M3
        )
    }
}

impl fmt::Display for SelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = if self.is_measurement() { 'M' } else { 'C' };
        write!(f, "{prefix}{}", self.index())
    }
}

impl FromStr for SelLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<SelLabel> {
        match s {
            "C0" => Ok(SelLabel::C0),
            "C1" => Ok(SelLabel::C1),
            "C2" => Ok(SelLabel::C2),
            "C3" => Ok(SelLabel::C3),
            "M0" => Ok(SelLabel::M0),
            "M1" => Ok(SelLabel::M1),
            "M2" => Ok(SelLabel::M2),
            "M3" => Ok(SelLabel::M3),
            other => Err(Error::InvalidArgument(format!(
                "unknown selection label {other:?}"
            ))),
        }
    }
}

/// One experimental run: settings, outcomes, optional selection label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub a: u8,
    pub b: u8,
    #[serde(rename = "A")]
    pub outcome_a: u8,
    #[serde(rename = "B")]
    pub outcome_b: u8,
    pub sel: Option<SelLabel>,
    pub geometry: Geometry,
}

impl RunRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        for (name, bit) in [
            ("a", self.a),
            ("b", self.b),
            ("A", self.outcome_a),
            ("B", self.outcome_b),
        ] {
            if bit > 1 {
                return Err(format!("field {name} must be 0 or 1, got {bit}"));
            }
        }
        Ok(())
    }
}

/// Generation metadata carried in the `#meta ` sidecar line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub seed: u64,
    pub config_digest: String,
    /// Number of records in the ensemble.
    pub shots: u64,
    /// For post-retention ensembles: how many runs were attempted.
    pub attempted: Option<u64>,
    pub angles: AngleConfig,
}

/// Ordered collection of run records with provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    meta: EnsembleMeta,
    records: Vec<RunRecord>,
}

impl Ensemble {
    /// Assemble an ensemble, enforcing strictly increasing run ids, binary
    /// fields, and a consistent shot count.
    pub fn from_parts(meta: EnsembleMeta, records: Vec<RunRecord>) -> Result<Self> {
        let mut last: Option<u64> = None;
        for rec in &records {
            rec.validate()
                .map_err(Error::InvalidArgument)?;
            if let Some(prev) = last {
                if rec.run <= prev {
                    return Err(Error::InvalidArgument(format!(
                        "run ids must be strictly increasing ({} after {prev})",
                        rec.run
                    )));
                }
            }
            last = Some(rec.run);
        }
        if meta.shots != records.len() as u64 {
            return Err(Error::InvalidArgument(format!(
                "meta.shots = {} but ensemble holds {} records",
                meta.shots,
                records.len()
            )));
        }
        Ok(Ensemble { meta, records })
    }

    pub fn meta(&self) -> &EnsembleMeta {
        &self.meta
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Count of records per selection label, sorted by label.
    pub fn sel_counts(&self) -> std::collections::BTreeMap<SelLabel, u64> {
        let mut counts = std::collections::BTreeMap::new();
        for rec in &self.records {
            if let Some(sel) = rec.sel {
                *counts.entry(sel).or_insert(0) += 1;
            }
        }
        counts
    }
}

/// Stable hex digest of a canonicalized configuration value.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let hash = Sha256::digest(canonical.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

/// Ensemble file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleFormat {
    Jsonl,
    Csv,
}

impl EnsembleFormat {
    /// Infer the format from a path extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> EnsembleFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EnsembleFormat::Csv,
            _ => EnsembleFormat::Jsonl,
        }
    }
}

const META_PREFIX: &str = "#meta ";
const CSV_HEADER: &str = "run,a,b,A,B,sel,geometry";

/// Write as JSONL: a `#meta ` line, then one JSON record per line.
pub fn write_jsonl<W: Write>(ensemble: &Ensemble, mut w: W) -> Result<()> {
    writeln!(
        w,
        "{META_PREFIX}{}",
        serde_json::to_string(ensemble.meta()).expect("meta serializes")
    )?;
    for rec in ensemble.records() {
        writeln!(w, "{}", serde_json::to_string(rec).expect("record serializes"))?;
    }
    Ok(())
}

/// Write as CSV with the same field order as JSONL; `sel` is empty when
/// absent.
pub fn write_csv<W: Write>(ensemble: &Ensemble, mut w: W) -> Result<()> {
    writeln!(
        w,
        "{META_PREFIX}{}",
        serde_json::to_string(ensemble.meta()).expect("meta serializes")
    )?;
    writeln!(w, "{CSV_HEADER}")?;
    for rec in ensemble.records() {
        let sel = rec.sel.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            rec.run, rec.a, rec.b, rec.outcome_a, rec.outcome_b, sel, rec.geometry
        )?;
    }
    Ok(())
}

fn read_meta_line<R: BufRead>(r: &mut R) -> Result<EnsembleMeta> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let line = line.trim_end_matches(['\n', '\r']);
    let json = line.strip_prefix(META_PREFIX).ok_or(Error::MissingMeta)?;
    serde_json::from_str(json).map_err(|_| Error::MissingMeta)
}

/// Read a JSONL ensemble. Malformed records are reported with their
/// one-based line number.
pub fn read_jsonl<R: BufRead>(mut r: R) -> Result<Ensemble> {
    let meta = read_meta_line(&mut r)?;
    let mut records = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 2; // meta line is line 1
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        rec.validate().map_err(|message| Error::MalformedRecord {
            line: line_no,
            message,
        })?;
        records.push(rec);
    }
    let shots = records.len() as u64;
    Ensemble::from_parts(EnsembleMeta { shots, ..meta }, records)
}

/// Read a CSV ensemble written by [`write_csv`].
pub fn read_csv<R: BufRead>(mut r: R) -> Result<Ensemble> {
    let meta = read_meta_line(&mut r)?;
    let mut header = String::new();
    r.read_line(&mut header)?;
    if header.trim_end_matches(['\n', '\r']) != CSV_HEADER {
        return Err(Error::MalformedRecord {
            line: 2,
            message: format!("expected header {CSV_HEADER:?}"),
        });
    }
    let mut records = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 3; // meta + header
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_csv_record(&line).map_err(|message| Error::MalformedRecord {
            line: line_no,
            message,
        })?;
        records.push(rec);
    }
    let shots = records.len() as u64;
    Ensemble::from_parts(EnsembleMeta { shots, ..meta }, records)
}

fn parse_csv_record(line: &str) -> std::result::Result<RunRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 7 {
        return Err(format!("expected 7 fields, got {}", fields.len()));
    }
    let run: u64 = fields[0]
        .parse()
        .map_err(|_| format!("bad run id {:?}", fields[0]))?;
    let parse_bit = |s: &str, name: &str| -> std::result::Result<u8, String> {
        match s {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(format!("field {name} must be 0 or 1, got {other:?}")),
        }
    };
    let a = parse_bit(fields[1], "a")?;
    let b = parse_bit(fields[2], "b")?;
    let outcome_a = parse_bit(fields[3], "A")?;
    let outcome_b = parse_bit(fields[4], "B")?;
    let sel = if fields[5].is_empty() {
        None
    } else {
        Some(
            fields[5]
                .parse::<SelLabel>()
                .map_err(|e| e.to_string())?,
        )
    };
    let geometry = match fields[6] {
        "V" => Geometry::V,
        "W" => Geometry::W,
        other => return Err(format!("bad geometry {other:?}")),
    };
    let rec = RunRecord {
        run,
        a,
        b,
        outcome_a,
        outcome_b,
        sel,
        geometry,
    };
    rec.validate()?;
    Ok(rec)
}

/// Write an ensemble to a writer in the given format.
pub fn write_ensemble<W: Write>(
    ensemble: &Ensemble,
    format: EnsembleFormat,
    w: W,
) -> Result<()> {
    match format {
        EnsembleFormat::Jsonl => write_jsonl(ensemble, w),
        EnsembleFormat::Csv => write_csv(ensemble, w),
    }
}

/// Read an ensemble from a reader in the given format.
pub fn read_ensemble<R: Read>(format: EnsembleFormat, r: R) -> Result<Ensemble> {
    let buf = BufReader::new(r);
    match format {
        EnsembleFormat::Jsonl => read_jsonl(buf),
        EnsembleFormat::Csv => read_csv(buf),
    }
}

/// Read an ensemble from a path, inferring the format from the extension.
pub fn read_ensemble_path(path: &Path) -> Result<Ensemble> {
    let format = EnsembleFormat::from_path(path);
    let file = File::open(path)?;
    read_ensemble(format, file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta(shots: u64) -> EnsembleMeta {
        EnsembleMeta {
            seed: 7,
            config_digest: "cafe".into(),
            shots,
            attempted: None,
            angles: AngleConfig::default(),
        }
    }

    fn record(run: u64, sel: Option<SelLabel>) -> RunRecord {
        RunRecord {
            run,
            a: (run % 2) as u8,
            b: ((run / 2) % 2) as u8,
            outcome_a: 0,
            outcome_b: 1,
            sel,
            geometry: Geometry::V,
        }
    }

    #[test]
    fn jsonl_round_trip_preserves_everything() {
        let records = vec![
            record(0, Some(SelLabel::C0)),
            record(1, None),
            record(5, Some(SelLabel::M3)),
        ];
        let ens = Ensemble::from_parts(meta(3), records).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&ens, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("#meta {"));
        assert!(text.contains("\"sel\":\"M3\""));
        let back = read_jsonl(BufReader::new(&buf[..])).unwrap();
        assert_eq!(back, ens);
    }

    #[test]
    fn csv_round_trip_preserves_everything() {
        let records = vec![record(0, Some(SelLabel::C2)), record(3, None)];
        let ens = Ensemble::from_parts(meta(2), records).unwrap();
        let mut buf = Vec::new();
        write_csv(&ens, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap() == CSV_HEADER);
        let back = read_csv(BufReader::new(&buf[..])).unwrap();
        assert_eq!(back, ens);
    }

    #[test]
    fn malformed_jsonl_reports_line_number() {
        let text = format!(
            "#meta {}\n{}\nnot json\n",
            serde_json::to_string(&meta(2)).unwrap(),
            serde_json::to_string(&record(0, None)).unwrap()
        );
        let err = read_jsonl(BufReader::new(text.as_bytes())).unwrap_err();
        match err {
            Error::MalformedRecord { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn out_of_range_bit_reports_line_number() {
        let text = format!(
            "#meta {}\n{{\"run\":0,\"a\":2,\"b\":0,\"A\":0,\"B\":0,\"sel\":null,\"geometry\":\"V\"}}\n",
            serde_json::to_string(&meta(1)).unwrap()
        );
        let err = read_jsonl(BufReader::new(text.as_bytes())).unwrap_err();
        match err {
            Error::MalformedRecord { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("a"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn missing_meta_is_rejected() {
        let text = "{\"run\":0}\n";
        assert!(matches!(
            read_jsonl(BufReader::new(text.as_bytes())),
            Err(Error::MissingMeta)
        ));
    }

    #[test]
    fn run_ids_must_increase() {
        let records = vec![record(1, None), record(1, None)];
        assert!(Ensemble::from_parts(meta(2), records).is_err());
    }

    #[test]
    fn retention_metadata_keeps_both_counts() {
        let m = EnsembleMeta {
            attempted: Some(10),
            ..meta(1)
        };
        let ens = Ensemble::from_parts(m, vec![record(4, None)]).unwrap();
        assert_eq!(ens.meta().attempted, Some(10));
        assert_eq!(ens.meta().shots, 1);
    }

    #[test]
    fn digest_is_stable_and_input_sensitive() {
        #[derive(Serialize)]
        struct Cfg {
            shots: u64,
            seed: u64,
        }
        let d1 = config_digest(&Cfg { shots: 10, seed: 1 });
        let d2 = config_digest(&Cfg { shots: 10, seed: 1 });
        let d3 = config_digest(&Cfg { shots: 10, seed: 2 });
        assert_eq!(d1, d2);
        assert_ne!(d1, d3);
        assert_eq!(d1.len(), 64);
    }

    fn arb_fields() -> impl Strategy<Value = (u8, u8, u8, u8, Option<usize>, bool)> {
        (
            0..2u8,
            0..2u8,
            0..2u8,
            0..2u8,
            proptest::option::of(0..8usize),
            proptest::bool::ANY,
        )
    }

    proptest! {
        #[test]
        fn round_trip_is_identity_in_both_formats(
            fields in proptest::collection::vec(arb_fields(), 1..40),
            gaps in proptest::collection::vec(1..5u64, 1..40),
            csv in proptest::bool::ANY,
        ) {
            let mut run = 0u64;
            let mut records = Vec::new();
            for (i, (a, b, oa, ob, sel, w)) in fields.into_iter().enumerate() {
                run += gaps.get(i).copied().unwrap_or(1);
                records.push(RunRecord {
                    run,
                    a,
                    b,
                    outcome_a: oa,
                    outcome_b: ob,
                    sel: sel.map(|s| {
                        if s < 4 {
                            SelLabel::state(s).unwrap()
                        } else {
                            SelLabel::measurement(s - 4).unwrap()
                        }
                    }),
                    geometry: if w { Geometry::W } else { Geometry::V },
                });
            }
            let ens = Ensemble::from_parts(meta(records.len() as u64), records).unwrap();
            let format = if csv { EnsembleFormat::Csv } else { EnsembleFormat::Jsonl };
            let mut buf = Vec::new();
            write_ensemble(&ens, format, &mut buf).unwrap();
            let back = read_ensemble(format, &buf[..]).unwrap();
            prop_assert_eq!(back, ens);
        }
    }
}
