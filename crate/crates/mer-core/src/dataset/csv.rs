//! CSV ingestion and emission for feature and annotation sequences.
//!
//! Feature schema: `song_id,segment_start_ms,f0,...,f{F-1}`.
//! Annotation schema: `song_id,segment_start_ms,valence,arousal`.
//!
//! Comma and semicolon delimiters are autodetected from the header row.
//! Lines starting with `#` are comments (output files carry a provenance
//! comment). Floats are printed with 17 significant digits so a parse
//! round-trips bit-exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{AnnotationSequence, FeatureSequence, SongPair};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Spacing of consecutive segments.
pub const ANNOTATION_STEP_MS: u32 = 500;

/// Formats a float so that parsing recovers the exact bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Rows {
    header: Vec<String>,
    /// (line number, fields)
    rows: Vec<(usize, Vec<String>)>,
}

fn split_rows(text: &str, source: &str) -> Result<Rows> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| Error::Validation(format!("{source}: missing header row")))?;
    let delim = if header_line.contains(';') { ';' } else { ',' };
    let header: Vec<String> = header_line.split(delim).map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (no, line) in lines {
        let fields: Vec<String> = line.split(delim).map(|s| s.trim().to_string()).collect();
        if fields.len() != header.len() {
            return Err(Error::Validation(format!(
                "{source}:{no}: {} fields, header has {}",
                fields.len(),
                header.len()
            )));
        }
        rows.push((no, fields));
    }
    Ok(Rows { header, rows })
}

fn parse_float(s: &str, source: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Validation(format!("{source}:{line}: bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Validation(format!(
            "{source}:{line}: non-finite value {s:?}"
        )));
    }
    Ok(v)
}

fn parse_time(s: &str, source: &str, line: usize) -> Result<u32> {
    s.parse()
        .map_err(|_| Error::Validation(format!("{source}:{line}: bad timestamp {s:?}")))
}

fn check_times(times: &[u32], song: &str, source: &str) -> Result<()> {
    for pair in times.windows(2) {
        if pair[1] != pair[0] + ANNOTATION_STEP_MS {
            return Err(Error::Validation(format!(
                "{source}: song {song}: timestamps must increase in {ANNOTATION_STEP_MS} ms steps, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}

/// Parses one feature CSV, which may hold one or several songs. Songs are
/// returned in first-appearance order.
pub fn parse_feature_csv(text: &str, source: &str) -> Result<Vec<FeatureSequence>> {
    let parsed = split_rows(text, source)?;
    if parsed.header.len() < 3
        || parsed.header[0] != "song_id"
        || parsed.header[1] != "segment_start_ms"
    {
        return Err(Error::Validation(format!(
            "{source}: feature header must start with song_id,segment_start_ms,f0,..."
        )));
    }
    let f_dim = parsed.header.len() - 2;
    for (i, name) in parsed.header[2..].iter().enumerate() {
        if name != &format!("f{i}") {
            return Err(Error::Validation(format!(
                "{source}: feature column {} named {name:?}, expected f{i}",
                i + 2
            )));
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut songs: BTreeMap<String, (Vec<u32>, Vec<f64>)> = BTreeMap::new();
    for (no, fields) in &parsed.rows {
        let id = fields[0].clone();
        if !songs.contains_key(&id) {
            order.push(id.clone());
            songs.insert(id.clone(), (Vec::new(), Vec::new()));
        }
        let entry = songs.get_mut(&id).unwrap();
        entry.0.push(parse_time(&fields[1], source, *no)?);
        for s in &fields[2..] {
            entry.1.push(parse_float(s, source, *no)?);
        }
    }
    let mut out = Vec::new();
    for id in order {
        let (times, flat) = songs.remove(&id).unwrap();
        check_times(&times, &id, source)?;
        let t = times.len();
        out.push(FeatureSequence {
            song_id: id,
            times_ms: times,
            features: Tensor::new(&[t, f_dim], flat),
        });
    }
    Ok(out)
}

/// Parses one annotation CSV. Values outside [-1, 1] are a validation error
/// citing the offending row.
pub fn parse_annotation_csv(text: &str, source: &str) -> Result<Vec<AnnotationSequence>> {
    let parsed = split_rows(text, source)?;
    let want = ["song_id", "segment_start_ms", "valence", "arousal"];
    if parsed.header != want {
        return Err(Error::Validation(format!(
            "{source}: annotation header must be {}",
            want.join(",")
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut songs: BTreeMap<String, (Vec<u32>, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (no, fields) in &parsed.rows {
        let id = fields[0].clone();
        if !songs.contains_key(&id) {
            order.push(id.clone());
            songs.insert(id.clone(), (Vec::new(), Vec::new(), Vec::new()));
        }
        let entry = songs.get_mut(&id).unwrap();
        entry.0.push(parse_time(&fields[1], source, *no)?);
        for (col, store) in [(2usize, 1usize), (3, 2)] {
            let v = parse_float(&fields[col], source, *no)?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "{source}:{no}: {} value {v} outside [-1, 1]",
                    parsed.header[col]
                )));
            }
            if store == 1 {
                entry.1.push(v);
            } else {
                entry.2.push(v);
            }
        }
    }
    let mut out = Vec::new();
    for id in order {
        let (times, valence, arousal) = songs.remove(&id).unwrap();
        check_times(&times, &id, source)?;
        let t = times.len();
        out.push(AnnotationSequence {
            song_id: id,
            times_ms: times,
            valence: Tensor::new(&[t], valence),
            arousal: Tensor::new(&[t], arousal),
        });
    }
    Ok(out)
}

/// Renders feature sequences as CSV text. `comment` lines, when given, are
/// prefixed with `#` above the header.
pub fn write_feature_csv(seqs: &[&FeatureSequence], comment: Option<&str>) -> String {
    let f_dim = seqs.first().map(|s| s.feature_dim()).unwrap_or(0);
    let mut out = String::new();
    if let Some(c) = comment {
        let _ = writeln!(out, "# {c}");
    }
    let cols: Vec<String> = (0..f_dim).map(|i| format!("f{i}")).collect();
    let _ = writeln!(out, "song_id,segment_start_ms,{}", cols.join(","));
    for seq in seqs {
        for (t, &time) in seq.times_ms.iter().enumerate() {
            let vals: Vec<String> = (0..f_dim)
                .map(|f| fmt_f64(seq.features.at(&[t, f])))
                .collect();
            let _ = writeln!(out, "{},{},{}", seq.song_id, time, vals.join(","));
        }
    }
    out
}

/// Renders annotation-schema CSV (also used for predictions).
pub fn write_annotation_csv(seqs: &[&AnnotationSequence], comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "song_id,segment_start_ms,valence,arousal");
    for seq in seqs {
        for (t, &time) in seq.times_ms.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                seq.song_id,
                time,
                fmt_f64(seq.valence.at(&[t])),
                fmt_f64(seq.arousal.at(&[t]))
            );
        }
    }
    out
}

fn csv_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads every feature/annotation CSV under the two directories and pairs
/// them by song id. Songs present on only one side, duplicated ids, or
/// mismatched lengths are ingestion errors naming the song.
pub fn load_dataset(features_dir: &Path, annotations_dir: &Path) -> Result<Vec<SongPair>> {
    let mut features: BTreeMap<String, FeatureSequence> = BTreeMap::new();
    for path in csv_files(features_dir)? {
        let text = std::fs::read_to_string(&path)?;
        for seq in parse_feature_csv(&text, &path.display().to_string())? {
            if features.insert(seq.song_id.clone(), seq).is_some() {
                return Err(Error::Ingestion(format!(
                    "duplicate feature data for a song in {}",
                    path.display()
                )));
            }
        }
    }
    let mut annotations: BTreeMap<String, AnnotationSequence> = BTreeMap::new();
    for path in csv_files(annotations_dir)? {
        let text = std::fs::read_to_string(&path)?;
        for seq in parse_annotation_csv(&text, &path.display().to_string())? {
            if annotations.insert(seq.song_id.clone(), seq).is_some() {
                return Err(Error::Ingestion(format!(
                    "duplicate annotations for a song in {}",
                    path.display()
                )));
            }
        }
    }

    for id in annotations.keys() {
        if !features.contains_key(id) {
            return Err(Error::Ingestion(format!("song {id}: annotations without features")));
        }
    }
    let mut pairs = Vec::new();
    for (id, feat) in features {
        let ann = annotations
            .remove(&id)
            .ok_or_else(|| Error::Ingestion(format!("song {id}: features without annotations")))?;
        super::validate_pair(&feat, &ann)?;
        pairs.push((feat, ann));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FEATURES: &str = "\
song_id,segment_start_ms,f0,f1
a,0,0.5,-0.25
a,500,1.0,0.125
b,0,0.0,0.0
";

    const ANNOTATIONS: &str = "\
song_id,segment_start_ms,valence,arousal
a,0,0.5,-0.5
a,500,0.25,0.75
b,0,0.0,1.0
";

    #[test]
    fn parses_features_grouped_by_song() {
        let seqs = parse_feature_csv(FEATURES, "mem").unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].song_id, "a");
        assert_eq!(seqs[0].len(), 2);
        assert_eq!(seqs[0].features.at(&[1, 1]), 0.125);
        assert_eq!(seqs[1].song_id, "b");
    }

    #[test]
    fn semicolon_delimiter_autodetected() {
        let text = FEATURES.replace(',', ";");
        let seqs = parse_feature_csv(&text, "mem").unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].features.at(&[0, 0]), 0.5);
    }

    #[test]
    fn comment_lines_are_skipped() {
        let text = format!("# config_hash=deadbeef\n{FEATURES}");
        assert_eq!(parse_feature_csv(&text, "mem").unwrap().len(), 2);
    }

    #[test]
    fn out_of_range_annotation_cites_row() {
        let bad = "\
song_id,segment_start_ms,valence,arousal
a,0,1.2,0.0
";
        let err = parse_annotation_csv(bad, "ann.csv").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ann.csv:2"), "{msg}");
        assert!(msg.contains("1.2"), "{msg}");
    }

    #[test]
    fn irregular_timestamps_rejected() {
        let bad = "\
song_id,segment_start_ms,f0
a,0,0.1
a,400,0.2
";
        assert!(parse_feature_csv(bad, "mem").is_err());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let seqs = parse_feature_csv(FEATURES, "mem").unwrap();
        let text = write_feature_csv(&seqs.iter().collect::<Vec<_>>(), Some("hash"));
        let back = parse_feature_csv(&text, "mem2").unwrap();
        assert_eq!(seqs, back);
        // awkward values survive too
        let mut seq = seqs[0].clone();
        *seq.features.at_mut(&[0, 0]) = 0.1 + 0.2; // 0.30000000000000004
        let text = write_feature_csv(&[&seq], None);
        let back = parse_feature_csv(&text, "mem3").unwrap();
        assert_eq!(back[0].features.at(&[0, 0]), 0.1 + 0.2);
    }

    #[test]
    fn load_dataset_pairs_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let fdir = dir.path().join("features");
        let adir = dir.path().join("annotations");
        std::fs::create_dir_all(&fdir).unwrap();
        std::fs::create_dir_all(&adir).unwrap();
        std::fs::write(fdir.join("all.csv"), FEATURES).unwrap();
        std::fs::write(adir.join("all.csv"), ANNOTATIONS).unwrap();
        let pairs = load_dataset(&fdir, &adir).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].0.song_id, "a");
        assert_eq!(pairs[0].1.arousal.at(&[1]), 0.75);
    }

    #[test]
    fn empty_directories_are_an_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let fdir = dir.path().join("f");
        let adir = dir.path().join("a");
        std::fs::create_dir_all(&fdir).unwrap();
        std::fs::create_dir_all(&adir).unwrap();
        assert!(load_dataset(&fdir, &adir).unwrap().is_empty());
    }

    #[test]
    fn missing_pair_names_the_song() {
        let dir = tempfile::tempdir().unwrap();
        let fdir = dir.path().join("f");
        let adir = dir.path().join("a");
        std::fs::create_dir_all(&fdir).unwrap();
        std::fs::create_dir_all(&adir).unwrap();
        std::fs::write(fdir.join("x.csv"), FEATURES).unwrap();
        std::fs::write(
            adir.join("x.csv"),
            "song_id,segment_start_ms,valence,arousal\na,0,0.1,0.1\na,500,0.2,0.2\n",
        )
        .unwrap();
        let err = load_dataset(&fdir, &adir).unwrap_err();
        assert!(err.to_string().contains("song b"), "{err}");
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let fdir = dir.path().join("f");
        let adir = dir.path().join("a");
        std::fs::create_dir_all(&fdir).unwrap();
        std::fs::create_dir_all(&adir).unwrap();
        std::fs::write(fdir.join("x.csv"), "song_id,segment_start_ms,f0\na,0,0.1\na,500,0.2\n")
            .unwrap();
        std::fs::write(
            adir.join("x.csv"),
            "song_id,segment_start_ms,valence,arousal\na,0,0.1,0.1\n",
        )
        .unwrap();
        let err = load_dataset(&fdir, &adir).unwrap_err();
        assert!(err.to_string().contains("song a"), "{err}");
    }
}
