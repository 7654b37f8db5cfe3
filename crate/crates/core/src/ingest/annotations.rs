use std::path::Path;

use serde::Deserialize;

use super::IngestError;

/// A labelled time interval on one utterance, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpan {
    pub utterance_id: String,
    pub speaker_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

impl LabelSpan {
    pub fn new(
        utterance_id: impl Into<String>,
        speaker_id: impl Into<String>,
        start_s: f64,
        end_s: f64,
        label: impl Into<String>,
    ) -> Self {
        LabelSpan {
            utterance_id: utterance_id.into(),
            speaker_id: speaker_id.into(),
            start_s,
            end_s,
            label: label.into(),
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }
}

/// A point-in-time pitch accent annotation.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AccentEvent {
    pub utterance_id: String,
    pub time_s: f64,
}

#[derive(Deserialize)]
struct SpanRow {
    utterance_id: String,
    speaker_id: String,
    start_s: f64,
    end_s: f64,
    label: String,
}

fn line_of(pos: Option<&csv::Position>) -> u64 {
    pos.map(|p| p.line()).unwrap_or(0)
}

fn parse_error(path: &Path, line: u64, reason: impl Into<String>) -> IngestError {
    IngestError::ParseError {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Reads a `utterance_id,speaker_id,start_s,end_s,label` CSV.
///
/// The result is sorted by `(utterance_id, start_s)`.
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<LabelSpan>, IngestError> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let mut spans = Vec::new();
    for result in reader.deserialize::<SpanRow>() {
        let row = match result {
            Ok(row) => row,
            Err(e) => {
                let line = line_of(e.position());
                return Err(parse_error(path, line, e.to_string()));
            }
        };
        let line = spans.len() as u64 + 2;
        for value in [row.start_s, row.end_s] {
            if !value.is_finite() {
                return Err(parse_error(path, line, "non-finite time"));
            }
            if value < 0.0 {
                return Err(IngestError::NegativeTime {
                    path: path.to_path_buf(),
                    line,
                    value,
                });
            }
        }
        if row.end_s <= row.start_s {
            return Err(parse_error(
                path,
                line,
                format!("end_s {} is not after start_s {}", row.end_s, row.start_s),
            ));
        }
        spans.push(LabelSpan {
            utterance_id: row.utterance_id,
            speaker_id: row.speaker_id,
            start_s: row.start_s,
            end_s: row.end_s,
            label: row.label,
        });
    }
    spans.sort_by(|a, b| {
        a.utterance_id
            .cmp(&b.utterance_id)
            .then(a.start_s.total_cmp(&b.start_s))
    });
    Ok(spans)
}

/// Reads a `utterance_id,time_s` CSV of accent time points.
pub fn read_accent_events(path: impl AsRef<Path>) -> Result<Vec<AccentEvent>, IngestError> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let mut events = Vec::new();
    for result in reader.deserialize::<AccentEvent>() {
        let ev = result.map_err(|e| parse_error(path, line_of(e.position()), e.to_string()))?;
        let line = events.len() as u64 + 2;
        if !ev.time_s.is_finite() {
            return Err(parse_error(path, line, "non-finite time"));
        }
        if ev.time_s < 0.0 {
            return Err(IngestError::NegativeTime {
                path: path.to_path_buf(),
                line,
                value: ev.time_s,
            });
        }
        events.push(ev);
    }
    events.sort_by(|a, b| {
        a.utterance_id
            .cmp(&b.utterance_id)
            .then(a.time_s.total_cmp(&b.time_s))
    });
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    const HEADER: &str = "utterance_id,speaker_id,start_s,end_s,label\n";

    fn write(body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ann.csv");
        fs::write(&p, format!("{HEADER}{body}")).unwrap();
        (dir, p)
    }

    #[test]
    fn maps_fields_directly() {
        let (_d, p) = write("utt1,spkA,0.10,0.20,p\n");
        let spans = read_annotations(&p).unwrap();
        assert_eq!(spans, vec![LabelSpan::new("utt1", "spkA", 0.10, 0.20, "p")]);
    }

    #[test]
    fn reversed_interval_reports_line() {
        let (_d, p) = write("utt1,spkA,0.10,0.20,p\nutt1,spkA,0.30,0.20,n\n");
        match read_annotations(&p) {
            Err(IngestError::ParseError { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn negative_start_rejected() {
        let (_d, p) = write("utt1,spkA,-0.10,0.20,p\n");
        assert!(matches!(
            read_annotations(&p),
            Err(IngestError::NegativeTime { line: 2, .. })
        ));
    }

    #[test]
    fn non_numeric_time_is_parse_error() {
        let (_d, p) = write("utt1,spkA,abc,0.20,p\n");
        assert!(matches!(
            read_annotations(&p),
            Err(IngestError::ParseError { line: 2, .. })
        ));
    }

    #[test]
    fn output_is_sorted() {
        let (_d, p) = write("b,s,0.5,0.6,x\na,s,0.3,0.4,x\na,s,0.1,0.2,x\n");
        let spans = read_annotations(&p).unwrap();
        let keys: Vec<_> = spans
            .iter()
            .map(|s| (s.utterance_id.as_str(), s.start_s))
            .collect();
        assert_eq!(keys, vec![("a", 0.1), ("a", 0.3), ("b", 0.5)]);
    }

    #[test]
    fn accent_events() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("acc.csv");
        fs::write(&p, "utterance_id,time_s\nu2,0.3\nu1,0.15\n").unwrap();
        let ev = read_accent_events(&p).unwrap();
        assert_eq!(ev[0].utterance_id, "u1");
        assert_eq!(ev[1].time_s, 0.3);
    }
}
