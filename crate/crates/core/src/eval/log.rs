//! Samples CSV: `game,variant,agent,seed,episode,score,steps,wall_ms`, LF endings.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{EvalError, ScoreSample};

pub const SAMPLES_HEADER: &str = "game,variant,agent,seed,episode,score,steps,wall_ms";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_samples_to<W: Write>(samples: &[ScoreSample], out: W) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(out);
    w.write_record(SAMPLES_HEADER.split(','))
        .map_err(|e| EvalError::Parse { row: 0, message: e.to_string() })?;
    for s in samples {
        w.serialize(s).map_err(|e| EvalError::Parse {
            row: 0,
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| EvalError::Io {
        path: "<writer>".into(),
        source: e,
    })
}

pub fn write_samples(samples: &[ScoreSample], path: &Path) -> Result<(), EvalError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_samples_to(samples, BufWriter::new(file))
}

/// Rows are numbered from 1 for the header, so the first sample is row 2.
pub fn read_samples_from<R: Read>(input: R) -> Result<Vec<ScoreSample>, EvalError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = r.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(EvalError::Parse { row: 1, message: e.to_string() }),
        None => return Err(EvalError::Parse { row: 1, message: "empty file".into() }),
    };
    let header_line = header.iter().collect::<Vec<_>>().join(",");
    if header_line != SAMPLES_HEADER {
        return Err(EvalError::Parse {
            row: 1,
            message: format!("expected header '{SAMPLES_HEADER}', found '{header_line}'"),
        });
    }
    let headers = csv::StringRecord::from(SAMPLES_HEADER.split(',').collect::<Vec<_>>());
    let mut out = Vec::new();
    for (i, record) in records.enumerate() {
        let row = i as u64 + 2;
        let record = record.map_err(|e| EvalError::Parse { row, message: e.to_string() })?;
        let sample: ScoreSample = record
            .deserialize(Some(&headers))
            .map_err(|e| EvalError::Parse { row, message: e.to_string() })?;
        out.push(sample);
    }
    Ok(out)
}

pub fn read_samples(path: &Path) -> Result<Vec<ScoreSample>, EvalError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_samples_from(std::io::BufReader::new(file))
}
