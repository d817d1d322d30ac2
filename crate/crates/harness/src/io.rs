//! On-disk formats: trace.csv and JSON with 17 significant digits, atomic writes.

use std::io::{self, Write};
use std::path::Path;

use samuel_core::{Interval, RoundRecord, RunTrace, SlotRecord};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: line {line}: {message}")]
    Csv {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Json { path: String, message: String },
}

/// Every float as `d.dddddddddddddddde±x`: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON whose numbers carry 17 significant digits.
struct SciFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_float(v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, SciFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: shown.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| FormatError::Json {
        path: shown,
        message: e.to_string(),
    })
}

/// Writes via a sibling temp file and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), FormatError> {
    let err = |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    let name = path
        .file_name()
        .map_or("out".into(), |n| n.to_string_lossy().into_owned());
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}

const SLOT_FIELDS: [&str; 6] = ["start", "end", "loss", "r", "w", "pw"];

/// Header: `tau,loss,W,alive_slots,pred_norm`, six columns per slot group,
/// then one `x{i}` column per coordinate when `dim` is given.
pub fn trace_header(slot_columns: usize, dim: Option<usize>) -> Vec<String> {
    let mut h: Vec<String> = ["tau", "loss", "W", "alive_slots", "pred_norm"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for k in 0..slot_columns {
        h.extend(SLOT_FIELDS.iter().map(|f| format!("slot{k}_{f}")));
    }
    if let Some(d) = dim {
        h.extend((0..d).map(|i| format!("x{i}")));
    }
    h
}

fn row(r: &RoundRecord<f64>, slot_columns: usize, write_x: bool) -> Vec<String> {
    let mut out = vec![
        r.tau.to_string(),
        fmt_float(r.loss),
        fmt_float(r.total_weight),
        r.alive_slots.to_string(),
        fmt_float(r.prediction_norm()),
    ];
    let mut groups = vec![None; slot_columns];
    for s in &r.slots {
        if let Some(g) = groups.get_mut(s.slot) {
            *g = Some(s);
        }
    }
    for g in groups {
        match g {
            Some(s) => {
                let (a, b) = s.interval.map_or((String::new(), String::new()), |i| {
                    (i.start.to_string(), i.end.to_string())
                });
                out.extend([
                    a,
                    b,
                    fmt_float(s.expert_loss),
                    fmt_float(s.regret),
                    fmt_float(s.weight_sum),
                    fmt_float(s.pseudo_weight_sum),
                ]);
            }
            None => out.extend(std::iter::repeat_n(String::new(), SLOT_FIELDS.len())),
        }
    }
    if write_x {
        out.extend(r.prediction.iter().map(|&v| fmt_float(v)));
    }
    out
}

/// Serializes every `log_every`-th round (and always the last).
pub fn write_trace_csv(trace: &RunTrace<f64>, log_every: usize, write_x: bool) -> String {
    let dim = trace.rounds.first().map_or(0, |r| r.prediction.len());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(trace_header(trace.slot_columns, write_x.then_some(dim)))
        .expect("in-memory CSV");
    let last = trace.len();
    for r in &trace.rounds {
        if r.tau % log_every.max(1) == 0 || r.tau == last || log_every <= 1 {
            w.write_record(row(r, trace.slot_columns, write_x))
                .expect("in-memory CSV");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("CSV is UTF-8")
}

/// Parses trace.csv back into a trace. Slot groups with an empty `loss`
/// cell are absent; an empty `start` means no interval label.
pub fn read_trace_csv(text: &str, path: &str) -> Result<RunTrace<f64>, FormatError> {
    let bad = |line: usize, message: String| FormatError::Csv {
        path: path.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let base = ["tau", "loss", "W", "alive_slots", "pred_norm"];
    if header.len() < base.len() || header[..base.len()] != base {
        return Err(bad(1, format!("header must start with {}", base.join(","))));
    }
    let slot_columns = header
        .iter()
        .filter(|h| h.starts_with("slot") && h.ends_with("_start"))
        .count();
    let x_start = base.len() + SLOT_FIELDS.len() * slot_columns;
    if header != trace_header(slot_columns, Some(header.len().saturating_sub(x_start)))[..] {
        return Err(bad(1, "unexpected column layout".into()));
    }
    let dim = header.len() - x_start;
    let mut trace = RunTrace::new(slot_columns);
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let num = |i: usize| -> Result<f64, FormatError> {
            rec[i].parse::<f64>().map_err(|_| {
                bad(
                    line,
                    format!("column {} is not a number: {:?}", header[i], &rec[i]),
                )
            })
        };
        let int = |i: usize| -> Result<usize, FormatError> {
            rec[i].parse::<usize>().map_err(|_| {
                bad(
                    line,
                    format!("column {} is not an integer: {:?}", header[i], &rec[i]),
                )
            })
        };
        let mut slots = Vec::new();
        for s in 0..slot_columns {
            let o = base.len() + s * SLOT_FIELDS.len();
            if rec[o + 2].is_empty() {
                continue;
            }
            let interval = if rec[o].is_empty() {
                None
            } else {
                let (a, b) = (int(o)?, int(o + 1)?);
                if !(1 <= a && a <= b) {
                    return Err(bad(line, format!("bad interval [{a}, {b}]")));
                }
                Some(Interval::new(a, b))
            };
            slots.push(SlotRecord {
                slot: s,
                interval,
                expert_loss: num(o + 2)?,
                regret: num(o + 3)?,
                weight_sum: num(o + 4)?,
                pseudo_weight_sum: num(o + 5)?,
            });
        }
        let prediction = (0..dim)
            .map(|i| num(x_start + i))
            .collect::<Result<Vec<_>, _>>()?;
        trace.rounds.push(RoundRecord {
            tau: int(0)?,
            loss: num(1)?,
            total_weight: num(2)?,
            alive_slots: int(3)?,
            prediction,
            slots,
        });
    }
    Ok(trace)
}
