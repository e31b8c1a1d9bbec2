//! Per-step trajectory records and their CSV form.

use thiserror::Error;

use super::world::ZoneMode;
use crate::replan::ReplanEvent;
use crate::stl::Interval;

pub const CSV_HEADER: &str = "t,x,y,theta,u1,u2,u3,speed,vmax,mode,b,active_task,event";

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub x: [f64; 3],
    pub u: [f64; 3],
    /// Planar speed of the commanded motion.
    pub speed: f64,
    pub vmax: f64,
    pub mode: ZoneMode,
    /// Composite barrier value used for the command; `inf` when no member
    /// was active.
    pub b: f64,
    pub active_task: Option<String>,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSummary {
    pub label: String,
    pub window: Interval,
    pub started: Option<f64>,
    pub satisfied: Option<f64>,
}

impl TaskSummary {
    pub fn duration(&self) -> Option<f64> {
        Some(self.satisfied? - self.started?)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub records: Vec<Record>,
    pub tasks: Vec<TaskSummary>,
    pub replans: Vec<ReplanEvent>,
    pub warnings: Vec<String>,
}

/// Formats with 9 significant digits, fixed or scientific like `%.9g`.
pub fn sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        format!("{}e{}", strip_zeros(mant), exp)
    } else {
        let decimals = (8 - exp) as usize;
        strip_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_num(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

pub fn to_csv(records: &[Record]) -> String {
    let mut w = csv::Writer::from_writer(Vec::with_capacity(records.len() * 120));
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(CSV_HEADER.split(','))?;
        for r in records {
            let nums = [
                r.t, r.x[0], r.x[1], r.x[2], r.u[0], r.u[1], r.u[2], r.speed, r.vmax,
            ];
            let mut row: Vec<String> = nums.iter().map(|&n| sig9(n)).collect();
            row.push(r.mode.to_string());
            row.push(sig9(r.b));
            row.push(r.active_task.clone().unwrap_or_else(|| "-".into()));
            row.push(r.events.join(";"));
            w.write_record(&row)?;
        }
        Ok(())
    };
    write(&mut w).expect("writing to memory cannot fail");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogError {
    #[error("unexpected header, want `{CSV_HEADER}`")]
    Header,
    #[error("line {line}: {msg}")]
    Row { line: usize, msg: String },
    #[error("log has no rows")]
    Empty,
}

pub fn parse_csv(text: &str) -> Result<Vec<Record>, LogError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = rd.headers().map_err(|_| LogError::Header)?;
    if header.iter().map(str::trim).ne(CSV_HEADER.split(',')) {
        return Err(LogError::Header);
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line_no = i + 2;
        let row = |msg: String| LogError::Row { line: line_no, msg };
        let fields = rec.map_err(|e| row(e.to_string()))?;
        if fields.len() != 13 {
            return Err(row(format!("expected 13 fields, found {}", fields.len())));
        }
        let mut nums = [0.0; 9];
        for (k, n) in nums.iter_mut().enumerate() {
            *n =
                parse_num(&fields[k]).ok_or_else(|| row(format!("bad number `{}`", &fields[k])))?;
        }
        let mode = ZoneMode::from_name(&fields[9])
            .ok_or_else(|| row(format!("bad mode `{}`", &fields[9])))?;
        let b = parse_num(&fields[10])
            .ok_or_else(|| row(format!("bad barrier value `{}`", &fields[10])))?;
        out.push(Record {
            t: nums[0],
            x: [nums[1], nums[2], nums[3]],
            u: [nums[4], nums[5], nums[6]],
            speed: nums[7],
            vmax: nums[8],
            mode,
            b,
            active_task: (&fields[11] != "-").then(|| fields[11].to_string()),
            events: if fields[12].is_empty() {
                Vec::new()
            } else {
                fields[12].split(';').map(str::to_string).collect()
            },
        });
    }
    if out.is_empty() {
        return Err(LogError::Empty);
    }
    Ok(out)
}
