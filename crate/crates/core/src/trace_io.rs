//! CSV form of a run trace: one row per (iteration, UE, carrier).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::RunTrace;
use crate::error::TraceIoError;
use crate::ids::{CarrierId, UeId};

pub const TRACE_HEADER: [&str; 6] = ["iteration", "ue_id", "carrier_id", "bid", "price", "rate"];

/// Significant digits of every numeric field written.
pub const SIG_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u64,
    pub ue_id: UeId,
    pub carrier_id: CarrierId,
    pub bid: f64,
    pub price: f64,
    /// `bid / price`.
    pub rate: f64,
}

/// Formats `x` with [`SIG_DIGITS`] significant digits, plain notation for
/// moderate magnitudes and exponent notation otherwise.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Flattens a trace; rows follow iteration, then (UE, carrier) order.
pub fn trace_rows(trace: &RunTrace) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for rec in &trace.records {
        for b in &rec.bids {
            let price = rec.quote(b.carrier).map(|q| q.price).unwrap_or(f64::NAN);
            rows.push(TraceRow {
                iteration: rec.iteration,
                ue_id: b.ue,
                carrier_id: b.carrier,
                bid: b.amount,
                price,
                rate: b.amount / price,
            });
        }
    }
    rows
}

pub fn write_trace<W: Write>(trace: &RunTrace, out: W) -> Result<(), TraceIoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace_rows(trace) {
        w.write_record([
            r.iteration.to_string(),
            r.ue_id.to_string(),
            r.carrier_id.to_string(),
            fmt_num(r.bid),
            fmt_num(r.price),
            fmt_num(r.rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trace(trace: &RunTrace, path: impl AsRef<Path>) -> Result<(), TraceIoError> {
    write_trace(trace, File::create(path)?)
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, TraceIoError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(TraceIoError::Header {
            found: header.iter().collect::<Vec<_>>().join(","),
            expected: TRACE_HEADER.join(","),
        });
    }
    r.deserialize().map(|row| row.map_err(TraceIoError::from)).collect()
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRow>, TraceIoError> {
    read_trace(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run;
    use crate::scenario::table1_scenario;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(70.0), "70");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(2.0 / 3.0 * 100.0), "66.6666667");
        assert_eq!(fmt_num(-0.125), "-0.125");
        assert_eq!(fmt_num(1e-9), "1e-9");
        assert_eq!(fmt_num(1.234567891234e-7), "1.23456789e-7");
        assert_eq!(fmt_num(123456789012.0), "1.23456789e11");
        assert_eq!(fmt_num(0.000123456789123), "0.000123456789");
        for x in [std::f64::consts::PI, 1e-300, 5e300, 0.1 + 0.2, 123.456] {
            let s = fmt_num(x);
            let back: f64 = s.parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-8, "{x} -> {s}");
            assert_eq!(fmt_num(back), s);
        }
    }

    #[test]
    fn one_user_row_count() {
        let mut s = table1_scenario(70.0, 70.0);
        s.users.truncate(1);
        s.carriers.truncate(1);
        let trace = run(&s).unwrap();
        assert!(trace.converged);
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iteration,ue_id,carrier_id,bid,price,rate"));
        assert_eq!(lines.count() as u64, trace.iterations_used);
    }

    #[test]
    fn round_trip() {
        let trace = run(&table1_scenario(100.0, 70.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        emit_trace(&trace, &path).unwrap();
        let back = load_trace(&path).unwrap();
        let rows = trace_rows(&trace);
        assert_eq!(back.len(), rows.len());
        let printed = |x: f64| fmt_num(x).parse::<f64>().unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!((a.iteration, a.ue_id, a.carrier_id), (b.iteration, b.ue_id, b.carrier_id));
            assert_eq!(printed(a.bid), b.bid);
            assert_eq!(printed(a.price), b.price);
            assert_eq!(printed(a.rate), b.rate);
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = read_trace("iteration,ue,carrier_id,bid,price,rate\n1,1,1,1,1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TraceIoError::Header { .. }));
    }
}
