//! Time series as CSV: a `time` column followed by one column per variable
//! element (`Pa`, `y[3]`, ...). An empty cell is a masked value.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ssm_core::lang::Role;
use ssm_core::{ModelIr, TimeSeries};

use crate::error::{CliError, CliResult};

/// Reads a series whose columns must all be elements of `role` variables.
pub fn read_timeseries(path: &Path, ir: &ModelIr, role: Role) -> CliResult<TimeSeries> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let data = parse_timeseries(file).map_err(|m| CliError::format(path, m))?;
    data.schema(ir, role).map_err(|e| CliError::format(path, e.to_string()))?;
    Ok(data)
}

/// Parses the format without checking it against a model.
pub fn parse_timeseries<R: std::io::Read>(reader: R) -> Result<TimeSeries, String> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.get(0) != Some("time") {
        return Err("the first column must be `time`".into());
    }
    let mut data = TimeSeries::new(header.iter().skip(1).map(String::from).collect());
    let mut cells = Vec::with_capacity(data.columns.len());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = line + 2;
        if rec.len() != header.len() {
            return Err(format!("row {row} has {} cells, expected {}", rec.len(), header.len()));
        }
        let t = parse_cell(&rec[0]).ok_or_else(|| format!("row {row}: missing or bad time `{}`", &rec[0]))?;
        cells.clear();
        for (c, s) in rec.iter().enumerate().skip(1) {
            cells.push(if s.is_empty() {
                None
            } else {
                Some(parse_cell(s).ok_or_else(|| format!("row {row}, column {}: bad number `{s}`", &header[c]))?)
            });
        }
        data.push_row(t, &cells).map_err(|e| format!("row {row}: {e}"))?;
    }
    Ok(data)
}

fn parse_cell(s: &str) -> Option<f64> {
    s.parse::<f64>().ok()
}

pub fn write_timeseries(path: &Path, data: &TimeSeries) -> CliResult<()> {
    let mut buf = Vec::new();
    format_timeseries(&mut buf, data).map_err(|e| CliError::io(path, e))?;
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(&buf).map_err(|e| CliError::io(path, e))
}

pub fn format_timeseries<W: Write>(out: W, data: &TimeSeries) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend(data.columns.iter().cloned());
    w.write_record(&header)?;
    for r in 0..data.len() {
        let mut rec = vec![fmt_f64(data.time(r))];
        rec.extend(data.row(r).map(|c| c.map(fmt_f64).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_survive_a_round_trip() {
        let mut s = TimeSeries::new(vec!["y[0]".into(), "y[1]".into()]);
        s.push_row(0.1, &[Some(1.5), None]).unwrap();
        s.push_row(0.2, &[None, None]).unwrap();
        s.push_row(0.30000000000000004, &[Some(-2e-300), Some(7.0)]).unwrap();
        let mut buf = Vec::new();
        format_timeseries(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time,y[0],y[1]\n0.1,1.5,\n0.2,,\n"), "{text}");
        assert_eq!(parse_timeseries(&buf[..]).unwrap(), s);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(parse_timeseries("t,a\n0,1\n".as_bytes()).is_err());
        assert!(parse_timeseries("time,a\n1,1\n0,1\n".as_bytes()).unwrap_err().contains("increase"));
        assert!(parse_timeseries("time,a\n0,1,2\n".as_bytes()).is_err());
        assert!(parse_timeseries("time,a\n0,x\n".as_bytes()).unwrap_err().contains("bad number"));
        assert!(parse_timeseries("time,a\n,1\n".as_bytes()).unwrap_err().contains("time"));
        let ok = parse_timeseries("# comment\ntime, a\n0, 1\n".as_bytes()).unwrap();
        assert_eq!(ok.get(0, 0), Some(1.0));
    }
}
