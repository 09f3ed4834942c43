//! The output file: run metadata as `#` lines, then one CSV row per
//! (sample, output time) with the sample's parameters, state, simulated
//! observations (joint target only), log-likelihood and log-weight.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ssm_core::lang::Role;
use ssm_core::ModelIr;

use crate::error::{CliError, CliResult};
use crate::series_io::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub theta: Vec<f64>,
    /// State per output time; `None` when no trajectory is available.
    pub states: Option<Vec<Vec<f64>>>,
    /// Simulated observations per output time.
    pub obs: Option<Vec<Vec<f64>>>,
    pub loglik: Option<f64>,
    pub log_weight: Option<f64>,
}

pub struct Output {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    times: Vec<f64>,
    with_obs: bool,
    nx: usize,
    ny: usize,
    records: Vec<Record>,
}

impl Output {
    pub fn new(ir: &ModelIr, times: Vec<f64>, with_obs: bool, meta: Vec<(String, String)>) -> Output {
        let mut header = vec!["sample".to_string(), "time".to_string()];
        header.extend(ir.slot_names(Role::Param));
        header.extend(ir.slot_names(Role::State));
        if with_obs {
            header.extend(ir.slot_names(Role::Obs));
        }
        header.push("loglik".into());
        header.push("log_weight".into());
        Output {
            meta,
            header,
            times,
            with_obs,
            nx: ir.count(Role::State),
            ny: ir.count(Role::Obs),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        for (k, v) in &self.meta {
            writeln!(buf, "# {k} = {v}").expect("write to memory");
        }
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&self.header).expect("write to memory");
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        for (s, r) in self.records.iter().enumerate() {
            for (i, &t) in self.times.iter().enumerate() {
                let mut row = vec![s.to_string(), fmt_f64(t)];
                row.extend(r.theta.iter().map(|&v| fmt_f64(v)));
                match &r.states {
                    Some(x) => row.extend(x[i].iter().map(|&v| fmt_f64(v))),
                    None => row.extend((0..self.nx).map(|_| String::new())),
                }
                if self.with_obs {
                    match &r.obs {
                        Some(y) => row.extend(y[i].iter().map(|&v| fmt_f64(v))),
                        None => row.extend((0..self.ny).map(|_| String::new())),
                    }
                }
                row.push(opt(r.loglik));
                row.push(opt(r.log_weight));
                w.write_record(&row).expect("write to memory");
            }
        }
        w.into_inner().expect("flush to memory")
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| CliError::io(path, e))
    }
}

/// One sample of an earlier output, as needed to start from it.
#[derive(Debug, Clone, PartialEq)]
pub struct InitRecord {
    pub theta: Vec<f64>,
    /// Time and state of the sample's last row, when states were written.
    pub last: Option<(f64, Vec<f64>)>,
}

/// Reads an output (or a hand-written file with `sample`, `time` and the
/// parameter columns) back, one entry per sample in sample order.
pub fn read_init(path: &Path, ir: &ModelIr) -> CliResult<Vec<InitRecord>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let fail = |m: String| CliError::format(path, m);
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers().map_err(|e| fail(e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let sample = col("sample").ok_or_else(|| fail("missing column `sample`".into()))?;
    let time = col("time").ok_or_else(|| fail("missing column `time`".into()))?;
    let params: Vec<usize> = ir
        .slot_names(Role::Param)
        .iter()
        .map(|n| col(n).ok_or_else(|| fail(format!("missing parameter column `{n}`"))))
        .collect::<CliResult<_>>()?;
    let states: Vec<Option<usize>> = ir.slot_names(Role::State).iter().map(|n| col(n)).collect();
    let have_states = states.iter().all(Option::is_some);

    let mut out: BTreeMap<u64, InitRecord> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fail(e.to_string()))?;
        let num = |c: usize| -> CliResult<f64> {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| fail(format!("row {}: bad value in column `{}`", line + 2, &header[c])))
        };
        let id: u64 = rec
            .get(sample)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fail(format!("row {}: bad sample id", line + 2)))?;
        let t = num(time)?;
        let theta = params.iter().map(|&c| num(c)).collect::<CliResult<Vec<_>>>()?;
        let state = if have_states && states.iter().all(|c| rec.get(c.unwrap()).is_some_and(|s| !s.is_empty())) {
            Some(states.iter().map(|c| num(c.unwrap())).collect::<CliResult<Vec<_>>>()?)
        } else {
            None
        };
        let entry = out.entry(id).or_insert_with(|| InitRecord { theta: theta.clone(), last: None });
        if entry.theta != theta {
            return Err(fail(format!("row {}: parameters change within sample {id}", line + 2)));
        }
        if let Some(x) = state {
            if entry.last.as_ref().is_some_and(|(t0, _)| t < *t0) {
                return Err(fail(format!("row {}: times of sample {id} are not increasing", line + 2)));
            }
            entry.last = Some((t, x));
        }
    }
    Ok(out.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ModelIr {
        ssm_core::load_model(
            "model M { dim n(size = 2)\n param a\n state x[n]\n obs y\n sub parameter { a ~ gaussian(0, 1) }\n \
             sub initial { x[n] <- 0 }\n sub transition { x[n] <- x[n] }\n sub observation { y ~ gaussian(x[0], 1) } }",
        )
        .unwrap()
    }

    #[test]
    fn written_records_read_back() {
        let ir = model();
        let mut out = Output::new(&ir, vec![0.0, 0.5, 1.0], true, vec![("seed".into(), "3".into())]);
        for s in 0..3 {
            let a = 0.1 * s as f64 + 1e-17;
            out.push(Record {
                theta: vec![a],
                states: Some(vec![vec![a, 1.0], vec![a, 2.0], vec![a, 3.0 + a]]),
                obs: Some(vec![vec![0.5]; 3]),
                loglik: Some(-1.5),
                log_weight: None,
            });
        }
        let text = String::from_utf8(out.to_bytes()).unwrap();
        assert!(text.starts_with("# seed = 3\nsample,time,a,x[0],x[1],y,loglik,log_weight\n0,0.0,1e-17,1e-17,1.0,0.5,-1.5,\n"), "{text}");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.csv");
        out.write(&path).unwrap();
        let back = read_init(&path, &ir).unwrap();
        assert_eq!(back.len(), 3);
        for (s, r) in back.iter().enumerate() {
            let a = 0.1 * s as f64 + 1e-17;
            assert_eq!(r.theta, [a]);
            assert_eq!(r.last, Some((1.0, vec![a, 3.0 + a])));
        }
    }

    #[test]
    fn parameter_only_files_are_accepted() {
        let ir = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "sample,time,a\n0,0,0.25\n1,0,-1\n").unwrap();
        let r = read_init(&path, &ir).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].theta, [-1.0]);
        assert_eq!(r[1].last, None);
        std::fs::write(&path, "sample,time\n0,0\n").unwrap();
        assert!(read_init(&path, &ir).unwrap_err().to_string().contains("parameter column"));
    }
}
