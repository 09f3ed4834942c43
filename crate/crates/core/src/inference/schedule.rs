//! Observation tables and the time grid a filter walks.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lang::Role;
use crate::model::simulate::TIME_EPS;
use crate::model::ModelIr;
use crate::series::TimeSeries;

/// Observations as role-relative obs vectors with presence masks. Rows
/// with nothing present are dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observations {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub present: Vec<Vec<bool>>,
}

impl Observations {
    pub fn none() -> Observations {
        Observations::default()
    }

    pub fn from_series(ir: &ModelIr, data: &TimeSeries) -> Result<Observations> {
        let cols = data.schema(ir, Role::Obs)?;
        let m = ir.count(Role::Obs);
        let mut obs = Observations::none();
        for row in 0..data.len() {
            let mut y = alloc::vec![0.0; m];
            let mut p = alloc::vec![false; m];
            for (c, &slot) in cols.iter().enumerate() {
                if let Some(v) = data.get(row, c) {
                    y[slot] = v;
                    p[slot] = true;
                }
            }
            if p.iter().any(|&b| b) {
                obs.times.push(data.time(row));
                obs.values.push(y);
                obs.present.push(p);
            }
        }
        Ok(obs)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// The sorted union of output times and observation times in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Grid times; `times[0]` is the window start.
    pub times: Vec<f64>,
    /// Per grid time, the row of [`Observations`] that applies there.
    pub obs: Vec<Option<usize>>,
    /// Grid indices of the output times, in order.
    pub outputs: Vec<usize>,
}

/// `noutputs` equal intervals over `[start, end]`, including both ends. Zero
/// intervals means just the two ends.
pub fn output_times(start: f64, end: f64, noutputs: usize) -> Vec<f64> {
    let n = noutputs.max(1);
    (0..=n)
        .map(|k| if k == n { end } else { start + (end - start) * k as f64 / n as f64 })
        .collect()
}

fn same_time(a: f64, b: f64) -> bool {
    crate::math::abs(a - b) <= TIME_EPS * (1.0 + crate::math::abs(a).max(crate::math::abs(b)))
}

impl Schedule {
    /// Observations in `(start, end]` and the output grid, merged.
    pub fn new(start: f64, end: f64, noutputs: usize, obs: &Observations) -> Result<Schedule> {
        if !(start.is_finite() && end.is_finite()) || end < start {
            return Err(Error::InvalidArgument(format!("invalid time window [{start}, {end}]")));
        }
        let mut points: Vec<(f64, Option<usize>, bool)> = Vec::new();
        if end > start {
            for t in output_times(start, end, noutputs) {
                points.push((t, None, true));
            }
        } else {
            points.push((start, None, true));
        }
        for (i, &t) in obs.times.iter().enumerate() {
            if t > start && !same_time(t, start) && (t <= end || same_time(t, end)) {
                points.push((t, Some(i), false));
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut s = Schedule {
            times: Vec::new(),
            obs: Vec::new(),
            outputs: Vec::new(),
        };
        for (t, o, out) in points {
            let merge = s.times.last().is_some_and(|&last| same_time(last, t));
            if !merge {
                s.times.push(t);
                s.obs.push(None);
            }
            let i = s.times.len() - 1;
            if o.is_some() {
                s.obs[i] = o;
                // keep the exact observation time
                if i > 0 {
                    s.times[i] = t;
                }
            }
            if out && s.outputs.last() != Some(&i) {
                s.outputs.push(i);
            }
        }
        Ok(s)
    }

    /// Index of the last grid time.
    pub fn last(&self) -> usize {
        self.times.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    /// Number of grid times carrying observations.
    pub fn observed(&self) -> usize {
        self.obs.iter().filter(|o| o.is_some()).count()
    }
}
