//! Time-indexed tables of variable values with per-cell presence masks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lang::Role;
use crate::model::ModelIr;

/// Values of named columns at strictly increasing times. A column name is a
/// variable element such as `Pa` or `y[3]`; absent cells are masked.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub columns: Vec<String>,
    times: Vec<f64>,
    values: Vec<f64>,
    present: Vec<bool>,
}

impl TimeSeries {
    pub fn new(columns: Vec<String>) -> TimeSeries {
        TimeSeries {
            columns,
            ..TimeSeries::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, row: usize) -> f64 {
        self.times[row]
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Appends a row; `None` cells are masked.
    pub fn push_row(&mut self, time: f64, cells: &[Option<f64>]) -> Result<()> {
        if cells.len() != self.columns.len() {
            return Err(Error::Schema(format!(
                "row at t = {time} has {} cells, expected {}",
                cells.len(),
                self.columns.len()
            )));
        }
        if !time.is_finite() {
            return Err(Error::Schema(format!("time {time} is not finite")));
        }
        if let Some(&last) = self.times.last() {
            if time <= last {
                return Err(Error::Schema(format!("times must increase strictly ({time} after {last})")));
            }
        }
        self.times.push(time);
        for c in cells {
            self.values.push(c.unwrap_or(0.0));
            self.present.push(c.is_some());
        }
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.columns.len() + col;
        self.present[i].then(|| self.values[i])
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.columns.len()).map(move |c| self.get(row, c))
    }

    /// Rows with at least one present cell in any column.
    pub fn any_present(&self, row: usize) -> bool {
        let n = self.columns.len();
        self.present[row * n..(row + 1) * n].iter().any(|&p| p)
    }

    /// Checks that every column names an element of a `role` variable and
    /// returns, per column, the role-relative slot.
    pub fn schema(&self, ir: &ModelIr, role: Role) -> Result<Vec<usize>> {
        let names = ir.slot_names(role);
        let mut seen = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            match names.iter().position(|n| n == c) {
                Some(i) if !seen.contains(&i) => seen.push(i),
                Some(_) => return Err(Error::Schema(format!("column {c} appears twice"))),
                None => {
                    let base = c.split('[').next().unwrap_or(c);
                    let msg = match ir.var(base) {
                        Some(v) if v.role != role => format!("column {c} is {} {}, expected a {role} variable", v.role, v.name),
                        Some(_) => format!("column {c} is not an element of {base}"),
                        None => format!("column {c} refers to undeclared variable {base}"),
                    };
                    return Err(Error::Schema(msg));
                }
            }
        }
        Ok(seen)
    }

    /// Rows restricted to `start < t <= end`, for windows of a filter.
    pub fn window(&self, start: f64, end: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&r| self.times[r] > start + 1e-9 && self.times[r] <= end + 1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rows_and_masks() {
        let mut s = TimeSeries::new(vec!["a".into(), "b[0]".into()]);
        s.push_row(0.0, &[Some(1.0), None]).unwrap();
        s.push_row(0.5, &[None, Some(2.0)]).unwrap();
        assert_eq!(s.get(0, 0), Some(1.0));
        assert_eq!(s.get(0, 1), None);
        assert_eq!(s.row(1).collect::<Vec<_>>(), [None, Some(2.0)]);
        assert!(s.push_row(0.5, &[None, None]).is_err());
        assert!(s.push_row(1.0, &[None]).is_err());
        assert_eq!(s.window(0.0, 1.0).collect::<Vec<_>>(), [1]);
    }

    #[test]
    fn schema_rejects_unknown_columns() {
        let ir = crate::load_model(
            "model M { dim n(size = 2)\n state x[n]\n obs y[n]\n sub initial { x[n] <- 0 }\n \
             sub transition { x[n] <- x[n] }\n sub observation { y[n] ~ gaussian(x[n], 1) } }",
        )
        .unwrap();
        let s = TimeSeries::new(vec!["y[1]".into(), "y[0]".into()]);
        assert_eq!(s.schema(&ir, Role::Obs).unwrap(), [1, 0]);
        let bad = TimeSeries::new(vec!["z".into()]);
        assert!(matches!(bad.schema(&ir, Role::Obs), Err(Error::Schema(m)) if m.contains("undeclared variable z")));
        let wrong = TimeSeries::new(vec!["x[0]".into()]);
        assert!(wrong.schema(&ir, Role::Obs).is_err());
    }
}
