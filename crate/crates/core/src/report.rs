//! CSV emission shared by every spectrum writer: comma separated, one
//! header row, LF line endings, floats in scientific notation with 15
//! significant digits.

use std::io::{self, Write};

/// Float formatting used in every CSV cell.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.14e}")
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Table whose first column is `omega` followed by named numeric columns.
    pub fn from_columns(omegas: &[f64], columns: &[(String, Vec<f64>)]) -> Self {
        let mut t = Table::new(
            std::iter::once("omega".to_string()).chain(columns.iter().map(|(n, _)| n.clone())),
        );
        for (k, &w) in omegas.iter().enumerate() {
            let mut row = vec![Cell::Num(w)];
            row.extend(columns.iter().map(|(_, c)| Cell::Num(c[k])));
            t.rows.push(row);
        }
        t
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => format_float(*v),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_or_more_significant_digits() {
        let s = format_float(2.0 / 3.0);
        let digits: String = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
        assert!(digits.len() >= 12);
        assert_eq!(s, "6.66666666666667e-1");
    }

    #[test]
    fn csv_layout() {
        let t = Table::from_columns(&[0.0, 0.5], &[("rho_total".into(), vec![1.0, 2.0])]);
        let s = t.to_csv_string();
        let lines: Vec<&str> = s.split('\n').collect();
        assert_eq!(lines[0], "omega,rho_total");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "");
        assert!(!s.contains('\r'));
        assert_eq!(lines[2], "5.00000000000000e-1,2.00000000000000e0");
    }
}
