use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a results table; reference columns are filled when comparing
/// against published values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub problem: String,
    pub procedure: String,
    pub h: f64,
    pub sample: f64,
    pub pcs_e: f64,
    pub pcs_min: Option<f64>,
    pub reference: Option<Reference>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub h: f64,
    pub sample: f64,
    pub pcs_e: f64,
    pub pcs_min: f64,
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

impl TableRow {
    pub fn headers(with_reference: bool) -> Vec<&'static str> {
        let mut h = vec!["Problem", "Procedure", "h", "Sample", "PCS_E", "PCS_min"];
        if with_reference {
            h.extend([
                "ref h", "ref Sample", "ref PCS_E", "ref PCS_min", "dev h", "dev Sample", "dev PCS_E", "dev PCS_min",
            ]);
        }
        h
    }

    /// Formatted cells: `h` to 3 decimals, probabilities to 4.
    pub fn cells(&self, with_reference: bool) -> Vec<String> {
        let mut c = vec![
            self.problem.clone(),
            self.procedure.clone(),
            format!("{:.3}", self.h),
            format!("{:.0}", self.sample),
            format!("{:.4}", self.pcs_e),
            opt(self.pcs_min, 4),
        ];
        if with_reference {
            match self.reference {
                Some(r) => c.extend([
                    format!("{:.3}", r.h),
                    format!("{:.0}", r.sample),
                    format!("{:.4}", r.pcs_e),
                    format!("{:.4}", r.pcs_min),
                    format!("{:+.3}", self.h - r.h),
                    format!("{:+.0}", self.sample - r.sample),
                    format!("{:+.4}", self.pcs_e - r.pcs_e),
                    self.pcs_min.map_or_else(|| "-".to_string(), |p| format!("{:+.4}", p - r.pcs_min)),
                ]),
                None => c.extend(std::iter::repeat_n("-".to_string(), 8)),
            }
        }
        c
    }
}

/// Left-aligned first column, right-aligned numbers.
pub fn format_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, &w))| {
                let pad = " ".repeat(w - c.chars().count());
                if i == 0 {
                    format!("{c}{pad}")
                } else {
                    format!("{pad}{c}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (width.len().saturating_sub(1))));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

/// Comma-separated with a header row.
pub fn to_csv(headers: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(headers).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}
