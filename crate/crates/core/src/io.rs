//! CSV encodings for parameter tables and traces.
//!
//! Parameter tables carry the model kind in a leading comment line:
//!
//! ```text
//! # model=quadratic
//! layer,u_1,u_x,u_y,u_xx,u_xy,u_yy,v_1,v_x,v_y,v_xx,v_xy,v_yy
//! 0,0.5,...
//! ```
//!
//! Values are printed with Rust's shortest round-trip formatting, so reading a
//! table back gives the same bits.

use crate::error::{Error, Result};
use crate::model::{ModelKind, MotionModel};
use crate::scalar::Scalar;

pub fn theta_header(kind: ModelKind) -> String {
    let names = kind.term_names();
    let mut cols = vec!["layer".to_string()];
    for comp in ["u", "v"] {
        cols.extend(names.iter().map(|n| format!("{comp}_{n}")));
    }
    cols.join(",")
}

pub fn write_theta_csv<T: Scalar>(model: &MotionModel<T>) -> String {
    let mut s = format!("# model={}\n{}\n", model.kind(), theta_header(model.kind()));
    for (k, row) in model.rows().enumerate() {
        s.push_str(&k.to_string());
        for v in row {
            s.push(',');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    s
}

pub fn read_theta_csv<T: Scalar>(text: &str) -> Result<MotionModel<T>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let tag = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .and_then(|l| l.trim().strip_prefix("model="))
        .ok_or_else(|| Error::Parse("missing `# model=` header".into()))?;
    let kind: ModelKind = tag.trim().parse()?;
    let header = lines.next().ok_or_else(|| Error::Parse("missing column header".into()))?;
    if header != theta_header(kind) {
        return Err(Error::Parse(format!("unexpected column header `{header}`")));
    }
    let p = kind.parameter_count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != p + 1 {
            return Err(Error::Parse(format!("row {i}: expected {} fields, got {}", p + 1, fields.len())));
        }
        if fields[0].parse::<usize>().ok() != Some(i) {
            return Err(Error::Parse(format!("row {i}: layer index `{}` out of order", fields[0])));
        }
        let row = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| Error::Parse(format!("row {i}: bad number `{f}`")))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    MotionModel::from_rows(kind, &rows)
}

/// One column of values under `name`, indexed from 0 by `index_name`.
pub fn write_trace_csv<T: Scalar>(index_name: &str, name: &str, values: &[T]) -> String {
    let mut s = format!("{index_name},{name}\n");
    for (i, v) in values.iter().enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    s
}

/// Reads any headed numeric CSV into rows; the header is returned separately.
pub fn read_numeric_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .ok_or(Error::Empty)?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|f| f.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{f}`"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}
