//! Plain CSV emission shared by the report types.

use std::io::{self, Write};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_row<W: Write, S: AsRef<str>>(w: &mut W, cells: &[S]) -> io::Result<()> {
    let mut first = true;
    for c in cells {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        w.write_all(c.as_ref().as_bytes())?;
    }
    w.write_all(b"\n")
}
