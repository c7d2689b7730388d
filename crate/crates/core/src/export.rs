//! Plain CSV writers shared by the data types. Floats use 17 significant
//! digits so values round-trip exactly.

use std::io::{self, Write};

/// Formats a float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn write_row<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        w.write_all(num(v).as_bytes())?;
    }
    w.write_all(b"\n")
}

pub(crate) fn write_header<W: Write>(w: &mut W, names: &[String]) -> io::Result<()> {
    writeln!(w, "{}", names.join(","))
}
