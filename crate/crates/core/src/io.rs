//! Text formatting shared by the CSV and JSON writers.

use std::io::{self, Write};

/// Shortest round-trip decimal form; scientific notation for tiny or huge
/// magnitudes so columns stay readable.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".to_string() } else { "-inf".to_string() };
    }
    let a = x.abs();
    if a != 0.0 && !(1e-4..=1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, T: serde::Serialize>(mut w: W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
}
