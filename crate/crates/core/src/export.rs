//! CSV writers for waveforms and trajectories. Floats carry twelve
//! significant digits.

use std::io::Write;

use crate::error::Result;
use crate::pulses::Waveform;

/// Scientific notation with twelve significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

/// Writes `t, re, im, abs`.
pub fn write_waveform_csv<W: Write>(mut out: W, waveform: &Waveform) -> Result<()> {
    writeln!(out, "t,re,im,abs")?;
    for (t, v) in waveform.grid.times().iter().zip(&waveform.values) {
        writeln!(out, "{},{},{},{}", sci(*t), sci(v.re), sci(v.im), sci(v.norm()))?;
    }
    Ok(())
}

/// Writes a header and one row per sample of equally long real columns.
pub fn write_columns_csv<W: Write>(mut out: W, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    writeln!(out, "{}", names.join(","))?;
    let n = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| sci(c[i])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
