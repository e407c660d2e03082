//! 16-bit PGM export for error rasters, with a sidecar describing the
//! linear mm-to-gray mapping (the figures stay portable and diffable).

use anyhow::Result;
use std::path::Path;

/// Write one P5 raster with maxval 65535 (big-endian payload per the PGM
/// specification). `scale_mm` is the error value that maps to white.
pub fn write_pgm16(path: &Path, values_mm: &[f64], width: usize, scale_mm: f64) -> Result<()> {
    let height = values_mm.len() / width;
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &v in values_mm {
        let gray = if scale_mm > 0.0 {
            ((v / scale_mm).clamp(0.0, 1.0) * 65535.0).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&gray.to_be_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Sidecar stating the mapping so the grays can be read back as mm.
pub fn write_scale_sidecar(path: &Path, scale_mm: f64) -> Result<()> {
    let text = format!(
        "16-bit PGM error rasters\n\
         gray = round(min(err_mm / scale_mm, 1) * 65535)\n\
         err_mm = gray / 65535 * scale_mm\n\
         scale_mm={scale_mm}\n"
    );
    std::fs::write(path, text)?;
    Ok(())
}
