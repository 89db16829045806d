//! 8-bit portable graymap output.

use std::path::Path;

use inscat_core::ReconstructedField;

use crate::error::{CliError, CliResult, StageExt};

/// Pixel for `v` under the linear map `[min, max] -> [0, 255]`, rounding half up.
pub fn gray_level(v: f64, min: f64, max: f64) -> u8 {
    if !(max > min) {
        return 128;
    }
    let t = (v - min) / (max - min) * 255.0;
    if t.is_nan() {
        return 0;
    }
    (t + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Binary PGM of one layer. Columns follow the first axis, rows the second
/// with the largest coordinate at the top. The map range is written as a
/// header comment; a constant field renders as mid-gray and is flagged.
pub fn render_slice(field: &ReconstructedField, layer: usize, range: Option<(f64, f64)>) -> CliResult<Vec<u8>> {
    let slice = field.layer(layer).stage("render")?;
    if slice.grid.dim() != 2 {
        return Err(CliError::Config(
            "only planar or volumetric fields can be rendered".into(),
        ));
    }
    let (w, h) = (slice.grid.shape()[0], slice.grid.shape()[1]);
    let (min, max) = range.unwrap_or_else(|| {
        slice
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    });
    let mut out = format!("P5\n# min={min:e} max={max:e}\n").into_bytes();
    if !(max > min) {
        out.extend_from_slice(b"# constant field\n");
    }
    out.extend_from_slice(format!("{w} {h}\n255\n").as_bytes());
    for row in 0..h {
        let j = h - 1 - row;
        for i in 0..w {
            out.push(gray_level(slice.values[slice.grid.flat_index(&[i, j])], min, max));
        }
    }
    Ok(out)
}

pub fn write_slice(path: &Path, field: &ReconstructedField, layer: usize, range: Option<(f64, f64)>) -> CliResult<()> {
    std::fs::write(path, render_slice(field, layer, range)?)?;
    Ok(())
}
