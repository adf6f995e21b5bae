use std::path::Path;

use crate::fields::ScalarField;
use crate::IoError;

/// Binary PPM of `v`, one pixel per node, black at 0 and white at 1, the top
/// image row at the largest `y`. 1D fields give a single row.
pub fn ppm_bytes(v: &ScalarField) -> Vec<u8> {
    let [nx, ny] = v.grid().node_counts();
    let mut out = format!("P6\n{nx} {ny}\n255\n").into_bytes();
    for j in (0..ny).rev() {
        for i in 0..nx {
            let x = v.get(v.grid().node_index(i, j));
            let g = (255.0 * x.clamp(0.0, 1.0)).round() as u8;
            out.extend_from_slice(&[g, g, g]);
        }
    }
    out
}

pub fn write_ppm(path: &Path, v: &ScalarField) -> Result<(), IoError> {
    std::fs::write(path, ppm_bytes(v))?;
    Ok(())
}
