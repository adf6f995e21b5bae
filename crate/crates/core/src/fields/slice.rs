use super::{FieldError, VectorField};

/// Samples of the slice `û(t) = u(y + tξ)·ξ` along a line, with centred
/// difference derivatives at interior samples.
#[derive(Clone, Debug)]
pub struct Slice {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    /// Parameters at which `derivative` is given (`t[1..len-1]`).
    pub derivative_t: Vec<f64>,
    pub derivative: Vec<f64>,
}

/// Sample the slice of `u` through `y` in direction `xi`. The sampling step is
/// `h / max|ξ_a|`, so axis and diagonal lines through a node hit nodes only.
pub fn slice_field(u: &VectorField, xi: [f64; 2], y: [f64; 2]) -> Result<Slice, FieldError> {
    let g = u.grid();
    let dim = g.dim();
    let xi = if dim == 1 { [xi[0], 0.0] } else { xi };
    let norm = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(FieldError::NotUnit);
    }
    let lo = g.origin();
    let hi = g.upper();
    let (mut tmin, mut tmax) = (f64::NEG_INFINITY, f64::INFINITY);
    for a in 0..dim {
        if xi[a].abs() < 1e-15 {
            if y[a] < lo[a] - 1e-12 || y[a] > hi[a] + 1e-12 {
                return Err(FieldError::EmptySlice);
            }
        } else {
            let t0 = (lo[a] - y[a]) / xi[a];
            let t1 = (hi[a] - y[a]) / xi[a];
            tmin = tmin.max(t0.min(t1));
            tmax = tmax.min(t0.max(t1));
        }
    }
    let step = g.h() / xi[0].abs().max(xi[1].abs());
    let j0 = (tmin / step - 1e-9).ceil() as i64;
    let j1 = (tmax / step + 1e-9).floor() as i64;
    if j1 < j0 {
        return Err(FieldError::EmptySlice);
    }
    let mut t = Vec::new();
    let mut values = Vec::new();
    for j in j0..=j1 {
        let tj = j as f64 * step;
        let mut p = [y[0] + tj * xi[0], y[1] + tj * xi[1]];
        for a in 0..dim {
            p[a] = p[a].clamp(lo[a], hi[a]);
        }
        let v = u.interpolate(p).ok_or(FieldError::EmptySlice)?;
        t.push(tj);
        values.push(v[0] * xi[0] + v[1] * xi[1]);
    }
    let mut derivative_t = Vec::new();
    let mut derivative = Vec::new();
    for j in 1..t.len().saturating_sub(1) {
        derivative_t.push(t[j]);
        derivative.push((values[j + 1] - values[j - 1]) / (t[j + 1] - t[j - 1]));
    }
    Ok(Slice {
        t,
        values,
        derivative_t,
        derivative,
    })
}
