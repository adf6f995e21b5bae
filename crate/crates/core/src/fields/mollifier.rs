use rayon::prelude::*;

use super::{FieldError, Grid, ScalarField, VectorField};

/// Discrete radial mollifier `φ_k(x) = k^n φ(kx)` on a grid, with the bump
/// profile `φ(x) = max(0, 1 - |x|²)³` normalised so the weights sum to one.
///
/// The stencil is point-symmetric, so first moments vanish and affine data
/// are reproduced.
#[derive(Clone, Debug)]
pub struct Mollifier {
    scale: f64,
    offsets: Vec<[i64; 2]>,
    weights: Vec<f64>,
}

impl Mollifier {
    /// Bump mollifier of support radius `1/k` on `grid`'s lattice.
    pub fn bump(grid: &Grid, k: f64) -> Self {
        Self::with_profile(grid, k, |r2| (1.0 - r2).max(0.0).powi(3))
    }

    /// Mollifier from a radial profile given as a function of `|x|²` on the unit
    /// ball. Offsets with `|x| >= 1/k` are dropped.
    pub fn with_profile(grid: &Grid, k: f64, profile: impl Fn(f64) -> f64) -> Self {
        let h = grid.h();
        let radius = 1.0 / k;
        let reach = (radius / h).ceil() as i64;
        let jr = if grid.dim() == 2 { reach } else { 0 };
        let mut offsets = Vec::new();
        let mut raw = Vec::new();
        for j in -jr..=jr {
            for i in -reach..=reach {
                let r2 = ((i * i + j * j) as f64) * h * h * k * k;
                if r2 < 1.0 {
                    let w = profile(r2);
                    if w > 0.0 {
                        offsets.push([i, j]);
                        raw.push(w);
                    }
                }
            }
        }
        if offsets.is_empty() {
            offsets.push([0, 0]);
            raw.push(1.0);
        }
        let total: f64 = raw.iter().sum();
        let weights = raw.into_iter().map(|w| w / total).collect();
        Mollifier {
            scale: k,
            offsets,
            weights,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offsets(&self) -> &[[i64; 2]] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest stencil reach in index units.
    pub fn reach(&self) -> i64 {
        self.offsets
            .iter()
            .map(|o| o[0].abs().max(o[1].abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn first_moment(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (o, w) in self.offsets.iter().zip(&self.weights) {
            m[0] += w * o[0] as f64;
            m[1] += w * o[1] as f64;
        }
        m
    }

    /// Whether the full stencil around node `n` lies inside the grid.
    pub fn fits(&self, grid: &Grid, n: usize) -> bool {
        let [i, j] = grid.node_ij_signed(n);
        let r = self.reach();
        let nc = grid.node_counts();
        let jr = if grid.dim() == 2 { r } else { 0 };
        i - r >= 0 && i + r < nc[0] as i64 && j - jr >= 0 && j + jr < nc[1] as i64
    }

    pub(crate) fn apply_at(&self, grid: &Grid, data: &[f64], ncomp: usize, n: usize, out: &mut [f64]) {
        let [i, j] = grid.node_ij_signed(n);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (o, w) in self.offsets.iter().zip(&self.weights) {
            let m = grid
                .node_at(i + o[0], j + o[1])
                .expect("stencil checked before application");
            for k in 0..ncomp {
                out[k] += w * data[ncomp * m + k];
            }
        }
    }
}

fn mollify_raw(
    grid: &Grid,
    data: &[f64],
    ncomp: usize,
    m: &Mollifier,
    region: Option<&[bool]>,
) -> Result<Vec<f64>, FieldError> {
    let nn = grid.num_nodes();
    if let Some(r) = region {
        if r.len() != nn {
            return Err(FieldError::SizeMismatch {
                expected: nn,
                found: r.len(),
            });
        }
    }
    let active = |n: usize| region.map_or(true, |r| r[n]);
    if let Some(n) = (0..nn).find(|&n| active(n) && !m.fits(grid, n)) {
        return Err(FieldError::SupportViolation { node: n });
    }
    let mut out = data.to_vec();
    out.par_chunks_mut(ncomp).enumerate().for_each(|(n, chunk)| {
        if active(n) {
            m.apply_at(grid, data, ncomp, n, chunk);
        }
    });
    Ok(out)
}

/// Discrete convolution `f ∗ φ_k` evaluated on the nodes of `region` (all nodes
/// when `None`); other nodes keep their input values.
pub fn mollify_vector(f: &VectorField, m: &Mollifier, region: Option<&[bool]>) -> Result<VectorField, FieldError> {
    let data = mollify_raw(f.grid(), f.data(), f.dim(), m, region)?;
    VectorField::new(*f.grid(), data)
}

pub fn mollify_scalar(f: &ScalarField, m: &Mollifier, region: Option<&[bool]>) -> Result<ScalarField, FieldError> {
    let data = mollify_raw(f.grid(), f.values(), 1, m, region)?;
    ScalarField::new(*f.grid(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior(grid: &Grid, m: &Mollifier) -> Vec<bool> {
        (0..grid.num_nodes()).map(|n| m.fits(grid, n)).collect()
    }

    #[test]
    fn weights_partition_unity_with_zero_moment() {
        let g = Grid::rect([0.0, 0.0], 1.0 / 64.0, 64, 64).unwrap();
        for k in [4.0, 8.0, 16.0] {
            let m = Mollifier::bump(&g, k);
            assert!((m.weight_sum() - 1.0).abs() < 1e-12);
            let fm = m.first_moment();
            assert!(fm[0].abs() < 1e-13 && fm[1].abs() < 1e-13);
            let h = g.h();
            assert!(m.offsets().iter().all(|o| ((o[0] * o[0] + o[1] * o[1]) as f64).sqrt() * h < 1.0 / k));
        }
    }

    #[test]
    fn constants_and_affine_fields_are_fixed() {
        let g = Grid::rect([-1.0, -1.0], 1.0 / 32.0, 64, 64).unwrap();
        let m = Mollifier::bump(&g, 4.0);
        let region = interior(&g, &m);
        let c = ScalarField::constant(g, 2.5);
        let mc = mollify_scalar(&c, &m, Some(&region)).unwrap();
        assert!(mc.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
        let f = ScalarField::from_fn(g, |x| 3.0 * x[0] + 1.0);
        let mf = mollify_scalar(&f, &m, Some(&region)).unwrap();
        for (a, b) in mf.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn step_transition_is_monotone_and_narrow() {
        let k = 4.0;
        let g = Grid::line(-1.0, 1.0 / 128.0, 256).unwrap();
        let m = Mollifier::bump(&g, k);
        let f = ScalarField::from_fn(g, |x| if x[0] >= 0.0 { 1.0 } else { 0.0 });
        let region = interior(&g, &m);
        let mf = mollify_scalar(&f, &m, Some(&region)).unwrap();
        let mut inside = Vec::new();
        for n in 0..g.num_nodes() {
            if !region[n] {
                continue;
            }
            let x = g.node_coord(n)[0];
            let v = mf.get(n);
            if v > 1e-15 && v < 1.0 - 1e-15 {
                inside.push(x);
            }
        }
        let width = inside.last().unwrap() - inside.first().unwrap();
        assert!(width <= 2.0 / k);
        let vals: Vec<f64> = (0..g.num_nodes()).filter(|&n| region[n]).map(|n| mf.get(n)).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-15));
    }

    #[test]
    fn support_violation_is_reported() {
        let g = Grid::line(0.0, 0.1, 10).unwrap();
        let m = Mollifier::bump(&g, 4.0);
        let f = ScalarField::constant(g, 1.0);
        assert!(matches!(mollify_scalar(&f, &m, None), Err(FieldError::SupportViolation { node: 0 })));
    }
}
