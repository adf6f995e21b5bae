use crate::fields::{sym_gradient, ScalarField, VectorField};
use crate::phasefield::{frob, ordered_sum};

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupReport {
    /// Cells of the first level's grid where `|u|` grows at every level and
    /// ends above the threshold.
    pub cells: Vec<usize>,
    /// `‖v^{1/p} e(u)‖_{L^p}` per level.
    pub weighted_strain: Vec<f64>,
    /// Fewer than three levels make the growth test meaningless; `cells` is
    /// then empty.
    pub enough_levels: bool,
}

fn weighted_strain(u: &VectorField, v: &ScalarField, p: f64) -> f64 {
    let g = *u.grid();
    let e = sym_gradient(u);
    let vbar = v.cell_means();
    let vol = g.cell_volume();
    ordered_sum(g.num_cells(), |c| vol * vbar[c] * frob(e.get(c)).powf(p)).powf(1.0 / p)
}

/// Estimates the set where `|u_k| → ∞` along a schedule. Levels may live on
/// different grids; `|u|` is sampled at the cell centres of the first one.
pub fn detect_blowup(levels: &[(VectorField, ScalarField)], p: f64, threshold: f64) -> BlowupReport {
    let weighted_strain: Vec<f64> = levels.iter().map(|(u, v)| weighted_strain(u, v, p)).collect();
    if levels.len() < 3 {
        return BlowupReport { cells: Vec::new(), weighted_strain, enough_levels: false };
    }
    let g = *levels[0].0.grid();
    let cells = (0..g.num_cells())
        .filter(|&c| {
            let x = g.cell_center(c);
            let mags: Option<Vec<f64>> = levels.iter().map(|(u, _)| u.interpolate(x).map(|w| (w[0] * w[0] + w[1] * w[1]).sqrt())).collect();
            match mags {
                Some(m) => m.windows(2).all(|w| w[1] > w[0]) && *m.last().unwrap() > threshold,
                None => false,
            }
        })
        .collect();
    BlowupReport { cells, weighted_strain, enough_levels: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;

    #[test]
    fn bounded_and_constant_families() {
        let g = Grid::rect([0.0, 0.0], 0.125, 8, 8).unwrap();
        let u = VectorField::from_fn(g, |x| [x[0], 0.5 * x[1]]);
        let v = ScalarField::constant(g, 1.0);
        let levels = vec![(u.clone(), v.clone()); 4];
        let r = detect_blowup(&levels, 2.0, 10.0);
        assert!(r.enough_levels && r.cells.is_empty());
        assert!(r.weighted_strain.windows(2).all(|w| w[0] == w[1]));
        let r = detect_blowup(&levels[..2], 2.0, 10.0);
        assert!(!r.enough_levels);
    }

    #[test]
    fn runaway_region_is_flagged() {
        let g = Grid::rect([0.0, 0.0], 0.125, 8, 8).unwrap();
        let v = ScalarField::constant(g, 1.0);
        let levels: Vec<_> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&s| (VectorField::from_fn(g, move |x| [if x[0] > 0.5 { s } else { 1.0 }, 0.0]), v.clone()))
            .collect();
        let r = detect_blowup(&levels, 2.0, 50.0);
        assert!(!r.cells.is_empty());
        assert!(r.cells.iter().all(|&c| g.cell_center(c)[0] > 0.5));
    }
}
