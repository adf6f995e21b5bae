use crate::fields::{Grid, ScalarField, VectorField};
use crate::phasefield::{alpha_constant, Bulk, Dirichlet, EnergyModel, Level, Variant};
use crate::solver::SolveProblem;

use super::HarnessError;

/// Shipped model problems. Loads are displacement amplitudes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemId {
    /// `[0, 1]`, `u = U x` at both ends.
    Bar1d,
    /// Strip `[0, 1] × [0, 1/4]` sheared along its length: `u = (0, U x)` on the
    /// short ends, the band around `x = 1/2` is where the crack is seeded.
    Antiplane2d,
    /// Unit square, `u = (0, U y)` on the top and bottom rows.
    Mode1,
}

impl ProblemId {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "1d-bar" => Some(ProblemId::Bar1d),
            "2d-antiplane" => Some(ProblemId::Antiplane2d),
            "2d-mode1" => Some(ProblemId::Mode1),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Bar1d => "1d-bar",
            ProblemId::Antiplane2d => "2d-antiplane",
            ProblemId::Mode1 => "2d-mode1",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ProblemId::Bar1d => 1,
            _ => 2,
        }
    }

    fn extent(self) -> [f64; 2] {
        match self {
            ProblemId::Bar1d => [1.0, 0.0],
            ProblemId::Antiplane2d => [1.0, 0.25],
            ProblemId::Mode1 => [1.0, 1.0],
        }
    }

    fn grid(self, h: f64) -> Result<Grid, HarnessError> {
        let [lx, ly] = self.extent();
        let cells = |l: f64| (l / h).round().max(1.0) as usize;
        let g = match self {
            ProblemId::Bar1d => Grid::line(0.0, lx / cells(lx) as f64, cells(lx)),
            _ => {
                let n = cells(lx);
                Grid::rect([0.0, 0.0], lx / n as f64, n, (ly * n as f64 / lx).round() as usize)
            }
        };
        g.map_err(|e| HarnessError::Usage(format!("grid for h = {h}: {e}")))
    }

    fn boundary(self, load: f64, x: [f64; 2]) -> [f64; 2] {
        match self {
            ProblemId::Bar1d => [load * x[0], 0.0],
            ProblemId::Antiplane2d => [0.0, load * x[0]],
            ProblemId::Mode1 => [0.0, load * x[1]],
        }
    }

    fn loaded_nodes(self, g: &Grid) -> Vec<usize> {
        let [nx, ny] = g.node_counts();
        match self {
            ProblemId::Bar1d => vec![0, nx - 1],
            ProblemId::Antiplane2d => (0..ny).flat_map(|j| [g.node_index(0, j), g.node_index(nx - 1, j)]).collect(),
            ProblemId::Mode1 => (0..nx).flat_map(|i| [g.node_index(i, 0), g.node_index(i, ny - 1)]).collect(),
        }
    }

    /// Signed distance coordinate to the expected crack line.
    fn crack_distance(self, x: [f64; 2]) -> f64 {
        match self {
            ProblemId::Mode1 => (x[1] - 0.5).abs(),
            _ => (x[0] - 0.5).abs(),
        }
    }
}

/// One level of a model problem on a grid of spacing `ε / refine`. The
/// fidelity variant uses the boundary field as datum everywhere.
pub fn build_problem(id: ProblemId, load: f64, model: &EnergyModel, variant: Variant, level: Level, refine: usize) -> Result<SolveProblem, HarnessError> {
    if refine == 0 {
        return Err(HarnessError::Usage("refine must be positive".into()));
    }
    let g = id.grid(level.eps / refine as f64)?;
    let u0 = VectorField::from_fn(g, |x| id.boundary(load, x));
    let mut m = model.clone();
    match variant {
        Variant::Dirichlet => m.dirichlet = Some(Dirichlet { nodes: id.loaded_nodes(&g), u0 }),
        Variant::Fidelity => m.fidelity = Some(u0),
        Variant::Plain => return Err(HarnessError::Usage("model problems need the dirichlet or fidelity variant".into())),
    }
    Ok(SolveProblem::new(g, m, variant, level))
}

/// Analytic sharp-interface minimum where the elastic competitor is the affine
/// boundary field and the crack is a straight cut of known length:
/// `min(|Ω| W(1, e), α L)`. `None` when that is not exact.
pub fn reference_energy(id: ProblemId, load: f64, model: &EnergyModel, variant: Variant) -> Option<f64> {
    if variant != Variant::Dirichlet {
        return None;
    }
    let alpha = alpha_constant(model).ok()?;
    let e = match (id, &model.bulk) {
        (ProblemId::Bar1d, Bulk::Power | Bulk::Lame { .. }) => [load, 0.0, 0.0],
        // free lateral faces carry no traction only without Poisson coupling
        (ProblemId::Mode1, Bulk::Power) => [0.0, load, 0.0],
        // shear leaves traction on the free long sides
        _ => return None,
    };
    let [lx, ly] = id.extent();
    let area = if id.dim() == 1 { lx } else { lx * ly };
    let crack = if id.dim() == 1 { 1.0 } else { lx };
    Some((area * model.bulk.eval(1.0, e, model.p)).min(alpha * crack))
}

/// Optimal AT2 cross-section `1 - exp(-d/2ε)` around the expected crack,
/// kept in `[η, 1]`.
pub fn seeded_phase(id: ProblemId, grid: Grid, level: Level) -> ScalarField {
    ScalarField::from_fn(grid, |x| (1.0 - (-id.crack_distance(x) / (2.0 * level.eps)).exp()).clamp(level.eta, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bar_reference_is_min_of_branches() {
        let m = EnergyModel::at2();
        let v = Variant::Dirichlet;
        assert!((reference_energy(ProblemId::Bar1d, 2.0, &m, v).unwrap() - 1.0).abs() < 1e-9);
        assert!((reference_energy(ProblemId::Bar1d, 0.5, &m, v).unwrap() - 0.25).abs() < 1e-12);
        assert!((reference_energy(ProblemId::Mode1, 0.5, &m, v).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(reference_energy(ProblemId::Antiplane2d, 0.5, &m, v), None);
        assert_eq!(reference_energy(ProblemId::Bar1d, 0.5, &m, Variant::Fidelity), None);
    }

    #[test]
    fn grids_and_boundaries() {
        let m = EnergyModel::at2();
        let l = Level { eps: 0.125, eta: 0.125 * 0.125 };
        let p = build_problem(ProblemId::Bar1d, 2.0, &m, Variant::Dirichlet, l, 8).unwrap();
        assert_eq!(p.grid.num_cells(), 64);
        assert_eq!(p.v_one, vec![0, 64]);
        p.validate().unwrap();
        let p = build_problem(ProblemId::Antiplane2d, 1.0, &m, Variant::Dirichlet, l, 2).unwrap();
        assert_eq!(p.grid.cell_counts(), [16, 4]);
        p.validate().unwrap();
        let p = build_problem(ProblemId::Mode1, 1.0, &m, Variant::Dirichlet, l, 2).unwrap();
        assert_eq!(p.v_one.len(), 2 * 17);
        p.validate().unwrap();
        let p = build_problem(ProblemId::Mode1, 1.0, &m, Variant::Fidelity, l, 2).unwrap();
        p.validate().unwrap();
        assert!(build_problem(ProblemId::Mode1, 1.0, &m, Variant::Plain, l, 2).is_err());
    }

    #[test]
    fn seed_has_its_well_on_the_crack_line() {
        let l = Level { eps: 0.125, eta: 0.01 };
        let g = Grid::line(0.0, 1.0 / 64.0, 64).unwrap();
        let v = seeded_phase(ProblemId::Bar1d, g, l);
        assert_eq!(v.get(32), 0.01);
        assert!((v.get(0) - (1.0 - (-2.0f64).exp())).abs() < 1e-15 && v.values().iter().all(|&x| (0.01..=1.0).contains(&x)));
    }
}
