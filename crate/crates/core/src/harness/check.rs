use crate::crack::{AxisBox, Facet, FacetSet};
use crate::fields::{mollify_scalar, slice_field, sym_gradient, Grid, Mollifier, ScalarField, VectorField};
use crate::korn::{exceptional_set, fit_rigid_affine, residuals, RigidAffineMap};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        CheckOutcome { name, pass, detail }
    }
}

fn square(origin: f64, h: f64, extent: f64) -> Grid {
    let n = (extent / h).round() as usize;
    Grid::rect([origin, origin], h, n, n).expect("fixed grid")
}

/// Dyadic data keep every difference exact, so the strain must vanish bitwise.
fn rigid_nullspace() -> CheckOutcome {
    let g = square(-0.5, 0.125, 1.0);
    let mut worst = 0.0f64;
    for (w, b0, b1) in [(0.5, 0.0, 0.0), (-1.25, 3.0, -2.5), (8.0, -0.375, 1.0), (0.0, 7.0, 0.0)] {
        let u = VectorField::from_fn(g, |x| [b0 - w * x[1], b1 + w * x[0]]);
        worst = worst.max(sym_gradient(&u).max_norm());
    }
    CheckOutcome::new("rigid_nullspace", worst == 0.0, format!("max |e(u)| = {worst:e}"))
}

fn slice_affine() -> CheckOutcome {
    let g = square(0.0, 1.0 / 16.0, 1.0);
    let u = VectorField::from_fn(g, |x| [0.3 + 1.5 * x[0] - 0.7 * x[1], -0.2 + 0.4 * x[0] + 2.0 * x[1]]);
    let e = sym_gradient(&u);
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut worst = 0.0f64;
    for xi in [[1.0, 0.0], [0.0, 1.0], [s2, s2], [s2, -s2]] {
        match slice_field(&u, xi, [0.5, 0.5]) {
            Ok(s) => worst = s.derivative.iter().fold(worst, |m, d| m.max((d - e.contract(0, xi)).abs())),
            Err(err) => return CheckOutcome::new("slice_affine", false, err.to_string()),
        }
    }
    CheckOutcome::new("slice_affine", worst <= 1e-12, format!("max |d/dt û - e(u)ξ·ξ| = {worst:e}"))
}

/// Centred slice derivatives of a smooth field: second order in `h`.
pub(crate) fn slice_order() -> (f64, Vec<f64>) {
    let f = |x: [f64; 2]| [(2.0 * x[0]).sin() * x[1].cos(), (x[0] + 1.5 * x[1]).cos()];
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let xi = [s2, s2];
    let y = [0.5, 0.5];
    // d/dt u(y + tξ)·ξ
    let exact = |t: f64| {
        let (a, b) = (y[0] + t * xi[0], y[1] + t * xi[1]);
        let du0 = 2.0 * (2.0 * a).cos() * b.cos() * xi[0] - (2.0 * a).sin() * b.sin() * xi[1];
        let du1 = -(a + 1.5 * b).sin() * (xi[0] + 1.5 * xi[1]);
        du0 * xi[0] + du1 * xi[1]
    };
    let errs: Vec<f64> = [16.0, 32.0, 64.0]
        .iter()
        .map(|&n| {
            let g = square(0.0, 1.0 / n, 1.0);
            let s = slice_field(&VectorField::from_fn(g, f), xi, y).expect("diagonal through the centre");
            s.derivative_t.iter().zip(&s.derivative).fold(0.0f64, |m, (&t, d)| m.max((d - exact(t)).abs()))
        })
        .collect();
    let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    (order, errs)
}

fn slice_convergence() -> CheckOutcome {
    let (order, errs) = slice_order();
    CheckOutcome::new("slice_order", order >= 1.9, format!("errors {errs:?}, order {order:.3}"))
}

fn mollifier_affine() -> CheckOutcome {
    let g = square(-1.0, 1.0 / 32.0, 2.0);
    let m = Mollifier::bump(&g, 4.0);
    let region: Vec<bool> = (0..g.num_nodes()).map(|n| m.fits(&g, n)).collect();
    let f = ScalarField::from_fn(g, |x| 3.0 * x[0] - 1.25 * x[1] + 1.0);
    let worst = match mollify_scalar(&f, &m, Some(&region)) {
        Ok(mf) => (0..g.num_nodes()).filter(|&n| region[n]).map(|n| (mf.get(n) - f.get(n)).abs()).fold(0.0, f64::max),
        Err(e) => return CheckOutcome::new("mollifier_affine", false, e.to_string()),
    };
    CheckOutcome::new("mollifier_affine", worst <= 1e-12, format!("max |ρ*f - f| = {worst:e}"))
}

fn facet_additivity() -> CheckOutcome {
    let f = FacetSet::new(
        2,
        vec![
            Facet::segment([0.1, 0.2], [0.9, 0.7]),
            Facet::segment([0.25, 0.0], [0.25, 1.0]),
            Facet::segment([0.0, 0.5], [0.625, 0.5]),
            Facet::segment([0.8, 0.95], [0.3, 0.05]),
        ],
    )
    .expect("fixed facets");
    let whole = AxisBox::new([0.0, 0.0], [1.0 + 1e-9, 1.0 + 1e-9]);
    let total = f.measure_in_box(&whole);
    let mut worst = 0.0f64;
    for n in 1..=8 {
        let s = (1.0 + 1e-9) / n as f64;
        let mut sum = 0.0;
        for j in 0..n {
            for i in 0..n {
                sum += f.measure_in_box(&AxisBox::new([i as f64 * s, j as f64 * s], [(i + 1) as f64 * s, (j + 1) as f64 * s]));
            }
        }
        worst = worst.max((sum - total).abs() / total);
    }
    CheckOutcome::new("facet_additivity", worst <= 1e-10, format!("max relative defect {worst:e}"))
}

fn fit_equivariance() -> CheckOutcome {
    let g = square(-0.5, 1.0 / 16.0, 1.0);
    let q = AxisBox::cube([0.0, 0.0], 0.5);
    let u = VectorField::from_fn(g, |x| [0.3 * x[0] * x[1] - 0.8 * x[1], 0.6 * x[0] * x[0] + 0.1]);
    let base = match fit_rigid_affine(&u, &q) {
        Ok(f) => f,
        Err(e) => return CheckOutcome::new("fit_equivariance", false, e.to_string()),
    };
    let mut worst = 0.0f64;
    for (b, w) in [([0.5, -1.0], 0.75), ([-2.0, 0.25], -1.5), ([0.0, 0.0], 2.0)] {
        let m = RigidAffineMap::new(2, b, w);
        let um = VectorField::from_fn(g, |x| {
            let n = g.nearest_node(x).expect("node");
            let (v, r) = (u.get(n), m.eval(x));
            [v[0] + r[0], v[1] + r[1]]
        });
        match fit_rigid_affine(&um, &q) {
            Ok(fm) => {
                let want = base.add(&m);
                worst = worst.max((fm.b[0] - want.b[0]).abs()).max((fm.b[1] - want.b[1]).abs()).max((fm.w - want.w).abs());
            }
            Err(e) => return CheckOutcome::new("fit_equivariance", false, e.to_string()),
        }
    }
    CheckOutcome::new("fit_equivariance", worst <= 1e-12, format!("max coefficient defect {worst:e}"))
}

fn exceptional_monotone() -> CheckOutcome {
    let g = square(-0.5, 1.0 / 32.0, 1.0);
    let q = AxisBox::cube([0.0, 0.0], 0.5);
    let qp = AxisBox::cube([0.0, 0.0], 0.25);
    let u = VectorField::from_fn(g, |x| [if x[1] > 0.05 { 1.0 } else { 0.0 } + 0.1 * x[0] * x[0], 0.2 * x[1] * x[0]]);
    let a = match fit_rigid_affine(&u, &q) {
        Ok(a) => a,
        Err(e) => return CheckOutcome::new("exceptional_monotone", false, e.to_string()),
    };
    let budgets = [0.0, 0.005, 0.01, 0.02, 0.04, 0.08];
    let mut prev = f64::INFINITY;
    let mut ok = true;
    let mut res = Vec::new();
    for &b in &budgets {
        let s = exceptional_set(&u, &a, &qp, b);
        let r = residuals(&u, &a, &qp, &s.cells, 2.0).0;
        ok &= s.volume <= b + 1e-15 && r <= prev + 1e-14;
        prev = r;
        res.push(r);
    }
    CheckOutcome::new("exceptional_monotone", ok, format!("residuals {res:?}"))
}

/// The invariant suites, in a fixed order.
pub fn run_checks() -> Vec<CheckOutcome> {
    vec![
        rigid_nullspace(),
        slice_affine(),
        slice_convergence(),
        mollifier_affine(),
        facet_additivity(),
        fit_equivariance(),
        exceptional_monotone(),
    ]
}
