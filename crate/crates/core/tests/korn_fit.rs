use gsbd::crack::{cracked_cells, detect_jumps, AxisBox, ConvexPolygon};
use gsbd::fields::{sym_gradient, Grid, VectorField};
use gsbd::korn::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn grid(h: f64) -> Grid {
    let n = (1.0 / h).round() as usize;
    Grid::rect([-0.5, -0.5], h, n, n).unwrap()
}

fn q() -> AxisBox {
    AxisBox::cube([0.0, 0.0], 0.5)
}

fn qp() -> AxisBox {
    AxisBox::cube([0.0, 0.0], 0.25)
}

/// Dense least squares over (b0, b1, w) with nalgebra.
fn oracle_fit(u: &VectorField, nodes: &[usize]) -> [f64; 3] {
    let g = u.grid();
    let mut a = DMatrix::zeros(2 * nodes.len(), 3);
    let mut rhs = DVector::zeros(2 * nodes.len());
    for (r, &n) in nodes.iter().enumerate() {
        let x = g.node_coord(n);
        let v = u.get(n);
        a[(2 * r, 0)] = 1.0;
        a[(2 * r, 2)] = -x[1];
        a[(2 * r + 1, 1)] = 1.0;
        a[(2 * r + 1, 2)] = x[0];
        rhs[2 * r] = v[0];
        rhs[2 * r + 1] = v[1];
    }
    let sol = (a.transpose() * &a).lu().solve(&(a.transpose() * rhs)).unwrap();
    [sol[0], sol[1], sol[2]]
}

fn cracked(h: f64, a_b: RigidAffineMap, a_t: RigidAffineMap, yc: f64) -> VectorField {
    VectorField::from_fn(grid(h), move |x| if x[1] > yc { a_t.eval(x) } else { a_b.eval(x) })
}

#[test]
fn fit_matches_dense_least_squares() {
    let g = grid(1.0 / 16.0);
    let u = VectorField::from_fn(g, |x| [x[0].sin() + x[1] * x[1], (2.0 * x[0]).cos() * x[1]]);
    let nodes = g.nodes_in(q().lo, q().hi);
    let f = fit_rigid_affine(&u, &q()).unwrap();
    let o = oracle_fit(&u, &nodes);
    assert!((f.b[0] - o[0]).abs() < 1e-12);
    assert!((f.b[1] - o[1]).abs() < 1e-12);
    assert!((f.w - o[2]).abs() < 1e-12);
}

#[test]
fn crack_band_is_cut_off() {
    let h = 1.0 / 64.0;
    let yc = 0.1875 + h / 2.0;
    let a_b = RigidAffineMap::new(2, [0.0, 0.0], 0.0);
    let a_t = RigidAffineMap::new(2, [1.0, 0.5], 0.2);
    let u = cracked(h, a_b, a_t, yc);
    let r = 0.5;
    let budget = 0.175 * r * 1.0;
    let plain = fit_with_exceptional(&u, &q(), &qp(), 0.0, 2.0).unwrap();
    let fit = fit_with_exceptional(&u, &q(), &qp(), budget, 2.0).unwrap();
    assert!(fit.omega.volume <= budget);
    assert!(!fit.omega.cells.is_empty());
    // ω lies on the minority side, next to the crack
    let g = u.grid();
    for &c in &fit.omega.cells {
        assert!(g.cell_center(c)[1] > yc - h);
    }
    assert!(fit.residual_lp * 10.0 <= plain.residual_lp, "{} vs {}", fit.residual_lp, plain.residual_lp);

    let skip = cracked_cells(g, &detect_jumps(&u, 0.5));
    let c_plain = korn_poincare_check(&u, &plain, &q(), 2.0, Some(&skip));
    let c_fit = korn_poincare_check(&u, &fit, &q(), 2.0, Some(&skip));
    // pure rigid pieces: no strain away from the crack
    assert_eq!(c_plain, Err(KornError::ZeroStrain));
    assert!(c_fit.unwrap().exact);
}

#[test]
fn crack_constant_smaller_with_omega() {
    let h = 1.0 / 64.0;
    let yc = 0.1875 + h / 2.0;
    let u0 = cracked(h, RigidAffineMap::zero(2), RigidAffineMap::translation(2, [1.0, 0.0]), yc);
    // add a smooth strain so the constants are finite
    let u = VectorField::from_fn(*u0.grid(), |x| {
        let n = u0.grid().nearest_node(x).unwrap();
        let v = u0.get(n);
        [v[0] + 0.05 * x[0] * x[0], v[1] + 0.05 * x[0] * x[1]]
    });
    let skip = cracked_cells(u.grid(), &detect_jumps(&u, 0.5));
    let plain = fit_with_exceptional(&u, &q(), &qp(), 0.0, 2.0).unwrap();
    let fit = fit_with_exceptional(&u, &q(), &qp(), 0.0875, 2.0).unwrap();
    let c0 = korn_poincare_check(&u, &plain, &q(), 2.0, Some(&skip)).unwrap();
    let c1 = korn_poincare_check(&u, &fit, &q(), 2.0, Some(&skip)).unwrap();
    assert!(c1.c1 < c0.c1, "{} vs {}", c1.c1, c0.c1);
    assert!(c1.c1_star < c0.c1_star);
}

#[test]
fn shear_constant_stable_under_refinement() {
    let c = |h: f64| {
        let u = VectorField::from_fn(grid(h), |x| [0.1 * x[1] * x[1], 0.0]);
        let fit = fit_with_exceptional(&u, &q(), &q(), 0.0, 2.0).unwrap();
        korn_poincare_check(&u, &fit, &q(), 2.0, None).unwrap().c1
    };
    let (a, b) = (c(1.0 / 32.0), c(1.0 / 64.0));
    assert!(a.is_finite() && b.is_finite() && a > 0.0);
    assert!((a / b - 1.0).abs() <= 0.2, "{a} vs {b}");
}

#[test]
fn vertex_property_against_dense_sampling() {
    let poly = ConvexPolygon::new(vec![[0.0, 0.0], [1.0, -0.2], [1.3, 0.8], [0.2, 1.1]]).unwrap();
    let a = RigidAffineMap::new(2, [0.3, -0.7], 1.1);
    let top = sup_over_polygon(&a, &poly);
    let v = poly.vertices();
    let mut best: f64 = 0.0;
    for s in 0..=60 {
        for t in 0..=60 {
            let (s, t) = (s as f64 / 60.0, t as f64 / 60.0);
            // bilinear blend of the quadrilateral corners stays inside a convex polygon
            let p = [
                (1.0 - s) * (1.0 - t) * v[0][0] + s * (1.0 - t) * v[1][0] + s * t * v[2][0] + (1.0 - s) * t * v[3][0],
                (1.0 - s) * (1.0 - t) * v[0][1] + s * (1.0 - t) * v[1][1] + s * t * v[2][1] + (1.0 - s) * t * v[3][1],
            ];
            let m = a.eval(p);
            best = best.max(m[0].hypot(m[1]));
        }
    }
    assert_eq!(best, top);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_is_rigid_and_equivariant(
        c in prop::array::uniform4(-1.0..1.0f64),
        b in prop::array::uniform2(-2.0..2.0f64),
        w in -2.0..2.0f64,
    ) {
        let g = grid(1.0 / 16.0);
        let u = VectorField::from_fn(g, |x| [c[0] * x[0] * x[1] + c[1] * x[1], c[2] * x[0] * x[0] + c[3]]);
        let m = RigidAffineMap::new(2, b, w);
        let um = VectorField::from_fn(g, |x| {
            let n = g.nearest_node(x).unwrap();
            let v = u.get(n);
            let r = m.eval(x);
            [v[0] + r[0], v[1] + r[1]]
        });
        let f = fit_rigid_affine(&u, &q()).unwrap();
        let fm = fit_rigid_affine(&um, &q()).unwrap();
        let want = f.add(&m);
        prop_assert!((fm.b[0] - want.b[0]).abs() < 1e-12);
        prop_assert!((fm.b[1] - want.b[1]).abs() < 1e-12);
        prop_assert!((fm.w - want.w).abs() < 1e-12);
        let e = sym_gradient(&f.to_field(g));
        prop_assert!(e.max_norm() < 1e-12);
    }

    #[test]
    fn residual_non_increasing_in_budget(
        amp in 0.1..2.0f64,
        yc in -0.2..0.2f64,
        b1 in 0.0..0.05f64,
        b2 in 0.0..0.05f64,
    ) {
        let g = grid(1.0 / 32.0);
        let u = VectorField::from_fn(g, |x| [if x[1] > yc { amp } else { 0.0 } + 0.1 * x[0] * x[0], 0.2 * x[1] * x[0]]);
        let a = fit_rigid_affine(&u, &q()).unwrap();
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        let s_lo = exceptional_set(&u, &a, &qp(), lo);
        let s_hi = exceptional_set(&u, &a, &qp(), hi);
        let r_lo = residuals(&u, &a, &qp(), &s_lo.cells, 2.0).0;
        let r_hi = residuals(&u, &a, &qp(), &s_hi.cells, 2.0).0;
        prop_assert!(s_hi.volume <= hi + 1e-15);
        prop_assert!(r_hi <= r_lo + 1e-14);
    }
}
