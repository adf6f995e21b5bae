use super::*;
use crate::fields::sym_gradient;
use crate::phasefield::{Dirichlet, Psi};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn bar_problem(n: usize, big_u: f64, eps: f64, eta: f64) -> SolveProblem {
    let g = Grid::line(0.0, 1.0 / n as f64, n).unwrap();
    let mut m = EnergyModel::at2();
    m.dirichlet = Some(Dirichlet { nodes: vec![0, n], u0: VectorField::from_fn(g, |x| [big_u * x[0], 0.0]) });
    SolveProblem::new(g, m, Variant::Dirichlet, Level { eps, eta })
}

/// Dense Hessian, gradient and value at `x0` of a function that is quadratic
/// on the `free` coordinates, from second differences of step `d`.
fn dense_quadratic(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], free: &[usize], d: f64) -> (DMatrix<f64>, DVector<f64>, f64) {
    let m = free.len();
    let shift = |pairs: &[(usize, f64)]| {
        let mut x = x0.to_vec();
        for &(i, s) in pairs {
            x[free[i]] += s;
        }
        f(&x)
    };
    let f0 = f(x0);
    let single: Vec<f64> = (0..m).map(|i| shift(&[(i, d)])).collect();
    let minus: Vec<f64> = (0..m).map(|i| shift(&[(i, -d)])).collect();
    let grad = DVector::from_fn(m, |i, _| (single[i] - minus[i]) / (2.0 * d));
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        h[(i, i)] = (single[i] - 2.0 * f0 + minus[i]) / (d * d);
        for j in 0..i {
            let v = (shift(&[(i, d), (j, d)]) - single[i] - single[j] + f0) / (d * d);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    (h, grad, f0)
}

/// Minimiser of `f0 + gᵀy + ½ yᵀHy` over `lo <= x0 + y <= hi` by projected
/// Gauss-Seidel on the dense matrix.
fn dense_box_min(h: &DMatrix<f64>, grad: &DVector<f64>, x0: &[f64], free: &[usize], lo: f64, hi: f64) -> Vec<f64> {
    let m = free.len();
    let base: Vec<f64> = free.iter().map(|&i| x0[i]).collect();
    let mut y = vec![0.0; m];
    for _ in 0..200_000 {
        let mut change: f64 = 0.0;
        for i in 0..m {
            let mut r = grad[i];
            for j in 0..m {
                if j != i {
                    r += h[(i, j)] * y[j];
                }
            }
            let new = (-r / h[(i, i)]).clamp(lo - base[i], hi - base[i]);
            change = change.max((new - y[i]).abs());
            y[i] = new;
        }
        if change < 1e-15 {
            break;
        }
    }
    let mut x = x0.to_vec();
    for (k, &i) in free.iter().enumerate() {
        x[i] = base[k] + y[k];
    }
    x
}

fn u_energy<'a>(p: &'a SolveProblem, v: &ScalarField) -> impl Fn(&[f64]) -> f64 + 'a {
    let v = v.clone();
    move |x: &[f64]| p.energy(&VectorField::new(p.grid, x.to_vec()).unwrap(), &v).unwrap().total
}

#[test]
fn unit_bar_is_linear() {
    let p = bar_problem(32, 0.7, 0.1, 0.01);
    let v = ScalarField::constant(p.grid, 1.0);
    let (u, _) = elastic_step(&p, &v, VectorField::zeros(p.grid)).unwrap();
    for n in 0..p.grid.num_nodes() {
        assert!((u.get(n)[0] - 0.7 * p.grid.node_coord(n)[0]).abs() < 1e-12);
    }
}

#[test]
fn notch_takes_the_strain() {
    let n = 64;
    let mut p = bar_problem(n, 1.0, 0.1, 0.01);
    p.inner.tol = 1e-14;
    let mut v = ScalarField::constant(p.grid, 1.0);
    v.values_mut()[31] = 0.01;
    v.values_mut()[32] = 0.01;
    let (u, _) = elastic_step(&p, &v, VectorField::zeros(p.grid)).unwrap();
    let e = sym_gradient(&u);
    let mean = 1.0;
    assert!(e.get(31)[0] > 10.0 * mean);
    // dense oracle on the free nodes
    let free: Vec<usize> = (1..n).collect();
    let x0 = super::elastic::with_boundary(&p, VectorField::zeros(p.grid)).into_data();
    let f = u_energy(&p, &v);
    let (h, g, f0) = dense_quadratic(&f, &x0, &free, 1.0);
    let y = h.clone().cholesky().unwrap().solve(&(-&g));
    let best = f0 + g.dot(&y) + 0.5 * y.dot(&(&h * &y));
    let ours = p.energy(&u, &v).unwrap().total;
    assert!((ours - best).abs() <= 1e-6 * best, "{ours} vs {best}");
    for (k, &i) in free.iter().enumerate() {
        assert!((u.data()[i] - y[k]).abs() < 1e-8);
    }
}

#[test]
fn quadratic_fidelity_matches_dense() {
    let g = Grid::rect([0.0, 0.0], 0.125, 6, 6).unwrap();
    for datum in [VectorField::zeros(g), VectorField::from_fn(g, |x| [x[0] * x[1], (3.0 * x[0]).sin()])] {
        let mut m = EnergyModel::at2();
        m.psi = Psi::Power(2.0);
        m.fidelity = Some(datum);
        let mut p = SolveProblem::new(g, m, Variant::Fidelity, Level { eps: 0.2, eta: 0.01 });
        p.inner.tol = 1e-14;
        let v = ScalarField::from_fn(g, |x| 0.05 + 0.9 * x[0]);
        let (u, _) = elastic_step(&p, &v, VectorField::zeros(g)).unwrap();
        let free: Vec<usize> = (0..2 * g.num_nodes()).collect();
        let f = u_energy(&p, &v);
        let (h, gr, f0) = dense_quadratic(&f, &vec![0.0; free.len()], &free, 1.0);
        let y = h.clone().cholesky().unwrap().solve(&(-&gr));
        let best = f0 + gr.dot(&y) + 0.5 * y.dot(&(&h * &y));
        let ours = p.energy(&u, &v).unwrap().total;
        assert!((ours - best).abs() <= 1e-8 * best.max(1e-12), "{ours} vs {best}");
        for (i, &yi) in y.iter().enumerate() {
            assert!((u.data()[i] - yi).abs() < 1e-8);
        }
    }
}

#[test]
fn descent_agrees_with_cg_at_p_two() {
    let g = Grid::rect([0.0, 0.0], 0.125, 8, 8).unwrap();
    let mut m = EnergyModel::at2();
    let bottom: Vec<usize> = (0..g.num_nodes()).filter(|&n| g.node_ij(n).1 == 0 || g.node_ij(n).1 == 8).collect();
    m.dirichlet = Some(Dirichlet { nodes: bottom, u0: VectorField::from_fn(g, |x| [0.0, 0.1 * x[1]]) });
    let mut p = SolveProblem::new(g, m, Variant::Dirichlet, Level { eps: 0.2, eta: 0.01 });
    p.inner.tol = 1e-12;
    let v = ScalarField::from_fn(g, |x| if x[1] == 0.0 || x[1] == 1.0 { 1.0 } else { 0.2 + 0.8 * (x[0] - 0.5).abs() });
    let (a, _) = elastic_step(&p, &v, VectorField::zeros(g)).unwrap();
    let start = super::elastic::with_boundary(&p, VectorField::zeros(g));
    let (b, _) = super::elastic::descent(&p, &v, start).unwrap();
    let (ea, eb) = (p.energy(&a, &v).unwrap().total, p.energy(&b, &v).unwrap().total);
    assert!((ea - eb).abs() <= 1e-9 * ea, "{ea} {eb}");
}

#[test]
fn gradients_match_finite_differences() {
    let g = Grid::rect([0.0, 0.0], 0.25, 4, 4).unwrap();
    let mut m = EnergyModel::at2().with_p(3.0);
    m.q = 1.5;
    m.degradation = crate::phasefield::Degradation::At1;
    m.fidelity = Some(VectorField::from_fn(g, |x| [x[1], -x[0]]));
    m.psi = Psi::Power(1.5);
    let p = SolveProblem::new(g, m, Variant::Fidelity, Level { eps: 0.3, eta: 0.01 });
    let u = VectorField::from_fn(g, |x| [(2.0 * x[0]).sin() + x[1], x[0] * x[1] * x[1]]);
    let v = ScalarField::from_fn(g, |x| 0.3 + 0.5 * x[0] * x[1] + 0.1 * x[1]);
    let (_, gu) = super::elastic::test_gradient(&p, &v, &u);
    let d = 1e-6;
    for i in 0..u.data().len() {
        let (mut a, mut b) = (u.data().to_vec(), u.data().to_vec());
        a[i] += d;
        b[i] -= d;
        let f = |x: Vec<f64>| p.energy(&VectorField::new(g, x).unwrap(), &v).unwrap().total;
        let fd = (f(a) - f(b)) / (2.0 * d);
        assert!((fd - gu[i]).abs() < 1e-6 * (1.0 + fd.abs()), "u dof {i}: {fd} vs {}", gu[i]);
    }
    let (_, gv) = super::phase::test_energy(&p, &u, &v);
    for n in 0..g.num_nodes() {
        let (mut a, mut b) = (v.clone(), v.clone());
        a.values_mut()[n] += d;
        b.values_mut()[n] -= d;
        let fd = (p.energy(&u, &a).unwrap().total - p.energy(&u, &b).unwrap().total) / (2.0 * d);
        assert!((fd - gv[n]).abs() < 1e-6 * (1.0 + fd.abs()), "v node {n}: {fd} vs {}", gv[n]);
    }
}

#[test]
fn p_three_descent_is_stationary() {
    let n = 32;
    let g = Grid::line(0.0, 1.0 / n as f64, n).unwrap();
    let mut m = EnergyModel::at2().with_p(3.0);
    m.dirichlet = Some(Dirichlet { nodes: vec![0, n], u0: VectorField::from_fn(g, |x| [x[0], 0.0]) });
    let mut p = SolveProblem::new(g, m, Variant::Dirichlet, Level { eps: 0.1, eta: 0.01 });
    p.inner.tol = 1e-12;
    let v = ScalarField::from_fn(g, |x| 0.5 + 0.5 * (6.0 * x[0]).cos().abs());
    let (u, _) = elastic_step(&p, &v, VectorField::zeros(g)).unwrap();
    // 1D: the stress v̄ |u'|^{p-2} u' is the same in every cell
    let e = sym_gradient(&u);
    let vbar = v.cell_means();
    let s: Vec<f64> = (0..n).map(|c| vbar[c] * e.get(c)[0].abs() * e.get(c)[0]).collect();
    let (lo, hi) = s.iter().fold((f64::INFINITY, 0.0f64), |a, &x| (a.0.min(x), a.1.max(x)));
    assert!(hi - lo < 1e-6 * hi, "{lo} {hi}");
}

fn jump_cell_field(g: Grid, c: usize, delta: f64) -> VectorField {
    let x0 = g.node_coord(c)[0];
    let h = g.h();
    VectorField::from_fn(g, move |x| [delta * ((x[0] - x0) / h).clamp(0.0, 1.0), 0.0])
}

#[test]
fn no_strain_keeps_v_at_one() {
    let p = bar_problem(32, 0.0, 0.1, 0.01);
    let (v, _) = phase_step(&p, &VectorField::zeros(p.grid), ScalarField::constant(p.grid, 0.5)).unwrap();
    assert!(v.values().iter().all(|&x| (x - 1.0).abs() < 1e-10));
}

#[test]
fn single_strained_cell_has_a_symmetric_well() {
    let eps = 1.0 / 32.0;
    let n = 129;
    let h = 1.0 / 128.0;
    let g = Grid::line(0.0, h, n).unwrap();
    let mut p = SolveProblem::new(g, EnergyModel::at2(), Variant::Plain, Level { eps, eta: eps * eps });
    p.inner.tol = 1e-14;
    let u = jump_cell_field(g, 64, 0.1);
    let (v, _) = phase_step(&p, &u, ScalarField::constant(g, 1.0)).unwrap();
    let x = v.values();
    let min = x.iter().cloned().fold(1.0, f64::min);
    println!("well depth {min}");
    assert!(min < 0.5);
    for i in 0..=n {
        assert!((x[i] - x[n - i]).abs() < 1e-8, "asymmetric at {i}");
        let d = (g.node_coord(i)[0] - (g.node_coord(64)[0] + 0.5 * h)).abs();
        if d >= 4.0 * eps {
            assert!(x[i] >= 0.9, "v = {} at distance {d}", x[i]);
        }
    }
    // dense oracle for the box-constrained problem
    let free: Vec<usize> = (0..=n).collect();
    let f = |y: &[f64]| p.energy(&u, &ScalarField::new(g, y.to_vec()).unwrap()).unwrap().total;
    let x0 = vec![0.5; n + 1];
    let (hm, gr, _) = dense_quadratic(&f, &x0, &free, 0.01);
    let best = dense_box_min(&hm, &gr, &x0, &free, p.level.eta, 1.0);
    let eb = f(&best);
    let ours = f(x);
    assert!((ours - eb).abs() <= 1e-6 * eb, "{ours} vs {eb}");
}

#[test]
fn huge_strain_sends_v_to_eta() {
    let n = 32;
    let mut p = bar_problem(n, 1e4, 0.1, 0.01);
    p.v_one = vec![0, n];
    let u = VectorField::from_fn(p.grid, |x| [1e4 * x[0], 0.0]);
    let (v, _) = phase_step(&p, &u, ScalarField::constant(p.grid, 1.0)).unwrap();
    assert_eq!(v.get(0), 1.0);
    assert_eq!(v.get(n), 1.0);
    for i in 2..n - 1 {
        assert!((v.get(i) - 0.01).abs() < 1e-12, "{i}: {}", v.get(i));
    }
}

#[test]
fn projected_gradient_agrees_with_active_sets() {
    let g = Grid::rect([0.0, 0.0], 1.0 / 16.0, 16, 16).unwrap();
    let mut p = SolveProblem::new(g, EnergyModel::at2(), Variant::Plain, Level { eps: 0.1, eta: 0.01 });
    p.inner.tol = 1e-12;
    let u = VectorField::from_fn(g, |x| [if x[0] > 0.5 { 0.2 } else { 0.0 }, 0.3 * x[1] * x[1]]);
    let (a, _) = phase_step(&p, &u, ScalarField::constant(g, 1.0)).unwrap();
    let (b, _) = super::phase::projected(&p, &u, ScalarField::constant(g, 1.0)).unwrap();
    let (ea, eb) = (p.energy(&u, &a).unwrap().total, p.energy(&u, &b).unwrap().total);
    println!("active sets {ea}, projected {eb}");
    assert!(ea <= eb + 1e-12 * eb);
    assert!((ea - eb).abs() <= 1e-6 * ea);
}

#[test]
fn small_load_stays_elastic() {
    let eps = 1.0 / 64.0;
    let p = bar_problem(512, 0.5, eps, eps * eps);
    let s = alternate_minimize(&p).unwrap();
    println!("U = 0.5: total {} min v {}", s.energy.total, s.trace.last().min_v);
    assert!(s.trace.is_monotone() && s.trace.converged);
    assert!((s.energy.total - 0.25).abs() <= 0.05 * 0.25);
    assert!(s.trace.last().min_v >= 0.8);
}

#[test]
fn large_load_opens_a_well() {
    let eps = 1.0 / 64.0;
    let mut p = bar_problem(512, 2.0, eps, eps * eps);
    // a seeded notch helps the staggered scheme leave the elastic branch
    p.v_init = Some(ScalarField::from_fn(p.grid, |x| 1.0 - (-(x[0] - 0.5).abs() / (2.0 * eps)).exp()));
    let s = alternate_minimize(&p).unwrap();
    println!("U = 2: total {} min v {}", s.energy.total, s.trace.last().min_v);
    assert!(s.trace.is_monotone());
    assert!(s.trace.last().min_v <= 0.1);
    assert!(s.energy.total < 4.0);
}

#[test]
fn minimiser_is_a_fixed_point() {
    let eps = 1.0 / 16.0;
    let mut p = bar_problem(64, 1.0, eps, eps * eps);
    p.inner.tol = 1e-14;
    let s = alternate_minimize(&p).unwrap();
    let mut q = p.clone();
    q.u_init = Some(s.u.clone());
    q.v_init = Some(s.v.clone());
    let t = alternate_minimize(&q).unwrap();
    assert_eq!(t.trace.outer_iterations(), 1);
    assert!((t.trace.initial.total - t.energy.total).abs() <= 1e-8 * t.energy.total);
}

#[test]
fn mirror_symmetric_data_give_symmetric_fields() {
    let n = 16;
    let g = Grid::rect([0.0, 0.0], 1.0 / n as f64, n, n).unwrap();
    let mut m = EnergyModel::at2();
    let nodes: Vec<usize> = (0..g.num_nodes()).filter(|&k| g.node_ij(k).1 == 0 || g.node_ij(k).1 == n).collect();
    m.dirichlet = Some(Dirichlet { nodes, u0: VectorField::from_fn(g, |x| [0.0, if x[1] > 0.5 { 0.4 } else { -0.4 }]) });
    let mut p = SolveProblem::new(g, m, Variant::Dirichlet, Level { eps: 0.125, eta: 0.125 * 0.125 });
    p.inner.tol = 1e-13;
    let s = alternate_minimize(&p).unwrap();
    let mirror = |k: usize| {
        let (i, j) = g.node_ij(k);
        g.node_index(n - i, j)
    };
    for k in 0..g.num_nodes() {
        let (a, b) = (s.u.get(k), s.u.get(mirror(k)));
        assert!((a[0] + b[0]).abs() < 1e-8 && (a[1] - b[1]).abs() < 1e-8);
        assert!((s.v.get(k) - s.v.get(mirror(k))).abs() < 1e-8);
    }
}

#[test]
fn rejects_bad_problems() {
    let mut p = bar_problem(8, 1.0, 0.1, 0.01);
    p.level.eta = 1.0;
    assert!(matches!(alternate_minimize(&p), Err(SolverError::InvalidProblem(_))));
    let mut p = bar_problem(8, 1.0, 0.1, 0.01);
    p.model.dirichlet.as_mut().unwrap().nodes.push(4);
    assert!(matches!(alternate_minimize(&p), Err(SolverError::InvalidProblem(_))));
    let mut p = bar_problem(8, 1.0, 0.1, 0.01);
    p.tol_e = 0.0;
    assert!(p.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn half_steps_never_raise_the_energy(seed in 0u64..10_000, fid in any::<bool>()) {
        let g = Grid::rect([0.0, 0.0], 0.125, 6, 6).unwrap();
        let s = seed as f64 * 0.37;
        let mut m = EnergyModel::at2();
        let variant = if fid {
            m.fidelity = Some(VectorField::from_fn(g, |x| [(s + 4.0 * x[0]).sin(), (s - 3.0 * x[1]).cos()]));
            m.psi = Psi::Power(2.0);
            Variant::Fidelity
        } else {
            let nodes: Vec<usize> = (0..g.num_nodes()).filter(|&k| g.is_boundary_node(k)).collect();
            m.dirichlet = Some(Dirichlet { nodes, u0: VectorField::from_fn(g, |x| [s.sin() * x[0], x[1] * x[0]]) });
            Variant::Dirichlet
        };
        let eta = 0.01;
        let p = SolveProblem::new(g, m, variant, Level { eps: 0.2, eta });
        let v = ScalarField::from_fn(g, |x| (0.5 + 0.5 * (s + 5.0 * x[0] * x[1]).sin()).clamp(eta, 1.0));
        let v = {
            let mut v = v;
            for &k in &p.v_one { v.values_mut()[k] = 1.0; }
            v
        };
        let u = super::elastic::with_boundary(&p, VectorField::from_fn(g, |x| [(s * x[1]).cos(), x[0]]));
        let e0 = p.energy(&u, &v).unwrap().total;
        let (u1, _) = elastic_step(&p, &v, u).unwrap();
        let e1 = p.energy(&u1, &v).unwrap().total;
        prop_assert!(e1 <= e0 + 1e-12 * e0);
        let (v1, _) = phase_step(&p, &u1, v).unwrap();
        let e2 = p.energy(&u1, &v1).unwrap().total;
        prop_assert!(e2 <= e1 + 1e-12 * e1);
        prop_assert!(v1.values().iter().all(|&x| (eta..=1.0).contains(&x)));
    }
}
