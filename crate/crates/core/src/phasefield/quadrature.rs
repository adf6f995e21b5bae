use super::{EnergyModel, PhaseFieldError};

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return None;
    }
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    Some(
        refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
    )
}

/// `∫_a^b f` to absolute tolerance `tol` by adaptive Simpson.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, PhaseFieldError> {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    // start from four panels so that symmetric integrands are not fooled
    let mut total = 0.0;
    for i in 0..4 {
        let (x0, x1) = (a + (b - a) * i as f64 / 4.0, a + (b - a) * (i + 1) as f64 / 4.0);
        let xm = 0.5 * (x0 + x1);
        let (f0, f1, f2) = (
            if i == 0 { fa } else { f(x0) },
            f(xm),
            if i == 3 { fb } else if i == 1 { fm } else { f(x1) },
        );
        let s = simpson(f0, f1, f2, x0, x1);
        total += refine(f, x0, x1, f0, f1, f2, s, 0.25 * tol, 48).ok_or(PhaseFieldError::QuadratureFailure { a, b, tol })?;
    }
    Ok(total)
}

fn prefactor(model: &EnergyModel) -> f64 {
    let q = model.q;
    let qc = model.q_conj();
    2.0 * qc.powf(1.0 / qc) * (model.a * q).powf(1.0 / q)
}

/// `α = 2 (q')^{1/q'} (a q)^{1/q} ∫_0^1 d(s)^{1/q'} ds`.
pub fn alpha_constant(model: &EnergyModel) -> Result<f64, PhaseFieldError> {
    if !(model.q > 1.0 && model.a > 0.0) {
        return Err(PhaseFieldError::InvalidModel("alpha needs q > 1 and a > 0".into()));
    }
    let e = 1.0 / model.q_conj();
    let d = &model.degradation;
    let integral = adaptive_simpson(&|s| d.eval(s).max(0.0).powf(e), 0.0, 1.0, 1e-10)?;
    Ok(prefactor(model) * integral)
}

/// The same constant from an `n`-point midpoint Riemann sum.
pub fn alpha_riemann(model: &EnergyModel, n: usize) -> f64 {
    let e = 1.0 / model.q_conj();
    let h = 1.0 / n as f64;
    let sum: f64 = (0..n).map(|i| model.degradation.eval((i as f64 + 0.5) * h).max(0.0).powf(e)).sum();
    prefactor(model) * sum * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasefield::Degradation;

    #[test]
    fn at2_gives_one() {
        let a = alpha_constant(&EnergyModel::at2()).unwrap();
        assert!((a - 1.0).abs() < 1e-10, "{a}");
    }

    #[test]
    fn at1_against_closed_form() {
        // 4 ∫_0^1 sqrt((1-s)/2) ds = 4 (sqrt 2 / 3)
        let m = EnergyModel { degradation: Degradation::At1, ..EnergyModel::at2() };
        let a = alpha_constant(&m).unwrap();
        let exact = 4.0 * 2f64.sqrt() / 3.0;
        assert!((a - exact).abs() < 1e-9, "{a} vs {exact}");
    }

    #[test]
    fn zero_degradation() {
        let m = EnergyModel { degradation: Degradation::Table(vec![0.0, 0.0]), ..EnergyModel::at2() };
        assert_eq!(alpha_constant(&m).unwrap(), 0.0);
    }

    #[test]
    fn simpson_on_polynomials_and_failure() {
        let v = adaptive_simpson(&|x| x * x * x - x, -1.0, 2.0, 1e-12).unwrap();
        assert!((v - 2.25).abs() < 1e-12);
        assert!(adaptive_simpson(&|x| 1.0 / x, 0.0, 1.0, 1e-10).is_err());
    }
}
