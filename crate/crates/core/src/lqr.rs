//! Centralized LQR: Riccati solution, loop and closed-loop maps, the Kalman
//! inequality and the loop-shifted map used for small-gain arguments.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{
    self, min_hermitian_eigenvalue, min_singular_value, min_symmetric_eigenvalue, spd_sqrt,
    spectral_norm, symmetrize, to_complex,
};
use crate::scalar::Real;
use crate::statespace::{near_pole, FrequencyGrid, StateSpaceModel};

/// Stabilizing solution of the continuous-time algebraic Riccati equation.
#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution<T: Real> {
    /// Symmetric positive semidefinite Riccati solution.
    pub x: DMatrix<T>,
    /// Optimal gain `F = -R⁻¹BᵀX`, applied as `u = F x`.
    pub f: DMatrix<T>,
    /// Spectral norm of `AᵀX + XA + Q - XBR⁻¹BᵀX`.
    pub residual: T,
    /// Scale used to judge `residual`.
    pub residual_scale: T,
    /// Spectral abscissa of `A + BF`.
    pub closed_loop_abscissa: T,
}

fn dims_check<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "CARE data: A {}x{}, B {}x{}, Q {}x{}, R {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            q.nrows(),
            q.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    for m in [a, b, q, r] {
        linalg::check_finite(m)?;
    }
    Ok(())
}

/// PBH stabilizability test: `σ_min([A - λI, B]) > tol` for every
/// eigenvalue with `Re λ ≥ -1e-8`.
pub fn check_stabilizable<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<()> {
    let n = a.nrows();
    let scale = T::one().max(spectral_norm(a).max(spectral_norm(b)));
    let tol = T::tol(1e-8) * scale;
    for z in linalg::eigenvalues(a)?.eigenvalues {
        if z.re < -T::tol(1e-8) {
            continue;
        }
        let mut m = DMatrix::zeros(n, n + b.ncols());
        m.view_mut((0, 0), (n, n)).copy_from(&to_complex(a));
        for i in 0..n {
            m[(i, i)] -= z;
        }
        m.view_mut((0, n), (n, b.ncols())).copy_from(&to_complex(b));
        if min_singular_value(&m.transpose()) <= tol {
            return Err(Error::NotStabilizable {
                re: z.re.as_f64(),
                im: z.im.as_f64(),
            });
        }
    }
    Ok(())
}

/// Dual PBH test for detectability of `(Q, A)`.
pub fn check_detectable<T: Real>(q: &DMatrix<T>, a: &DMatrix<T>) -> Result<()> {
    match check_stabilizable(&a.transpose(), &q.transpose()) {
        Err(Error::NotStabilizable { re, im }) => Err(Error::NotDetectable { re, im }),
        other => other,
    }
}

fn care_residual<T: Real>(
    a: &DMatrix<T>,
    q: &DMatrix<T>,
    g: &DMatrix<T>,
    x: &DMatrix<T>,
) -> T {
    spectral_norm(&(a.transpose() * x + x * a + q - x * g * x))
}

/// Solves `AᵀX + XA + Q - XBR⁻¹BᵀX = 0` for the stabilizing `X`.
///
/// The stable invariant subspace `[U₁; U₂]` of the Hamiltonian
/// `[[A, -BR⁻¹Bᵀ], [-Q, -Aᵀ]]` gives `X = U₂U₁⁻¹`, which is then polished
/// by Newton (Kleinman) steps.
pub fn solve_care<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
) -> Result<CareSolution<T>> {
    dims_check(a, b, q, r)?;
    let n = a.nrows();
    let r_norm = spectral_norm(r);
    let r_sym = symmetrize(r);
    if (r - &r_sym).norm() > T::tol(1e-10) * (T::one() + r_norm)
        || min_symmetric_eigenvalue(&r_sym) <= T::lit(1e-12) * r_norm
    {
        return Err(Error::NotPositiveDefinite("R"));
    }
    let q_sym = symmetrize(q);
    let q_norm = spectral_norm(&q_sym);
    if (q - &q_sym).norm() > T::tol(1e-10) * (T::one() + q_norm)
        || min_symmetric_eigenvalue(&q_sym) < -T::tol(1e-10) * q_norm
    {
        return Err(Error::NotPositiveSemidefinite("Q"));
    }
    check_stabilizable(a, b)?;
    check_detectable(&q_sym, a)?;

    let r_inv = r_sym
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite("R"))?;
    let g = symmetrize(&(b * &r_inv * b.transpose()));
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q_sym));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let basis = linalg::stable_invariant_subspace(&h)?;
    let u1 = basis.rows(0, n).into_owned();
    let u2 = basis.rows(n, n).into_owned();
    let u1_inv = u1
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::NoStabilizingSolution("U₁ is singular".into()))?;
    // X = U₂U₁⁻¹, computed as (U₁⁻ᵀ U₂ᵀ)ᵀ.
    let mut x = symmetrize(&(u1_inv * u2.transpose()).transpose());

    let gain = |x: &DMatrix<T>| -(&r_inv * b.transpose() * x);
    let mut residual = care_residual(a, &q_sym, &g, &x);

    // Newton steps: (A+BF)ᵀX' + X'(A+BF) + Q + FᵀRF = 0, kept while the
    // residual drops.
    for _ in 0..8 {
        let f0 = gain(&x);
        let acl = a + b * &f0;
        let w = &q_sym + f0.transpose() * &r_sym * &f0;
        let Ok(x_new) = linalg::solve_lyapunov(&acl, &w) else {
            break;
        };
        let res_new = care_residual(a, &q_sym, &g, &x_new);
        if !(res_new < residual) {
            break;
        }
        x = x_new;
        residual = res_new;
    }
    let f = gain(&x);
    let closed_loop_abscissa = linalg::eigenvalues(&(a + b * &f))?.spectral_abscissa;
    if !(closed_loop_abscissa < T::zero()) {
        return Err(Error::NoStabilizingSolution(format!(
            "A + BF has spectral abscissa {closed_loop_abscissa}"
        )));
    }
    let x_norm = spectral_norm(&x);
    let residual_scale = T::one()
        .max(q_norm + T::lit(2.0) * spectral_norm(a) * x_norm + spectral_norm(&g) * x_norm * x_norm);
    Ok(CareSolution {
        x,
        f,
        residual,
        residual_scale,
        closed_loop_abscissa,
    })
}

/// Loop gain `L(s) = F(sI - A)⁻¹B` (loop broken at the plant input).
pub fn lqr_loop_gain<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    f: &DMatrix<T>,
) -> Result<StateSpaceModel<T>> {
    let m = b.ncols();
    if f.shape() != (m, a.nrows()) {
        return Err(Error::Dimension(format!(
            "F must be {}x{}, got {}x{}",
            m,
            a.nrows(),
            f.nrows(),
            f.ncols()
        )));
    }
    StateSpaceModel::new(a.clone(), b.clone(), f.clone(), DMatrix::zeros(m, m))
}

/// Closed-loop map `H(s) = F(sI - A - BF)⁻¹B`.
pub fn lqr_closed_loop_map<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    f: &DMatrix<T>,
) -> Result<StateSpaceModel<T>> {
    let l = lqr_loop_gain(a, b, f)?;
    let acl = a + b * f;
    let spec = linalg::eigenvalues(&acl)?;
    if !spec.is_hurwitz(T::zero()) {
        return Err(Error::NotHurwitz(spec.spectral_abscissa.as_f64()));
    }
    StateSpaceModel::new(acl, l.b, l.c, l.d)
}

/// Outcome of a sampled Kalman-inequality check.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanMargin<T: Real> {
    /// `min_ω λ_min((I - L)ᴴ R (I - L) - R)` over the evaluated points.
    pub min_eigenvalue: T,
    /// Frequency where the minimum occurred.
    pub worst_frequency: T,
    /// Grid points skipped because `jω` sits on a pole of `L`.
    pub skipped: Vec<T>,
}

/// Signed Kalman-inequality margin of a square loop gain over a grid.
pub fn kalman_margin<T: Real>(
    l: &StateSpaceModel<T>,
    r: &DMatrix<T>,
    grid: &FrequencyGrid<T>,
) -> Result<KalmanMargin<T>> {
    let m = l.inputs();
    if l.outputs() != m || r.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "loop gain is {}x{}, R is {}x{}",
            l.outputs(),
            m,
            r.nrows(),
            r.ncols()
        )));
    }
    spd_sqrt(r, "R")?;
    let poles = l.poles()?;
    let rc = to_complex(r);
    let eye = DMatrix::<Complex<T>>::identity(m, m);
    let mut min_eigenvalue = T::lit(f64::INFINITY);
    let mut worst_frequency = T::zero();
    let mut skipped = Vec::new();
    for &w in grid.points() {
        let s = Complex::new(T::zero(), w);
        if near_pole(&poles, s, T::tol(1e-8)) {
            skipped.push(w);
            continue;
        }
        let Some(lw) = l.eval(s) else {
            skipped.push(w);
            continue;
        };
        let rd = &eye - lw;
        let k = rd.adjoint() * &rc * &rd - &rc;
        let e = min_hermitian_eigenvalue(&k);
        if e < min_eigenvalue {
            min_eigenvalue = e;
            worst_frequency = w;
        }
    }
    Ok(KalmanMargin {
        min_eigenvalue,
        worst_frequency,
        skipped,
    })
}

/// Realization of `R^{1/2}(H(s) + I)R^{-1/2}`.
pub fn loop_shifted_map<T: Real>(
    h: &StateSpaceModel<T>,
    r: &DMatrix<T>,
) -> Result<StateSpaceModel<T>> {
    let m = h.inputs();
    if h.outputs() != m || r.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "H is {}x{}, R is {}x{}",
            h.outputs(),
            m,
            r.nrows(),
            r.ncols()
        )));
    }
    let (rs, rsi) = spd_sqrt(r, "R")?;
    let d = &rs * (&h.d + DMatrix::identity(m, m)) * &rsi;
    StateSpaceModel::new(h.a.clone(), &h.b * &rsi, &rs * &h.c, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::hinf_norm;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn scalar_care_golden() {
        let s = solve_care(&dmatrix![1.0], &dmatrix![1.0], &dmatrix![3.0], &dmatrix![100.0]).unwrap();
        let x_exact = 100.0 + 10300.0f64.sqrt();
        assert_relative_eq!(s.x[(0, 0)], x_exact, max_relative = 1e-12);
        assert_relative_eq!(s.f[(0, 0)], -x_exact / 100.0, max_relative = 1e-12);
        assert!((s.f[(0, 0)] + 2.0149).abs() < 1e-3);
        assert!(s.residual <= 1e-8);
    }

    #[test]
    fn stable_plant_zero_cost() {
        let s = solve_care::<f64>(&dmatrix![-1.0], &dmatrix![1.0], &dmatrix![0.0], &dmatrix![1.0]).unwrap();
        assert!(s.x[(0, 0)].abs() < 1e-12);
        assert!(s.f[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn integrator_care() {
        let s = solve_care(&dmatrix![0.0], &dmatrix![1.0], &dmatrix![1.0], &dmatrix![1.0]).unwrap();
        assert_relative_eq!(s.x[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.f[(0, 0)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(s.closed_loop_abscissa, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn care_precondition_errors() {
        let one = dmatrix![1.0];
        assert_eq!(
            solve_care(&one, &one, &one, &dmatrix![0.0]),
            Err(Error::NotPositiveDefinite("R"))
        );
        assert_eq!(
            solve_care(&one, &one, &dmatrix![-1.0], &one),
            Err(Error::NotPositiveSemidefinite("Q"))
        );
        assert!(matches!(
            solve_care(&one, &dmatrix![0.0], &one, &one),
            Err(Error::NotStabilizable { .. })
        ));
        assert!(matches!(
            solve_care(&one, &one, &dmatrix![0.0], &one),
            Err(Error::NotDetectable { .. })
        ));
        assert!(matches!(
            solve_care(&one, &dmatrix![1.0, 0.0], &one, &one),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn single_precision_care() {
        let s = solve_care(&dmatrix![1.0f32], &dmatrix![1.0], &dmatrix![3.0], &dmatrix![100.0]).unwrap();
        assert!((s.f[(0, 0)] + 2.0149).abs() < 1e-3);
    }

    #[test]
    fn loop_gain_integrator() {
        let l = lqr_loop_gain(&dmatrix![0.0], &dmatrix![1.0], &dmatrix![-1.0]).unwrap();
        let v = l.eval_freq(1.0).unwrap()[(0, 0)];
        assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(v.im, 1.0, epsilon = 1e-14);
        let zero = lqr_loop_gain(&dmatrix![0.0], &dmatrix![1.0], &dmatrix![0.0]).unwrap();
        assert_eq!(zero.eval_freq(1.0).unwrap()[(0, 0)].norm(), 0.0);
        assert!(l.eval_freq(1e9).unwrap()[(0, 0)].norm() < 1e-8);
    }

    #[test]
    fn closed_loop_map_and_return_difference() {
        let (a, b, f) = (dmatrix![0.0], dmatrix![1.0], dmatrix![-1.0]);
        let h = lqr_closed_loop_map(&a, &b, &f).unwrap();
        assert_relative_eq!(h.eval_freq(0.0).unwrap()[(0, 0)].re, -1.0, epsilon = 1e-14);
        let l = lqr_loop_gain(&a, &b, &f).unwrap();
        for &w in FrequencyGrid::<f64>::log_spaced(50, 1e-3, 1e3).unwrap().points() {
            let inv = (Complex::new(1.0, 0.0) - l.eval_freq(w).unwrap()[(0, 0)]).inv();
            let ih = Complex::new(1.0, 0.0) + h.eval_freq(w).unwrap()[(0, 0)];
            assert!((inv - ih).norm() < 1e-8);
        }
        assert!(matches!(
            lqr_closed_loop_map(&dmatrix![1.0], &b, &dmatrix![0.0]),
            Err(Error::NotHurwitz(_))
        ));
    }

    #[test]
    fn kalman_margin_integrator_positive() {
        let l = lqr_loop_gain(&dmatrix![0.0], &dmatrix![1.0], &dmatrix![-1.0]).unwrap();
        let grid = FrequencyGrid::log_spaced(400, 1e-4, 1e4).unwrap();
        let k = kalman_margin(&l, &dmatrix![1.0], &grid).unwrap();
        assert!(k.min_eigenvalue > 0.0);
        // |1 + 1/(jω)|² - 1 = 1/ω²
        assert_relative_eq!(k.min_eigenvalue, 1e-8, max_relative = 1e-6);
    }

    #[test]
    fn kalman_margin_detects_nonoptimal_gain() {
        let l = lqr_loop_gain(&dmatrix![1.0], &dmatrix![1.0], &dmatrix![-1.01]).unwrap();
        let grid = FrequencyGrid::default_for(&dmatrix![1.0]);
        let k = kalman_margin(&l, &dmatrix![1.0], &grid).unwrap();
        assert!(k.min_eigenvalue < 0.0);
        assert_eq!(k.worst_frequency, 0.0);
    }

    #[test]
    fn kalman_margin_skips_poles() {
        let l = lqr_loop_gain(&dmatrix![0.0], &dmatrix![1.0], &dmatrix![-1.0]).unwrap();
        let grid = FrequencyGrid::new(vec![0.0, 1.0]).unwrap();
        let k = kalman_margin(&l, &dmatrix![1.0], &grid).unwrap();
        assert_eq!(k.skipped, vec![0.0]);
    }

    #[test]
    fn loop_shift_scalar() {
        let h = lqr_closed_loop_map(&dmatrix![0.0], &dmatrix![1.0], &dmatrix![-1.0]).unwrap();
        let shifted = loop_shifted_map(&h, &dmatrix![1.0]).unwrap();
        // s/(s+1)
        let v = shifted.eval_freq(2.0).unwrap()[(0, 0)];
        let expect = Complex::new(0.0, 2.0) / Complex::new(1.0, 2.0);
        assert!((v - expect).norm() < 1e-14);
        assert_relative_eq!(hinf_norm(&shifted, 1e-6).unwrap(), 1.0, max_relative = 1e-6);
        let with_r = loop_shifted_map(&h, &dmatrix![4.0]).unwrap();
        assert_relative_eq!(with_r.d[(0, 0)], 1.0, epsilon = 1e-14);
    }
}
