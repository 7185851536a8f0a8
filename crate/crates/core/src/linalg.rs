//! Dense numerical kernels: spectra, stable invariant subspaces, Lyapunov
//! solves and norms.
//!
//! Everything here operates on small dense `nalgebra` matrices. Complex
//! arithmetic goes through `nalgebra::Complex<T>`.

use nalgebra::{Complex, ComplexField, DMatrix, Dyn, Schur, SymmetricEigen};
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::Real;

const SCHUR_MAX_ITER: usize = 10_000;

// nalgebra's shifted QR sweep occasionally stalls (seen on Hamiltonians
// with a ±a±bi quadruple). Retrying on an orthogonally similar matrix
// changes the shift history without touching the spectrum.
const SCHUR_RESTARTS: usize = 4;

/// Householder reflector `I - 2vvᵀ/vᵀv` with a fixed, restart-dependent `v`.
fn reflector<N: ComplexField>(n: usize, restart: usize) -> DMatrix<N> {
    let v = DMatrix::<N>::from_fn(n, 1, |i, _| {
        let t = ((i + 1) * (restart + 2)) as f64;
        N::from_real(nalgebra::convert(1.0 + 0.5 * (0.618_033_988_75 * t).sin()))
    });
    let vv = (v.transpose() * &v)[(0, 0)].clone();
    let two: N = nalgebra::convert(2.0);
    DMatrix::identity(n, n) - &v * v.transpose() * (two / vv)
}

type RestartedSchur<N> = (Schur<N, Dyn>, Option<DMatrix<N>>);

/// Schur form of `P m P` together with the reflector `P` (identity on the
/// first attempt).
fn schur_restarting<N: ComplexField>(
    m: &DMatrix<N>,
    eps: N::RealField,
) -> Option<RestartedSchur<N>> {
    (0..SCHUR_RESTARTS).find_map(|k| {
        if k == 0 {
            return Schur::try_new(m.clone(), eps.clone(), SCHUR_MAX_ITER).map(|s| (s, None));
        }
        let p = reflector::<N>(m.nrows(), k);
        Schur::try_new(&p * m * &p, eps.clone(), SCHUR_MAX_ITER).map(|s| (s, Some(p)))
    })
}

/// Eigenvalues of a real square matrix together with its spectral abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T: Real> {
    pub eigenvalues: Vec<Complex<T>>,
    pub spectral_abscissa: T,
}

impl<T: Real> Spectrum<T> {
    fn from_eigenvalues(eigenvalues: Vec<Complex<T>>) -> Self {
        let spectral_abscissa = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(T::lit(f64::NEG_INFINITY), |a, b| if b > a { b } else { a });
        Spectrum {
            eigenvalues,
            spectral_abscissa,
        }
    }

    pub fn is_hurwitz(&self, margin: T) -> bool {
        self.spectral_abscissa < -margin
    }

    /// Number of eigenvalues with real part strictly greater than `tol`.
    pub fn count_unstable(&self, tol: T) -> usize {
        self.eigenvalues.iter().filter(|z| z.re > tol).count()
    }
}

fn check_square<N: ComplexField>(m: &DMatrix<N>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_finite<T: Real>(m: &DMatrix<T>) -> Result<()> {
    if m.iter().all(|x| x.is_finite_val()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn check_finite_complex<T: Real>(m: &DMatrix<Complex<T>>) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite_val() && z.im.is_finite_val()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Modulus of a complex number.
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Argument of a complex number in `(-π, π]`.
pub fn carg<T: Real>(z: Complex<T>) -> T {
    z.im.atan2(z.re)
}

/// Eigenvalues (with multiplicity) of a real square matrix.
pub fn eigenvalues<T: Real>(m: &DMatrix<T>) -> Result<Spectrum<T>> {
    check_square(m, "matrix")?;
    check_finite(m)?;
    if m.nrows() == 0 {
        return Ok(Spectrum::from_eigenvalues(Vec::new()));
    }
    let (schur, _) = schur_restarting(m, T::default_epsilon())
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    Ok(Spectrum::from_eigenvalues(
        schur.complex_eigenvalues().iter().copied().collect(),
    ))
}

/// Eigenvalues of a complex square matrix, read off its complex Schur form.
pub fn complex_eigenvalues<T: Real>(m: &DMatrix<Complex<T>>) -> Result<Spectrum<T>> {
    check_square(m, "matrix")?;
    check_finite_complex(m)?;
    if m.nrows() == 0 {
        return Ok(Spectrum::from_eigenvalues(Vec::new()));
    }
    let (_, t) = complex_schur(m)?;
    Ok(Spectrum::from_eigenvalues(t.diagonal().iter().copied().collect()))
}

type CMat<T> = DMatrix<Complex<T>>;

/// `(U, T)` with `m = U T U^H`, `T` upper triangular.
fn complex_schur<T: Real>(
    m: &CMat<T>,
) -> Result<(CMat<T>, CMat<T>)> {
    let (schur, p) = schur_restarting(m, T::default_epsilon())
        .ok_or_else(|| Error::Numerical("complex Schur iteration did not converge".into()))?;
    let (u, t) = schur.unpack();
    Ok((p.map_or(u.clone(), |p| p * u), t))
}

/// True iff the spectral abscissa of `m` is below `-margin`.
pub fn is_hurwitz<T: Real>(m: &DMatrix<T>, margin: T) -> Result<bool> {
    if margin < T::zero() {
        return Err(Error::InvalidArgument("Hurwitz margin must be >= 0".into()));
    }
    Ok(eigenvalues(m)?.is_hurwitz(margin))
}

/// Singular values in decreasing order, from the Hermitian eigenvalues of
/// `[[0, M], [Mᴴ, 0]]` (which are `±σ_i` plus zeros).
pub fn singular_values<N: ComplexField>(m: &DMatrix<N>) -> Vec<N::RealField> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Vec::new();
    }
    let mut jw = DMatrix::<N>::zeros(r + c, r + c);
    jw.view_mut((0, r), (r, c)).copy_from(m);
    jw.view_mut((r, 0), (c, r)).copy_from(&m.adjoint());
    let mut ev: Vec<N::RealField> = SymmetricEigen::new(jw).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    ev.truncate(k);
    ev.into_iter()
        .map(|v| if v < N::RealField::zero() { N::RealField::zero() } else { v })
        .collect()
}

/// Largest singular value. Zero for empty matrices.
pub fn spectral_norm<N: ComplexField>(m: &DMatrix<N>) -> N::RealField {
    singular_values(m)
        .first()
        .cloned()
        .unwrap_or_else(N::RealField::zero)
}

/// Smallest singular value of a (possibly rectangular) matrix.
pub fn min_singular_value<N: ComplexField>(m: &DMatrix<N>) -> N::RealField {
    singular_values(m)
        .last()
        .cloned()
        .unwrap_or_else(N::RealField::zero)
}

pub fn to_complex<T: Real>(m: &DMatrix<T>) -> DMatrix<Complex<T>> {
    m.map(|x| Complex::new(x, T::zero()))
}

/// Solves `a x = b` for complex matrices by LU.
pub fn complex_solve<T: Real>(
    a: &DMatrix<Complex<T>>,
    b: &DMatrix<Complex<T>>,
) -> Option<DMatrix<Complex<T>>> {
    if a.nrows() == 0 {
        return Some(DMatrix::zeros(0, b.ncols()));
    }
    a.clone().lu().solve(b)
}

pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Smallest eigenvalue of the symmetric part of a real matrix.
pub fn min_symmetric_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::lit(f64::INFINITY);
    }
    let e = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    e.iter().copied().fold(T::lit(f64::INFINITY), |a, b| if b < a { b } else { a })
}

/// Smallest eigenvalue of the Hermitian part of a complex matrix.
pub fn min_hermitian_eigenvalue<T: Real>(m: &DMatrix<Complex<T>>) -> T {
    if m.is_empty() {
        return T::lit(f64::INFINITY);
    }
    let h = (m + m.adjoint()) * Complex::new(T::lit(0.5), T::zero());
    let e = SymmetricEigen::new(h).eigenvalues;
    e.iter().copied().fold(T::lit(f64::INFINITY), |a, b| if b < a { b } else { a })
}

/// Symmetric positive-definite square root and its inverse.
///
/// Fails when the smallest eigenvalue is not above `1e-12 * ||m||`.
pub fn spd_sqrt<T: Real>(m: &DMatrix<T>, name: &'static str) -> Result<(DMatrix<T>, DMatrix<T>)> {
    check_square(m, name)?;
    check_finite(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym.clone());
    let floor = T::lit(1e-12) * spectral_norm(&sym);
    if eig.eigenvalues.iter().any(|&l| l <= floor) {
        return Err(Error::NotPositiveDefinite(name));
    }
    let v = &eig.eigenvectors;
    let sqrt_d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.sqrt()));
    let inv_sqrt_d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| T::one() / l.sqrt()));
    Ok((
        symmetrize(&(v * sqrt_d * v.transpose())),
        symmetrize(&(v * inv_sqrt_d * v.transpose())),
    ))
}

/// Symmetric square root of a positive semidefinite matrix; negative
/// round-off eigenvalues are clamped to zero.
pub fn psd_sqrt<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    if m.is_empty() {
        return m.clone();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(T::zero()).sqrt()));
    symmetrize(&(v * d * v.transpose()))
}

/// Basis for the stable invariant subspace of a `2n x 2n` matrix that has
/// exactly `n` eigenvalues in the open left half plane.
///
/// The subspace is the range of the spectral projector `(I - sign(H)) / 2`,
/// with the matrix sign function computed by determinant-scaled Newton
/// iteration. The returned basis is orthonormal.
pub fn stable_invariant_subspace<T: Real>(h: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_square(h, "Hamiltonian")?;
    let dim = h.nrows();
    if !dim.is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "Hamiltonian dimension must be even, got {dim}"
        )));
    }
    let n = dim / 2;
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let spec = eigenvalues(h)?;
    let h_norm = spectral_norm(h);
    let axis_tol = T::tol(1e-8) * h_norm;
    if let Some(z) = spec.eigenvalues.iter().find(|z| z.re.abs() <= axis_tol) {
        return Err(Error::NoStabilizingSolution(format!(
            "eigenvalue {} + {}j on the imaginary axis",
            z.re, z.im
        )));
    }
    let stable = spec.eigenvalues.iter().filter(|z| z.re < T::zero()).count();
    if stable != n {
        return Err(Error::NoStabilizingSolution(format!(
            "{stable} stable eigenvalues, expected {n}"
        )));
    }

    let sign = matrix_sign(h)?;
    let projector = (DMatrix::identity(dim, dim) - sign) * T::lit(0.5);
    // Rank-revealing QR: the first n pivoted columns span the range.
    let qr = projector.col_piv_qr();
    let basis = qr.q().columns(0, n).into_owned();
    Ok(basis)
}

fn matrix_sign<T: Real>(h: &DMatrix<T>) -> Result<DMatrix<T>> {
    let dim = h.nrows();
    let mut s = h.clone();
    let tol = T::lit(100.0) * T::default_epsilon() * T::lit(dim as f64);
    let mut scaling = true;
    for _ in 0..100 {
        let lu = s.clone().lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::NoStabilizingSolution("singular iterate in sign function".into()))?;
        let mu = if scaling {
            // |det S|^(-1/dim), via log-sum to avoid overflow.
            let lu = s.clone().lu();
            let u = lu.u();
            let log_det: T = u.diagonal().iter().map(|d| d.abs().ln()).fold(T::zero(), |a, b| a + b);
            (-log_det / T::lit(dim as f64)).exp()
        } else {
            T::one()
        };
        let next = (&s * mu + inv * (T::one() / mu)) * T::lit(0.5);
        let change = (&next - &s).norm();
        let size = next.norm();
        s = next;
        if change <= T::lit(1e-2) * size {
            scaling = false;
        }
        if change <= tol * size {
            return Ok(s);
        }
        check_finite(&s)?;
    }
    // Quadratic convergence stalls at round-off; accept if the iterate is an involution.
    let resid = (&s * &s - DMatrix::identity(dim, dim)).norm();
    if resid <= T::tol(1e-6) * T::lit(dim as f64) {
        Ok(s)
    } else {
        Err(Error::Numerical("matrix sign iteration did not converge".into()))
    }
}

/// Solves `Aᵀ P + P A + W = 0` for Hurwitz `A`.
///
/// Complex Bartels–Stewart: with `A = U T Uᴴ`, the transformed unknown
/// `Y = Uᴴ P U` satisfies `Tᴴ Y + Y T = -Uᴴ W U`, which is solved one column
/// at a time by forward substitution. The result is symmetrized.
pub fn solve_lyapunov<T: Real>(a: &DMatrix<T>, w: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_square(a, "A")?;
    check_square(w, "W")?;
    if a.nrows() != w.nrows() {
        return Err(Error::Dimension(format!(
            "A is {}x{} but W is {}x{}",
            a.nrows(),
            a.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    check_finite(w)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let spec = eigenvalues(a)?;
    if !spec.is_hurwitz(T::zero()) {
        return Err(Error::NotHurwitz(spec.spectral_abscissa.as_f64()));
    }
    let (u, t) = complex_schur(&to_complex(a))?;
    let c = -(u.adjoint() * to_complex(w) * &u);
    let th = t.adjoint();
    let mut y: DMatrix<Complex<T>> = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut rhs = c.column(k).into_owned();
        for l in 0..k {
            let tlk = t[(l, k)];
            let yl = y.column(l).into_owned();
            rhs -= yl * tlk;
        }
        let tkk = t[(k, k)];
        // (Tᴴ + t_kk I) is lower triangular.
        for i in 0..n {
            let mut acc = rhs[i];
            for j in 0..i {
                acc -= th[(i, j)] * y[(j, k)];
            }
            y[(i, k)] = acc / (th[(i, i)] + tkk);
        }
    }
    let p = (&u * y * u.adjoint()).map(|z| z.re);
    Ok(symmetrize(&p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn singular_values_match_frobenius_and_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let r = rng.random_range(1..7);
            let c = rng.random_range(1..7);
            let m = random_matrix(&mut rng, r, c);
            let sv = singular_values(&m);
            assert_eq!(sv.len(), r.min(c));
            let sum: f64 = sv.iter().map(|s| s * s).sum();
            assert_relative_eq!(sum, m.norm_squared(), max_relative = 1e-12);
            let gram = if r <= c { &m * m.transpose() } else { m.transpose() * &m };
            let mut ev: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().cloned().collect();
            ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (s, e) in sv.iter().zip(&ev) {
                assert!((s * s - e).abs() <= 1e-12 * (1.0 + ev[0]));
            }
        }
    }

    #[test]
    fn schur_restart_on_stalling_hamiltonian() {
        let h = dmatrix![
            0.1380427979274895, 0.0, -3.0615078510624, 0.0;
            -0.6102689486652147, 1.0848238810446873, 0.0, -0.45714733084;
            -0.36200570930393183, -0.35278082025535157, -0.1380427979274895, 0.6102689486652147;
            -0.35278082025535157, -1.3009107048238555, 0.0, -1.0848238810446873
        ];
        let mut re: Vec<f64> = eigenvalues(&h).unwrap().eigenvalues.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!(re[0] < 0.0 && re[1] < 0.0 && re[2] > 0.0 && re[3] > 0.0);
        let (u, t) = complex_schur(&to_complex(&h)).unwrap();
        assert!((&u * &t * u.adjoint() - to_complex(&h)).norm() < 1e-10);
    }

    #[test]
    fn rank_deficient_projector_basis() {
        // Hamiltonian on which an SVD-based basis came out wrong.
        let a = dmatrix![1.0, 0.0; 1.0, 1.0];
        let b = dmatrix![1.0, 0.0; -1.0, 1.0];
        let g = &b * b.transpose() / 100.0;
        let q = dmatrix![3.0, 1.0; 1.0, 3.0];
        let mut h = DMatrix::zeros(4, 4);
        h.view_mut((0, 0), (2, 2)).copy_from(&a);
        h.view_mut((0, 2), (2, 2)).copy_from(&(-g));
        h.view_mut((2, 0), (2, 2)).copy_from(&(-q));
        h.view_mut((2, 2), (2, 2)).copy_from(&(-a.transpose()));
        let u = stable_invariant_subspace(&h).unwrap();
        let lam = u.transpose() * &h * &u;
        assert!((&h * &u - &u * &lam).norm() < 1e-10);
        assert!((u.transpose() * &u - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!(is_hurwitz(&lam, 0.0).unwrap());
    }

    // Kronecker form of AᵀP + PA = -W, independent of the Schur route.
    fn lyapunov_kron(a: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let eye = DMatrix::<f64>::identity(n, n);
        let at = a.transpose();
        let k = eye.kronecker(&at) + at.kronecker(&eye);
        let rhs = -DMatrix::from_column_slice(n * n, 1, w.as_slice());
        let sol = k.lu().solve(&rhs).unwrap();
        DMatrix::from_column_slice(n, n, sol.as_slice())
    }

    #[test]
    fn rotation_eigenvalues() {
        let s = eigenvalues(&dmatrix![0.0, 1.0; -1.0, 0.0]).unwrap();
        assert_relative_eq!(s.spectral_abscissa, 0.0, epsilon = 1e-14);
        let mut im: Vec<f64> = s.eigenvalues.iter().map(|z| z.im).collect();
        im.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(im[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(im[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn jordan_block_not_hurwitz() {
        let m = dmatrix![1.0, 0.0; 1.0, 1.0];
        let s = eigenvalues(&m).unwrap();
        assert_relative_eq!(s.spectral_abscissa, 1.0, epsilon = 1e-12);
        assert!(!is_hurwitz(&m, 0.0).unwrap());
        assert!(is_hurwitz(&dmatrix![-1.0, 0.0; 0.0, -2.0], 0.0).unwrap());
    }

    #[test]
    fn eigen_errors() {
        assert!(matches!(
            eigenvalues(&DMatrix::<f64>::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
        assert_eq!(
            eigenvalues(&dmatrix![f64::NAN, 0.0; 0.0, 1.0]),
            Err(Error::NonFinite)
        );
    }

    #[test]
    fn eigenvalue_product_and_sum_match_det_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [5usize, 9, 14, 20] {
            let m = random_matrix(&mut rng, n, n);
            let s = eigenvalues(&m).unwrap();
            assert_eq!(s.eigenvalues.len(), n);
            let prod = s
                .eigenvalues
                .iter()
                .fold(Complex::new(1.0, 0.0), |a, b| a * b);
            let sum: Complex<f64> = s.eigenvalues.iter().sum();
            let det = m.determinant();
            assert!((prod.re - det).abs() <= 1e-8 * det.abs().max(1e-3), "n={n}");
            assert!(prod.im.abs() <= 1e-8 * det.abs().max(1e-3));
            assert!((sum.re - m.trace()).abs() <= 1e-8 * m.trace().abs().max(1.0));
        }
    }

    #[test]
    fn complex_eigenvalues_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::dvector![
            Complex::new(-1.0, 2.0),
            Complex::new(0.5, -1.0)
        ]);
        let s = complex_eigenvalues(&m).unwrap();
        assert_relative_eq!(s.spectral_abscissa, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn stable_subspace_scalar_hamiltonian() {
        // A=0, B=1, Q=1, R=1.
        let h = dmatrix![0.0, -1.0; -1.0, 0.0];
        let u = stable_invariant_subspace(&h).unwrap();
        assert_relative_eq!(u[(1, 0)] / u[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn stable_subspace_block_triangular() {
        let h = dmatrix![
            -1.0, 0.3, 0.0, 0.2;
            0.0, -2.0, 0.5, 0.1;
            0.0, 0.0, 1.0, 0.0;
            0.0, 0.0, 0.4, 3.0
        ];
        let u = stable_invariant_subspace(&h).unwrap();
        // Spans e1, e2.
        assert!(u.rows(2, 2).norm() < 1e-12);
        let resid = &h * &u - &u * (u.transpose() * &h * &u);
        assert!(resid.norm() <= 1e-8 * spectral_norm(&h));
    }

    #[test]
    fn stable_subspace_yields_riccati_root() {
        // A=1, B=1, Q=3, R=100 gives X² - 200X - 300 = 0.
        let h = dmatrix![1.0, -0.01; -3.0, -1.0];
        let u = stable_invariant_subspace(&h).unwrap();
        let x = u[(1, 0)] / u[(0, 0)];
        assert_relative_eq!(x, 100.0 + 10300.0f64.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn imaginary_axis_hamiltonian_rejected() {
        let h = dmatrix![0.0, 1.0; -1.0, 0.0];
        assert!(matches!(
            stable_invariant_subspace(&h),
            Err(Error::NoStabilizingSolution(_))
        ));
    }

    #[test]
    fn lyapunov_scalars() {
        let p = solve_lyapunov(&dmatrix![-1.0], &dmatrix![2.0]).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-14);
        let p = solve_lyapunov(&dmatrix![-1.0], &dmatrix![0.0]).unwrap();
        assert_eq!(p[(0, 0)], 0.0);
        let p = solve_lyapunov(&dmatrix![-1.0, 0.0; 0.0, -2.0], &DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(p, dmatrix![0.5, 0.0; 0.0, 0.25], epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        assert!(matches!(
            solve_lyapunov(&dmatrix![1.0], &dmatrix![1.0]),
            Err(Error::NotHurwitz(_))
        ));
    }

    #[test]
    fn lyapunov_random_residual_and_kron_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..100 {
            let n = 1 + trial % 7;
            let mut a = random_matrix(&mut rng, n, n) * 2.0;
            let s = eigenvalues(&a).unwrap();
            let shift = s.spectral_abscissa + rng.random_range(0.1..1.0);
            for i in 0..n {
                a[(i, i)] -= shift;
            }
            let g = random_matrix(&mut rng, n, n);
            let w = &g * g.transpose();
            let p = solve_lyapunov(&a, &w).unwrap();
            let resid = (a.transpose() * &p + &p * &a + &w).norm();
            let scale = spectral_norm(&a) * spectral_norm(&p) + spectral_norm(&w);
            assert!(resid <= 1e-8 * scale, "trial {trial}: {resid}");
            assert!(min_symmetric_eigenvalue(&p) >= -1e-10 * spectral_norm(&p));
            let oracle = lyapunov_kron(&a, &w);
            assert!((&p - &oracle).norm() <= 1e-8 * oracle.norm().max(1.0));
        }
    }

    #[test]
    fn norms() {
        assert_relative_eq!(spectral_norm(&DMatrix::<f64>::identity(3, 3)), 1.0, epsilon = 1e-14);
        assert_relative_eq!(spectral_norm(&dmatrix![0.0, 2.0; 0.0, 0.0]), 2.0, epsilon = 1e-14);
        assert_eq!(spectral_norm(&DMatrix::<f64>::zeros(0, 3)), 0.0);
    }

    #[test]
    fn submatrix_norm_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let r = rng.random_range(1..7);
            let c = rng.random_range(1..7);
            let m = random_matrix(&mut rng, r, c);
            let rows: Vec<usize> = (0..r).filter(|_| rng.random_bool(0.6)).collect();
            let cols: Vec<usize> = (0..c).filter(|_| rng.random_bool(0.6)).collect();
            let sub = m.select_rows(&rows).select_columns(&cols);
            assert!(spectral_norm(&sub) <= spectral_norm(&m) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn spd_sqrt_roundtrip() {
        let m = dmatrix![4.0, 1.0; 1.0, 3.0];
        let (s, si) = spd_sqrt(&m, "R").unwrap();
        assert_relative_eq!(&s * &s, m, epsilon = 1e-12);
        assert_relative_eq!(&s * &si, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert!(spd_sqrt(&dmatrix![1.0, 2.0; 2.0, 1.0], "R").is_err());
    }

    #[test]
    fn single_precision_smoke() {
        let p = solve_lyapunov(&nalgebra::dmatrix![-1.0f32, 0.0; 0.0, -2.0], &DMatrix::identity(2, 2))
            .unwrap();
        assert!((p[(1, 1)] - 0.25).abs() < 1e-5);
    }
}
