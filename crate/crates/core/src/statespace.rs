//! Continuous-time state-space realizations, frequency grids and the H∞ norm.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{self, complex_solve, spectral_norm, to_complex, Spectrum};
use crate::scalar::Real;

/// Realization `G(s) = C (sI - A)⁻¹ B + D`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
}

impl<T: Real> StateSpaceModel<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n
            || b.nrows() != n
            || c.ncols() != n
            || d.nrows() != c.nrows()
            || d.ncols() != b.ncols()
        {
            return Err(Error::Dimension(format!(
                "inconsistent realization: A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(StateSpaceModel { a, b, c, d })
    }

    /// Memoryless system `y = D u`.
    pub fn static_gain(d: DMatrix<T>) -> Self {
        let (p, m) = d.shape();
        StateSpaceModel {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d,
        }
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn poles(&self) -> Result<Spectrum<T>> {
        linalg::eigenvalues(&self.a)
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.poles()?.is_hurwitz(T::zero()))
    }

    /// Transfer matrix at `s`; `None` when `sI - A` is singular.
    pub fn eval(&self, s: Complex<T>) -> Option<DMatrix<Complex<T>>> {
        let n = self.states();
        let d = to_complex(&self.d);
        if n == 0 {
            return Some(d);
        }
        let mut m = -to_complex(&self.a);
        for i in 0..n {
            m[(i, i)] += s;
        }
        let x = complex_solve(&m, &to_complex(&self.b))?;
        let g = to_complex(&self.c) * x + d;
        if g.iter().all(|z| z.re.is_finite_val() && z.im.is_finite_val()) {
            Some(g)
        } else {
            None
        }
    }

    pub fn eval_freq(&self, omega: T) -> Option<DMatrix<Complex<T>>> {
        self.eval(Complex::new(T::zero(), omega))
    }

    /// Series connection `other ∘ self` (output of `self` drives `other`).
    pub fn series(&self, other: &StateSpaceModel<T>) -> Result<StateSpaceModel<T>> {
        if self.outputs() != other.inputs() {
            return Err(Error::Dimension(format!(
                "cannot feed {} outputs into {} inputs",
                self.outputs(),
                other.inputs()
            )));
        }
        let (n1, n2) = (self.states(), other.states());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&other.b * &self.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = DMatrix::zeros(n1 + n2, self.inputs());
        b.view_mut((0, 0), (n1, self.inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.inputs()))
            .copy_from(&(&other.b * &self.d));
        let mut c = DMatrix::zeros(other.outputs(), n1 + n2);
        c.view_mut((0, 0), (other.outputs(), n1))
            .copy_from(&(&other.d * &self.c));
        c.view_mut((0, n1), (other.outputs(), n2)).copy_from(&other.c);
        let d = &other.d * &self.d;
        StateSpaceModel::new(a, b, c, d)
    }
}

/// True when `s` lies within a relative distance `tol` of some eigenvalue.
pub fn near_pole<T: Real>(spectrum: &Spectrum<T>, s: Complex<T>, tol: T) -> bool {
    spectrum
        .eigenvalues
        .iter()
        .any(|&z| linalg::cabs(s - z) <= tol * (T::one() + linalg::cabs(z)))
}

/// Sorted, strictly increasing, non-negative frequencies in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid<T: Real> {
    points: Vec<T>,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("frequency grid is empty".into()));
        }
        if points.iter().any(|p| !p.is_finite_val() || *p < T::zero()) {
            return Err(Error::InvalidArgument(
                "frequencies must be finite and non-negative".into(),
            ));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(FrequencyGrid { points })
    }

    /// `count` log-spaced points in `[lo, hi]`.
    pub fn log_spaced(count: usize, lo: f64, hi: f64) -> Result<Self> {
        if count == 0 || !(lo > 0.0) || !(hi > lo) {
            return Err(Error::InvalidArgument(format!(
                "bad log grid: {count} points in [{lo}, {hi}]"
            )));
        }
        let points = if count == 1 {
            vec![T::lit(lo)]
        } else {
            let (l0, l1) = (lo.log10(), hi.log10());
            (0..count)
                .map(|i| T::lit(10f64.powf(l0 + (l1 - l0) * i as f64 / (count - 1) as f64)))
                .collect()
        };
        FrequencyGrid::new(points)
    }

    /// 400 log-spaced points on `[1e-4, 1e4]`, plus `ω = 0` when `a` is
    /// nonsingular.
    pub fn default_for(a: &DMatrix<T>) -> Self {
        Self::sized_for(a, 400)
    }

    pub fn sized_for(a: &DMatrix<T>, count: usize) -> Self {
        let mut g = Self::log_spaced(count.max(1), 1e-4, 1e4).expect("valid default grid");
        let singular = a.nrows() > 0
            && linalg::min_singular_value(a) <= T::tol(1e-12) * (T::one() + spectral_norm(a));
        if !singular {
            g.points.insert(0, T::zero());
        }
        g
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// H∞ norm of a stable realization, to relative accuracy `rel_tol`.
///
/// Bisection on γ. A candidate level is tested by looking for
/// imaginary-axis eigenvalues of the Hamiltonian
///
/// ```text
/// [ A + B R⁻¹DᵀC          B R⁻¹Bᵀ          ]
/// [ -Cᵀ(I + D R⁻¹Dᵀ)C     -(A + B R⁻¹DᵀC)ᵀ ],   R = γ²I - DᵀD,
/// ```
///
/// and every such eigenvalue is confirmed by evaluating σ_max(G(jω)) at the
/// crossing frequencies and their midpoints. The lower bound therefore only
/// ever increases to values that were actually attained, starting from the
/// larger of σ_max(D) and the peak over a 400-point log grid.
pub fn hinf_norm<T: Real>(g: &StateSpaceModel<T>, rel_tol: T) -> Result<T> {
    if !(rel_tol > T::zero()) {
        return Err(Error::InvalidArgument("rel_tol must be positive".into()));
    }
    let poles = g.poles()?;
    if !poles.is_hurwitz(T::zero()) {
        return Err(Error::NotHurwitz(poles.spectral_abscissa.as_f64()));
    }
    let sigma_at = |omega: T| -> T {
        g.eval_freq(omega)
            .map(|m| spectral_norm(&m))
            .unwrap_or(T::zero())
    };
    let mut lo = spectral_norm(&g.d);
    if g.states() == 0 {
        return Ok(lo);
    }
    let grid = FrequencyGrid::<T>::log_spaced(400, 1e-4, 1e4)?;
    for &w in std::iter::once(&T::zero()).chain(grid.points()) {
        let s = sigma_at(w);
        if s > lo {
            lo = s;
        }
    }
    if lo == T::zero() {
        return Ok(lo);
    }

    let two = T::lit(2.0);
    let mut hi = lo * two;
    let mut guard = 0;
    while let Some(peak) = crossing_peak(g, hi, &sigma_at)? {
        lo = if peak > lo { peak } else { lo };
        hi = lo * two;
        guard += 1;
        if guard > 200 {
            return Err(Error::Numerical("H∞ upper bound search diverged".into()));
        }
    }
    let mut iters = 0;
    while hi - lo > rel_tol * lo {
        let gamma = (lo + hi) / two;
        match crossing_peak(g, gamma, &sigma_at)? {
            Some(peak) => {
                lo = if peak > gamma { peak } else { gamma };
                if lo >= hi {
                    hi = lo * (T::one() + two * rel_tol);
                }
            }
            None => hi = gamma,
        }
        iters += 1;
        if iters > 500 {
            return Err(Error::Numerical("H∞ bisection did not converge".into()));
        }
    }
    Ok(lo)
}

/// Returns the largest confirmed σ_max above `gamma`, or `None` when the
/// Hamiltonian at `gamma` shows no genuine imaginary-axis crossing.
fn crossing_peak<T: Real>(
    g: &StateSpaceModel<T>,
    gamma: T,
    sigma_at: &dyn Fn(T) -> T,
) -> Result<Option<T>> {
    let n = g.states();
    let m = g.inputs();
    let r = DMatrix::<T>::identity(m, m) * (gamma * gamma) - g.d.transpose() * &g.d;
    let r_inv = match r.clone().try_inverse() {
        Some(x) => x,
        None => return Ok(Some(spectral_norm(&g.d))),
    };
    let p = g.outputs();
    let a_h = &g.a + &g.b * &r_inv * g.d.transpose() * &g.c;
    let top_right = &g.b * &r_inv * g.b.transpose();
    let bottom_left = -(g.c.transpose()
        * (DMatrix::<T>::identity(p, p) + &g.d * &r_inv * g.d.transpose())
        * &g.c);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_h);
    h.view_mut((0, n), (n, n)).copy_from(&top_right);
    h.view_mut((n, 0), (n, n)).copy_from(&bottom_left);
    h.view_mut((n, n), (n, n)).copy_from(&(-a_h.transpose()));
    let spec = linalg::eigenvalues(&h)?;
    let axis_tol = T::tol(1e-6) * (T::one() + spectral_norm(&h));
    let mut freqs: Vec<T> = spec
        .eigenvalues
        .iter()
        .filter(|z| z.re.abs() <= axis_tol)
        .map(|z| z.im.abs())
        .collect();
    if freqs.is_empty() {
        return Ok(None);
    }
    freqs.push(T::zero());
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut tests = freqs.clone();
    for w in freqs.windows(2) {
        tests.push((w[0] + w[1]) / T::lit(2.0));
    }
    let peak = tests
        .into_iter()
        .map(sigma_at)
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    Ok(if peak > gamma { Some(peak) } else { None })
}
