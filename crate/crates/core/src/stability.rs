//! Linear (Bogoliubov) stability of the dark state.
//!
//! In the frame co-rotating with the chemical potentials (`μ_a` for `a`,
//! `2μ_a` for `b` and `g`) the dark state is a fixed point. Small
//! perturbations `δα = η e^{−iωt} + ν* e^{iωt}` evolve under the 6×6 real
//! Jacobian of the rotating-frame flow; an eigenvalue `λ` of that matrix is
//! an eigenfrequency `ω = iλ`, so a complex `ω` is a growing mode.

use nalgebra::SMatrix;
use num_complex::Complex;
use rayon::prelude::*;

use crate::cpt::{cpt_state, CptPoint};
use crate::error::{ModelError, StabilityError};
use crate::model::{rhs, Amplitudes, Drive, SystemParams};
use crate::scalar::Scalar;

pub type Jacobian<T> = SMatrix<T, 6, 6>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMethod {
    /// Central differences on [`rotating_frame_rhs`].
    FiniteDifference,
    /// Hand-derived entries, see [`analytic_jacobian`].
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityOptions<T> {
    /// Keep `γ_b` in the linearization. Off by default: the dark-state
    /// analysis is for the lossless system.
    pub include_decay: bool,
    /// Growth rates above `threshold · Ω₀` count as unstable.
    pub threshold: T,
    pub fd_step: T,
    pub method: JacobianMethod,
}

impl<T: Scalar> Default for StabilityOptions<T> {
    fn default() -> Self {
        Self { include_decay: false, threshold: T::lit(1e-6), fd_step: T::lit(1e-7), method: JacobianMethod::FiniteDifference }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityResult<T> {
    /// The six eigenfrequencies `ω = iλ`.
    pub eigenfrequencies: Vec<Complex<T>>,
    /// Largest `Re λ = Im ω`, floored at zero.
    pub max_growth_rate: T,
    pub unstable: bool,
}

impl<T: Scalar> StabilityResult<T> {
    /// Jacobian eigenvalues `λ = −iω`.
    pub fn eigenvalues(&self) -> Vec<Complex<T>> {
        self.eigenfrequencies.iter().map(|w| Complex::new(w.im, -w.re)).collect()
    }
}

/// Grid of stability verdicts over `(Ω₂/Ω₁, Δ₁/Ω₁)`, with `Ω₁ = Ω₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityMap<T> {
    pub ratios: Vec<T>,
    pub detunings: Vec<T>,
    /// Row-major: detuning index outer, ratio index inner.
    pub cells: Vec<StabilityResult<T>>,
}

impl<T: Scalar> StabilityMap<T> {
    pub fn cell(&self, detuning_idx: usize, ratio_idx: usize) -> &StabilityResult<T> {
        &self.cells[detuning_idx * self.ratios.len() + ratio_idx]
    }

    /// `(ratio, detuning, result)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (T, T, &StabilityResult<T>)> + '_ {
        let nr = self.ratios.len();
        self.cells.iter().enumerate().map(move |(k, c)| (self.ratios[k % nr], self.detunings[k / nr], c))
    }
}

/// Equations of motion in the frame rotating at `μ_a` (atoms) and `2μ_a`
/// (both molecular modes).
pub fn rotating_frame_rhs<T: Scalar>(
    state: &Amplitudes<T>,
    params: &SystemParams<T>,
    drive: &Drive<T>,
    mu_a: T,
) -> Result<Amplitudes<T>, ModelError> {
    let lab = rhs(state, params, drive)?;
    let i_mu = Complex::new(T::zero(), mu_a);
    let i_2mu = Complex::new(T::zero(), mu_a + mu_a);
    Ok(Amplitudes::new(lab.a + state.a * i_mu, lab.b + state.b * i_2mu, lab.g + state.g * i_2mu))
}

/// Dark state at `(Ω₁, Ω₂)` with the drive (δ from the generalized
/// resonance) that makes it stationary.
pub fn fixed_point<T: Scalar>(params: &SystemParams<T>, omega1: T, omega2: T) -> Result<(CptPoint<T>, Amplitudes<T>, Drive<T>), ModelError> {
    if !(omega2 > T::zero()) {
        return Err(ModelError::Domain { what: "omega2", value: omega2.as_f64() });
    }
    let cpt = cpt_state(omega1, omega2, params)?;
    let zero = Complex::new(T::zero(), T::zero());
    let state = Amplitudes::new(cpt.amp_a, zero, cpt.amp_g);
    Ok((cpt, state, Drive::new(omega1, omega2, cpt.delta)))
}

fn analysis_params<T: Scalar>(params: &SystemParams<T>, opts: &StabilityOptions<T>) -> SystemParams<T> {
    let mut p = *params;
    if !opts.include_decay {
        p.gamma_b = T::zero();
    }
    p
}

/// Central-difference Jacobian of [`rotating_frame_rhs`] at an arbitrary
/// state, over `(Re a, Im a, Re b, Im b, Re g, Im g)`.
pub fn finite_difference_jacobian<T: Scalar>(
    state: &Amplitudes<T>,
    params: &SystemParams<T>,
    drive: &Drive<T>,
    mu_a: T,
    step: T,
) -> Result<Jacobian<T>, ModelError> {
    let x0 = state.to_real();
    let mut jac = Jacobian::<T>::from_element(T::zero());
    for col in 0..6 {
        let mut xp = x0;
        let mut xm = x0;
        xp[col] = xp[col] + step;
        xm[col] = xm[col] - step;
        let fp = rotating_frame_rhs(&Amplitudes::from_real(&xp), params, drive, mu_a)?.to_real();
        let fm = rotating_frame_rhs(&Amplitudes::from_real(&xm), params, drive, mu_a)?.to_real();
        for row in 0..6 {
            jac[(row, col)] = (fp[row] - fm[row]) / (step + step);
        }
    }
    Ok(jac)
}

/// Exact Jacobian of [`rotating_frame_rhs`] at an arbitrary state.
///
/// Built from the Wirtinger derivatives `∂F/∂z` and `∂F/∂z̄` of each complex
/// component: with `z = x + iy`, `∂F/∂x = ∂F/∂z + ∂F/∂z̄` and
/// `∂F/∂y = i(∂F/∂z − ∂F/∂z̄)`.
pub fn analytic_jacobian<T: Scalar>(state: &Amplitudes<T>, params: &SystemParams<T>, drive: &Drive<T>, mu_a: T) -> Jacobian<T> {
    let zero = Complex::new(T::zero(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let mi = -i;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let Amplitudes { a, b, g } = *state;
    let (pa, pg) = (a.norm_sqr(), g.norm_sqr());
    let (laa, lag, lgg) = (params.lambda_aa, params.lambda_ag, params.lambda_gg);
    let (o1, o2) = (drive.omega1, drive.omega2);

    // wirt[row][col] = (∂F_row/∂z_col, ∂F_row/∂z̄_col)
    let wirt: [[(Complex<T>, Complex<T>); 3]; 3] = [
        [
            (mi * (two * laa * pa + lag * pg) + i * mu_a, mi * (a * a * laa - b * o1)),
            (i * a.conj() * o1, zero),
            (mi * a * g.conj() * lag, mi * a * g * lag),
        ],
        [
            (i * a * o1, zero),
            (mi * Complex::new(params.delta1, -half * params.gamma_b) + i * (two * mu_a), zero),
            (i * (half * o2), zero),
        ],
        [
            (mi * a.conj() * g * lag, mi * a * g * lag),
            (i * (half * o2), zero),
            (mi * (lag * pa + two * lgg * pg + drive.delta) + i * (two * mu_a), mi * g * g * lgg),
        ],
    ];

    let mut jac = Jacobian::<T>::from_element(T::zero());
    for (r, row) in wirt.iter().enumerate() {
        for (c, &(dz, dzbar)) in row.iter().enumerate() {
            let sum = dz + dzbar;
            let diff = dz - dzbar;
            jac[(2 * r, 2 * c)] = sum.re;
            jac[(2 * r, 2 * c + 1)] = -diff.im;
            jac[(2 * r + 1, 2 * c)] = sum.im;
            jac[(2 * r + 1, 2 * c + 1)] = diff.re;
        }
    }
    jac
}

/// Jacobian of the rotating-frame flow at the dark state for `(Ω₁, Ω₂)`.
pub fn linearize_at_cpt<T: Scalar>(
    params: &SystemParams<T>,
    omega1: T,
    omega2: T,
    opts: &StabilityOptions<T>,
) -> Result<Jacobian<T>, ModelError> {
    let p = analysis_params(params, opts);
    let (cpt, state, drive) = fixed_point(&p, omega1, omega2)?;
    match opts.method {
        JacobianMethod::FiniteDifference => finite_difference_jacobian(&state, &p, &drive, cpt.mu_a, opts.fd_step),
        JacobianMethod::Analytic => Ok(analytic_jacobian(&state, &p, &drive, cpt.mu_a)),
    }
}

/// Eigenvalues of a real 6×6 Jacobian.
pub fn eigenvalues<T: Scalar>(jac: &Jacobian<T>) -> Option<Vec<Complex<T>>> {
    crate::eigen::eigenvalues(jac)
}

/// Stability verdict for the dark state at `(Ω₁, Ω₂)`.
pub fn classify<T: Scalar>(
    params: &SystemParams<T>,
    omega1: T,
    omega2: T,
    opts: &StabilityOptions<T>,
) -> Result<StabilityResult<T>, StabilityError> {
    let jac = linearize_at_cpt(params, omega1, omega2, opts)?;
    let lambdas = eigenvalues(&jac).ok_or(StabilityError::EigenNonConvergence { omega1: omega1.as_f64(), omega2: omega2.as_f64() })?;
    let max_growth_rate = lambdas.iter().map(|l| l.re).fold(T::zero(), |acc, x| if x > acc { x } else { acc });
    Ok(StabilityResult {
        eigenfrequencies: lambdas.iter().map(|l| Complex::new(-l.im, l.re)).collect(),
        max_growth_rate,
        unstable: max_growth_rate > opts.threshold * params.omega0,
    })
}

fn check_axis<T: Scalar>(axis: &[T], name: &'static str) -> Result<(), StabilityError> {
    if axis.is_empty() || axis.windows(2).any(|w| !(w[0] < w[1])) || axis.iter().any(|x| !x.is_finite()) {
        return Err(StabilityError::BadAxis(name));
    }
    Ok(())
}

/// Classifies every `(Ω₂/Ω₁, Δ₁/Ω₁)` grid point with `Ω₁ = Ω₀`.
///
/// Cells run in parallel on the current rayon pool; the result does not
/// depend on scheduling.
pub fn map<T: Scalar>(
    params: &SystemParams<T>,
    ratio_axis: &[T],
    detuning_axis: &[T],
    opts: &StabilityOptions<T>,
) -> Result<StabilityMap<T>, StabilityError> {
    check_axis(ratio_axis, "omega2_over_omega1")?;
    check_axis(detuning_axis, "delta1_over_omega1")?;
    let omega1 = params.omega0;
    let nr = ratio_axis.len();
    let cells = (0..nr * detuning_axis.len())
        .into_par_iter()
        .map(|k| {
            let mut p = *params;
            p.delta1 = detuning_axis[k / nr] * omega1;
            classify(&p, omega1, ratio_axis[k % nr] * omega1, opts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StabilityMap { ratios: ratio_axis.to_vec(), detunings: detuning_axis.to_vec(), cells })
}
