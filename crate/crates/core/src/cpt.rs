//! Coherent-population-trapping (dark) steady state.
//!
//! With `b = 0` and chemical potentials `μ_b = μ_g = 2μ_a`, the stationary
//! equations reduce to the dark condition `Ω₁a² + Ω₂g = 0` together with a
//! collision-shifted two-photon resonance for δ.

use num_complex::Complex;

use crate::error::ModelError;
use crate::model::SystemParams;
use crate::scalar::Scalar;

/// Dark state at a given pair of Rabi frequencies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CptPoint<T> {
    pub pop_a: T,
    pub pop_g: T,
    /// Two-photon detuning at which this dark state exists.
    pub delta: T,
    /// Atomic chemical potential μ_a.
    pub mu_a: T,
    /// Real positive.
    pub amp_a: Complex<T>,
    /// Real, `−r·amp_a²`.
    pub amp_g: Complex<T>,
    /// `Ω₁/Ω₂`.
    pub ratio: T,
}

/// Dark-state populations for `r = Ω₁/Ω₂`:
/// `|a|² = 2/(1 + √(1 + 8r²))`, `|g|² = (1 − |a|²)/2`.
///
/// `r = +∞` is accepted as the limit `(0, ½)`.
pub fn cpt_populations<T: Scalar>(ratio: T) -> Result<(T, T), ModelError> {
    if ratio.is_nan() || ratio < T::zero() {
        return Err(ModelError::Domain { what: "ratio", value: ratio.as_f64() });
    }
    let two = T::lit(2.0);
    let pop_a = if ratio.is_infinite() {
        T::zero()
    } else {
        // r²·8 overflows to +inf for huge r, which still yields pop_a → 0
        two / (T::one() + (T::one() + T::lit(8.0) * ratio * ratio).sqrt())
    };
    Ok((pop_a, (T::one() - pop_a) / two))
}

fn check_populations<T: Scalar>(pop_a: T, pop_g: T) -> Result<(), ModelError> {
    let defect = (pop_a + T::lit(2.0) * pop_g - T::one()).abs();
    if !(defect <= T::lit(1e-12).max(T::epsilon() * T::lit(8.0))) {
        return Err(ModelError::Contract(format!(
            "populations must satisfy pop_a + 2 pop_g = 1 (got {pop_a} + 2·{pop_g})"
        )));
    }
    Ok(())
}

/// Generalized two-photon resonance:
/// `δ = (2Λ_aa − Λ_ag)|a|² + (2Λ_ag − Λ_gg)|g|²`.
pub fn generalized_delta<T: Scalar>(pop_a: T, pop_g: T, params: &SystemParams<T>) -> Result<T, ModelError> {
    check_populations(pop_a, pop_g)?;
    Ok(delta_unchecked(pop_a, pop_g, params))
}

pub(crate) fn delta_unchecked<T: Scalar>(pop_a: T, pop_g: T, params: &SystemParams<T>) -> T {
    let two = T::lit(2.0);
    (two * params.lambda_aa - params.lambda_ag) * pop_a + (two * params.lambda_ag - params.lambda_gg) * pop_g
}

/// `μ_a = Λ_aa|a|² + Λ_ag|g|²`, from the atomic equation at `b = 0`.
pub fn chemical_potential<T: Scalar>(pop_a: T, pop_g: T, params: &SystemParams<T>) -> Result<T, ModelError> {
    check_populations(pop_a, pop_g)?;
    Ok(params.lambda_aa * pop_a + params.lambda_ag * pop_g)
}

/// Full dark state at `(Ω₁, Ω₂)`.
///
/// `Ω₁ = 0` gives the pure atomic state for any `Ω₂`; `Ω₂ = 0` with `Ω₁ > 0`
/// has no dark state.
pub fn cpt_state<T: Scalar>(omega1: T, omega2: T, params: &SystemParams<T>) -> Result<CptPoint<T>, ModelError> {
    if omega1.is_nan() || omega1 < T::zero() {
        return Err(ModelError::Domain { what: "omega1", value: omega1.as_f64() });
    }
    if omega2.is_nan() || omega2 < T::zero() {
        return Err(ModelError::Domain { what: "omega2", value: omega2.as_f64() });
    }
    let ratio = if omega1 == T::zero() {
        T::zero()
    } else if omega2 == T::zero() {
        return Err(ModelError::NoCptState { omega1: omega1.as_f64() });
    } else {
        omega1 / omega2
    };
    let (pop_a, pop_g) = cpt_populations(ratio)?;
    let amp_a = pop_a.sqrt();
    Ok(CptPoint {
        pop_a,
        pop_g,
        delta: delta_unchecked(pop_a, pop_g, params),
        mu_a: params.lambda_aa * pop_a + params.lambda_ag * pop_g,
        amp_a: Complex::new(amp_a, T::zero()),
        amp_g: Complex::new(-ratio * pop_a, T::zero()),
        ratio,
    })
}
