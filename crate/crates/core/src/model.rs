//! Three-mode mean-field model: amplitudes, physical parameters and the
//! right-hand side of the coupled equations of motion.
//!
//! Units: time in μs, every frequency-like quantity in rad/μs. Values quoted
//! in MHz are used numerically as rad/μs without a 2π factor.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;

use crate::error::ModelError;
use crate::pulse::PulsePair;
use crate::scalar::Scalar;

/// A normalized complex field amplitude.
pub type ComplexAmp<T> = Complex<T>;

/// Atomic (`a`), excited-molecule (`b`) and stable-molecule (`g`) amplitudes.
///
/// Supports the vector-space operations the integrator needs.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Amplitudes<T> {
    pub a: Complex<T>,
    pub b: Complex<T>,
    pub g: Complex<T>,
}

impl<T: Scalar> Amplitudes<T> {
    pub fn new(a: Complex<T>, b: Complex<T>, g: Complex<T>) -> Self {
        Self { a, b, g }
    }

    pub fn zero() -> Self {
        Self::new(Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero()))
    }

    /// Pure atomic condensate, `a = 1`.
    pub fn atomic() -> Self {
        Self { a: Complex::new(T::one(), T::zero()), ..Self::zero() }
    }

    pub fn pop_a(&self) -> T {
        self.a.norm_sqr()
    }

    pub fn pop_b(&self) -> T {
        self.b.norm_sqr()
    }

    pub fn pop_g(&self) -> T {
        self.g.norm_sqr()
    }

    /// Atom-number norm `|a|² + 2|b|² + 2|g|²`.
    ///
    /// Each molecule carries two atoms, which is why this combination (and not
    /// the plain sum of squares) is the one conserved by the equations of
    /// motion when `γ_b = 0`.
    pub fn norm(&self) -> T {
        let two = T::lit(2.0);
        self.pop_a() + two * (self.pop_b() + self.pop_g())
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.g].iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Applies the global gauge rotation `(e^{iθ}a, e^{2iθ}b, e^{2iθ}g)`.
    pub fn gauge_rotated(&self, theta: T) -> Self {
        let one = Complex::from_polar(T::one(), theta);
        let two = Complex::from_polar(T::one(), theta + theta);
        Self::new(self.a * one, self.b * two, self.g * two)
    }

    /// Per-component modulus, used by the error norm.
    pub(crate) fn moduli(&self) -> [T; 3] {
        [self.a.norm(), self.b.norm(), self.g.norm()]
    }

    /// Flattens to `(Re a, Im a, Re b, Im b, Re g, Im g)`.
    pub fn to_real(&self) -> [T; 6] {
        [self.a.re, self.a.im, self.b.re, self.b.im, self.g.re, self.g.im]
    }

    pub fn from_real(x: &[T; 6]) -> Self {
        Self::new(Complex::new(x[0], x[1]), Complex::new(x[2], x[3]), Complex::new(x[4], x[5]))
    }
}

impl<T: Scalar> Add for Amplitudes<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.a + rhs.a, self.b + rhs.b, self.g + rhs.g)
    }
}

impl<T: Scalar> Sub for Amplitudes<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.a - rhs.a, self.b - rhs.b, self.g - rhs.g)
    }
}

impl<T: Scalar> Mul<T> for Amplitudes<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self::new(self.a * k, self.b * k, self.g * k)
    }
}

impl<T: Scalar> Neg for Amplitudes<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.a, -self.b, -self.g)
    }
}

/// Amplitudes at a time instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateVector<T> {
    pub amps: Amplitudes<T>,
    pub t: T,
}

impl<T: Scalar> StateVector<T> {
    pub fn new(amps: Amplitudes<T>, t: T) -> Self {
        Self { amps, t }
    }

    /// Pure atomic condensate at `t`.
    pub fn atomic(t: T) -> Self {
        Self::new(Amplitudes::atomic(), t)
    }

    pub fn norm(&self) -> T {
        self.amps.norm()
    }
}

/// Instantaneous control values: the two Rabi frequencies and the two-photon
/// detuning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drive<T> {
    pub omega1: T,
    pub omega2: T,
    pub delta: T,
}

impl<T: Scalar> Drive<T> {
    pub fn new(omega1: T, omega2: T, delta: T) -> Self {
        Self { omega1, omega2, delta }
    }
}

/// Physical constants of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams<T> {
    /// Peak Rabi frequency Ω₀.
    pub omega0: T,
    /// Gaussian pulse width τ.
    pub tau: T,
    /// Centre of the free-bound pulse.
    pub t1: T,
    /// Centre of the bound-bound pulse.
    pub t2: T,
    /// Free-bound detuning Δ₁.
    pub delta1: T,
    /// Excited-molecule decay rate γ_b.
    pub gamma_b: T,
    pub lambda_aa: T,
    pub lambda_ag: T,
    pub lambda_gg: T,
}

/// Density of the reference condensate, cm⁻³.
pub const REFERENCE_DENSITY: f64 = 4.3e14;
/// Interaction strengths for ⁸⁷Rb in MHz·cm³: (U_aa, U_ag, U_gg).
pub const RB87_INTERACTIONS: (f64, f64, f64) = (4.96e-17, -6.44e-17, 2.48e-17);
/// Peak Rabi frequency at the reference density, rad/μs.
pub const REFERENCE_OMEGA0: f64 = 2.1;
/// Adiabaticity product Ω₀τ.
pub const REFERENCE_OMEGA0_TAU: f64 = 5.0e3;
/// Excited-molecule decay, rad/μs.
pub const REFERENCE_GAMMA_B: f64 = 74.0;

impl<T: Scalar> SystemParams<T> {
    /// The reference ⁸⁷Rb parameter set: Ω₀ = 2.1, Ω₀τ = 5000, γ_b = 74,
    /// t₂ = 2.5τ, t₁ = 3.77τ, Δ₁ = −1.4γ_b, collision rates from
    /// ρ = 4.3×10¹⁴ cm⁻³.
    pub fn reference() -> Self {
        let omega0 = T::lit(REFERENCE_OMEGA0);
        let tau = T::lit(REFERENCE_OMEGA0_TAU) / omega0;
        let gamma_b = T::lit(REFERENCE_GAMMA_B);
        let (u_aa, u_ag, u_gg) = RB87_INTERACTIONS;
        let (lambda_aa, lambda_ag, lambda_gg) =
            collision_rates_from_density(T::lit(REFERENCE_DENSITY), T::lit(u_aa), T::lit(u_ag), T::lit(u_gg))
                .expect("reference density is positive");
        Self {
            omega0,
            tau,
            t1: T::lit(3.77) * tau,
            t2: T::lit(2.5) * tau,
            delta1: T::lit(-1.4) * gamma_b,
            gamma_b,
            lambda_aa,
            lambda_ag,
            lambda_gg,
        }
    }

    /// Delay `T = t₁ − t₂`.
    pub fn delay(&self) -> T {
        self.t1 - self.t2
    }

    pub fn pulses(&self) -> PulsePair<T> {
        PulsePair::new(self.omega0, self.tau, self.t1, self.t2)
    }

    pub fn without_collisions(mut self) -> Self {
        self.lambda_aa = T::zero();
        self.lambda_ag = T::zero();
        self.lambda_gg = T::zero();
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("omega0", self.omega0),
            ("tau", self.tau),
            ("t1", self.t1),
            ("t2", self.t2),
            ("delta1", self.delta1),
            ("gamma_b", self.gamma_b),
            ("lambda_aa", self.lambda_aa),
            ("lambda_ag", self.lambda_ag),
            ("lambda_gg", self.lambda_gg),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(ModelError::InvalidParameter { name, reason: "must be finite".into() });
            }
        }
        if self.omega0 <= T::zero() {
            return Err(ModelError::InvalidParameter { name: "omega0", reason: "must be positive".into() });
        }
        if self.tau <= T::zero() {
            return Err(ModelError::InvalidParameter { name: "tau", reason: "must be positive".into() });
        }
        if self.gamma_b < T::zero() {
            return Err(ModelError::InvalidParameter { name: "gamma_b", reason: "must be non-negative".into() });
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate), additionally requiring the
    /// counterintuitive order `t₂ < t₁`.
    pub fn validate_counterintuitive(&self) -> Result<(), ModelError> {
        self.validate()?;
        if self.t1 <= self.t2 {
            return Err(ModelError::InvalidParameter {
                name: "t1",
                reason: "counterintuitive order needs t1 > t2".into(),
            });
        }
        Ok(())
    }
}

/// Collision rates `Λ_ij = ρ U_ij`, in the frequency unit of the `U_ij`
/// (MHz·cm³ in, MHz out for a density in cm⁻³).
pub fn collision_rates_from_density<T: Scalar>(rho: T, u_aa: T, u_ag: T, u_gg: T) -> Result<(T, T, T), ModelError> {
    if !(rho > T::zero()) || !rho.is_finite() {
        return Err(ModelError::InvalidParameter { name: "density", reason: format!("must be positive and finite, got {rho}") });
    }
    Ok((rho * u_aa, rho * u_ag, rho * u_gg))
}

/// Time derivative of the amplitudes under the given drive.
///
/// ```text
/// da/dt = −i[(Λ_aa|a|² + Λ_ag|g|²)a − Ω₁ a* b]
/// db/dt = −i[(Δ₁ − iγ_b/2)b − ½(Ω₁a² + Ω₂g)]
/// dg/dt = −i[(Λ_ag|a|² + Λ_gg|g|²)g + δg − ½Ω₂b]
/// ```
pub fn rhs<T: Scalar>(state: &Amplitudes<T>, params: &SystemParams<T>, drive: &Drive<T>) -> Result<Amplitudes<T>, ModelError> {
    if !state.is_finite() {
        return Err(ModelError::NonFinite { what: "amplitudes" });
    }
    let minus_i = Complex::new(T::zero(), -T::one());
    let half = T::lit(0.5);
    let Amplitudes { a, b, g } = *state;
    let pa = a.norm_sqr();
    let pg = g.norm_sqr();

    let ha = a * (params.lambda_aa * pa + params.lambda_ag * pg) - a.conj() * b * drive.omega1;
    let hb = b * Complex::new(params.delta1, -half * params.gamma_b) - (a * a * drive.omega1 + g * drive.omega2) * half;
    let hg = g * (params.lambda_ag * pa + params.lambda_gg * pg + drive.delta) - b * (half * drive.omega2);

    let out = Amplitudes::new(minus_i * ha, minus_i * hb, minus_i * hg);
    if !out.is_finite() {
        return Err(ModelError::NonFinite { what: "derivative" });
    }
    Ok(out)
}

/// Rate of change of the atom-number norm implied by a derivative:
/// `d/dt(|a|² + 2|b|² + 2|g|²)`.
pub fn norm_rate<T: Scalar>(state: &Amplitudes<T>, deriv: &Amplitudes<T>) -> T {
    let two = T::lit(2.0);
    let d = |z: Complex<T>, dz: Complex<T>| two * (z.conj() * dz).re;
    d(state.a, deriv.a) + two * (d(state.b, deriv.b) + d(state.g, deriv.g))
}
