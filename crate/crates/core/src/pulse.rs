//! Gaussian pulse pair and the frequency-modulated two-photon detuning.

use crate::cpt::{cpt_populations, delta_unchecked};
use crate::model::{Drive, SystemParams};
use crate::scalar::Scalar;

/// Which laser: 1 is free-bound, 2 is bound-bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pulse {
    FreeBound,
    BoundBound,
}

/// Two Gaussian Rabi pulses `Ω_σ(t) = Ω_σ,peak · exp[−(t − t_σ)²/τ²]`.
///
/// Both peaks default to `omega0`; either can be overridden, e.g. to switch a
/// laser off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulsePair<T> {
    pub omega0: T,
    pub tau: T,
    pub t1: T,
    pub t2: T,
    pub peak1: T,
    pub peak2: T,
}

impl<T: Scalar> PulsePair<T> {
    pub fn new(omega0: T, tau: T, t1: T, t2: T) -> Self {
        Self { omega0, tau, t1, t2, peak1: omega0, peak2: omega0 }
    }

    pub fn with_peak(mut self, pulse: Pulse, peak: T) -> Self {
        match pulse {
            Pulse::FreeBound => self.peak1 = peak,
            Pulse::BoundBound => self.peak2 = peak,
        }
        self
    }

    /// Counterintuitive order: the bound-bound pulse comes first.
    pub fn is_counterintuitive(&self) -> bool {
        self.t2 < self.t1
    }

    pub fn delay(&self) -> T {
        self.t1 - self.t2
    }

    pub fn rabi(&self, pulse: Pulse, t: T) -> T {
        let (peak, centre) = match pulse {
            Pulse::FreeBound => (self.peak1, self.t1),
            Pulse::BoundBound => (self.peak2, self.t2),
        };
        let x = (t - centre) / self.tau;
        peak * (-x * x).exp()
    }

    /// `Ω₁(t)/Ω₂(t)` without forming either Gaussian, so the ratio stays
    /// finite where both pulses underflow.
    pub fn ratio(&self, t: T) -> T {
        if self.peak1 == T::zero() {
            return T::zero();
        }
        // ((t − t₂)² − (t − t₁)²)/τ² = (t₁ − t₂)(2t − t₁ − t₂)/τ²
        let exponent = (self.t1 - self.t2) * (t + t - self.t1 - self.t2) / (self.tau * self.tau);
        (self.peak1 / self.peak2) * exponent.exp()
    }
}

/// Two-photon detuning that keeps the instantaneous dark state resonant.
pub fn delta_schedule<T: Scalar>(pulses: &PulsePair<T>, params: &SystemParams<T>, t: T) -> T {
    let r = pulses.ratio(t);
    // r is ≥ 0 (possibly +inf) by construction; NaN only from NaN input
    let (pop_a, pop_g) = cpt_populations(r).unwrap_or((T::nan(), T::nan()));
    delta_unchecked(pop_a, pop_g, params)
}

/// Bound-bound detuning `Δ₂ = Δ₁ − δ(t)` a laser would need; diagnostics only.
pub fn delta2<T: Scalar>(pulses: &PulsePair<T>, params: &SystemParams<T>, t: T) -> T {
    params.delta1 - delta_schedule(pulses, params, t)
}

/// All time-dependent controls at `t`.
pub fn drive_at<T: Scalar>(pulses: &PulsePair<T>, params: &SystemParams<T>, t: T) -> Drive<T> {
    Drive::new(
        pulses.rabi(Pulse::FreeBound, t),
        pulses.rabi(Pulse::BoundBound, t),
        delta_schedule(pulses, params, t),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> (SystemParams<f64>, PulsePair<f64>) {
        let p = SystemParams::reference();
        (p, p.pulses())
    }

    #[test]
    fn peak_and_width() {
        let (p, pp) = reference();
        assert_eq!(pp.rabi(Pulse::FreeBound, p.t1), p.omega0);
        assert_relative_eq!(pp.rabi(Pulse::BoundBound, p.t2 + p.tau), p.omega0 / std::f64::consts::E, max_relative = 1e-15);
        let mid = 0.5 * (p.t1 + p.t2);
        assert_relative_eq!(pp.rabi(Pulse::FreeBound, mid) / pp.rabi(Pulse::BoundBound, mid), 1.0, max_relative = 1e-15);
        assert_relative_eq!(pp.ratio(mid), 1.0, max_relative = 1e-15);
        assert!(pp.is_counterintuitive());
    }

    #[test]
    fn ratio_matches_direct_quotient() {
        let (p, pp) = reference();
        for k in 0..20 {
            let t = p.tau * (0.5 * k as f64);
            let direct = pp.rabi(Pulse::FreeBound, t) / pp.rabi(Pulse::BoundBound, t);
            assert_relative_eq!(pp.ratio(t), direct, max_relative = 1e-12);
        }
        assert!(pp.ratio(1e9).is_infinite());
        assert_eq!(pp.with_peak(Pulse::FreeBound, 0.0).ratio(p.t1), 0.0);
    }

    #[test]
    fn delta_limits() {
        let (p, pp) = reference();
        assert_relative_eq!(delta_schedule(&pp, &p, -1e6) * 1e3, 70.348, max_relative = 1e-9);
        assert_relative_eq!(delta_schedule(&pp, &p, 1e6) * 1e3, -33.024, max_relative = 1e-9);
        let free = p.without_collisions();
        for k in 0..10 {
            assert_eq!(delta_schedule(&pp, &free, p.tau * k as f64), 0.0);
        }
    }

    #[test]
    fn delta2_is_delta1_minus_delta() {
        let (p, pp) = reference();
        let t = p.t1;
        assert_relative_eq!(delta2(&pp, &p, t), p.delta1 - delta_schedule(&pp, &p, t), max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn delta_nonincreasing_and_bounded(t in 0.0f64..20000.0, dt in 0.0f64..2000.0) {
            let (p, pp) = reference();
            let d0 = delta_schedule(&pp, &p, t);
            let d1 = delta_schedule(&pp, &p, t + dt);
            prop_assert!(d1 <= d0);
            prop_assert!(d0 <= 0.070348 + 1e-12 && d0 >= -0.033024 - 1e-12);
        }

        #[test]
        fn rabi_in_range(t in -1e5f64..1e5) {
            let (p, pp) = reference();
            for pulse in [Pulse::FreeBound, Pulse::BoundBound] {
                let w = pp.rabi(pulse, t);
                prop_assert!(w >= 0.0 && w <= p.omega0);
            }
        }
    }
}
