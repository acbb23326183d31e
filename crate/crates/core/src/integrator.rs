//! Adaptive Dormand–Prince 5(4) integration of the amplitude equations.
//!
//! The error norm is taken over complex moduli of `a`, `b`, `g`, so step
//! selection does not depend on the global phase of the state.

use crate::cpt::cpt_populations;
use crate::error::{IntegrationError, ModelError};
use crate::model::{rhs, Amplitudes, SystemParams};
use crate::pulse::{drive_at, PulsePair, Pulse};
use crate::scalar::{linspace, Scalar};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th order minus embedded 4th order
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// continuous extension
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Step-size controller settings.
#[derive(Clone, Copy, Debug)]
pub struct Dopri5<T> {
    pub reltol: T,
    pub abstol: T,
    pub max_steps: usize,
    pub h_max: Option<T>,
    safety: T,
    fac_min: T,
    fac_max: T,
    beta: T,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Output of [`Dopri5::integrate`].
#[derive(Clone, Debug)]
pub struct Solution<T> {
    /// States at the requested sample times.
    pub samples: Vec<(T, Amplitudes<T>)>,
    pub t_final: T,
    pub y_final: Amplitudes<T>,
    pub stats: Stats,
}

struct Dense<T> {
    t_old: T,
    h: T,
    r: [Amplitudes<T>; 5],
}

impl<T: Scalar> Dense<T> {
    fn eval(&self, t: T) -> Amplitudes<T> {
        let theta = (t - self.t_old) / self.h;
        let theta1 = T::one() - theta;
        self.r[0] + (self.r[1] + (self.r[2] + (self.r[3] + self.r[4] * theta1) * theta) * theta1) * theta
    }
}

impl<T: Scalar> Dopri5<T> {
    pub fn new(reltol: T, abstol: T) -> Self {
        Self {
            reltol,
            abstol,
            max_steps: 50_000_000,
            h_max: None,
            safety: T::lit(0.9),
            fac_min: T::lit(0.2),
            fac_max: T::lit(10.0),
            beta: T::lit(0.04),
        }
    }

    pub fn with_max_steps(mut self, n: usize) -> Self {
        self.max_steps = n;
        self
    }

    pub fn with_h_max(mut self, h: T) -> Self {
        self.h_max = Some(h);
        self
    }

    fn error_norm(&self, err: &Amplitudes<T>, y0: &Amplitudes<T>, y1: &Amplitudes<T>) -> T {
        let e = err.moduli();
        let m0 = y0.moduli();
        let m1 = y1.moduli();
        let mut acc = T::zero();
        for i in 0..3 {
            let sc = self.abstol + self.reltol * m0[i].max(m1[i]);
            let q = e[i] / sc;
            acc = acc + q * q;
        }
        (acc / T::lit(3.0)).sqrt()
    }

    fn initial_step<F>(&self, f: &mut F, t0: T, y0: &Amplitudes<T>, f0: &Amplitudes<T>, span: T) -> Result<T, IntegrationError>
    where
        F: FnMut(T, &Amplitudes<T>) -> Result<Amplitudes<T>, IntegrationError>,
    {
        let d0 = self.error_norm(y0, y0, y0);
        let d1 = self.error_norm(f0, y0, y0);
        let h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
        let h0 = h0.min(span);
        let y1 = *y0 + *f0 * h0;
        let f1 = f(t0 + h0, &y1)?;
        let d2 = self.error_norm(&(f1 - *f0), y0, y0) / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= T::lit(1e-15) {
            (h0 * T::lit(1e-3)).max(T::lit(1e-6))
        } else {
            (T::lit(0.01) / dmax).powf(T::lit(0.2))
        };
        Ok((T::lit(100.0) * h0).min(h1).min(span))
    }

    /// Integrates `dy/dt = f(t, y)` from `(t0, y0)` to `t_end`, reporting the
    /// state at each of `sample_times` (sorted, inside `[t0, t_end]`) by
    /// dense interpolation.
    pub fn integrate<F>(&self, mut f: F, t0: T, y0: Amplitudes<T>, t_end: T, sample_times: &[T]) -> Result<Solution<T>, IntegrationError>
    where
        F: FnMut(T, &Amplitudes<T>) -> Result<Amplitudes<T>, ModelError>,
    {
        if !(t_end > t0) {
            return Err(IntegrationError::Setup(format!("t_end ({t_end}) must exceed t_start ({t0})")));
        }
        if !(self.reltol > T::zero() && self.abstol > T::zero()) {
            return Err(IntegrationError::Setup("tolerances must be positive".into()));
        }
        if sample_times.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(IntegrationError::Setup("sample times must be sorted".into()));
        }
        if sample_times.iter().any(|&s| s < t0 || s > t_end) {
            return Err(IntegrationError::Setup("sample times must lie inside the window".into()));
        }
        if !y0.is_finite() {
            return Err(IntegrationError::Model { t: t0.as_f64(), source: ModelError::NonFinite { what: "initial state" } });
        }

        let coef = |x: f64| T::lit(x);
        let mut stats = Stats::default();
        let mut samples = Vec::with_capacity(sample_times.len());
        let mut next_sample = 0;
        while next_sample < sample_times.len() && sample_times[next_sample] <= t0 {
            samples.push((sample_times[next_sample], y0));
            next_sample += 1;
        }

        let mut eval = |t: T, y: &Amplitudes<T>, stats: &mut Stats| {
            stats.evaluations += 1;
            f(t, y).map_err(|source| IntegrationError::Model { t: t.as_f64(), source })
        };

        let mut t = t0;
        let mut y = y0;
        let mut k0 = eval(t, &y, &mut stats)?;
        let mut h = self.initial_step(&mut |tt, yy| eval(tt, yy, &mut stats), t, &y, &k0, t_end - t0)?;
        if let Some(hm) = self.h_max {
            h = h.min(hm);
        }
        let mut comp = Amplitudes::zero();
        let mut fac_old = T::lit(1e-4);
        let mut last_rejected = false;
        let expo1 = T::lit(0.2) - self.beta * T::lit(0.75);

        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(IntegrationError::TooManySteps { t: t.as_f64() });
            }
            let remaining = t_end - t;
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if h <= T::lit(16.0) * T::epsilon() * t.abs().max(T::one()) {
                return Err(IntegrationError::StepUnderflow { t: t.as_f64(), h: h.as_f64() });
            }

            // stages 2..6, then the 5th order solution; the last stage is
            // evaluated there and reused as the first stage of the next step
            let mut k = [k0; 7];
            for s in 1..6 {
                let mut acc = Amplitudes::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        acc = acc + *kj * coef(A[s][j]);
                    }
                }
                k[s] = eval(t + h * coef(C[s]), &(y + acc * h), &mut stats)?;
            }
            let mut incr = Amplitudes::zero();
            for (j, kj) in k.iter().enumerate().take(6) {
                if A[6][j] != 0.0 {
                    incr = incr + *kj * coef(A[6][j]);
                }
            }
            // compensated update: the increment is added together with the
            // rounding error carried from the previous accepted step
            let delta = incr * h - comp;
            let y_new = y + delta;
            k[6] = eval(t + h, &y_new, &mut stats)?;
            let mut err = Amplitudes::zero();
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    err = err + *kj * coef(E[j]);
                }
            }
            let err = err * h;
            let en = self.error_norm(&err, &y, &y_new);
            if !en.is_finite() {
                return Err(IntegrationError::Model { t: t.as_f64(), source: ModelError::NonFinite { what: "error estimate" } });
            }

            let fac11 = en.powf(expo1);
            let fac = (fac11 / fac_old.powf(self.beta) / self.safety)
                .max(T::one() / self.fac_max)
                .min(T::one() / self.fac_min);
            let mut h_new = h / fac;

            if en <= T::one() {
                fac_old = en.max(T::lit(1e-4));
                stats.accepted += 1;
                let t_new = if last { t_end } else { t + h };

                if next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                    let ydiff = y_new - y;
                    let bspl = k[0] * h - ydiff;
                    let mut r5 = Amplitudes::zero();
                    for (j, kj) in k.iter().enumerate() {
                        if D[j] != 0.0 {
                            r5 = r5 + *kj * coef(D[j]);
                        }
                    }
                    let dense = Dense { t_old: t, h, r: [y, ydiff, bspl, ydiff - k[6] * h - bspl, r5 * h] };
                    while next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                        let ts = sample_times[next_sample];
                        let ys = if ts == t_new { y_new } else { dense.eval(ts) };
                        samples.push((ts, ys));
                        next_sample += 1;
                    }
                }

                comp = (y_new - y) - delta;
                t = t_new;
                y = y_new;
                k0 = k[6];
                if last {
                    break;
                }
                if last_rejected {
                    h_new = h_new.min(h);
                }
                last_rejected = false;
            } else {
                h_new = h / (T::one() / self.fac_min).min(fac11 / self.safety);
                stats.rejected += 1;
                last_rejected = true;
            }
            h = match self.h_max {
                Some(hm) => h_new.min(hm),
                None => h_new,
            };
        }

        Ok(Solution { samples, t_final: t, y_final: y, stats })
    }
}

/// Tolerances and output density for [`evolve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions<T> {
    pub reltol: T,
    pub abstol: T,
    /// Number of uniformly spaced output samples, endpoints included.
    pub samples: usize,
}

impl<T: Scalar> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self { reltol: T::lit(1e-9), abstol: T::lit(1e-12), samples: 2000 }
    }
}

/// One output row of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample<T> {
    pub t: T,
    pub amps: Amplitudes<T>,
    pub omega1: T,
    pub omega2: T,
    pub delta: T,
    pub norm: T,
    pub cpt_pop_a: T,
    pub cpt_pop_g: T,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub samples: Vec<Sample<T>>,
    pub t_end: T,
    /// Conversion efficiency `2|g(t_end)|²`.
    pub eta: T,
    pub stats: Stats,
}

impl<T: Scalar> Trajectory<T> {
    pub fn efficiency(&self) -> Result<T, IntegrationError> {
        efficiency(self)
    }

    pub fn max_pop_b(&self) -> T {
        self.samples.iter().map(|s| s.amps.pop_b()).fold(T::zero(), T::max)
    }
}

/// `η = 2|g|²` at the last sample.
pub fn efficiency<T: Scalar>(traj: &Trajectory<T>) -> Result<T, IntegrationError> {
    traj.samples
        .last()
        .map(|s| T::lit(2.0) * s.amps.pop_g())
        .ok_or_else(|| IntegrationError::Setup("empty trajectory".into()))
}

/// Default window `[0, t₁ + 4τ]`: both pulses are below 10⁻⁵Ω₀ at the end.
pub fn default_window<T: Scalar>(params: &SystemParams<T>) -> (T, T) {
    (T::zero(), params.t1.max(params.t2) + T::lit(4.0) * params.tau)
}

/// Integrates the driven equations with the Gaussian pulses and the
/// dark-state-tracking δ(t).
pub fn evolve<T: Scalar>(
    params: &SystemParams<T>,
    pulses: &PulsePair<T>,
    initial: Amplitudes<T>,
    t_start: T,
    t_end: T,
    opts: &EvolveOptions<T>,
) -> Result<Trajectory<T>, IntegrationError> {
    params.validate()?;
    if opts.samples < 2 {
        return Err(IntegrationError::Setup("need at least two output samples".into()));
    }
    if initial.norm() > T::one() + T::lit(1e-12) {
        return Err(IntegrationError::Setup(format!("initial norm {} exceeds 1", initial.norm())));
    }
    let times = linspace(t_start, t_end, opts.samples);
    let solver = Dopri5::new(opts.reltol, opts.abstol);
    let sol = solver.integrate(
        |t, y| rhs(y, params, &drive_at(pulses, params, t)),
        t_start,
        initial,
        t_end,
        &times,
    )?;

    let samples = sol
        .samples
        .into_iter()
        .map(|(t, amps)| {
            let drive = drive_at(pulses, params, t);
            let (cpt_pop_a, cpt_pop_g) = cpt_populations(pulses.ratio(t)).unwrap_or((T::nan(), T::nan()));
            Sample {
                t,
                amps,
                omega1: pulses.rabi(Pulse::FreeBound, t),
                omega2: pulses.rabi(Pulse::BoundBound, t),
                delta: drive.delta,
                norm: amps.norm(),
                cpt_pop_a,
                cpt_pop_g,
            }
        })
        .collect::<Vec<_>>();
    let eta = T::lit(2.0) * sol.y_final.pop_g();
    Ok(Trajectory { samples, t_end: sol.t_final, eta, stats: sol.stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Drive;
    use approx::assert_relative_eq;
    use num_complex::Complex;

    #[test]
    fn harmonic_rotation_matches_exact_solution() {
        // a' = −iωa has a(t) = e^{−iωt}
        let w = 1.7;
        let solver = Dopri5::new(1e-10, 1e-13);
        let times = linspace(0.0, 10.0, 101);
        let sol = solver
            .integrate(
                |_, y: &Amplitudes<f64>| Ok(Amplitudes::new(y.a * Complex::new(0.0, -w), Amplitudes::zero().b, Amplitudes::zero().g)),
                0.0,
                Amplitudes::atomic(),
                10.0,
                &times,
            )
            .unwrap();
        assert_eq!(sol.samples.len(), 101);
        for (t, y) in &sol.samples {
            let exact = Complex::from_polar(1.0, -w * t);
            assert!((y.a - exact).norm() < 1e-8, "t = {t}");
        }
        assert_eq!(sol.t_final, 10.0);
    }

    #[test]
    fn decay_matches_exponential() {
        let mut p = SystemParams::<f64>::reference().without_collisions();
        p.gamma_b = 0.5;
        p.delta1 = 0.2;
        let solver = Dopri5::new(1e-10, 1e-13);
        let b0 = Amplitudes::new(Complex::new(0.0, 0.0), Complex::new(1.0, 0.0), Complex::new(0.0, 0.0));
        let times = linspace(0.0, 8.0, 17);
        let sol = solver.integrate(|_, y| rhs(y, &p, &Drive::new(0.0, 0.0, 0.0)), 0.0, b0, 8.0, &times).unwrap();
        for (t, y) in &sol.samples {
            assert_relative_eq!(y.pop_b(), (-p.gamma_b * t).exp(), max_relative = 1e-8);
        }
    }

    #[test]
    fn rejects_bad_setup() {
        let solver = Dopri5::new(1e-8, 1e-10);
        let f = |_: f64, y: &Amplitudes<f64>| Ok(*y);
        assert!(matches!(solver.integrate(f, 1.0, Amplitudes::atomic(), 1.0, &[]), Err(IntegrationError::Setup(_))));
        assert!(solver.integrate(f, 0.0, Amplitudes::atomic(), 1.0, &[0.5, 0.2]).is_err());
        assert!(solver.integrate(f, 0.0, Amplitudes::atomic(), 1.0, &[2.0]).is_err());
        assert!(Dopri5::new(0.0, 1e-10).integrate(f, 0.0, Amplitudes::atomic(), 1.0, &[]).is_err());
    }

    #[test]
    fn step_budget_failure_reports_time() {
        let solver = Dopri5::new(1e-12, 1e-14).with_max_steps(10);
        let f = |_: f64, y: &Amplitudes<f64>| Ok(Amplitudes::new(y.a * Complex::new(0.0, -50.0), y.b, y.g));
        let err = solver.integrate(f, 0.0, Amplitudes::atomic(), 100.0, &[]).unwrap_err();
        assert!(matches!(err, IntegrationError::TooManySteps { .. }));
        assert!(err.failure_time().unwrap() > 0.0);
    }

    #[test]
    fn blow_up_surfaces_as_error() {
        // y' = y² style finite-time blow-up on |a|
        let solver = Dopri5::new(1e-8, 1e-10);
        let f = |_: f64, y: &Amplitudes<f64>| Ok(Amplitudes::new(y.a * y.a, y.b, y.g));
        let err = solver.integrate(f, 0.0, Amplitudes::atomic(), 2.0, &[]).unwrap_err();
        assert!(err.failure_time().unwrap() <= 1.0 + 1e-6, "{err}");
    }

    #[test]
    fn efficiency_of_empty_and_full_trajectories() {
        let mut traj = Trajectory::<f64> { samples: vec![], t_end: 0.0, eta: 0.0, stats: Stats::default() };
        assert!(efficiency(&traj).is_err());
        let mk = |pop_g: f64| Sample {
            t: 1.0,
            amps: Amplitudes::new(Complex::new(0.0, 0.0), Complex::new(0.0, 0.0), Complex::new(pop_g.sqrt(), 0.0)),
            omega1: 0.0,
            omega2: 0.0,
            delta: 0.0,
            norm: 2.0 * pop_g,
            cpt_pop_a: 0.0,
            cpt_pop_g: 0.5,
        };
        traj.samples.push(mk(0.46));
        assert_relative_eq!(efficiency(&traj).unwrap(), 0.92, max_relative = 1e-14);
        traj.samples.push(mk(0.0));
        assert_eq!(efficiency(&traj).unwrap(), 0.0);
        traj.samples.push(mk(0.5));
        assert_relative_eq!(efficiency(&traj).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn evolve_rejects_overfull_initial_state() {
        let p = SystemParams::<f64>::reference();
        let init = Amplitudes::atomic() * 1.1;
        assert!(evolve(&p, &p.pulses(), init, 0.0, 10.0, &EvolveOptions::default()).is_err());
    }
}
