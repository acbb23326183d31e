//! Reference computations written independently of the library, used as
//! oracles by the integration tests.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One point of the stability plane with all drives held fixed.
#[derive(Clone, Copy, Debug)]
pub struct FrozenCell {
    pub lambda_aa: f64,
    pub lambda_ag: f64,
    pub lambda_gg: f64,
    pub delta1: f64,
    pub omega1: f64,
    pub omega2: f64,
}

/// Dark-state populations from `r = Ω₁/Ω₂` by solving `2r²x² + x − 1 = 0`
/// for the positive root with the ordinary quadratic formula.
pub fn dark_populations(r: f64) -> (f64, f64) {
    let pa = if r == 0.0 { 1.0 } else { (-1.0 + (1.0 + 8.0 * r * r).sqrt()) / (4.0 * r * r) };
    (pa, 0.5 * (1.0 - pa))
}

impl FrozenCell {
    /// Two-photon detuning that makes the dark state stationary, obtained by
    /// requiring `g/a²` to be time independent in the equations of motion.
    pub fn resonant_delta(&self) -> f64 {
        let (pa, pg) = dark_populations(self.omega1 / self.omega2);
        let mu_a = self.lambda_aa * pa + self.lambda_ag * pg;
        let mu_g = self.lambda_ag * pa + self.lambda_gg * pg;
        2.0 * mu_a - mu_g
    }

    fn deriv(&self, delta: f64, y: [Complex64; 3]) -> [Complex64; 3] {
        let i = Complex64::i();
        let [a, b, g] = y;
        let (na, ng) = (a.norm_sqr(), g.norm_sqr());
        [
            -i * ((self.lambda_aa * na + self.lambda_ag * ng) * a - self.omega1 * a.conj() * b),
            -i * (self.delta1 * b - 0.5 * (self.omega1 * a * a + self.omega2 * g)),
            -i * ((self.lambda_ag * na + self.lambda_gg * ng) * g + delta * g - 0.5 * self.omega2 * b),
        ]
    }

    /// Growth of a 10⁻⁶ random perturbation of the dark state under frozen,
    /// lossless driving, integrated with classical RK4.
    ///
    /// The deviation is measured on populations, which ignores the neutral
    /// phase drift of the condensate. Returns the ratio of the largest
    /// deviation in the last quarter of the run to the largest in its first
    /// tenth.
    pub fn perturbation_growth(&self, horizon: f64, dt: f64, seed: u64) -> f64 {
        let (pa, pg) = dark_populations(self.omega1 / self.omega2);
        let r = self.omega1 / self.omega2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kick = || Complex64::new(rng.random_range(-1e-6..1e-6), rng.random_range(-1e-6..1e-6));
        let mut y = [Complex64::new(pa.sqrt(), 0.0) + kick(), kick(), Complex64::new(-r * pa, 0.0) + kick()];
        let delta = self.resonant_delta();

        let steps = (horizon / dt).ceil() as usize;
        let (mut early, mut late) = (0.0f64, 0.0f64);
        for n in 1..=steps {
            let add = |y: [Complex64; 3], k: [Complex64; 3], s: f64| [y[0] + k[0] * s, y[1] + k[1] * s, y[2] + k[2] * s];
            let k1 = self.deriv(delta, y);
            let k2 = self.deriv(delta, add(y, k1, 0.5 * dt));
            let k3 = self.deriv(delta, add(y, k2, 0.5 * dt));
            let k4 = self.deriv(delta, add(y, k3, dt));
            for c in 0..3 {
                y[c] += (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]) * (dt / 6.0);
            }
            let dev = (y[0].norm_sqr() - pa).abs() + y[1].norm_sqr() + (y[2].norm_sqr() - pg).abs();
            if !dev.is_finite() {
                return f64::INFINITY;
            }
            if 10 * n <= steps {
                early = early.max(dev);
            } else if 4 * n >= 3 * steps {
                late = late.max(dev);
            }
        }
        late / early
    }
}
