//! Eigenvalues of small dense real matrices.
//!
//! Balancing, reduction to upper Hessenberg form by stabilized elementary
//! similarity transforms, then Francis double-shift QR with exceptional
//! shifts. The exceptional shifts matter here: stability Jacobians always
//! carry a defective zero eigenvalue (gauge mode plus its norm partner) on
//! which plain shifted QR can stall.

use nalgebra::SMatrix;
use num_complex::Complex;

use crate::scalar::Scalar;

const MAX_ITERATIONS: usize = 60;

/// 1-based square work array.
struct Work<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Work<T> {
    fn from_matrix<const N: usize>(m: &SMatrix<T, N, N>) -> Self {
        let mut w = Work { n: N, data: vec![T::zero(); (N + 1) * (N + 1)] };
        for i in 0..N {
            for j in 0..N {
                *w.at(i + 1, j + 1) = m[(i, j)];
            }
        }
        w
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.data[i * (self.n + 1) + j]
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> T {
        self.data[i * (self.n + 1) + j]
    }

    fn balance(&mut self) {
        let radix = T::lit(2.0);
        let sqrdx = radix * radix;
        let n = self.n;
        let mut done = false;
        while !done {
            done = true;
            for i in 1..=n {
                let mut r = T::zero();
                let mut c = T::zero();
                for j in (1..=n).filter(|&j| j != i) {
                    c = c + self.get(j, i).abs();
                    r = r + self.get(i, j).abs();
                }
                if c != T::zero() && r != T::zero() {
                    let mut g = r / radix;
                    let mut f = T::one();
                    let s = c + r;
                    while c < g {
                        f = f * radix;
                        c = c * sqrdx;
                    }
                    g = r * radix;
                    while c > g {
                        f = f / radix;
                        c = c / sqrdx;
                    }
                    if (c + r) / f < T::lit(0.95) * s {
                        done = false;
                        let g = T::one() / f;
                        for j in 1..=n {
                            *self.at(i, j) = self.get(i, j) * g;
                        }
                        for j in 1..=n {
                            *self.at(j, i) = self.get(j, i) * f;
                        }
                    }
                }
            }
        }
    }

    fn to_hessenberg(&mut self) {
        let n = self.n;
        for m in 2..n {
            let mut x = T::zero();
            let mut pivot = m;
            for j in m..=n {
                if self.get(j, m - 1).abs() > x.abs() {
                    x = self.get(j, m - 1);
                    pivot = j;
                }
            }
            if pivot != m {
                for j in (m - 1)..=n {
                    let tmp = self.get(pivot, j);
                    *self.at(pivot, j) = self.get(m, j);
                    *self.at(m, j) = tmp;
                }
                for j in 1..=n {
                    let tmp = self.get(j, pivot);
                    *self.at(j, pivot) = self.get(j, m);
                    *self.at(j, m) = tmp;
                }
            }
            if x != T::zero() {
                for i in (m + 1)..=n {
                    let mut y = self.get(i, m - 1);
                    if y != T::zero() {
                        y = y / x;
                        *self.at(i, m - 1) = y;
                        for j in m..=n {
                            *self.at(i, j) = self.get(i, j) - y * self.get(m, j);
                        }
                        for j in 1..=n {
                            *self.at(j, m) = self.get(j, m) + y * self.get(j, i);
                        }
                    }
                }
            }
        }
        for i in 1..=n {
            for j in 1..i.saturating_sub(1) {
                *self.at(i, j) = T::zero();
            }
        }
    }

    /// Francis QR on the Hessenberg matrix; `None` if a block fails to
    /// deflate within the iteration limit.
    fn hessenberg_eigenvalues(&mut self) -> Option<Vec<Complex<T>>> {
        let n = self.n;
        let mut wr = vec![T::zero(); n + 1];
        let mut wi = vec![T::zero(); n + 1];
        let mut anorm = T::zero();
        for i in 1..=n {
            for j in i.saturating_sub(1).max(1)..=n {
                anorm = anorm + self.get(i, j).abs();
            }
        }
        let sign = |a: T, b: T| if b >= T::zero() { a.abs() } else { -a.abs() };
        // shift-polynomial coefficients carried between the deflation and sweep blocks
        #[allow(unused_assignments)]
        let (mut p, mut q, mut r) = (T::zero(), T::zero(), T::zero());
        let mut nn = n;
        let mut shift = T::zero();
        while nn >= 1 {
            let mut its = 0;
            loop {
                let mut l = nn;
                while l >= 2 {
                    let mut s = self.get(l - 1, l - 1).abs() + self.get(l, l).abs();
                    if s == T::zero() {
                        s = anorm;
                    }
                    if self.get(l, l - 1).abs() + s == s {
                        *self.at(l, l - 1) = T::zero();
                        break;
                    }
                    l -= 1;
                }
                let mut x = self.get(nn, nn);
                if l == nn {
                    wr[nn] = x + shift;
                    wi[nn] = T::zero();
                    nn -= 1;
                } else {
                    let mut y = self.get(nn - 1, nn - 1);
                    let mut w = self.get(nn, nn - 1) * self.get(nn - 1, nn);
                    if l == nn - 1 {
                        p = T::lit(0.5) * (y - x);
                        q = p * p + w;
                        let mut z = q.abs().sqrt();
                        x = x + shift;
                        if q >= T::zero() {
                            z = p + sign(z, p);
                            wr[nn - 1] = x + z;
                            wr[nn] = x + z;
                            if z != T::zero() {
                                wr[nn] = x - w / z;
                            }
                            wi[nn - 1] = T::zero();
                            wi[nn] = T::zero();
                        } else {
                            wr[nn - 1] = x + p;
                            wr[nn] = x + p;
                            wi[nn - 1] = -z;
                            wi[nn] = z;
                        }
                        nn = nn.saturating_sub(2);
                    } else {
                        if its == MAX_ITERATIONS {
                            return None;
                        }
                        if its % 10 == 0 && its > 0 {
                            // exceptional shift
                            shift = shift + x;
                            for i in 1..=nn {
                                *self.at(i, i) = self.get(i, i) - x;
                            }
                            let s = self.get(nn, nn - 1).abs() + self.get(nn - 1, nn - 2).abs();
                            x = T::lit(0.75) * s;
                            y = x;
                            w = T::lit(-0.4375) * s * s;
                        }
                        its += 1;
                        let mut m = nn - 2;
                        loop {
                            let z = self.get(m, m);
                            let rr = x - z;
                            let ss = y - z;
                            p = (rr * ss - w) / self.get(m + 1, m) + self.get(m, m + 1);
                            q = self.get(m + 1, m + 1) - z - rr - ss;
                            r = self.get(m + 2, m + 1);
                            let s = p.abs() + q.abs() + r.abs();
                            p = p / s;
                            q = q / s;
                            r = r / s;
                            if m == l {
                                break;
                            }
                            let u = self.get(m, m - 1).abs() * (q.abs() + r.abs());
                            let v = p.abs() * (self.get(m - 1, m - 1).abs() + z.abs() + self.get(m + 1, m + 1).abs());
                            if u + v == v {
                                break;
                            }
                            m -= 1;
                        }
                        for i in (m + 2)..=nn {
                            *self.at(i, i - 2) = T::zero();
                            if i != m + 2 {
                                *self.at(i, i - 3) = T::zero();
                            }
                        }
                        let mut k = m;
                        while k + 1 <= nn {
                            if k != m {
                                p = self.get(k, k - 1);
                                q = self.get(k + 1, k - 1);
                                r = T::zero();
                                if k != nn - 1 {
                                    r = self.get(k + 2, k - 1);
                                }
                                x = p.abs() + q.abs() + r.abs();
                                if x != T::zero() {
                                    p = p / x;
                                    q = q / x;
                                    r = r / x;
                                }
                            }
                            let s = sign((p * p + q * q + r * r).sqrt(), p);
                            if s != T::zero() {
                                if k == m {
                                    if l != m {
                                        *self.at(k, k - 1) = -self.get(k, k - 1);
                                    }
                                } else {
                                    *self.at(k, k - 1) = -s * x;
                                }
                                p = p + s;
                                x = p / s;
                                y = q / s;
                                let z = r / s;
                                q = q / p;
                                r = r / p;
                                for j in k..=nn {
                                    let mut pp = self.get(k, j) + q * self.get(k + 1, j);
                                    if k != nn - 1 {
                                        pp = pp + r * self.get(k + 2, j);
                                        *self.at(k + 2, j) = self.get(k + 2, j) - pp * z;
                                    }
                                    *self.at(k + 1, j) = self.get(k + 1, j) - pp * y;
                                    *self.at(k, j) = self.get(k, j) - pp * x;
                                }
                                let mmin = nn.min(k + 3);
                                for i in l..=mmin {
                                    let mut pp = x * self.get(i, k) + y * self.get(i, k + 1);
                                    if k != nn - 1 {
                                        pp = pp + z * self.get(i, k + 2);
                                        *self.at(i, k + 2) = self.get(i, k + 2) - pp * r;
                                    }
                                    *self.at(i, k + 1) = self.get(i, k + 1) - pp * q;
                                    *self.at(i, k) = self.get(i, k) - pp;
                                }
                            }
                            k += 1;
                        }
                    }
                }
                if nn < 2 || l + 1 >= nn {
                    break;
                }
            }
        }
        Some((1..=n).map(|i| Complex::new(wr[i], wi[i])).collect())
    }
}

/// All eigenvalues of `m`, complex pairs adjacent. `None` if the QR
/// iteration does not converge or the input is not finite.
pub fn eigenvalues<T: Scalar, const N: usize>(m: &SMatrix<T, N, N>) -> Option<Vec<Complex<T>>> {
    if m.iter().any(|x| !x.is_finite()) {
        return None;
    }
    if N == 0 {
        return Some(Vec::new());
    }
    let mut w = Work::from_matrix(m);
    w.balance();
    w.to_hessenberg();
    w.hessenberg_eigenvalues()
}
