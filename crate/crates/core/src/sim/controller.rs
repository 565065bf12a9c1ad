use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::StateSpaceModel;
use crate::error::{FrfError, Result};
use crate::scalar::{cis, Real};

/// Discrete transfer function in powers of `z^{-1}`:
/// `(num[0] + num[1] z^-1 + ...) / (den[0] + den[1] z^-1 + ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTf<T> {
    pub num: Vec<T>,
    pub den: Vec<T>,
}

impl<T: Real> DiscreteTf<T> {
    pub fn new(num: Vec<T>, den: Vec<T>) -> Self {
        Self { num, den }
    }

    /// `k_p (z - z_z) / (z - z_p)`.
    pub fn lead(kp: T, zero: T, pole: T) -> Self {
        Self::new(vec![kp, -kp * zero], vec![T::one(), -pole])
    }

    pub fn gain(k: T) -> Self {
        Self::new(vec![k], vec![T::one()])
    }

    fn validate(&self, index: usize) -> Result<()> {
        let improper = |reason: &str| FrfError::ImproperController { index, reason: reason.into() };
        if self.num.is_empty() || self.den.is_empty() {
            return Err(improper("empty coefficient list"));
        }
        if self.den[0] == T::zero() {
            return Err(improper("leading denominator coefficient is zero"));
        }
        if self.num.iter().chain(&self.den).any(|v| !v.is_finite()) {
            return Err(improper("non-finite coefficient"));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|v| *v == T::zero())
    }

    /// Evaluates the transfer function at `z = e^{j omega ts}`.
    pub fn frequency_response(&self, omega: T, ts: T) -> Complex<T> {
        let zinv = cis(-omega * ts);
        let poly = |c: &[T]| {
            c.iter().rev().fold(Complex::new(T::zero(), T::zero()), |acc, &v| acc * zinv + Complex::new(v, T::zero()))
        };
        poly(&self.num) / poly(&self.den)
    }

    /// Transposed direct form II realisation `(A, B, C, D)`.
    pub fn state_space(&self) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>, T) {
        let a0 = self.den[0];
        let order = self.num.len().max(self.den.len()) - 1;
        let coef = |v: &[T], i: usize| v.get(i).copied().unwrap_or_else(T::zero) / a0;
        let b0 = coef(&self.num, 0);
        let mut a = DMatrix::zeros(order, order);
        let mut b = DMatrix::zeros(order, 1);
        let mut c = DMatrix::zeros(1, order);
        for i in 0..order {
            a[(i, 0)] = -coef(&self.den, i + 1);
            if i + 1 < order {
                a[(i, i + 1)] = T::one();
            }
            b[(i, 0)] = coef(&self.num, i + 1) - coef(&self.den, i + 1) * b0;
        }
        if order > 0 {
            c[(0, 0)] = T::one();
        }
        (a, b, c, b0)
    }

    /// Filters `e` through the difference equation, zero initial conditions.
    pub fn filter(&self, e: &[T]) -> Vec<T> {
        let a0 = self.den[0];
        let mut out: Vec<T> = Vec::with_capacity(e.len());
        for n in 0..e.len() {
            let mut acc = T::zero();
            for (i, &b) in self.num.iter().enumerate() {
                if n >= i {
                    acc += b * e[n - i];
                }
            }
            for (i, &a) in self.den.iter().enumerate().skip(1) {
                if n >= i {
                    acc -= a * out[n - i];
                }
            }
            out.push(acc / a0);
        }
        out
    }
}

/// Decentralised (diagonal) discrete controller, one loop per plant input.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig<T> {
    loops: Vec<DiscreteTf<T>>,
    ts: T,
}

impl<T: Real> ControllerConfig<T> {
    pub fn new(loops: Vec<DiscreteTf<T>>, ts: T) -> Result<Self> {
        if loops.is_empty() {
            return Err(FrfError::InvalidArgument("controller needs at least one loop".into()));
        }
        if !(ts > T::zero()) {
            return Err(FrfError::InvalidArgument("controller ts must be > 0".into()));
        }
        for (i, l) in loops.iter().enumerate() {
            l.validate(i)?;
        }
        Ok(Self { loops, ts })
    }

    /// Builds the controller and checks that it stabilises `plant`.
    pub fn for_plant(loops: Vec<DiscreteTf<T>>, ts: T, plant: &StateSpaceModel<T>) -> Result<Self> {
        let k = Self::new(loops, ts)?;
        k.check_closed_loop(plant)?;
        Ok(k)
    }

    /// Lead `0.5 (z - 0.9) / (z - 0.5)` on every loop.
    pub fn default_lead(n_loops: usize, ts: T) -> Result<Self> {
        let tf = DiscreteTf::lead(T::lit(0.5), T::lit(0.9), T::lit(0.5));
        Self::new(vec![tf; n_loops], ts)
    }

    /// `K = 0`: the loop is open and `u = d`.
    pub fn zero(n_loops: usize, ts: T) -> Result<Self> {
        Self::new(vec![DiscreteTf::gain(T::zero()); n_loops], ts)
    }

    pub fn loops(&self) -> &[DiscreteTf<T>] {
        &self.loops
    }

    pub fn n_loops(&self) -> usize {
        self.loops.len()
    }

    pub fn ts(&self) -> T {
        self.ts
    }

    /// Diagonal controller frequency response at `omega` rad/s.
    pub fn frequency_response(&self, omega: T) -> DMatrix<Complex<T>> {
        let n = self.loops.len();
        let mut k = DMatrix::from_element(n, n, Complex::new(T::zero(), T::zero()));
        for (i, l) in self.loops.iter().enumerate() {
            k[(i, i)] = l.frequency_response(omega, self.ts);
        }
        k
    }

    /// Block-diagonal state-space realisation of all loops.
    pub fn state_space(&self) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>, DMatrix<T>) {
        let parts: Vec<_> = self.loops.iter().map(|l| l.state_space()).collect();
        let nx: usize = parts.iter().map(|p| p.0.nrows()).sum();
        let n = self.loops.len();
        let mut a = DMatrix::zeros(nx, nx);
        let mut b = DMatrix::zeros(nx, n);
        let mut c = DMatrix::zeros(n, nx);
        let mut d = DMatrix::zeros(n, n);
        let mut off = 0;
        for (i, (pa, pb, pc, pd)) in parts.iter().enumerate() {
            let o = pa.nrows();
            a.view_mut((off, off), (o, o)).copy_from(pa);
            b.view_mut((off, i), (o, 1)).copy_from(pb);
            c.view_mut((i, off), (1, o)).copy_from(pc);
            d[(i, i)] = *pd;
            off += o;
        }
        (a, b, c, d)
    }

    pub fn n_states(&self) -> usize {
        self.state_space().0.nrows()
    }

    /// Verifies dimensions, sampling period and closed-loop stability.
    pub fn check_closed_loop(&self, plant: &StateSpaceModel<T>) -> Result<()> {
        let cl = super::closed_loop_model(plant, self)?;
        let radius = cl.eigenvalues().iter().map(|z| z.re.hypot(z.im)).fold(T::zero(), |a, b| a.max(b));
        if !(radius < T::one()) {
            return Err(FrfError::UnstableLoop { spectral_radius: radius.as_f64() });
        }
        Ok(())
    }

    pub(crate) fn initial_state(&self) -> DVector<T> {
        DVector::zeros(self.n_states())
    }
}
