use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ControllerConfig, StateSpaceModel, TimeDomain};
use crate::error::{FrfError, Result};
use crate::scalar::Real;
use crate::signals::TimeSeries;

/// Signals and boundary states of one simulation run.
///
/// `y` is the measured output (noise included); `x0`/`x_final` are plant
/// states before the first and after the last stored sample.
#[derive(Debug, Clone)]
pub struct SimulationRecord<T: Real> {
    pub d: TimeSeries<T>,
    pub u: TimeSeries<T>,
    pub y: TimeSeries<T>,
    pub v: TimeSeries<T>,
    pub x0: DVector<T>,
    pub x_final: DVector<T>,
    pub controller_x0: Option<DVector<T>>,
    pub controller_x_final: Option<DVector<T>>,
}

pub(crate) fn same_ts<T: Real>(a: T, b: T) -> bool {
    (a - b).magnitude() <= T::lit(1e-9) * a.magnitude().max(b.magnitude())
}

fn discrete_ts<T: Real>(m: &StateSpaceModel<T>) -> Result<T> {
    match m.time_domain() {
        TimeDomain::Discrete { ts } => Ok(ts),
        TimeDomain::Continuous => Err(FrfError::WrongTimeDomain { expected: "discrete" }),
    }
}

/// `out += m * x` without allocating.
fn mul_add<T: Real>(m: &DMatrix<T>, x: &[T], out: &mut [T]) {
    for j in 0..m.ncols() {
        let xj = x[j];
        if xj == T::zero() {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * xj;
        }
    }
}

/// Open-loop simulation `x(n+1) = A x(n) + B u(n)`, `y(n) = C x(n) + D u(n)`.
pub fn lsim<T: Real>(m: &StateSpaceModel<T>, u: &TimeSeries<T>, x0: &DVector<T>) -> Result<SimulationRecord<T>> {
    let ts = discrete_ts(m)?;
    if !same_ts(ts, u.ts()) {
        return Err(FrfError::Dimension(format!("input ts {} does not match model ts {ts}", u.ts())));
    }
    if u.n_channels() != m.n_inputs() {
        return Err(FrfError::Dimension(format!(
            "{} input channels for a model with {} inputs",
            u.n_channels(),
            m.n_inputs()
        )));
    }
    if x0.len() != m.n_states() {
        return Err(FrfError::Dimension(format!("x0 has {} entries, model has {} states", x0.len(), m.n_states())));
    }
    let n = u.len();
    let ny = m.n_outputs();
    let mut x = x0.as_slice().to_vec();
    let mut next = vec![T::zero(); x.len()];
    let mut y = vec![Vec::with_capacity(n); ny];
    let mut yn = vec![T::zero(); ny];
    for k in 0..n {
        let uk = u.sample(k);
        yn.iter_mut().for_each(|v| *v = T::zero());
        mul_add(m.c(), &x, &mut yn);
        mul_add(m.d(), &uk, &mut yn);
        for (ch, v) in y.iter_mut().zip(&yn) {
            ch.push(*v);
        }
        next.iter_mut().for_each(|v| *v = T::zero());
        mul_add(m.a(), &x, &mut next);
        mul_add(m.b(), &uk, &mut next);
        std::mem::swap(&mut x, &mut next);
    }
    Ok(SimulationRecord {
        d: u.clone(),
        u: u.clone(),
        y: TimeSeries::with_prefix(y, ts, "y")?,
        v: TimeSeries::zeros(ny, n, ts, "v")?,
        x0: x0.clone(),
        x_final: DVector::from_vec(x),
        controller_x0: None,
        controller_x_final: None,
    })
}

/// Closed-loop simulation from zero initial plant and controller state.
///
/// The excitation `d` enters at the plant input: `u = d + K(-(y + v))`, so
/// `K = 0` gives `u = d`. `v` is white Gaussian measurement noise with the
/// given per-output standard deviation.
pub fn simulate_closed_loop<T: Real>(
    m: &StateSpaceModel<T>,
    k: &ControllerConfig<T>,
    d: &TimeSeries<T>,
    noise_std: &[T],
    noise_seed: u64,
) -> Result<SimulationRecord<T>> {
    let x0 = DVector::zeros(m.n_states());
    simulate_closed_loop_from(m, k, d, noise_std, noise_seed, &x0, &k.initial_state())
}

/// [`simulate_closed_loop`] with explicit initial plant and controller states.
pub fn simulate_closed_loop_from<T: Real>(
    m: &StateSpaceModel<T>,
    k: &ControllerConfig<T>,
    d: &TimeSeries<T>,
    noise_std: &[T],
    noise_seed: u64,
    x0: &DVector<T>,
    xk0: &DVector<T>,
) -> Result<SimulationRecord<T>> {
    let ts = discrete_ts(m)?;
    k.check_closed_loop(m)?;
    let nu = m.n_inputs();
    let ny = m.n_outputs();
    if d.n_channels() != nu || !same_ts(ts, d.ts()) {
        return Err(FrfError::Dimension("excitation must have one channel per plant input and the model ts".into()));
    }
    if noise_std.len() != ny || noise_std.iter().any(|s| !(*s >= T::zero())) {
        return Err(FrfError::InvalidArgument("need one non-negative noise std per output".into()));
    }
    let (ak, bk, ck, dk) = k.state_space();
    if x0.len() != m.n_states() || xk0.len() != ak.nrows() {
        return Err(FrfError::Dimension("initial state dimension mismatch".into()));
    }
    let l = loop_gain(m.d(), &dk)?;
    let n = d.len();

    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut v = vec![Vec::with_capacity(n); ny];
    for _ in 0..n {
        for (ch, &s) in v.iter_mut().zip(noise_std) {
            let z: f64 = rng.sample(StandardNormal);
            ch.push(if s == T::zero() { T::zero() } else { s * T::lit(z) });
        }
    }

    let mut x = x0.as_slice().to_vec();
    let mut xk = xk0.as_slice().to_vec();
    let mut x_next = vec![T::zero(); x.len()];
    let mut xk_next = vec![T::zero(); xk.len()];
    let mut u_rec = vec![Vec::with_capacity(n); nu];
    let mut y_rec = vec![Vec::with_capacity(n); ny];
    let mut cx = vec![T::zero(); ny];
    let mut pre = vec![T::zero(); nu];
    let mut u = vec![T::zero(); nu];
    let mut e = vec![T::zero(); ny];
    let mut tmp = vec![T::zero(); ny];
    for t in 0..n {
        // u = L (d + Ck xk - Dk (C x + v)), the algebraic loop solved exactly.
        cx.iter_mut().for_each(|c| *c = T::zero());
        mul_add(m.c(), &x, &mut cx);
        for (i, p) in pre.iter_mut().enumerate() {
            *p = d.channel(i)[t];
        }
        mul_add(&ck, &xk, &mut pre);
        for (i, tv) in tmp.iter_mut().enumerate() {
            *tv = -(cx[i] + v[i][t]);
        }
        mul_add(&dk, &tmp, &mut pre);
        u.iter_mut().for_each(|c| *c = T::zero());
        mul_add(&l, &pre, &mut u);

        for i in 0..ny {
            e[i] = cx[i] + v[i][t];
        }
        mul_add(m.d(), &u, &mut e);
        for i in 0..ny {
            y_rec[i].push(e[i]);
            e[i] = -e[i];
        }
        for i in 0..nu {
            u_rec[i].push(u[i]);
        }
        x_next.iter_mut().for_each(|c| *c = T::zero());
        mul_add(m.a(), &x, &mut x_next);
        mul_add(m.b(), &u, &mut x_next);
        xk_next.iter_mut().for_each(|c| *c = T::zero());
        mul_add(&ak, &xk, &mut xk_next);
        mul_add(&bk, &e, &mut xk_next);
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut xk, &mut xk_next);
    }
    Ok(SimulationRecord {
        d: d.clone(),
        u: TimeSeries::with_prefix(u_rec, ts, "u")?,
        y: TimeSeries::with_prefix(y_rec, ts, "y")?,
        v: TimeSeries::with_prefix(v, ts, "v")?,
        x0: x0.clone(),
        x_final: DVector::from_vec(x),
        controller_x0: Some(xk0.clone()),
        controller_x_final: Some(DVector::from_vec(xk)),
    })
}

/// `(I + Dk D)^{-1}`, the factor resolving the algebraic loop.
pub(crate) fn loop_gain<T: Real>(d: &DMatrix<T>, dk: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = dk.nrows();
    let m = DMatrix::identity(n, n) + dk * d;
    let inv = m.try_inverse().ok_or(FrfError::IllPosedLoop)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(FrfError::IllPosedLoop);
    }
    Ok(inv)
}
