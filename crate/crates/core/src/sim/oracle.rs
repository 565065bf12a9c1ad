use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use super::simulate::{loop_gain, same_ts};
use super::{ControllerConfig, StateSpaceModel, TimeDomain};
use crate::error::{FrfError, Result};
use crate::estimators::{BinDefect, EstimatorTag, FrfEstimate};
use crate::scalar::{cis, cnan, Real};

fn to_complex<T: Real>(m: &DMatrix<T>) -> DMatrix<Complex<T>> {
    m.map(|v| Complex::new(v, T::zero()))
}

/// `C (Omega I - A)^{-1} B + D` with `Omega = j omega` or `e^{j omega ts}`.
///
/// `None` when `Omega I - A` is singular.
pub fn frequency_response<T: Real>(m: &StateSpaceModel<T>, omega: T) -> Option<DMatrix<Complex<T>>> {
    let z = match m.time_domain() {
        TimeDomain::Continuous => Complex::new(T::zero(), omega),
        TimeDomain::Discrete { ts } => cis(omega * ts),
    };
    let n = m.n_states();
    let mut shifted = -to_complex(m.a());
    for i in 0..n {
        shifted[(i, i)] += z;
    }
    let x = shifted.lu().solve(&to_complex(m.b()))?;
    let g = to_complex(m.c()) * x + to_complex(m.d());
    g.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(g)
}

/// Exact frequency response of `m` at each frequency (rad/s), tagged as an oracle.
pub fn true_frf<T: Real>(m: &StateSpaceModel<T>, bin_frequencies: &[T]) -> FrfEstimate<T> {
    let (ny, nu) = (m.n_outputs(), m.n_inputs());
    let mut defects = Vec::new();
    let g = bin_frequencies
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            frequency_response(m, w).unwrap_or_else(|| {
                defects.push(BinDefect::new(k, "singular (Omega I - A)"));
                DMatrix::from_element(ny, nu, cnan())
            })
        })
        .collect();
    FrfEstimate {
        g,
        variance: Some(vec![DMatrix::zeros(ny, nu); bin_frequencies.len()]),
        transient: None,
        bin_frequencies: bin_frequencies.to_vec(),
        tag: EstimatorTag::new("oracle").note("analytic model response, zero variance"),
        defects,
        condition: None,
    }
}

/// Transient term `C (I - z^{-1} A)^{-1} (x0 - xN) / sqrt(N)` at every
/// one-sided bin of a window of `window_length` samples.
pub fn transient_oracle<T: Real>(
    m: &StateSpaceModel<T>,
    x0: &DVector<T>,
    x_final: &DVector<T>,
    window_length: usize,
) -> Result<Vec<DVector<Complex<T>>>> {
    if m.ts().is_none() {
        return Err(FrfError::WrongTimeDomain { expected: "discrete" });
    }
    if !m.is_stable() {
        return Err(FrfError::InvalidArgument("transient oracle needs a stable model".into()));
    }
    if x0.len() != m.n_states() || x_final.len() != m.n_states() || window_length == 0 {
        return Err(FrfError::Dimension("state or window size mismatch".into()));
    }
    let n = m.n_states();
    let a = to_complex(m.a());
    let c = to_complex(m.c());
    let delta: DVector<Complex<T>> = (x0 - x_final).map(|v| Complex::new(v, T::zero()));
    let scale = T::one() / T::from_usize_lossy(window_length).sqrt();
    let n_bins = window_length / 2 + 1;
    (0..n_bins)
        .map(|k| {
            let phase = T::two_pi() * T::from_usize_lossy(k) / T::from_usize_lossy(window_length);
            let zinv = cis(-phase);
            let lhs = DMatrix::identity(n, n) - a.map(|v| v * zinv);
            let x = lhs
                .lu()
                .solve(&delta)
                .ok_or_else(|| FrfError::InvalidArgument(format!("singular transient system at bin {k}")))?;
            Ok((&c * x).map(|v| v.scale(scale)))
        })
        .collect()
}

/// Input sensitivity `S = (I + K G)^{-1}` and process sensitivity `G S`.
pub fn input_sensitivity<T: Real>(
    g: &DMatrix<Complex<T>>,
    k: &DMatrix<Complex<T>>,
) -> Option<(DMatrix<Complex<T>>, DMatrix<Complex<T>>)> {
    let n = k.nrows();
    let one = Complex::new(T::one(), T::zero());
    let s = (DMatrix::from_diagonal_element(n, n, one) + k * g).try_inverse()?;
    let gs = g * &s;
    Some((s, gs))
}

/// Plant seen by loop `i` when all other loops of the diagonal controller are
/// closed: `G_ii - G_io K_o (I + G_oo K_o)^{-1} G_oi`.
pub fn equivalent_plant_oracle<T: Real>(
    g: &DMatrix<Complex<T>>,
    k: &DMatrix<Complex<T>>,
    i: usize,
) -> Option<Complex<T>> {
    let n = g.nrows();
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    if others.is_empty() {
        return Some(g[(i, i)]);
    }
    let g_io = g.select_rows(&[i]).select_columns(&others);
    let g_oi = g.select_rows(&others).select_columns(&[i]);
    let g_oo = g.select_rows(&others).select_columns(&others);
    let k_o = k.select_rows(&others).select_columns(&others);
    let one = Complex::new(T::one(), T::zero());
    let inner = (DMatrix::from_diagonal_element(others.len(), others.len(), one) + &g_oo * &k_o).try_inverse()?;
    Some(g[(i, i)] - (g_io * k_o * inner * g_oi)[(0, 0)])
}

/// Closed loop of a discrete plant with a diagonal controller as one model.
///
/// Inputs are `[d; v]` (excitation at the plant input, measurement noise),
/// outputs are `[y + v; u]`, the state is `[x; x_controller]`.
pub fn closed_loop_model<T: Real>(plant: &StateSpaceModel<T>, k: &ControllerConfig<T>) -> Result<StateSpaceModel<T>> {
    let ts = plant.ts().ok_or(FrfError::WrongTimeDomain { expected: "discrete" })?;
    let (nu, ny) = (plant.n_inputs(), plant.n_outputs());
    if k.n_loops() != nu || nu != ny {
        return Err(FrfError::Dimension(format!("{} controller loops for a {ny}x{nu} plant", k.n_loops())));
    }
    if !same_ts(ts, k.ts()) {
        return Err(FrfError::Dimension("controller and plant sampling periods differ".into()));
    }
    let (a, b, c, d) = (plant.a(), plant.b(), plant.c(), plant.d());
    let (ak, bk, ck, dk) = k.state_space();
    let l = loop_gain(d, &dk)?;
    let nx = plant.n_states();
    let nk = ak.nrows();
    let eye_y = DMatrix::<T>::identity(ny, ny);

    // u = L d - L Dk v - L Dk C x + L Ck xk
    let u_x = -(&l * &dk * c);
    let u_k = &l * &ck;
    let u_d = l.clone();
    let u_v = -(&l * &dk);
    // y_m = C x + D u + v
    let y_x = c + d * &u_x;
    let y_k = d * &u_k;
    let y_d = d * &u_d;
    let y_v = &eye_y + d * &u_v;

    let mut acl = DMatrix::zeros(nx + nk, nx + nk);
    acl.view_mut((0, 0), (nx, nx)).copy_from(&(a + b * &u_x));
    acl.view_mut((0, nx), (nx, nk)).copy_from(&(b * &u_k));
    acl.view_mut((nx, 0), (nk, nx)).copy_from(&(-(&bk * &y_x)));
    acl.view_mut((nx, nx), (nk, nk)).copy_from(&(&ak - &bk * &y_k));

    let mut bcl = DMatrix::zeros(nx + nk, nu + ny);
    bcl.view_mut((0, 0), (nx, nu)).copy_from(&(b * &u_d));
    bcl.view_mut((0, nu), (nx, ny)).copy_from(&(b * &u_v));
    bcl.view_mut((nx, 0), (nk, nu)).copy_from(&(-(&bk * &y_d)));
    bcl.view_mut((nx, nu), (nk, ny)).copy_from(&(-(&bk * &y_v)));

    let mut ccl = DMatrix::zeros(ny + nu, nx + nk);
    ccl.view_mut((0, 0), (ny, nx)).copy_from(&y_x);
    ccl.view_mut((0, nx), (ny, nk)).copy_from(&y_k);
    ccl.view_mut((ny, 0), (nu, nx)).copy_from(&u_x);
    ccl.view_mut((ny, nx), (nu, nk)).copy_from(&u_k);

    let mut dcl = DMatrix::zeros(ny + nu, nu + ny);
    dcl.view_mut((0, 0), (ny, nu)).copy_from(&y_d);
    dcl.view_mut((0, nu), (ny, ny)).copy_from(&y_v);
    dcl.view_mut((ny, 0), (nu, nu)).copy_from(&u_d);
    dcl.view_mut((ny, nu), (nu, ny)).copy_from(&u_v);

    StateSpaceModel::new(acl, bcl, ccl, dcl, TimeDomain::Discrete { ts })
}
