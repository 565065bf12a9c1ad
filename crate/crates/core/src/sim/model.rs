use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{FrfError, Result};
use crate::scalar::{cabs, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeDomain<T> {
    Continuous,
    Discrete { ts: T },
}

/// Linear time-invariant model `(A, B, C, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel<T: Real> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DMatrix<T>,
    d: DMatrix<T>,
    time_domain: TimeDomain<T>,
}

impl<T: Real> StateSpaceModel<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>, time_domain: TimeDomain<T>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(FrfError::Dimension("A must be square and non-empty".into()));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(FrfError::Dimension(format!(
                "B is {}x{}, C is {}x{} for {n} states",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(FrfError::Dimension("D must be n_y x n_u".into()));
        }
        if let TimeDomain::Discrete { ts } = time_domain {
            if !(ts > T::zero()) {
                return Err(FrfError::InvalidArgument("discrete models need ts > 0".into()));
            }
        }
        if [&a, &b, &c, &d].iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(FrfError::InvalidArgument("model matrices must be finite".into()));
        }
        Ok(Self { a, b, c, d, time_domain })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<T> {
        &self.d
    }
    pub fn time_domain(&self) -> TimeDomain<T> {
        self.time_domain
    }
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn ts(&self) -> Option<T> {
        match self.time_domain {
            TimeDomain::Discrete { ts } => Some(ts),
            TimeDomain::Continuous => None,
        }
    }

    pub fn eigenvalues(&self) -> Vec<Complex<T>> {
        self.a.clone().complex_eigenvalues().iter().copied().collect()
    }

    /// Continuous: all real parts < 0. Discrete: all magnitudes < 1.
    pub fn is_stable(&self) -> bool {
        let eig = self.eigenvalues();
        match self.time_domain {
            TimeDomain::Continuous => eig.iter().all(|z| z.re < T::zero()),
            TimeDomain::Discrete { .. } => eig.iter().all(|&z| cabs(z) < T::one()),
        }
    }

    /// Model restricted to the given inputs and outputs; the state is kept.
    pub fn subsystem(&self, inputs: &[usize], outputs: &[usize]) -> Result<Self> {
        if inputs.iter().any(|&i| i >= self.n_inputs()) || outputs.iter().any(|&o| o >= self.n_outputs()) {
            return Err(FrfError::Dimension("subsystem channel out of range".into()));
        }
        let b = self.b.select_columns(inputs);
        let c = self.c.select_rows(outputs);
        let d = self.d.select_rows(outputs).select_columns(inputs);
        Self::new(self.a.clone(), b, c, d, self.time_domain)
    }

    /// JSON document with row-major `"A"`, `"B"`, `"C"`, `"D"` and `"ts"` (null when continuous).
    pub fn to_json(&self) -> serde_json::Value {
        let doc = ModelDoc {
            a: rows(&self.a),
            b: rows(&self.b),
            c: rows(&self.c),
            d: rows(&self.d),
            ts: self.ts().map(|t| t.as_f64()),
        };
        serde_json::to_value(doc).expect("model document serialises")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_value(value.clone())?;
        let a = matrix(&doc.a, "A", None)?;
        let n = a.nrows();
        let b = matrix(&doc.b, "B", Some(n))?;
        let c = matrix(&doc.c, "C", None)?;
        let d = match &doc.d {
            rows if rows.is_empty() => DMatrix::zeros(c.nrows(), b.ncols()),
            rows => matrix(rows, "D", Some(c.nrows()))?,
        };
        let td = match doc.ts {
            None => TimeDomain::Continuous,
            Some(ts) => TimeDomain::Discrete { ts: T::lit(ts) },
        };
        Self::new(a, b, c, d, td)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(text)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D", default)]
    d: Vec<Vec<f64>>,
    ts: Option<f64>,
}

fn rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

fn matrix<T: Real>(rows: &[Vec<f64>], name: &str, expect_rows: Option<usize>) -> Result<DMatrix<T>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if nr == 0 || nc == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(FrfError::Parse(format!("matrix {name} must be a non-empty rectangular array")));
    }
    if let Some(e) = expect_rows {
        if e != nr {
            return Err(FrfError::Parse(format!("matrix {name} has {nr} rows, expected {e}")));
        }
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| T::lit(rows[i][j])))
}

/// Two DC motors coupled by a flexible shaft, modelled as two masses joined
/// to each other and to the world by spring-dampers. States are
/// `[angle1, rate1, angle2, rate2]`, inputs are amplifier voltages, outputs
/// are the encoder angles.
pub fn two_mass_plant<T: Real>() -> StateSpaceModel<T> {
    let l = |v: f64| T::lit(v);
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        l(0.0),    l(1.0),  l(0.0),    l(0.0),
        l(-173.0), l(-8.0), l(166.0),  l(1.33),
        l(0.0),    l(0.0),  l(0.0),    l(1.0),
        l(166.0),  l(1.33), l(-173.0), l(-8.0),
    ]);
    #[rustfmt::skip]
    let b = DMatrix::from_row_slice(4, 2, &[
        l(0.0),  l(0.0),
        l(53.0), l(0.0),
        l(0.0),  l(0.0),
        l(0.0),  l(53.0),
    ]);
    #[rustfmt::skip]
    let c = DMatrix::from_row_slice(2, 4, &[
        l(1.0), l(0.0), l(0.0), l(0.0),
        l(0.0), l(0.0), l(1.0), l(0.0),
    ]);
    StateSpaceModel::new(a, b, c, DMatrix::zeros(2, 2), TimeDomain::Continuous).expect("built-in plant is consistent")
}

/// Exact zero-order-hold equivalent of a continuous model.
///
/// `exp([[A, B], [0, 0]] ts) = [[A_d, B_d], [0, I]]`; the exponential is the
/// Padé scaling-and-squaring routine of nalgebra.
pub fn discretize_zoh<T: Real>(m: &StateSpaceModel<T>, ts: T) -> Result<StateSpaceModel<T>> {
    if m.time_domain != TimeDomain::Continuous {
        return Err(FrfError::WrongTimeDomain { expected: "continuous" });
    }
    if !(ts > T::zero()) || !ts.is_finite() {
        return Err(FrfError::InvalidArgument(format!("ts must be > 0, got {ts}")));
    }
    let n = m.n_states();
    let nu = m.n_inputs();
    let mut aug = DMatrix::zeros(n + nu, n + nu);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&m.a * ts));
    aug.view_mut((0, n), (n, nu)).copy_from(&(&m.b * ts));
    let e = aug.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(FrfError::ExpmFailed);
    }
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, nu)).into_owned();
    StateSpaceModel::new(ad, bd, m.c.clone(), m.d.clone(), TimeDomain::Discrete { ts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plant_entries() {
        let p = two_mass_plant::<f64>();
        assert_eq!(p.a()[(1, 0)], -173.0);
        assert_eq!(p.a()[(3, 2)], -173.0);
        assert_eq!(p.a()[(1, 3)], 1.33);
        assert_eq!(p.b()[(1, 0)], 53.0);
        assert_eq!(p.b()[(3, 1)], 53.0);
        assert_eq!(p.c()[(0, 0)], 1.0);
        assert_eq!(p.c()[(1, 2)], 1.0);
        assert_eq!(p.c().iter().filter(|v| **v != 0.0).count(), 2);
        assert!(p.d().iter().all(|v| *v == 0.0));
        assert_eq!(p.time_domain(), TimeDomain::Continuous);
    }

    #[test]
    fn plant_is_stable() {
        let p = two_mass_plant::<f64>();
        let eig = p.eigenvalues();
        assert_eq!(eig.len(), 4);
        assert!(eig.iter().all(|z| z.re < 0.0));
        assert!(p.is_stable());
        // Antisymmetric mode: omega^2 = 173 + 166.
        let wn2 = eig.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        assert!((wn2 - 339.0).abs() < 1.0, "{wn2}");
    }

    /// Truncated Taylor series of the augmented exponential.
    fn zoh_series(a: &DMatrix<f64>, b: &DMatrix<f64>, ts: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = a.nrows();
        let mut ad = DMatrix::identity(n, n);
        let mut integral = DMatrix::identity(n, n) * ts;
        let mut term = DMatrix::identity(n, n);
        for k in 1..60 {
            term = &term * a * ts / k as f64;
            ad += &term;
            integral += &term * ts / (k as f64 + 1.0);
        }
        (ad, integral * b)
    }

    #[test]
    fn zoh_zero_dynamics() {
        let m = StateSpaceModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
            TimeDomain::Continuous,
        )
        .unwrap();
        let d = discretize_zoh(&m, 0.25).unwrap();
        assert!((d.a() - DMatrix::identity(2, 2)).norm() < 1e-15);
        assert!((d.b() - m.b() * 0.25).norm() < 1e-15);
        assert_eq!(d.ts(), Some(0.25));
    }

    #[test]
    fn zoh_scalar_closed_form() {
        let m = StateSpaceModel::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            TimeDomain::Continuous,
        )
        .unwrap();
        let d = discretize_zoh(&m, 0.1).unwrap();
        assert!((d.a()[(0, 0)] - (-0.1f64).exp()).abs() < 1e-15);
        assert!((d.b()[(0, 0)] - (1.0 - (-0.1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn zoh_two_mass_plant_matches_series_and_is_stable() {
        let p = two_mass_plant::<f64>();
        let d = discretize_zoh(&p, 1e-3).unwrap();
        let (ad, bd) = zoh_series(p.a(), p.b(), 1e-3);
        assert!((d.a() - ad).norm() < 1e-12);
        assert!((d.b() - bd).norm() < 1e-12);
        assert!(d.is_stable());
        assert!(d.eigenvalues().iter().all(|z| z.norm() < 1.0));
        assert!(matches!(discretize_zoh(&d, 1e-3), Err(FrfError::WrongTimeDomain { .. })));
    }

    #[test]
    fn json_round_trip() {
        let d = discretize_zoh(&two_mass_plant::<f64>(), 1e-3).unwrap();
        let text = d.to_json().to_string();
        let back = StateSpaceModel::<f64>::from_json_str(&text).unwrap();
        assert_eq!(back, d);
        let cont = two_mass_plant::<f64>().to_json();
        assert!(cont["ts"].is_null());
        assert!(StateSpaceModel::<f64>::from_json_str(r#"{"A":[[1]],"B":[[1]],"C":[[1]],"ts":null,"X":1}"#).is_err());
        let no_d = StateSpaceModel::<f64>::from_json_str(r#"{"A":[[-1]],"B":[[1]],"C":[[1]],"ts":null}"#).unwrap();
        assert_eq!(no_d.d()[(0, 0)], 0.0);
    }

    #[test]
    fn subsystem_selects_channels() {
        let p = two_mass_plant::<f64>();
        let s = p.subsystem(&[1], &[0]).unwrap();
        assert_eq!((s.n_inputs(), s.n_outputs(), s.n_states()), (1, 1, 4));
        assert_eq!(s.b()[(3, 0)], 53.0);
        assert!(p.subsystem(&[2], &[0]).is_err());
    }
}
