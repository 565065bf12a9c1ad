use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;

use super::{simo_columns, ClosedLoopDataset, OpenLoopEstimator};
use crate::error::{FrfError, Result};
use crate::estimators::{condition_number, BinDefect, EstimatorTag, FrfEstimate};
use crate::scalar::{cnan, Real};
use crate::signals::{generate_multisine, MultisineSpec, TimeSeries};
use crate::sim::{frequency_response, input_sensitivity, simulate_closed_loop, ControllerConfig, StateSpaceModel};

/// Condition number of `S` above which [`full_plant`] marks a bin defective.
pub const DEFAULT_CONDITION_THRESHOLD: f64 = 1e8;

/// Process sensitivity `G S` (`n_y x n_u`) and sensitivity `S` (`n_u x n_u`)
/// on a common bin grid. Column `j` of both comes from the experiment that
/// excited `d_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrmPair<T: Real> {
    pub gs: FrfEstimate<T>,
    pub s: FrfEstimate<T>,
}

impl<T: Real> FrmPair<T> {
    pub fn new(gs: FrfEstimate<T>, s: FrfEstimate<T>) -> Result<Self> {
        if gs.bin_frequencies != s.bin_frequencies {
            return Err(FrfError::Dimension("GS and S bins differ".into()));
        }
        if gs.n_inputs() != s.n_inputs() || s.n_inputs() != s.n_outputs() {
            return Err(FrfError::Dimension("S must be square with one column per GS column".into()));
        }
        Ok(Self { gs, s })
    }

    pub fn n_bins(&self) -> usize {
        self.s.n_bins()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentSeeds {
    pub phase_seed: u64,
    pub noise_seed: u64,
}

/// One closed-loop experiment per plant input.
///
/// Every experiment uses `multisine` with its own phase seed, keeps the last
/// `multisine.n_periods - discard_periods` periods and applies `estimator` to
/// `d_j -> [y; u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoPlan<T> {
    pub multisine: MultisineSpec<T>,
    pub noise_std: Vec<T>,
    pub seeds: Vec<ExperimentSeeds>,
    pub discard_periods: usize,
    pub estimator: OpenLoopEstimator,
}

fn all_distinct(v: &[u64]) -> bool {
    v.iter().enumerate().all(|(i, a)| v[..i].iter().all(|b| a != b))
}

fn run_one<T: Real>(
    m: &StateSpaceModel<T>,
    k: &ControllerConfig<T>,
    plan: &MimoPlan<T>,
    j: usize,
    ts: T,
) -> Result<(FrfEstimate<T>, FrfEstimate<T>)> {
    let seeds = plan.seeds[j];
    let spec = MultisineSpec { phase_seed: seeds.phase_seed, ..plan.multisine.clone() };
    let dj = generate_multisine(&spec, ts)?;
    let n = dj.len();
    let channels =
        (0..m.n_inputs()).map(|i| if i == j { dj.channel(0).to_vec() } else { vec![T::zero(); n] }).collect();
    let d = TimeSeries::with_prefix(channels, ts, "d")?;
    let rec = simulate_closed_loop(m, k, &d, &plan.noise_std, seeds.noise_seed)?;
    let p = spec.period_samples;
    let ds = ClosedLoopDataset::from_record(&rec, j, k.clone())?
        .slice(plan.discard_periods * p, (spec.n_periods - plan.discard_periods) * p)?;
    simo_columns(&ds, &plan.estimator)
}

fn assemble<T: Real>(cols: &[FrfEstimate<T>], name: String, est: &OpenLoopEstimator) -> FrfEstimate<T> {
    let n_bins = cols[0].n_bins();
    let rows = cols[0].n_outputs();
    let g = (0..n_bins).map(|b| DMatrix::from_fn(rows, cols.len(), |i, j| cols[j].g[b][(i, 0)])).collect();
    let variance = cols.iter().all(|c| c.variance.is_some()).then(|| {
        (0..n_bins)
            .map(|b| DMatrix::from_fn(rows, cols.len(), |i, j| cols[j].variance.as_ref().unwrap()[b][(i, 0)]))
            .collect()
    });
    let defects = cols
        .iter()
        .enumerate()
        .flat_map(|(j, c)| {
            c.defects.iter().map(move |d| BinDefect::new(d.bin, format!("experiment {}: {}", j + 1, d.reason)))
        })
        .collect();
    let mut tag =
        EstimatorTag::new(name).note(format!("column j from experiment exciting d_j, estimator {}", est.name()));
    tag.notes.extend(est.notes());
    let mut out = FrfEstimate {
        g,
        variance,
        transient: None,
        bin_frequencies: cols[0].bin_frequencies.clone(),
        tag,
        defects,
        condition: None,
    };
    out.sort_defects();
    out
}

/// Runs the `n_u` experiments of `plan` on the discrete plant `m` under `k`.
///
/// Experiments are independent and run in parallel; results do not depend on
/// the thread count.
pub fn run_mimo_experiments<T: Real>(
    m: &StateSpaceModel<T>,
    k: &ControllerConfig<T>,
    plan: &MimoPlan<T>,
) -> Result<FrmPair<T>> {
    let ts = m.ts().ok_or(FrfError::WrongTimeDomain { expected: "discrete" })?;
    let nu = m.n_inputs();
    if plan.seeds.len() != nu {
        return Err(FrfError::InvalidArgument(format!("{} seed pairs for {nu} experiments", plan.seeds.len())));
    }
    let phase: Vec<u64> = plan.seeds.iter().map(|s| s.phase_seed).collect();
    let noise: Vec<u64> = plan.seeds.iter().map(|s| s.noise_seed).collect();
    if !all_distinct(&phase) || !all_distinct(&noise) {
        return Err(FrfError::InvalidArgument("per-experiment seeds must be distinct".into()));
    }
    if plan.discard_periods >= plan.multisine.n_periods {
        return Err(FrfError::InvalidArgument("discard_periods must leave at least one period".into()));
    }
    plan.multisine.validate()?;
    k.check_closed_loop(m)?;
    let cols: Vec<_> = (0..nu).into_par_iter().map(|j| run_one(m, k, plan, j, ts)).collect::<Result<_>>()?;
    let (gs, s): (Vec<_>, Vec<_>) = cols.into_iter().unzip();
    FrmPair::new(
        assemble(&gs, format!("gs_{}", plan.estimator.name()), &plan.estimator),
        assemble(&s, format!("s_{}", plan.estimator.name()), &plan.estimator),
    )
}

/// Exact `G S` and `S = (I + K G)^{-1}` of the loop at each frequency (rad/s).
pub fn true_frm<T: Real>(m: &StateSpaceModel<T>, k: &ControllerConfig<T>, bin_frequencies: &[T]) -> Result<FrmPair<T>> {
    let (ny, nu) = (m.n_outputs(), m.n_inputs());
    let mut gs = Vec::with_capacity(bin_frequencies.len());
    let mut s = Vec::with_capacity(bin_frequencies.len());
    let mut defects = Vec::new();
    for (b, &w) in bin_frequencies.iter().enumerate() {
        match frequency_response(m, w).and_then(|g| input_sensitivity(&g, &k.frequency_response(w))) {
            Some((sb, gsb)) => {
                s.push(sb);
                gs.push(gsb);
            }
            None => {
                defects.push(BinDefect::new(b, "singular loop at this frequency"));
                s.push(DMatrix::from_element(nu, nu, cnan()));
                gs.push(DMatrix::from_element(ny, nu, cnan()));
            }
        }
    }
    let oracle = |g: Vec<DMatrix<Complex<T>>>, name: &str| FrfEstimate {
        variance: Some(vec![DMatrix::zeros(g[0].nrows(), nu); g.len()]),
        g,
        transient: None,
        bin_frequencies: bin_frequencies.to_vec(),
        tag: EstimatorTag::new(name).note("analytic closed-loop response, zero variance"),
        defects: defects.clone(),
        condition: None,
    };
    FrmPair::new(oracle(gs, "oracle_gs"), oracle(s, "oracle_s"))
}

fn defect_bins<T: Real>(frm: &FrmPair<T>) -> Vec<bool> {
    let mut bad = vec![false; frm.n_bins()];
    for d in frm.gs.defects.iter().chain(&frm.s.defects) {
        bad[d.bin] = true;
    }
    bad
}

/// Full plant `G = GS S^{-1}` by matrix inversion per bin.
///
/// The condition number of `S` is recorded per bin; above `cond_threshold`
/// the bin is a defect. Variances are first-order propagations treating all
/// entries of `GS` and `S` as uncorrelated.
pub fn full_plant<T: Real>(frm: &FrmPair<T>, cond_threshold: T) -> Result<FrfEstimate<T>> {
    let (ny, nu) = (frm.gs.n_outputs(), frm.gs.n_inputs());
    let bad = defect_bins(frm);
    let nan = T::lit(f64::NAN);
    let mut g = Vec::with_capacity(frm.n_bins());
    let mut variance = Vec::with_capacity(frm.n_bins());
    let mut condition = Vec::with_capacity(frm.n_bins());
    let mut defects = Vec::new();
    for b in 0..frm.n_bins() {
        let s = &frm.s.g[b];
        let cond = if s.iter().all(|z| z.re.is_finite() && z.im.is_finite()) { condition_number(s) } else { nan };
        condition.push(cond);
        let inv = if bad[b] {
            Err("input defect")
        } else if !(cond <= cond_threshold) {
            Err("S ill-conditioned")
        } else {
            s.clone().try_inverse().ok_or("S singular")
        };
        match inv {
            Ok(s_inv) => {
                let gb = &frm.gs.g[b] * &s_inv;
                variance.push(propagate_product(frm, b, &gb, &s_inv));
                g.push(gb);
            }
            Err(reason) => {
                let reason = if reason == "S ill-conditioned" {
                    format!("{reason}: cond={}", cond.as_f64())
                } else {
                    reason.to_string()
                };
                defects.push(BinDefect::new(b, reason));
                g.push(DMatrix::from_element(ny, nu, cnan()));
                variance.push(Some(DMatrix::from_element(ny, nu, nan)));
            }
        }
    }
    let variance = variance.into_iter().collect::<Option<Vec<_>>>();
    Ok(FrfEstimate {
        g,
        variance,
        transient: None,
        bin_frequencies: frm.s.bin_frequencies.clone(),
        tag: EstimatorTag::new("full_plant")
            .note("G = GS S^{-1}, matrix inverse per bin")
            .note(format!("condition threshold {}", cond_threshold.as_f64()))
            .note("variance: first-order propagation, approximate"),
        defects,
        condition: Some(condition),
    })
}

/// `var(G_ij) = sum_l var(GS_il)|Si_lj|^2 + sum_lm |G_il|^2 var(S_lm) |Si_mj|^2`.
fn propagate_product<T: Real>(
    frm: &FrmPair<T>,
    b: usize,
    g: &DMatrix<Complex<T>>,
    s_inv: &DMatrix<Complex<T>>,
) -> Option<DMatrix<T>> {
    let vgs = &frm.gs.variance.as_ref()?[b];
    let vs = &frm.s.variance.as_ref()?[b];
    let n = s_inv.nrows();
    Some(DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| {
        let mut acc = T::zero();
        for l in 0..n {
            acc += vgs[(i, l)] * s_inv[(l, j)].norm_sqr();
            for m in 0..n {
                acc += g[(i, l)].norm_sqr() * vs[(l, m)] * s_inv[(m, j)].norm_sqr();
            }
        }
        acc
    }))
}

/// Equivalent plant `GS ⊙ (1/S)`: entry `(i, i)` is the plant seen by loop
/// `i` with all other loops closed.
pub fn equivalent_plant<T: Real>(frm: &FrmPair<T>) -> Result<FrfEstimate<T>> {
    let n = frm.s.n_outputs();
    if frm.gs.n_outputs() != n {
        return Err(FrfError::Dimension("equivalent plant needs a square GS".into()));
    }
    let bad = defect_bins(frm);
    let zero = Complex::new(T::zero(), T::zero());
    let nan = T::lit(f64::NAN);
    let mut g = Vec::with_capacity(frm.n_bins());
    let mut variance = Vec::with_capacity(frm.n_bins());
    let mut defects = Vec::new();
    for b in 0..frm.n_bins() {
        let s = &frm.s.g[b];
        if bad[b] {
            defects.push(BinDefect::new(b, "input defect"));
            g.push(DMatrix::from_element(n, n, cnan()));
            variance.push(Some(DMatrix::from_element(n, n, nan)));
            continue;
        }
        // Zero entries only blank their own position, so a decoupled plant
        // keeps its diagonal.
        let usable = |z: Complex<T>| z != zero && z.re.is_finite() && z.im.is_finite();
        for i in 0..n {
            for j in 0..n {
                if !usable(s[(i, j)]) {
                    defects.push(BinDefect::new(b, format!("zero S entry ({}, {})", i + 1, j + 1)));
                }
            }
        }
        let gb =
            DMatrix::from_fn(n, n, |i, j| if usable(s[(i, j)]) { frm.gs.g[b][(i, j)] / s[(i, j)] } else { cnan() });
        variance.push(match (&frm.gs.variance, &frm.s.variance) {
            (Some(vg), Some(vs)) => Some(DMatrix::from_fn(n, n, |i, j| {
                (vg[b][(i, j)] + gb[(i, j)].norm_sqr() * vs[b][(i, j)]) / s[(i, j)].norm_sqr()
            })),
            _ => None,
        });
        g.push(gb);
    }
    Ok(FrfEstimate {
        g,
        variance: variance.into_iter().collect(),
        transient: None,
        bin_frequencies: frm.s.bin_frequencies.clone(),
        tag: EstimatorTag::new("equivalent_plant")
            .note("GS / S entrywise (Hadamard); entries are loop-closed equivalent plants, not the plant")
            .note("variance: first-order propagation, approximate"),
        defects,
        condition: None,
    })
}
