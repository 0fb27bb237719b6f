//! Empirical checks of the approximation bounds.
//!
//! Every check returns its measured left-hand side next to the bound so the
//! margin stays visible even when the inequality holds.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fmap::PointwiseMap;
use crate::local_basis::LocalBasis;
use crate::sampling::GeodesicRecord;
use crate::spectral::ReducedSpectrum;

pub const BT_INFLATION: f64 = 1.1;
pub const MIN_TRIALS: usize = 20;
pub const MIN_LEMMA3_TRIALS: usize = 100;

/// Relative slack for round-off in the pointwise interpolation checks.
const ROUNDOFF: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl BoundCheck {
    fn new(name: &'static str, lhs: f64, rhs: f64) -> Self {
        BoundCheck { name, lhs, rhs, satisfied: lhs <= rhs }
    }

    /// `rhs / lhs`, infinite when the left side vanishes.
    pub fn slack(&self) -> f64 {
        if self.lhs > 0.0 {
            self.rhs / self.lhs
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub epsilon_eig: f64,
    pub epsilon_sup: Option<f64>,
    pub alpha: f64,
    pub b_t_hat: f64,
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "epsilon_eig = {:e}", self.epsilon_eig);
        match self.epsilon_sup {
            Some(e) => {
                let _ = writeln!(s, "epsilon_sup = {e:e}");
            }
            None => s.push_str("epsilon_sup = n/a\n"),
        }
        let _ = writeln!(s, "alpha = {:e}", self.alpha);
        let _ = writeln!(s, "b_t_hat = {:e}", self.b_t_hat);
        for c in &self.checks {
            let _ = writeln!(s, "{}.lhs = {:e}", c.name, c.lhs);
            let _ = writeln!(s, "{}.rhs = {:e}", c.name, c.rhs);
            let _ = writeln!(s, "{}.slack = {:e}", c.name, c.slack());
            let _ = writeln!(s, "{}.satisfied = {}", c.name, c.satisfied);
        }
        let _ = writeln!(s, "all_satisfied = {}", self.all_satisfied());
        s
    }
}

fn mass_norm_sq(values: impl Iterator<Item = f64>, mass: &[f64]) -> f64 {
    values.zip(mass).map(|(v, a)| a * v * v).sum()
}

/// `r` random combinations of the first `k` columns of `band`, with
/// coefficients uniform in `[-1, 1]`.
pub fn band_limited_trials(band: &DMatrix<f64>, k: usize, r: usize, seed: u64) -> DMatrix<f64> {
    let k = k.min(band.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = DMatrix::from_fn(k, r, |_, _| rng.gen_range(-1.0..1.0));
    band.columns(0, k) * coeffs
}

/// Largest `‖f∘T‖_N / ‖f‖_M` over the trial columns, times [`BT_INFLATION`].
pub fn estimate_bt(pi: &PointwiseMap, mass_n: &[f64], mass_m: &[f64], trials: &DMatrix<f64>) -> Result<f64> {
    if pi.len() != mass_n.len() || pi.target_len() != mass_m.len() || trials.nrows() != mass_m.len() {
        return Err(Error::Dimension(format!(
            "map {}→{}, masses {} and {}, trials with {} rows",
            pi.len(),
            pi.target_len(),
            mass_n.len(),
            mass_m.len(),
            trials.nrows()
        )));
    }
    if trials.ncols() < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_TRIALS} trial functions, got {}",
            trials.ncols()
        )));
    }
    let mut best: f64 = 0.0;
    for f in trials.column_iter() {
        let den = mass_norm_sq(f.iter().copied(), mass_m);
        if den <= 0.0 {
            continue;
        }
        let num = mass_norm_sq(pi.as_slice().iter().map(|&t| f[t]), mass_n);
        best = best.max((num / den).sqrt());
    }
    Ok(best * BT_INFLATION)
}

fn check_record(basis: &LocalBasis, record: &GeodesicRecord) -> Result<()> {
    if record.n_samples() != basis.n_samples() {
        return Err(Error::Dimension(format!(
            "record has {} samples, basis {}",
            record.n_samples(),
            basis.n_samples()
        )));
    }
    Ok(())
}

/// Largest `|f(x) − f(vⱼ)|` over vertices `x` in the support of `uⱼ`.
pub fn support_modulus(values: &[f64], basis: &LocalBasis, record: &GeodesicRecord) -> Result<f64> {
    check_record(basis, record)?;
    let mut eps: f64 = 0.0;
    for (j, &v) in basis.samples.iter().enumerate() {
        for &(x, _) in record.within(j, basis.radii[j]) {
            eps = eps.max((values[x] - values[v]).abs());
        }
    }
    Ok(eps)
}

/// Same as [`support_modulus`] for per-sample values, over sample pairs
/// `(vᵢ, vⱼ)` with `vᵢ` in the support of `uⱼ`.
pub fn sample_modulus(sample_values: &[f64], basis: &LocalBasis, record: &GeodesicRecord) -> Result<f64> {
    check_record(basis, record)?;
    let mut index = vec![usize::MAX; basis.n_vertices()];
    for (j, &v) in basis.samples.iter().enumerate() {
        index[v] = j;
    }
    let mut eps: f64 = 0.0;
    for j in 0..basis.n_samples() {
        for &(x, _) in record.within(j, basis.radii[j]) {
            let i = index[x];
            if i != usize::MAX {
                eps = eps.max((sample_values[i] - sample_values[j]).abs());
            }
        }
    }
    Ok(eps)
}

/// Variation of the first `k` lifted eigenvectors over local supports and
/// of their coefficients over neighbouring samples; the larger of the two.
pub fn measure_epsilon_eig(
    spectrum: &ReducedSpectrum,
    basis: &LocalBasis,
    record: &GeodesicRecord,
    k: usize,
) -> Result<f64> {
    if k > spectrum.k() {
        return Err(Error::Dimension(format!("k = {k} exceeds K = {}", spectrum.k())));
    }
    let mut eps: f64 = 0.0;
    for c in 0..k {
        let psi: Vec<f64> = spectrum.lifted.column(c).iter().copied().collect();
        let phi: Vec<f64> = spectrum.coeffs.column(c).iter().copied().collect();
        eps = eps.max(support_modulus(&psi, basis, record)?);
        eps = eps.max(sample_modulus(&phi, basis, record)?);
    }
    Ok(eps)
}

/// Flips columns of `approx` to best match `exact` in sup norm. Returns the
/// aligned copy and `maxⱼ ‖Ψⱼ − Ψ̄ⱼ‖∞` over the first `k` columns.
pub fn align_signs(exact: &DMatrix<f64>, approx: &DMatrix<f64>, k: usize) -> Result<(DMatrix<f64>, f64)> {
    if exact.nrows() != approx.nrows() || k > exact.ncols() || k > approx.ncols() {
        return Err(Error::Dimension(format!(
            "{:?} and {:?} bases, k = {k}",
            exact.shape(),
            approx.shape()
        )));
    }
    let mut out = approx.columns(0, k).into_owned();
    let mut gap: f64 = 0.0;
    for c in 0..k {
        let (e, a) = (exact.column(c), approx.column(c));
        let plus = e.iter().zip(a.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let minus = e.iter().zip(a.iter()).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        if minus < plus {
            out.column_mut(c).neg_mut();
        }
        gap = gap.max(plus.min(minus));
    }
    Ok((out, gap))
}

/// `(1/K)‖C − C̄‖² ≤ ε²(1 + B_T²)` on the leading `k × k` blocks.
pub fn check_prop1(c: &DMatrix<f64>, c_bar: &DMatrix<f64>, epsilon_sup: f64, b_t: f64, k: usize) -> Result<BoundCheck> {
    if c.nrows() < k || c.ncols() < k || c_bar.nrows() < k || c_bar.ncols() < k {
        return Err(Error::Dimension(format!(
            "{:?} and {:?} maps, k = {k}",
            c.shape(),
            c_bar.shape()
        )));
    }
    let diff = c.view((0, 0), (k, k)) - c_bar.view((0, 0), (k, k));
    let lhs = diff.norm_squared() / k as f64;
    Ok(BoundCheck::new("prop1", lhs, epsilon_sup.powi(2) * (1.0 + b_t * b_t)))
}

/// The sample-level map induced by `pi`, which must send every sample of
/// `N` onto a sample of `M`.
pub fn sample_restriction(pi: &PointwiseMap, basis_n: &LocalBasis, basis_m: &LocalBasis) -> Result<PointwiseMap> {
    let mut index = vec![usize::MAX; basis_m.n_vertices()];
    for (j, &v) in basis_m.samples.iter().enumerate() {
        index[v] = j;
    }
    let mut out = Vec::with_capacity(basis_n.n_samples());
    for (j, &v) in basis_n.samples.iter().enumerate() {
        let t = pi.get(v);
        if index[t] == usize::MAX {
            return Err(Error::Hypothesis(format!(
                "sample {j} (vertex {v}) maps to vertex {t}, which is not a sample"
            )));
        }
        out.push(index[t]);
    }
    PointwiseMap::new(out, basis_m.n_samples())
}

pub struct Prop2Input<'a> {
    pub pi: &'a PointwiseMap,
    pub pi_bar: &'a PointwiseMap,
    pub basis_n: &'a LocalBasis,
    pub mass_n: &'a [f64],
    pub basis_m: &'a LocalBasis,
    pub spectrum_m: &'a ReducedSpectrum,
    pub epsilon: f64,
    pub alpha: f64,
    pub b_t: f64,
    pub k: usize,
}

/// `(1/K)‖ΠΨ̄ᴹ − UᴺΠ̄Φ̄ᴹ‖²_N ≤ ε²(1 − α) + ε²B_T²`.
pub fn check_prop2(input: &Prop2Input) -> Result<BoundCheck> {
    let Prop2Input { pi, pi_bar, basis_n, mass_n, basis_m, spectrum_m, epsilon, alpha, b_t, k } = *input;
    if pi.len() != basis_n.n_vertices() || pi_bar.len() != basis_n.n_samples() || k > spectrum_m.k() {
        return Err(Error::Dimension(format!(
            "map over {} vertices, sample map over {}, k = {k} of {}",
            pi.len(),
            pi_bar.len(),
            spectrum_m.k()
        )));
    }
    for (j, &v) in basis_n.samples.iter().enumerate() {
        if pi.get(v) != basis_m.samples[pi_bar.get(j)] {
            return Err(Error::Hypothesis(format!(
                "dense and sample maps disagree at sample {j}: {} vs {}",
                pi.get(v),
                basis_m.samples[pi_bar.get(j)]
            )));
        }
    }
    let gathered = pi_bar.gather_rows(&spectrum_m.coeffs, k);
    let interp = basis_n.u.mul_dense(&gathered);
    let mut total = 0.0;
    for c in 0..k {
        let col = spectrum_m.lifted.column(c);
        let diff = (0..pi.len()).map(|x| col[pi.get(x)] - interp[(x, c)]);
        total += mass_norm_sq(diff, mass_n);
    }
    let eps2 = epsilon * epsilon;
    Ok(BoundCheck::new("prop2", total / k as f64, eps2 * (1.0 - alpha) + eps2 * b_t * b_t))
}

#[derive(Clone, Debug)]
pub struct InterpolationCheck {
    /// Modulus of continuity of `f` over the local supports.
    pub epsilon: f64,
    pub max_error: f64,
    /// `|f̃(vⱼ) − f(vⱼ)|` per sample.
    pub sample_errors: Vec<f64>,
    /// Samples whose error exceeds `ε(1 − uⱼ(vⱼ))`.
    pub sample_violations: Vec<usize>,
    pub satisfied: bool,
}

/// `|f̃ − f| ≤ ε` everywhere and `≤ ε(1 − uⱼ(vⱼ))` at the samples.
pub fn check_interpolation_prop(basis: &LocalBasis, record: &GeodesicRecord, f: &[f64]) -> Result<InterpolationCheck> {
    if f.len() != basis.n_vertices() {
        return Err(Error::Dimension(format!("{} values for {} vertices", f.len(), basis.n_vertices())));
    }
    let epsilon = support_modulus(f, basis, record)?;
    let at_samples: Vec<f64> = basis.samples.iter().map(|&v| f[v]).collect();
    let interp = basis.interpolate(&at_samples);
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let slack = ROUNDOFF * (1.0 + scale);
    let max_error = interp.iter().zip(f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let sample_errors: Vec<f64> = basis.samples.iter().map(|&v| (interp[v] - f[v]).abs()).collect();
    let sample_violations: Vec<usize> = sample_errors
        .iter()
        .zip(&basis.self_weights)
        .enumerate()
        .filter(|(_, (e, w))| **e > epsilon * (1.0 - **w) + slack)
        .map(|(j, _)| j)
        .collect();
    let satisfied = max_error <= epsilon + slack && sample_violations.is_empty();
    Ok(InterpolationCheck { epsilon, max_error, sample_errors, sample_violations, satisfied })
}

/// `‖Uβ‖²_N ≤ ‖β‖²` for `trials` Gaussian-like random `β`; reports the
/// worst ratio against 1.
pub fn check_lemma3(basis: &LocalBasis, mass: &[f64], trials: usize, seed: u64) -> Result<BoundCheck> {
    if mass.len() != basis.n_vertices() {
        return Err(Error::Dimension(format!("{} masses for {} vertices", mass.len(), basis.n_vertices())));
    }
    if trials < MIN_LEMMA3_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_LEMMA3_TRIALS} trials, got {trials}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = basis.n_samples();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        // sum of uniforms: cheap, symmetric, unbounded enough
        let beta: Vec<f64> = (0..p)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>())
            .collect();
        let den: f64 = beta.iter().map(|b| b * b).sum();
        if den == 0.0 {
            continue;
        }
        let num = mass_norm_sq(basis.u.mul_vec(&beta).into_iter(), mass);
        worst = worst.max(num / den);
    }
    Ok(BoundCheck::new("lemma3", worst, 1.0))
}

/// One shape as seen by the bound checks.
pub struct ShapeData<'a> {
    pub mass: &'a [f64],
    pub basis: &'a LocalBasis,
    pub record: &'a GeodesicRecord,
    pub spectrum: &'a ReducedSpectrum,
    /// Exact eigenvectors, needed only for the first proposition.
    pub exact: Option<&'a DMatrix<f64>>,
}

pub struct BoundsConfig {
    pub k: usize,
    pub trials: usize,
    pub lemma3_trials: usize,
    pub seed: u64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { k: 20, trials: 64, lemma3_trials: MIN_LEMMA3_TRIALS, seed: 0 }
    }
}

/// Runs every check for `pi: N → M`. When a check depending on `B_T`
/// fails, `B_T` is re-estimated with ten times the trials first.
pub fn verify(n: &ShapeData, m: &ShapeData, pi: &PointwiseMap, cfg: &BoundsConfig) -> Result<BoundReport> {
    let k = cfg.k;
    let pi_bar = sample_restriction(pi, n.basis, m.basis)?;
    let alpha = m.basis.min_self_weight();
    let pullback = |c: usize| -> Vec<f64> { pi.as_slice().iter().map(|&t| m.spectrum.lifted[(t, c)]).collect() };
    let mut epsilon = measure_epsilon_eig(m.spectrum, m.basis, m.record, k)?;
    for c in 0..k {
        epsilon = epsilon.max(support_modulus(&pullback(c), n.basis, n.record)?);
    }

    let sup = match (n.exact, m.exact) {
        (Some(en), Some(em)) => {
            let (psi_n, gap_n) = align_signs(en, &n.spectrum.lifted, k)?;
            let (psi_m, gap_m) = align_signs(em, &m.spectrum.lifted, k)?;
            let c = crate::fmap::dense_fmap(en, k, n.mass, pi, em, k)?;
            let c_bar = crate::fmap::dense_fmap(&psi_n, k, n.mass, pi, &psi_m, k)?;
            Some((c, c_bar, gap_n.max(gap_m)))
        }
        _ => None,
    };

    let run = |b_t: f64| -> Result<Vec<BoundCheck>> {
        let mut checks = Vec::new();
        if let Some((c, c_bar, gap)) = &sup {
            checks.push(check_prop1(c, c_bar, *gap, b_t, k)?);
        }
        checks.push(check_prop2(&Prop2Input {
            pi,
            pi_bar: &pi_bar,
            basis_n: n.basis,
            mass_n: n.mass,
            basis_m: m.basis,
            spectrum_m: m.spectrum,
            epsilon,
            alpha,
            b_t,
            k,
        })?);
        Ok(checks)
    };

    let trials = band_limited_trials(&m.spectrum.lifted, k, cfg.trials.max(MIN_TRIALS), cfg.seed);
    let mut b_t = estimate_bt(pi, n.mass, m.mass, &trials)?;
    let mut checks = run(b_t)?;
    if checks.iter().any(|c| !c.satisfied) {
        let more = band_limited_trials(&m.spectrum.lifted, k, 10 * cfg.trials.max(MIN_TRIALS), cfg.seed ^ 0x9e37);
        b_t = b_t.max(estimate_bt(pi, n.mass, m.mass, &more)?);
        log::warn!("bound check failed; re-estimated B_T = {b_t:e} with more trials");
        checks = run(b_t)?;
    }

    for (name, shape) in [("interpolation_n", n), ("interpolation_m", m)] {
        let f: Vec<f64> = shape.spectrum.lifted.column(k.min(shape.spectrum.k()) - 1).iter().copied().collect();
        let ic = check_interpolation_prop(shape.basis, shape.record, &f)?;
        checks.push(BoundCheck { name, lhs: ic.max_error, rhs: ic.epsilon, satisfied: ic.satisfied });
    }
    for (name, shape) in [("lemma3_n", n), ("lemma3_m", m)] {
        let mut c = check_lemma3(shape.basis, shape.mass, cfg.lemma3_trials, cfg.seed)?;
        c.name = name;
        checks.push(c);
    }

    Ok(BoundReport {
        epsilon_eig: epsilon,
        epsilon_sup: sup.map(|s| s.2),
        alpha,
        b_t_hat: b_t,
        checks,
    })
}
