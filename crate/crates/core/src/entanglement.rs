//! Susceptibility witness, two-qubit concurrence (general Wootters, X-shaped
//! states, and the zero-field susceptibility route), Entanglement of
//! Formation, the trimer-energy criterion and threshold location.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigendecompose, CMatrix, DenseHermitian};
use crate::thermal::ThermalState;

/// Density-matrix validity tolerance (trace and positivity).
pub const STATE_TOL: f64 = 1e-10;

/// Allowed magnitude of the entries an X-shaped pair state must not have.
pub const X_FORM_TOL: f64 = 1e-10;

/// `EW(N) = 3 T χ̃ / (N S) − 1` (reduced units). Negative values certify
/// entanglement; non-negative values are inconclusive.
pub fn witness_value(chi_avg: f64, temperature: f64, n_spins: usize, spin: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!("witness needs T > 0, got {temperature}")));
    }
    if n_spins == 0 || !(spin > 0.0) {
        return Err(Error::Domain("witness needs N ≥ 1 and S > 0".into()));
    }
    Ok(3.0 * temperature * chi_avg / (n_spins as f64 * spin) - 1.0)
}

/// Two-site density matrix, sites in the order they were traced out.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub rho4: CMatrix,
    pub sites: (usize, usize),
}

impl PairState {
    pub fn new(rho4: CMatrix, sites: (usize, usize)) -> Result<Self> {
        if rho4.dim() != 4 {
            return Err(Error::DimensionMismatch {
                left: rho4.dim(),
                right: 4,
            });
        }
        let h = DenseHermitian::new(rho4)?;
        let tr = h.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::Domain(format!("pair state has trace {tr}")));
        }
        Ok(PairState {
            rho4: h.into_matrix(),
            sites,
        })
    }

    pub fn from_state(state: &ThermalState, i: usize, j: usize) -> Result<Self> {
        PairState::new(state.reduced(&[i, j])?, (i, j))
    }

    /// Largest magnitude among entries outside the X pattern with zero outer
    /// anti-diagonal (the only shape an `S^z`-conserving pair state can take).
    pub fn x_form_deviation(&self) -> f64 {
        let allowed = |i: usize, j: usize| i == j || (i, j) == (1, 2) || (i, j) == (2, 1);
        let mut dev = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                if !allowed(i, j) {
                    dev = dev.max(self.rho4[(i, j)].norm());
                }
            }
        }
        dev
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConcurrenceMethod {
    WoottersGeneral,
    XForm,
    Susceptibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceResult {
    pub concurrence: f64,
    pub ef: f64,
    pub method: ConcurrenceMethod,
    /// The expression inside `max(0, ·)` before clamping. Crosses zero
    /// linearly where the concurrence vanishes.
    pub margin: f64,
}

impl ConcurrenceResult {
    fn from_margin(margin: f64, method: ConcurrenceMethod) -> Result<Self> {
        let concurrence = margin.clamp(0.0, 1.0);
        Ok(ConcurrenceResult {
            concurrence,
            ef: entanglement_of_formation(concurrence)?,
            method,
            margin,
        })
    }
}

/// Wootters concurrence `max(0, √Λ₁ − √Λ₂ − √Λ₃ − √Λ₄)` of an arbitrary
/// two-qubit state, `Λ` the spectrum of `ρ (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`.
///
/// The `√Λ` are obtained directly as the singular values of `Wᵀ(σ_y⊗σ_y)W`
/// with `W = V√P` from `ρ = VPV†`, read off the spectrum of the Hermitian
/// dilation `[[0, τ], [τ†, 0]]`. This avoids taking square roots of
/// rounding-level eigenvalues.
pub fn concurrence_wootters(pair: &PairState) -> Result<ConcurrenceResult> {
    let eig = eigendecompose(&DenseHermitian::new(pair.rho4.clone())?)?;
    if let Some(&p) = eig.values.iter().find(|&&p| p < -STATE_TOL) {
        return Err(Error::NegativeSpectrum(p));
    }
    let mut w = eig.vectors.clone();
    for k in 0..4 {
        let sp = eig.values[k].max(0.0).sqrt();
        for i in 0..4 {
            w[(i, k)] *= sp;
        }
    }
    // σ_y ⊗ σ_y is real: anti-diagonal (-1, 1, 1, -1).
    let yy = CMatrix::from_real_rows(&[
        &[0.0, 0.0, 0.0, -1.0],
        &[0.0, 0.0, 1.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[-1.0, 0.0, 0.0, 0.0],
    ]);
    let mut wt = CMatrix::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            wt[(i, j)] = w[(j, i)];
        }
    }
    let tau = &(&wt * &yy) * &w;

    let mut dilation = CMatrix::zeros(8);
    for i in 0..4 {
        for j in 0..4 {
            dilation[(i, 4 + j)] = tau[(i, j)];
            dilation[(4 + j, i)] = tau[(i, j)].conj();
        }
    }
    let spectrum = eigendecompose(&DenseHermitian::symmetrized(dilation))?.values;
    let mut sv: Vec<f64> = spectrum[4..].iter().map(|&s| s.max(0.0)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let margin = sv[0] - sv[1] - sv[2] - sv[3];
    ConcurrenceResult::from_margin(margin, ConcurrenceMethod::WoottersGeneral)
}

/// `C = 2 max(0, |z| − √(u⁺u⁻))` for states with the X shape, where
/// `u⁺ = ρ₀₀`, `u⁻ = ρ₃₃` and `z = ρ₂₁`.
pub fn concurrence_x_form(pair: &PairState) -> Result<ConcurrenceResult> {
    let deviation = pair.x_form_deviation();
    if deviation > X_FORM_TOL {
        return Err(Error::NotXForm { deviation });
    }
    let u_plus = pair.rho4[(0, 0)].re;
    let u_minus = pair.rho4[(3, 3)].re;
    let z = pair.rho4[(2, 1)];
    let product = u_plus * u_minus;
    if product < -STATE_TOL {
        return Err(Error::NegativeSpectrum(product));
    }
    let margin = 2.0 * (z.norm() - product.max(0.0).sqrt());
    ConcurrenceResult::from_margin(margin, ConcurrenceMethod::XForm)
}

/// Binary entropy of `x = (1 + √(1 − C²))/2`.
pub fn entanglement_of_formation(concurrence: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&concurrence) {
        return Err(Error::ConcurrenceRange(concurrence));
    }
    let x = 0.5 * (1.0 + (1.0 - concurrence * concurrence).sqrt());
    let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok((h(x) + h(1.0 - x)).clamp(0.0, 1.0))
}

/// Zero-field concurrence of a pair from its reduced susceptibility:
/// `C = T max(0, 2|χ̃ − 1/(2T)| − χ̃)`.
pub fn concurrence_from_susceptibility(chi_pair: f64, temperature: f64) -> Result<ConcurrenceResult> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!("temperature must be > 0, got {temperature}")));
    }
    if !chi_pair.is_finite() {
        return Err(Error::Domain(format!("pair susceptibility must be finite, got {chi_pair}")));
    }
    let margin = temperature * (2.0 * (chi_pair - 0.5 / temperature).abs() - chi_pair);
    ConcurrenceResult::from_margin(margin, ConcurrenceMethod::Susceptibility)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenuineCheck {
    pub genuine: bool,
    /// `J₁(1 + √5)/4`.
    pub bound: f64,
    /// `bound − energy`; positive when the criterion holds.
    pub margin: f64,
}

pub fn genuine_tripartite_bound(j1: f64) -> f64 {
    j1 * (1.0 + 5f64.sqrt()) / 4.0
}

/// Trimer energy below `J₁(1+√5)/4` certifies genuine tripartite
/// entanglement.
pub fn genuine_tripartite_check(trimer_energy: f64, j1: f64) -> GenuineCheck {
    let bound = genuine_tripartite_bound(j1);
    GenuineCheck {
        genuine: trimer_energy < bound,
        bound,
        margin: bound - trimer_energy,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub quantity: String,
    pub threshold: f64,
    pub bracket: (f64, f64),
    /// Scanned values at the two bracket ends.
    pub values: (f64, f64),
    pub tolerance: f64,
    /// Number of sign changes seen by the coarse scan; the reported
    /// threshold is always the lowest one.
    pub crossings: usize,
}

impl ThresholdResult {
    pub fn is_multiple(&self) -> bool {
        self.crossings > 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Threshold {
    Found(ThresholdResult),
    Absent { quantity: String, range: (f64, f64) },
}

impl Threshold {
    pub fn value(&self) -> Option<f64> {
        match self {
            Threshold::Found(r) => Some(r.threshold),
            Threshold::Absent { .. } => None,
        }
    }

    pub fn found(&self) -> Option<&ThresholdResult> {
        match self {
            Threshold::Found(r) => Some(r),
            Threshold::Absent { .. } => None,
        }
    }
}

pub const MIN_SCAN_POINTS: usize = 64;

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub points: usize,
    pub tolerance: f64,
}

impl ScanOptions {
    /// Kelvin-axis default: 0.1 K.
    pub fn temperature() -> Self {
        ScanOptions {
            points: MIN_SCAN_POINTS,
            tolerance: 0.1,
        }
    }

    /// Oersted-axis default: 1 Oe.
    pub fn field() -> Self {
        ScanOptions {
            points: MIN_SCAN_POINTS,
            tolerance: 1.0,
        }
    }

    pub fn with_points(mut self, points: usize) -> Self {
        self.points = points;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

fn sign_class(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Locates the lowest point in `[lo, hi]` where `scan` changes sign (or
/// moves between non-zero and exactly zero). A coarse uniform pre-scan of at
/// least [`MIN_SCAN_POINTS`] points finds candidate intervals; the lowest is
/// bisected until narrower than the tolerance.
pub fn find_threshold<F>(quantity: &str, mut scan: F, lo: f64, hi: f64, opts: ScanOptions) -> Result<Threshold>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(hi > lo) || !(opts.tolerance > 0.0) {
        return Err(Error::Domain(format!(
            "threshold search needs lo < hi and a positive tolerance (got [{lo}, {hi}], tol {})",
            opts.tolerance
        )));
    }
    let points = opts.points.max(MIN_SCAN_POINTS);
    let xs: Vec<f64> = (0..points)
        .map(|k| {
            if k + 1 == points {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (points - 1) as f64
            }
        })
        .collect();
    let mut values = Vec::with_capacity(points);
    for &x in &xs {
        values.push(scan(x)?);
    }
    let changes: Vec<usize> = (1..points)
        .filter(|&k| sign_class(values[k - 1]) != sign_class(values[k]))
        .collect();
    let Some(&first) = changes.first() else {
        return Ok(Threshold::Absent {
            quantity: quantity.to_string(),
            range: (lo, hi),
        });
    };

    let (mut a, mut b) = (xs[first - 1], xs[first]);
    let (mut fa, mut fb) = (values[first - 1], values[first]);
    let class = sign_class(fa);
    while b - a > opts.tolerance {
        let mid = 0.5 * (a + b);
        let fm = scan(mid)?;
        if sign_class(fm) == class {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
    }
    Ok(Threshold::Found(ThresholdResult {
        quantity: quantity.to_string(),
        threshold: 0.5 * (a + b),
        bracket: (a, b),
        values: (fa, fb),
        tolerance: opts.tolerance,
        crossings: changes.len(),
    }))
}

/// Pairwise concurrence of two sites of a thermal state via the general
/// Wootters route.
pub fn pair_concurrence(state: &ThermalState, i: usize, j: usize) -> Result<ConcurrenceResult> {
    concurrence_wootters(&PairState::from_state(state, i, j)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClusterSpec;
    use crate::thermal::{subsystem_susceptibility, ThermalModel};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pure(psi: [Complex64; 4]) -> PairState {
        let mut m = CMatrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        PairState::new(m, (0, 1)).unwrap()
    }

    fn singlet() -> PairState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        pure([c64(0.0, 0.0), c64(s, 0.0), c64(-s, 0.0), c64(0.0, 0.0)])
    }

    #[test]
    fn witness_examples() {
        let (n, t) = (5, 37.0);
        let boundary = n as f64 * 0.5 / (3.0 * t);
        assert!(witness_value(boundary, t, n, 0.5).unwrap().abs() < 1e-15);
        let curie = n as f64 / (4.0 * t);
        assert!((witness_value(curie, t, n, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(witness_value(1.0, 0.0, n, 0.5).is_err());
        assert!(witness_value(1.0, -1.0, n, 0.5).is_err());
    }

    #[test]
    fn singlet_and_product() {
        let s = singlet();
        let w = concurrence_wootters(&s).unwrap();
        assert!((w.concurrence - 1.0).abs() < 1e-12);
        assert!((w.ef - 1.0).abs() < 1e-10);
        let x = concurrence_x_form(&s).unwrap();
        assert!((x.concurrence - 1.0).abs() < 1e-14);

        let one = c64(1.0, 0.0);
        let zero = c64(0.0, 0.0);
        let p = pure([zero, one, zero, zero]);
        assert_eq!(concurrence_wootters(&p).unwrap().concurrence, 0.0);
        assert_eq!(concurrence_x_form(&p).unwrap().concurrence, 0.0);
    }

    #[test]
    fn maximally_mixed_is_separable() {
        let p = PairState::new(CMatrix::identity(4).scale_real(0.25), (0, 1)).unwrap();
        assert_eq!(concurrence_x_form(&p).unwrap().concurrence, 0.0);
        assert_eq!(concurrence_wootters(&p).unwrap().concurrence, 0.0);
    }

    #[test]
    fn bell_phi_plus_is_general_only() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let zero = c64(0.0, 0.0);
        let phi = pure([c64(s, 0.0), zero, zero, c64(0.0, s)]);
        assert!((concurrence_wootters(&phi).unwrap().concurrence - 1.0).abs() < 1e-12);
        assert!(matches!(concurrence_x_form(&phi), Err(Error::NotXForm { .. })));
    }

    #[test]
    fn invalid_pair_states_rejected() {
        assert!(PairState::new(CMatrix::identity(4), (0, 1)).is_err());
        assert!(PairState::new(CMatrix::identity(2).scale_real(0.5), (0, 1)).is_err());
        let neg = CMatrix::from_real_diagonal(&[0.6, 0.6, -0.2, 0.0]);
        let p = PairState::new(neg, (0, 1)).unwrap();
        assert!(matches!(concurrence_wootters(&p), Err(Error::NegativeSpectrum(_))));
    }

    #[test]
    fn ef_examples() {
        assert_eq!(entanglement_of_formation(0.0).unwrap(), 0.0);
        assert!((entanglement_of_formation(1.0).unwrap() - 1.0).abs() < 1e-15);
        // x = 0.9 for C = 0.6.
        let expected = -0.9 * 0.9f64.log2() - 0.1 * 0.1f64.log2();
        assert!((entanglement_of_formation(0.6).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.4690).abs() < 1e-4);
        assert!(entanglement_of_formation(-0.1).is_err());
        assert!(entanglement_of_formation(1.1).is_err());
    }

    #[test]
    fn ef_strictly_increasing() {
        let mut prev = 0.0;
        for k in 1..=10_000 {
            let e = entanglement_of_formation(k as f64 / 10_000.0).unwrap();
            assert!(e > prev, "not increasing at C = {}", k as f64 / 1e4);
            prev = e;
        }
    }

    #[test]
    fn susceptibility_route_examples() {
        let t = 3.0;
        assert!((concurrence_from_susceptibility(0.0, t).unwrap().concurrence - 1.0).abs() < 1e-15);
        assert_eq!(concurrence_from_susceptibility(0.5 / t, t).unwrap().concurrence, 0.0);
        assert!(concurrence_from_susceptibility(0.1, 0.0).is_err());
    }

    #[test]
    fn genuine_bound() {
        let g = genuine_tripartite_check(-224.9, -224.9);
        assert!(g.genuine);
        assert!((g.bound + 181.95).abs() < 0.005);
        assert!(!genuine_tripartite_check(-100.0, -224.9).genuine);
    }

    #[test]
    fn threshold_of_linear_function() {
        let r = find_threshold("lin", |t| Ok(t - 100.0), 1.0, 500.0, ScanOptions::temperature()).unwrap();
        let r = r.found().unwrap();
        assert!((r.threshold - 100.0).abs() <= 0.1);
        assert!(r.bracket.1 - r.bracket.0 <= 0.1);
        assert!(r.values.0 < 0.0 && r.values.1 >= 0.0);
        assert_eq!(r.crossings, 1);
    }

    #[test]
    fn threshold_absent_and_multiple() {
        let r = find_threshold("pos", |t| Ok(t + 1.0), 1.0, 5.0, ScanOptions::temperature()).unwrap();
        assert!(matches!(r, Threshold::Absent { .. }));
        let r = find_threshold("sin", |t: f64| Ok(t.sin()), 1.0, 10.0, ScanOptions::temperature().with_tolerance(1e-6)).unwrap();
        let r = r.found().unwrap();
        assert!((r.threshold - std::f64::consts::PI).abs() < 1e-6);
        assert!(r.is_multiple());
    }

    #[test]
    fn threshold_clamped_to_zero() {
        let r = find_threshold("clamped", |t| Ok((50.0 - t).max(0.0)), 1.0, 100.0, ScanOptions::temperature()).unwrap();
        assert!((r.value().unwrap() - 50.0).abs() <= 0.1);
    }

    #[test]
    fn afm_pair_closed_form() {
        let model = ThermalModel::new(&ClusterSpec::pair(-1.0).unwrap(), 0.0).unwrap();
        for k in 0..=98 {
            let t = 0.1 + 0.05 * k as f64;
            let s = model.state(t).unwrap();
            let c = pair_concurrence(&s, 0, 1).unwrap().concurrence;
            let e = (1.0 / t).exp();
            let expected = ((e - 3.0) / (e + 3.0)).max(0.0);
            assert!((c - expected).abs() < 1e-10, "T = {t}: {c} vs {expected}");
        }
    }

    #[test]
    fn method_agreement_on_preset() {
        let model = ThermalModel::new(&ClusterSpec::na2cu5si4o14(), 0.0).unwrap();
        let s = model.state(50.0).unwrap();
        for (i, j) in [(0, 1), (1, 2), (0, 2), (3, 4)] {
            let pair = PairState::from_state(&s, i, j).unwrap();
            assert!(pair.x_form_deviation() < 1e-12);
            let w = concurrence_wootters(&pair).unwrap();
            let x = concurrence_x_form(&pair).unwrap();
            let chi = subsystem_susceptibility(&s, &[i, j]).unwrap();
            let q = concurrence_from_susceptibility(chi, 50.0).unwrap();
            assert!((w.concurrence - x.concurrence).abs() < 1e-10);
            assert!((w.concurrence - q.concurrence).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn isolated_pair_witness_is_sound(j in -50.0f64..50.0, t in 0.05f64..100.0) {
            let model = ThermalModel::new(&ClusterSpec::pair(j).unwrap(), 0.0).unwrap();
            let s = model.state(t).unwrap();
            let chi = subsystem_susceptibility(&s, &[0, 1]).unwrap();
            let ew = witness_value(chi, t, 2, 0.5).unwrap();
            let c = pair_concurrence(&s, 0, 1).unwrap().concurrence;
            if ew < -1e-9 {
                prop_assert!(c > 0.0, "EW = {ew} but C = {c}");
            }
        }

        #[test]
        fn random_pure_states_general_vs_closed_form(
            re in proptest::array::uniform4(-1.0f64..1.0),
            im in proptest::array::uniform4(-1.0f64..1.0),
        ) {
            let norm: f64 = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let psi = [0, 1, 2, 3].map(|k| c64(re[k] / norm, im[k] / norm));
            // Pure-state concurrence is 2|ad − bc|.
            let expected = 2.0 * (psi[0] * psi[3] - psi[1] * psi[2]).norm();
            let c = concurrence_wootters(&pure(psi)).unwrap().concurrence;
            prop_assert!((c - expected).abs() < 1e-9, "{c} vs {expected}");
        }

        #[test]
        fn ef_in_unit_interval_for_any_susceptibility(chi in -10.0f64..10.0, t in 1e-3f64..1e3) {
            let r = concurrence_from_susceptibility(chi, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.ef));
        }
    }
}
