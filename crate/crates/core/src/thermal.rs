//! Gibbs states and the observables computed from them.
//!
//! Susceptibilities are reduced: `χ̃^α = (1/T)(Σ_ij ⟨S^α_i S^α_j⟩ − ⟨Σ_i S^α_i⟩²)`
//! in 1/K; the laboratory value is `(gμ_B)²/k_B · χ̃`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigendecompose, partial_trace, CMatrix, DenseHermitian, EigenSystem};
pub use crate::model::Axis;
use crate::model::{build_hamiltonian, single_spin, ClusterSpec};

/// Imaginary parts of expectation values above this are treated as errors.
pub const IMAG_TOL: f64 = 1e-10;

/// Boltzmann weights below this are flushed to zero.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Total susceptibility below which a subsystem ratio is undefined.
pub const RATIO_CHI_FLOOR: f64 = 1e-15;

/// Gibbs state of a cluster at one temperature and field.
#[derive(Debug, Clone)]
pub struct ThermalState {
    pub rho: DenseHermitian,
    pub temperature: f64,
    pub field_oe: f64,
    pub n_spins: usize,
    /// Normalised Boltzmann weights of the eigenvectors the state was built
    /// from, in the same order as `energies`.
    pub populations: Vec<f64>,
    pub energies: Vec<f64>,
}

/// `ρ = Σ_k w_k |v_k⟩⟨v_k|` with `w_k ∝ exp(−(E_k − E_0)/T)`. At `T = 0` the
/// state is the uniform mixture over the ground eigenspace.
pub fn gibbs_state(eig: &EigenSystem, temperature: f64) -> Result<ThermalState> {
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!("temperature must be ≥ 0 K, got {temperature}")));
    }
    let n_spins = eig.source_dim.trailing_zeros() as usize;
    let e0 = eig.values[0];
    let mut weights: Vec<f64> = if temperature == 0.0 {
        let tol = 1e-9 * e0.abs().max(1.0);
        eig.values
            .iter()
            .map(|&e| if e - e0 <= tol { 1.0 } else { 0.0 })
            .collect()
    } else {
        eig.values
            .iter()
            .map(|&e| {
                let w = (-(e - e0) / temperature).exp();
                if w < WEIGHT_FLOOR {
                    0.0
                } else {
                    w
                }
            })
            .collect()
    };
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    let rho = DenseHermitian::symmetrized(eig.spectral_sum(&weights));
    Ok(ThermalState {
        rho,
        temperature,
        field_oe: f64::NAN,
        n_spins,
        populations: weights,
        energies: eig.values.clone(),
    })
}

impl ThermalState {
    pub fn with_field(mut self, field_oe: f64) -> Self {
        self.field_oe = field_oe;
        self
    }

    /// Reduced density matrix of `sites`, first site most significant.
    pub fn reduced(&self, sites: &[usize]) -> Result<CMatrix> {
        partial_trace(&self.rho, self.n_spins, sites)
    }

    /// `Σ_k w_k E_k`.
    pub fn mean_energy(&self) -> f64 {
        self.populations
            .iter()
            .zip(&self.energies)
            .map(|(w, e)| w * e)
            .sum()
    }
}

/// `tr(ρ · op)`; fails if the imaginary part exceeds [`IMAG_TOL`].
pub fn expectation(state: &ThermalState, op: &CMatrix) -> Result<f64> {
    real_trace(&state.rho, op)
}

fn real_trace(rho: &CMatrix, op: &CMatrix) -> Result<f64> {
    let t = rho.trace_product(op)?;
    if t.im.abs() > IMAG_TOL {
        return Err(Error::ImaginaryResidue(t.im));
    }
    Ok(t.re)
}

fn check_site(site: usize, n_spins: usize) -> Result<()> {
    if site >= n_spins {
        return Err(Error::SiteIndex { site, n_spins });
    }
    Ok(())
}

/// `⟨S^α_a S^α_b⟩` from a two-site density matrix.
pub(crate) fn pair_correlation(rho_pair: &CMatrix, axis: Axis) -> Result<f64> {
    let s = single_spin(axis);
    real_trace(rho_pair, &s.kron(&s))
}

/// `⟨S^α⟩` from a single-site density matrix.
pub(crate) fn site_moment(rho_site: &CMatrix, axis: Axis) -> Result<f64> {
    real_trace(rho_site, &single_spin(axis))
}

/// `⟨S^α_i S^α_j⟩`. The self term is exactly 1/4.
pub fn correlation(state: &ThermalState, i: usize, j: usize, axis: Axis) -> Result<f64> {
    check_site(i, state.n_spins)?;
    check_site(j, state.n_spins)?;
    if i == j {
        return Ok(0.25);
    }
    pair_correlation(&state.reduced(&[i, j])?, axis)
}

/// `⟨S_i · S_j⟩` summed over the three axes.
pub fn scalar_correlation(state: &ThermalState, i: usize, j: usize) -> Result<f64> {
    Axis::ALL
        .iter()
        .map(|&a| correlation(state, i, j, a))
        .sum()
}

/// Temperature-scaled fluctuation `Σ_ab ⟨S^α_a S^α_b⟩ − (Σ_a ⟨S^α_a⟩)²` of
/// the `k`-site operator `rho_sub`.
fn fluctuation(rho_sub: &CMatrix, k: usize, axis: Axis) -> Result<f64> {
    let mut second = 0.25 * k as f64;
    let mut first = 0.0;
    for a in 0..k {
        first += site_moment(&partial_trace(rho_sub, k, &[a])?, axis)?;
        for b in a + 1..k {
            second += 2.0 * pair_correlation(&partial_trace(rho_sub, k, &[a, b])?, axis)?;
        }
    }
    Ok(second - first * first)
}

/// Per-axis reduced susceptibility of `sites`, evaluated on the reduced
/// density matrix of those sites.
pub fn subsystem_susceptibility_axis(state: &ThermalState, sites: &[usize], axis: Axis) -> Result<f64> {
    require_positive_temperature(state.temperature)?;
    let rho_sub = state.reduced(sites)?;
    Ok(fluctuation(&rho_sub, sites.len(), axis)? / state.temperature)
}

/// Axis-averaged reduced susceptibility of `sites`.
pub fn subsystem_susceptibility(state: &ThermalState, sites: &[usize]) -> Result<f64> {
    require_positive_temperature(state.temperature)?;
    let rho_sub = state.reduced(sites)?;
    let mut sum = 0.0;
    for axis in Axis::ALL {
        sum += fluctuation(&rho_sub, sites.len(), axis)?;
    }
    Ok(sum / (3.0 * state.temperature))
}

fn require_positive_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "susceptibility needs T > 0 K (fluctuation form diverges), got {t}"
        )));
    }
    Ok(())
}

/// Reduced susceptibility of the whole cluster along `axis`.
pub fn susceptibility(
    eig: &EigenSystem,
    spec: &ClusterSpec,
    temperature: f64,
    field_oe: f64,
    axis: Axis,
) -> Result<f64> {
    require_positive_temperature(temperature)?;
    let state = gibbs_state(eig, temperature)?.with_field(field_oe);
    subsystem_susceptibility_axis(&state, &spec.all_sites(), axis)
}

pub fn mean_susceptibility(chi_x: f64, chi_y: f64, chi_z: f64) -> f64 {
    (chi_x + chi_y + chi_z) / 3.0
}

/// `⟨𝓗_Tri⟩ = Σ −J ⟨S_i·S_j⟩` over bonds internal to the `trimer` subsystem
/// (Zeeman term excluded).
pub fn trimer_energy(state: &ThermalState, spec: &ClusterSpec) -> Result<f64> {
    let sites = spec.subsystem("trimer")?;
    let mut energy = 0.0;
    let mut any = false;
    for b in spec.internal_bonds(sites) {
        any = true;
        energy -= b.coupling * scalar_correlation(state, b.i, b.j)?;
    }
    if !any {
        return Err(Error::InvalidSpec("trimer subsystem has no internal bonds".into()));
    }
    Ok(energy)
}

/// The common coupling of the bonds inside the `trimer` subsystem.
pub fn trimer_coupling(spec: &ClusterSpec) -> Result<f64> {
    let sites = spec.subsystem("trimer")?;
    let mut couplings = spec.internal_bonds(sites).map(|b| b.coupling);
    let first = couplings
        .next()
        .ok_or_else(|| Error::InvalidSpec("trimer subsystem has no internal bonds".into()))?;
    if couplings.any(|j| j != first) {
        return Err(Error::InvalidSpec("trimer bonds do not share one coupling".into()));
    }
    Ok(first)
}

/// A cluster diagonalised once at a fixed field, from which states at any
/// temperature are drawn.
#[derive(Debug, Clone)]
pub struct ThermalModel {
    pub spec: ClusterSpec,
    pub field_oe: f64,
    pub eig: EigenSystem,
}

impl ThermalModel {
    pub fn new(spec: &ClusterSpec, field_oe: f64) -> Result<Self> {
        let h = build_hamiltonian(spec, field_oe)?;
        Ok(ThermalModel {
            spec: spec.clone(),
            field_oe,
            eig: eigendecompose(&h)?,
        })
    }

    pub fn state(&self, temperature: f64) -> Result<ThermalState> {
        Ok(gibbs_state(&self.eig, temperature)?.with_field(self.field_oe))
    }

    /// Axis-averaged susceptibility of the whole cluster.
    pub fn chi_total(&self, temperature: f64) -> Result<f64> {
        subsystem_susceptibility(&self.state(temperature)?, &self.spec.all_sites())
    }
}

/// `R_sub(T) = χ̃_sub(T) / χ̃_total(T)` for named subsystems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub temperatures: Vec<f64>,
    /// `None` where the total susceptibility is below [`RATIO_CHI_FLOOR`].
    pub ratios: BTreeMap<String, Vec<Option<f64>>>,
}

impl RatioTable {
    /// Linear interpolation of `R_name` at `t`; `None` outside the table or
    /// next to an undefined entry.
    pub fn interpolate(&self, name: &str, t: f64) -> Result<Option<f64>> {
        let r = self
            .ratios
            .get(name)
            .ok_or_else(|| Error::MissingSubsystem(name.to_string()))?;
        Ok(interpolate_optional(&self.temperatures, r, t))
    }
}

pub(crate) fn interpolate_optional(xs: &[f64], ys: &[Option<f64>], x: f64) -> Option<f64> {
    let (first, last) = (*xs.first()?, *xs.last()?);
    if !(x >= first && x <= last) {
        return None;
    }
    let k = xs.partition_point(|&v| v < x);
    if xs[k] == x {
        return ys[k];
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    let (y0, y1) = (ys[k - 1]?, ys[k]?);
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Evaluates the subsystem ratios on a temperature grid (parallel over T).
pub fn ratio_table(
    spec: &ClusterSpec,
    subsystems: &[(String, Vec<usize>)],
    temperatures: &[f64],
    field_oe: f64,
) -> Result<RatioTable> {
    if let Some(&t) = temperatures.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::Domain(format!("ratio table needs T > 0, got {t}")));
    }
    let model = ThermalModel::new(spec, field_oe)?;
    let all = spec.all_sites();
    let rows: Vec<Vec<Option<f64>>> = temperatures
        .par_iter()
        .map(|&t| {
            let state = model.state(t)?;
            let total = subsystem_susceptibility(&state, &all)?;
            subsystems
                .iter()
                .map(|(_, sites)| {
                    if total.abs() < RATIO_CHI_FLOOR {
                        Ok(None)
                    } else {
                        Ok(Some(subsystem_susceptibility(&state, sites)? / total))
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let ratios = subsystems
        .iter()
        .enumerate()
        .map(|(k, (name, _))| (name.clone(), rows.iter().map(|r| r[k]).collect()))
        .collect();
    Ok(RatioTable {
        temperatures: temperatures.to_vec(),
        ratios,
    })
}

/// Named columns tabulated against a strictly increasing abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub abscissa_name: String,
    pub abscissa: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Curve {
    pub fn new(abscissa_name: impl Into<String>, abscissa: Vec<f64>) -> Result<Self> {
        if abscissa.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("curve abscissa must be strictly increasing".into()));
        }
        Ok(Curve {
            abscissa_name: abscissa_name.into(),
            abscissa,
            columns: Vec::new(),
        })
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.abscissa.len() {
            return Err(Error::DimensionMismatch {
                left: values.len(),
                right: self.abscissa.len(),
            });
        }
        self.columns.push((name.into(), values));
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.abscissa_name.clone()];
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        for (k, x) in self.abscissa.iter().enumerate() {
            let mut row = vec![fmt_f64(*x)];
            row.extend(self.columns.iter().map(|(_, v)| fmt_f64(v[k])));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            });
        }
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            for (c, field) in rec.iter().enumerate() {
                let v = field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: k + 2,
                    message: format!("column {}: {e}", c + 1),
                })?;
                cols[c].push(v);
            }
        }
        let mut cols = cols.into_iter();
        let mut curve = Curve::new(header[0].clone(), cols.next().unwrap_or_default())?;
        for (name, values) in header[1..].iter().zip(cols) {
            curve.push_column(name.clone(), values)?;
        }
        Ok(curve)
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_spin_operators, total_sz, ClusterSpec};
    use num_complex::Complex64;

    fn preset_model(field: f64) -> ThermalModel {
        ThermalModel::new(&ClusterSpec::na2cu5si4o14(), field).unwrap()
    }

    #[test]
    fn infinite_temperature_is_maximally_mixed() {
        let m = preset_model(0.0);
        let s = m.state(1e9).unwrap();
        let dev = (&*s.rho - &CMatrix::identity(32).scale_real(1.0 / 32.0)).max_abs();
        assert!(dev < 1e-6);
    }

    #[test]
    fn zero_temperature_is_ground_doublet() {
        let m = preset_model(0.0);
        let s = m.state(0.0).unwrap();
        assert_eq!(s.populations.iter().filter(|&&w| w > 0.0).count(), 2);
        // ρ² = ρ/2 for a rank-2 projector divided by 2.
        let sq = &*s.rho * &*s.rho;
        assert!((&sq - &s.rho.scale_real(0.5)).max_abs() < 1e-12);
    }

    #[test]
    fn negative_temperature_rejected() {
        let m = preset_model(0.0);
        assert!(matches!(m.state(-1.0), Err(Error::Domain(_))));
        assert!(matches!(m.state(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn afm_pair_bond_correlation_closed_form() {
        let m = ThermalModel::new(&ClusterSpec::pair(-1.0).unwrap(), 0.0).unwrap();
        let t = 1.0 / 3f64.ln();
        let s = m.state(t).unwrap();
        let got = scalar_correlation(&s, 0, 1).unwrap();
        let beta = 1.0 / t;
        let expected = -0.75 * (beta.exp() - 1.0) / (beta.exp() + 3.0);
        assert!((got - expected).abs() < 1e-12);
        assert!((got + 0.25).abs() < 1e-12);
    }

    #[test]
    fn trivial_expectations() {
        let m = preset_model(0.0);
        let s = m.state(50.0).unwrap();
        assert!((expectation(&s, &CMatrix::identity(32)).unwrap() - 1.0).abs() < 1e-12);
        assert!(expectation(&s, &total_sz(5)).unwrap().abs() < 1e-12);
        let h = build_hamiltonian(&m.spec, 0.0).unwrap();
        let hot = m.state(1e12).unwrap();
        assert!(expectation(&hot, &h).unwrap().abs() < 1e-6);
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let m = preset_model(0.0);
        let s = m.state(50.0).unwrap();
        assert!(matches!(
            expectation(&s, &CMatrix::identity(4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn expectation_rejects_imaginary_residue() {
        let m = ThermalModel::new(&ClusterSpec::free_spins(1).unwrap(), 0.0).unwrap();
        let s = m.state(1.0).unwrap();
        let anti = CMatrix::from_rows(vec![
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 1.0),
        ]);
        assert!(matches!(expectation(&s, &anti), Err(Error::ImaginaryResidue(_))));
    }

    #[test]
    fn correlation_properties() {
        let m = preset_model(0.0);
        let s = m.state(30.0).unwrap();
        assert_eq!(correlation(&s, 2, 2, Axis::X).unwrap(), 0.25);
        for (i, j) in [(0, 1), (0, 2), (3, 4), (1, 4)] {
            let zs: Vec<f64> = Axis::ALL.iter().map(|&a| correlation(&s, i, j, a).unwrap()).collect();
            assert!((zs[0] - zs[1]).abs() < 1e-10 && (zs[1] - zs[2]).abs() < 1e-10);
            assert!((correlation(&s, j, i, Axis::Z).unwrap() - zs[2]).abs() < 1e-14);
        }
        assert!(matches!(correlation(&s, 0, 5, Axis::Z), Err(Error::SiteIndex { .. })));
    }

    #[test]
    fn next_nearest_trimer_correlation_positive_at_low_t() {
        let m = preset_model(0.0);
        let s = m.state(0.5).unwrap();
        let got = correlation(&s, 0, 2, Axis::Z).unwrap();
        // Brute force with full-register operators.
        let ops = build_spin_operators(5).unwrap();
        let op = &**ops.site(0, Axis::Z) * &**ops.site(2, Axis::Z);
        let oracle = expectation(&s, &op).unwrap();
        assert!(got > 0.0);
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn isolated_singlet_pair_has_zero_susceptibility_at_low_t() {
        let m = ThermalModel::new(&ClusterSpec::pair(-1000.0).unwrap(), 0.0).unwrap();
        let s = m.state(1.0).unwrap();
        assert!(subsystem_susceptibility(&s, &[0, 1]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn uncorrelated_pair_has_half_curie() {
        let m = ThermalModel::new(&ClusterSpec::free_spins(2).unwrap(), 0.0).unwrap();
        let t = 7.0;
        let s = m.state(t).unwrap();
        assert!((subsystem_susceptibility(&s, &[0, 1]).unwrap() - 1.0 / (2.0 * t)).abs() < 1e-14);
    }

    #[test]
    fn susceptibility_requires_positive_temperature() {
        let m = preset_model(0.0);
        let s = m.state(0.0).unwrap();
        assert!(matches!(subsystem_susceptibility(&s, &[0, 1]), Err(Error::Domain(_))));
        assert!(susceptibility(&m.eig, &m.spec, 0.0, 0.0, Axis::Z).is_err());
    }

    #[test]
    fn mean_of_axes() {
        assert_eq!(mean_susceptibility(1.0, 1.0, 1.0), 1.0);
        assert_eq!(mean_susceptibility(0.0, 0.0, 3.0), 1.0);
    }

    #[test]
    fn full_site_subsystem_matches_total() {
        let m = preset_model(100.0);
        let s = m.state(40.0).unwrap();
        for axis in Axis::ALL {
            let total = susceptibility(&m.eig, &m.spec, 40.0, 100.0, axis).unwrap();
            let sub = subsystem_susceptibility_axis(&s, &[0, 1, 2, 3, 4], axis).unwrap();
            assert!((total - sub).abs() < 1e-14);
        }
    }

    #[test]
    fn total_susceptibility_matches_dense_operator_route() {
        let m = preset_model(3000.0);
        let t = 25.0;
        let s = m.state(t).unwrap();
        let ops = build_spin_operators(5).unwrap();
        for axis in Axis::ALL {
            let tot = ops.total(axis);
            let sq = &*tot * &*tot;
            let oracle =
                (expectation(&s, &sq).unwrap() - expectation(&s, &tot).unwrap().powi(2)) / t;
            let got = susceptibility(&m.eig, &m.spec, t, 3000.0, axis).unwrap();
            assert!((got - oracle).abs() < 1e-12, "{axis}: {got} vs {oracle}");
        }
    }

    #[test]
    fn trimer_energy_limits() {
        let m = preset_model(0.0);
        let cold = trimer_energy(&m.state(0.0).unwrap(), &m.spec).unwrap();
        assert!(cold <= -181.95, "{cold}");
        assert!((cold + 224.9).abs() < 0.5);
        let hot = trimer_energy(&m.state(1e12).unwrap(), &m.spec).unwrap();
        assert!(hot.abs() < 1e-6);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=500 {
            let e = trimer_energy(&m.state(k as f64).unwrap(), &m.spec).unwrap();
            assert!(e >= prev - 1e-9, "not monotone at T = {k}");
            prev = e;
        }
    }

    #[test]
    fn trimer_energy_needs_subsystem() {
        let m = ThermalModel::new(&ClusterSpec::pair(-1.0).unwrap(), 0.0).unwrap();
        let s = m.state(1.0).unwrap();
        assert!(matches!(trimer_energy(&s, &m.spec), Err(Error::MissingSubsystem(_))));
    }

    #[test]
    fn ratio_table_examples() {
        let free = ClusterSpec::free_spins(5).unwrap();
        let subs = vec![
            ("all".to_string(), vec![0, 1, 2, 3, 4]),
            ("dimer".to_string(), vec![3, 4]),
        ];
        let temps = [1.0, 10.0, 100.0];
        let table = ratio_table(&free, &subs, &temps, 0.0).unwrap();
        for k in 0..3 {
            assert!((table.ratios["all"][k].unwrap() - 1.0).abs() < 1e-14);
            assert!((table.ratios["dimer"][k].unwrap() - 0.4).abs() < 1e-14);
        }

        let spec = ClusterSpec::na2cu5si4o14();
        let subs = vec![
            ("trimer".to_string(), vec![0, 1, 2]),
            ("dimer".to_string(), vec![3, 4]),
        ];
        let table = ratio_table(&spec, &subs, &[300.0], 0.0).unwrap();
        let (rt, rd) = (table.ratios["trimer"][0].unwrap(), table.ratios["dimer"][0].unwrap());
        assert!(rt > 0.0 && rd > 0.0 && rt + rd > 0.0 && rt + rd < 2.0);
        assert!(ratio_table(&spec, &subs, &[0.0], 0.0).is_err());
    }

    #[test]
    fn ratio_interpolation_never_extrapolates() {
        let table = RatioTable {
            temperatures: vec![10.0, 20.0],
            ratios: BTreeMap::from([("a".to_string(), vec![Some(0.0), Some(1.0)])]),
        };
        assert_eq!(table.interpolate("a", 15.0).unwrap(), Some(0.5));
        assert_eq!(table.interpolate("a", 10.0).unwrap(), Some(0.0));
        assert_eq!(table.interpolate("a", 20.0).unwrap(), Some(1.0));
        assert_eq!(table.interpolate("a", 25.0).unwrap(), None);
        assert_eq!(table.interpolate("a", 5.0).unwrap(), None);
        assert!(table.interpolate("b", 15.0).is_err());
    }

    #[test]
    fn gibbs_energy_consistency() {
        for field in [0.0, 5000.0] {
            let m = preset_model(field);
            let h = build_hamiltonian(&m.spec, field).unwrap();
            for t in [0.5, 10.0, 150.0, 1000.0] {
                let s = m.state(t).unwrap();
                let direct = expectation(&s, &h).unwrap();
                let spectral = s.mean_energy();
                assert!((direct - spectral).abs() <= 1e-9 * spectral.abs().max(1.0));
            }
        }
    }

    #[test]
    fn curve_rejects_bad_shapes() {
        assert!(Curve::new("T", vec![1.0, 1.0]).is_err());
        let mut c = Curve::new("T", vec![1.0, 2.0]).unwrap();
        assert!(c.push_column("a", vec![1.0]).is_err());
    }

    #[test]
    fn curve_csv_round_trip() {
        let mut c = Curve::new("T_K", vec![1e-3, 1.0, 2.5]).unwrap();
        c.push_column("chi", vec![0.1, 1.0 / 3.0, 1e-300]).unwrap();
        let text = c.to_csv_string();
        assert!(text.starts_with("T_K,chi\n"));
        assert_eq!(Curve::from_csv_str(&text).unwrap(), c);
    }
}
