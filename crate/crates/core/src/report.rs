//! Model summaries, susceptibility curves and the zero-field entanglement
//! report with its temperature thresholds.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{
    find_threshold, genuine_tripartite_bound, genuine_tripartite_check, pair_concurrence, witness_value, ScanOptions,
    Threshold,
};
use crate::error::{Error, Result};
use crate::linalg::commutator_norm;
use crate::model::{build_hamiltonian, total_sz, ClusterSpec};
use crate::thermal::{
    subsystem_susceptibility, subsystem_susceptibility_axis, trimer_coupling, trimer_energy, Axis, Curve,
    ThermalModel, ThermalState,
};

/// Spin length of every site.
const SPIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub spec_hash: String,
    pub n_spins: usize,
    pub g_factor: f64,
    pub eigenvalues: Vec<f64>,
    pub ground_energy: f64,
    pub ground_multiplicity: usize,
    /// `‖[H(field), S^z_total]‖_F` at `commutator_field_oe`.
    pub commutator_norm: f64,
    pub commutator_field_oe: f64,
    pub orthonormality_residual: f64,
}

/// Zero-field spectrum plus a symmetry check of the Hamiltonian at `field_oe`.
pub fn model_summary(spec: &ClusterSpec, field_oe: f64) -> Result<ModelSummary> {
    let model = ThermalModel::new(spec, 0.0)?;
    let eig = &model.eig;
    let h = build_hamiltonian(spec, field_oe)?;
    let tol = 1e-9 * eig.values[0].abs().max(1.0);
    Ok(ModelSummary {
        spec_hash: spec.content_hash(),
        n_spins: spec.n_spins(),
        g_factor: spec.g_factor(),
        eigenvalues: eig.values.clone(),
        ground_energy: eig.values[0],
        ground_multiplicity: eig.ground_multiplicity(tol),
        commutator_norm: commutator_norm(&h, &total_sz(spec.n_spins()))?,
        commutator_field_oe: field_oe,
        orthonormality_residual: eig.orthonormality_residual(),
    })
}

/// Whole-cluster reduced susceptibility against temperature: per-axis
/// values, their mean and `T·χ̃`.
pub fn susceptibility_curve(spec: &ClusterSpec, temperatures: &[f64], field_oe: f64) -> Result<Curve> {
    let model = ThermalModel::new(spec, field_oe)?;
    let sites = spec.all_sites();
    let rows: Vec<[f64; 3]> = temperatures
        .par_iter()
        .map(|&t| {
            let state = model.state(t)?;
            let mut row = [0.0; 3];
            for (k, axis) in Axis::ALL.into_iter().enumerate() {
                row[k] = subsystem_susceptibility_axis(&state, &sites, axis)?;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut curve = Curve::new("T_K", temperatures.to_vec())?;
    for (k, axis) in Axis::ALL.into_iter().enumerate() {
        curve.push_column(format!("chi_{axis}"), rows.iter().map(|r| r[k]).collect())?;
    }
    let avg: Vec<f64> = rows.iter().map(|r| (r[0] + r[1] + r[2]) / 3.0).collect();
    let t_chi = avg.iter().zip(temperatures).map(|(c, t)| c * t).collect();
    curve.push_column("chi_avg", avg)?;
    curve.push_column("t_chi", t_chi)?;
    Ok(curve)
}

#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
    pub field_oe: f64,
    /// Threshold bisection tolerance in Kelvin.
    pub tolerance: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            t_min: 1.0,
            t_max: 400.0,
            steps: 400,
            field_oe: 0.0,
            tolerance: 1e-4,
        }
    }
}

impl ReportOptions {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.t_min > 0.0) || !(self.t_max > self.t_min) || self.steps < 2 {
            return Err(Error::Domain(format!(
                "temperature grid needs 0 < t_min < t_max and ≥ 2 steps (got {}..{}, {})",
                self.t_min, self.t_max, self.steps
            )));
        }
        let n = self.steps;
        Ok((0..n)
            .map(|k| {
                if k + 1 == n {
                    self.t_max
                } else {
                    self.t_min + (self.t_max - self.t_min) * k as f64 / (n - 1) as f64
                }
            })
            .collect())
    }
}

/// The diagnostics a spec supports, resolved from its named subsystems.
/// Pair subsystems are the two-site ones whose name starts with `pair_`.
#[derive(Debug, Clone)]
struct Diagnostics {
    all: Vec<usize>,
    trimer: Option<Vec<usize>>,
    dimer: Option<Vec<usize>>,
    pairs: Vec<(String, (usize, usize))>,
    j1: Option<f64>,
}

impl Diagnostics {
    fn resolve(spec: &ClusterSpec) -> Self {
        let named = |name: &str| spec.subsystem(name).ok().map(<[usize]>::to_vec);
        let pairs = spec
            .subsystems()
            .iter()
            .filter_map(|(name, sites)| match (name.strip_prefix("pair_"), sites.as_slice()) {
                (Some(tag), [i, j]) => Some((format!("ef_{tag}"), (*i, *j))),
                _ => None,
            })
            .collect();
        let trimer = named("trimer");
        Diagnostics {
            all: spec.all_sites(),
            j1: trimer.as_ref().and_then(|_| trimer_coupling(spec).ok()),
            trimer,
            dimer: named("dimer"),
            pairs,
        }
    }

    fn ew(state: &ThermalState, sites: &[usize]) -> Result<f64> {
        witness_value(subsystem_susceptibility(state, sites)?, state.temperature, sites.len(), SPIN)
    }
}

/// Temperatures at which each diagnostic stops detecting entanglement.
/// `t_ew5` is the whole-cluster witness, `t_ew3` the trimer witness,
/// `t_ef_pair` the first pair subsystem (`pair_12` when present) and
/// `t_genuine` the trimer-energy criterion. `None` means no crossing in range
/// or a diagnostic the spec does not support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroFieldThresholds {
    pub t_ew5: Option<f64>,
    pub t_ew3: Option<f64>,
    pub t_ef_pair: Option<f64>,
    pub t_genuine: Option<f64>,
    pub genuine_bound: Option<f64>,
    pub details: BTreeMap<String, Threshold>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroFieldReport {
    pub curve: Curve,
    pub thresholds: ZeroFieldThresholds,
}

/// Tabulates witnesses, pair EF, trimer energy and the genuine-tripartite
/// margin, and locates their thresholds. Thresholds are searched on the
/// unclamped margins (witness value, Wootters margin, `bound − ⟨H_tri⟩`),
/// which cross zero linearly.
pub fn zero_field_report(spec: &ClusterSpec, opts: &ReportOptions) -> Result<ZeroFieldReport> {
    let temps = opts.grid()?;
    let model = ThermalModel::new(spec, opts.field_oe)?;
    let diag = Diagnostics::resolve(spec);

    let mut names = vec!["chi_avg".to_string(), "ew_total".to_string()];
    if diag.trimer.is_some() {
        names.push("ew_trimer".into());
    }
    if diag.dimer.is_some() {
        names.push("ew_dimer".into());
    }
    names.extend(diag.pairs.iter().map(|(n, _)| n.clone()));
    if diag.j1.is_some() {
        names.push("trimer_energy".into());
        names.push("genuine_margin".into());
    }

    let rows: Vec<Vec<f64>> = temps
        .par_iter()
        .map(|&t| {
            let state = model.state(t)?;
            let chi = subsystem_susceptibility(&state, &diag.all)?;
            let mut row = vec![chi, witness_value(chi, t, diag.all.len(), SPIN)?];
            if let Some(s) = &diag.trimer {
                row.push(Diagnostics::ew(&state, s)?);
            }
            if let Some(s) = &diag.dimer {
                row.push(Diagnostics::ew(&state, s)?);
            }
            for (_, (i, j)) in &diag.pairs {
                row.push(pair_concurrence(&state, *i, *j)?.ef);
            }
            if let Some(j1) = diag.j1 {
                let e = trimer_energy(&state, spec)?;
                row.push(e);
                row.push(genuine_tripartite_check(e, j1).margin);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut curve = Curve::new("T_K", temps)?;
    for (k, name) in names.into_iter().enumerate() {
        curve.push_column(name, rows.iter().map(|r| r[k]).collect())?;
    }

    let scan = ScanOptions::temperature().with_tolerance(opts.tolerance);
    let search = |name: &str, f: &dyn Fn(&ThermalState) -> Result<f64>| {
        find_threshold(name, |t| f(&model.state(t)?), opts.t_min, opts.t_max, scan)
    };
    let mut details = BTreeMap::new();
    details.insert("ew_total".to_string(), search("ew_total", &|s| Diagnostics::ew(s, &diag.all))?);
    if let Some(sites) = &diag.trimer {
        details.insert("ew_trimer".to_string(), search("ew_trimer", &|s| Diagnostics::ew(s, sites))?);
    }
    if let Some(sites) = &diag.dimer {
        details.insert("ew_dimer".to_string(), search("ew_dimer", &|s| Diagnostics::ew(s, sites))?);
    }
    for (name, (i, j)) in &diag.pairs {
        let th = search(name, &|s| Ok(pair_concurrence(s, *i, *j)?.margin))?;
        details.insert(name.clone(), th);
    }
    if let Some(j1) = diag.j1 {
        let th = search("genuine_margin", &|s| Ok(genuine_tripartite_check(trimer_energy(s, spec)?, j1).margin))?;
        details.insert("genuine_margin".to_string(), th);
    }

    let value = |key: &str| details.get(key).and_then(Threshold::value);
    let first_pair = diag
        .pairs
        .iter()
        .find(|(n, _)| n == "ef_12")
        .or(diag.pairs.first())
        .map(|(n, _)| n.as_str());
    let thresholds = ZeroFieldThresholds {
        t_ew5: value("ew_total"),
        t_ew3: value("ew_trimer"),
        t_ef_pair: first_pair.and_then(value),
        t_genuine: value("genuine_margin"),
        genuine_bound: diag.j1.map(genuine_tripartite_bound),
        details,
    };
    Ok(ZeroFieldReport { curve, thresholds })
}
