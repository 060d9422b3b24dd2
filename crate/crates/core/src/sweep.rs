//! (H, T) sweeps, ground-state level crossings and critical lines.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::zeeman_kelvin;
use crate::entanglement::{genuine_tripartite_check, pair_concurrence, witness_value};
use crate::error::{Error, Result};
use crate::linalg::{eigendecompose, CMatrix, DenseHermitian};
use crate::model::{basis_sz, build_hamiltonian, ClusterSpec};
use crate::thermal::{fmt_f64, subsystem_susceptibility, trimer_coupling, trimer_energy, ThermalModel};

/// Lowest temperature accepted on sweep grids.
pub const MIN_SWEEP_T: f64 = 0.01;

/// Per-cell quantities, in serialization order.
pub const QUANTITIES: [&str; 8] = ["ef_12", "ef_23", "ef_13", "ef_45", "ew5", "ew3", "ew2", "genuine_flag"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub ef_12: f64,
    pub ef_23: f64,
    pub ef_13: f64,
    pub ef_45: f64,
    pub ew5: f64,
    pub ew3: f64,
    pub ew2: f64,
    pub genuine_flag: bool,
}

impl SweepCell {
    pub fn get(&self, quantity: &str) -> Result<f64> {
        Ok(match quantity {
            "ef_12" => self.ef_12,
            "ef_23" => self.ef_23,
            "ef_13" => self.ef_13,
            "ef_45" => self.ef_45,
            "ew5" => self.ew5,
            "ew3" => self.ew3,
            "ew2" => self.ew2,
            "genuine_flag" => {
                if self.genuine_flag {
                    1.0
                } else {
                    0.0
                }
            }
            other => return Err(Error::UnknownQuantity(other.to_string())),
        })
    }

    fn from_values(v: &[f64; 8]) -> Self {
        SweepCell {
            ef_12: v[0],
            ef_23: v[1],
            ef_13: v[2],
            ef_45: v[3],
            ew5: v[4],
            ew3: v[5],
            ew2: v[6],
            genuine_flag: v[7] != 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub t: f64,
    pub h: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec_hash: String,
    pub g_factor: f64,
}

/// Sweep results; `cells` is row-major with one row per temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub t_values: Vec<f64>,
    pub h_values: Vec<f64>,
    pub cells: Vec<Option<SweepCell>>,
    pub failures: Vec<CellFailure>,
    pub provenance: Provenance,
}

impl SweepGrid {
    pub fn cell(&self, ti: usize, hi: usize) -> Option<&SweepCell> {
        self.cells[ti * self.h_values.len() + hi].as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Sites the sweep reads from the spec's named subsystems.
struct SweepSites {
    pairs: [(usize, usize); 4],
    all: Vec<usize>,
    trimer: Vec<usize>,
    dimer: Vec<usize>,
    j1: f64,
}

impl SweepSites {
    fn resolve(spec: &ClusterSpec) -> Result<Self> {
        let pair = |name: &str| -> Result<(usize, usize)> {
            match spec.subsystem(name)? {
                [i, j] => Ok((*i, *j)),
                _ => Err(Error::InvalidSpec(format!("subsystem `{name}` must have two sites"))),
            }
        };
        Ok(SweepSites {
            pairs: [pair("pair_12")?, pair("pair_23")?, pair("pair_13")?, pair("pair_45")?],
            all: spec.all_sites(),
            trimer: spec.subsystem("trimer")?.to_vec(),
            dimer: spec.subsystem("dimer")?.to_vec(),
            j1: trimer_coupling(spec)?,
        })
    }
}

fn evaluate_cell(model: &ThermalModel, sites: &SweepSites, t: f64) -> Result<SweepCell> {
    let state = model.state(t)?;
    let ef = |(i, j): (usize, usize)| pair_concurrence(&state, i, j).map(|c| c.ef);
    let ew = |s: &[usize]| witness_value(subsystem_susceptibility(&state, s)?, t, s.len(), 0.5);
    Ok(SweepCell {
        ef_12: ef(sites.pairs[0])?,
        ef_23: ef(sites.pairs[1])?,
        ef_13: ef(sites.pairs[2])?,
        ef_45: ef(sites.pairs[3])?,
        ew5: ew(&sites.all)?,
        ew3: ew(&sites.trimer)?,
        ew2: ew(&sites.dimer)?,
        genuine_flag: genuine_tripartite_check(trimer_energy(&state, &model.spec)?, sites.j1).genuine,
    })
}

fn check_grid(name: &str, values: &[f64], min: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Domain(format!("{name} grid is empty")));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(format!("{name} grid must be strictly increasing")));
    }
    if !(values[0] >= min) || !values[values.len() - 1].is_finite() {
        return Err(Error::Domain(format!("{name} grid must lie in [{min}, ∞)")));
    }
    Ok(())
}

/// Evaluates every (H, T) cell. One diagonalization per field value is
/// shared by that column's cells. Cell-level numeric failures are recorded
/// in `failures` and never abort the sweep.
///
/// With `workers = Some(n)` the work runs on a dedicated pool of `n`
/// threads; results do not depend on the worker count.
pub fn run_ht_sweep(spec: &ClusterSpec, t_grid: &[f64], h_grid: &[f64], workers: Option<usize>) -> Result<SweepGrid> {
    check_grid("temperature", t_grid, MIN_SWEEP_T)?;
    check_grid("field", h_grid, 0.0)?;
    let sites = SweepSites::resolve(spec)?;
    let compute = || sweep_cells(spec, &sites, t_grid, h_grid);
    let (cells, failures) = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?
            .install(compute),
        None => compute(),
    };
    Ok(SweepGrid {
        t_values: t_grid.to_vec(),
        h_values: h_grid.to_vec(),
        cells,
        failures,
        provenance: Provenance {
            spec_hash: spec.content_hash(),
            g_factor: spec.g_factor(),
        },
    })
}

fn sweep_cells(
    spec: &ClusterSpec,
    sites: &SweepSites,
    t_grid: &[f64],
    h_grid: &[f64],
) -> (Vec<Option<SweepCell>>, Vec<CellFailure>) {
    let models: Vec<std::result::Result<ThermalModel, String>> = h_grid
        .par_iter()
        .map(|&h| ThermalModel::new(spec, h).map_err(|e| e.to_string()))
        .collect();
    let nh = h_grid.len();
    let outcomes: Vec<std::result::Result<SweepCell, String>> = (0..t_grid.len() * nh)
        .into_par_iter()
        .map(|k| {
            let (ti, hi) = (k / nh, k % nh);
            match &models[hi] {
                Ok(model) => evaluate_cell(model, sites, t_grid[ti]).map_err(|e| e.to_string()),
                Err(msg) => Err(format!("diagonalization failed: {msg}")),
            }
        })
        .collect();
    let mut failures = Vec::new();
    let cells = outcomes
        .into_iter()
        .enumerate()
        .map(|(k, r)| match r {
            Ok(c) => Some(c),
            Err(message) => {
                failures.push(CellFailure {
                    t: t_grid[k / nh],
                    h: h_grid[k % nh],
                    message,
                });
                None
            }
        })
        .collect();
    (cells, failures)
}

/// For each temperature row, the lowest field at which `quantity` drops
/// from positive to zero (linear interpolation between adjacent cells).
/// Rows where it never vanishes, or is zero throughout, contribute nothing.
pub fn critical_line(grid: &SweepGrid, quantity: &str) -> Result<Vec<(f64, f64)>> {
    if !QUANTITIES.contains(&quantity) {
        return Err(Error::UnknownQuantity(quantity.to_string()));
    }
    let mut line = Vec::new();
    for (ti, &t) in grid.t_values.iter().enumerate() {
        let mut prev: Option<(f64, f64)> = None;
        for (hi, &h) in grid.h_values.iter().enumerate() {
            let Some(cell) = grid.cell(ti, hi) else {
                prev = None;
                continue;
            };
            let v = cell.get(quantity)?;
            if let Some((h0, v0)) = prev {
                if v0 > 0.0 && v <= 0.0 {
                    line.push((t, h0 + (h - h0) * v0 / (v0 - v)));
                    break;
                }
            }
            prev = Some((h, v));
        }
    }
    Ok(line)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFormat {
    Csv,
    Json,
}

impl FromStr for GridFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(GridFormat::Csv),
            "json" => Ok(GridFormat::Json),
            other => Err(Error::Domain(format!("unknown format `{other}` (csv or json)"))),
        }
    }
}

impl fmt::Display for GridFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridFormat::Csv => "csv",
            GridFormat::Json => "json",
        })
    }
}

impl SweepGrid {
    /// Long-format CSV `T_K,H_Oe,quantity,value`, row-major in T then H then
    /// quantity. Provenance and failures are carried in `#` comment lines;
    /// failed cells have `NaN` values.
    pub fn write_csv_to<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<sweep csv>", e);
        writeln!(out, "# spec_hash={}", self.provenance.spec_hash).map_err(io)?;
        writeln!(out, "# g_factor={}", fmt_f64(self.provenance.g_factor)).map_err(io)?;
        for f in &self.failures {
            writeln!(out, "# failed T={} H={}: {}", fmt_f64(f.t), fmt_f64(f.h), f.message.replace('\n', " "))
                .map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["T_K", "H_Oe", "quantity", "value"])?;
        for (ti, &t) in self.t_values.iter().enumerate() {
            for (hi, &h) in self.h_values.iter().enumerate() {
                let cell = self.cell(ti, hi);
                for q in QUANTITIES {
                    let v = match cell {
                        Some(c) => c.get(q)?,
                        None => f64::NAN,
                    };
                    w.write_record([fmt_f64(t), fmt_f64(h), q.to_string(), fmt_f64(v)])?;
                }
            }
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid serializes")
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut spec_hash = String::new();
        let mut g_factor = f64::NAN;
        let mut failures = Vec::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            if let Some(v) = body.strip_prefix("spec_hash=") {
                spec_hash = v.to_string();
            } else if let Some(v) = body.strip_prefix("g_factor=") {
                g_factor = v.parse().map_err(|_| Error::Parse {
                    line: 0,
                    message: format!("bad g_factor `{v}`"),
                })?;
            } else if let Some(rest) = body.strip_prefix("failed ") {
                let (coords, message) = rest.split_once(": ").unwrap_or((rest, ""));
                let mut t = f64::NAN;
                let mut h = f64::NAN;
                for part in coords.split_whitespace() {
                    if let Some(v) = part.strip_prefix("T=") {
                        t = v.parse().unwrap_or(f64::NAN);
                    } else if let Some(v) = part.strip_prefix("H=") {
                        h = v.parse().unwrap_or(f64::NAN);
                    }
                }
                failures.push(CellFailure {
                    t,
                    h,
                    message: message.to_string(),
                });
            }
        }

        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut t_values: Vec<f64> = Vec::new();
        let mut h_values: Vec<f64> = Vec::new();
        let mut values: Vec<[f64; 8]> = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let num = |i: usize| -> Result<f64> {
                rec.get(i).unwrap_or("").parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("column {}: {e}", i + 1),
                })
            };
            let (t, h, v) = (num(0)?, num(1)?, num(3)?);
            let q = rec.get(2).unwrap_or("");
            let qi = QUANTITIES
                .iter()
                .position(|&x| x == q)
                .ok_or_else(|| Error::UnknownQuantity(q.to_string()))?;
            if t_values.last() != Some(&t) && !t_values.contains(&t) {
                t_values.push(t);
            }
            if !h_values.contains(&h) {
                h_values.push(h);
            }
            let cell_index = k / QUANTITIES.len();
            if qi != k % QUANTITIES.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("quantity `{q}` out of order"),
                });
            }
            if cell_index == values.len() {
                values.push([0.0; 8]);
            }
            values[cell_index][qi] = v;
        }
        if values.len() != t_values.len() * h_values.len() {
            return Err(Error::Parse {
                line: 0,
                message: "sweep CSV is not a complete grid".into(),
            });
        }
        let cells = values
            .iter()
            .map(|v| {
                if v.iter().any(|x| x.is_nan()) {
                    None
                } else {
                    Some(SweepCell::from_values(v))
                }
            })
            .collect();
        Ok(SweepGrid {
            t_values,
            h_values,
            cells,
            failures,
            provenance: Provenance { spec_hash, g_factor },
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn serialize_grid(grid: &SweepGrid, format: GridFormat, path: &Path) -> Result<()> {
    let text = match format {
        GridFormat::Csv => grid.to_csv_string(),
        GridFormat::Json => grid.to_json_string(),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_grid(format: GridFormat, path: &Path) -> Result<SweepGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        GridFormat::Csv => SweepGrid::from_csv_str(&text),
        GridFormat::Json => SweepGrid::from_json_str(&text),
    }
}

/// Zero-temperature ground-state level crossings as the field increases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    /// Fields (Oe) where the ground state changes `S^z_total` sector,
    /// strictly increasing. A crossing at `0` means the zero-field ground
    /// manifold splits immediately.
    pub fields_oe: Vec<f64>,
    /// `S^z_total` of the ground state before the first crossing and after
    /// each one (`fields_oe.len() + 1` entries).
    pub ground_labels: Vec<f64>,
    /// Lowest zero-field energy in each `S^z_total` sector, ascending in `S^z`.
    pub sector_minima: Vec<(f64, f64)>,
    pub g_factor: f64,
    pub h_max: f64,
}

/// Lowest eigenvalue of the zero-field Hamiltonian in every `S^z_total`
/// sector, as `(S^z, E)` pairs sorted by `S^z`.
pub fn sector_minima(spec: &ClusterSpec) -> Result<Vec<(f64, f64)>> {
    let n = spec.n_spins();
    let h = build_hamiltonian(spec, 0.0)?;
    let mut out = Vec::with_capacity(n + 1);
    for down in (0..=n).rev() {
        let idx: Vec<usize> = (0..spec.dim()).filter(|b| b.count_ones() as usize == down).collect();
        let mut block = CMatrix::zeros(idx.len());
        for (r, &a) in idx.iter().enumerate() {
            for (c, &b) in idx.iter().enumerate() {
                block[(r, c)] = h[(a, b)];
            }
        }
        let eig = eigendecompose(&DenseHermitian::new(block)?)?;
        out.push((basis_sz(idx[0], n), eig.values[0]));
    }
    Ok(out)
}

/// Follows the lower envelope of the sector lines `E_m − Z·m·H` (Z the
/// Zeeman scale per Oe) from zero field up to `h_max`.
pub fn ground_state_crossing_fields(spec: &ClusterSpec, h_max: f64) -> Result<CrossingReport> {
    if !(h_max > 0.0) {
        return Err(Error::Domain(format!("h_max must be positive, got {h_max}")));
    }
    let minima = sector_minima(spec)?;
    let z = zeeman_kelvin(spec.g_factor(), 1.0);
    let e_min = minima.iter().map(|&(_, e)| e).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * e_min.abs().max(1.0);

    // The zero-field ground multiplet is labelled by its smallest S^z ≥ 0.
    let (mut m_c, mut e_c) = minima
        .iter()
        .copied()
        .filter(|&(m, e)| m >= 0.0 && e <= e_min + tol)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("sector energies are symmetric in S^z");
    let mut h_c = 0.0f64;
    let mut fields = Vec::new();
    let mut labels = vec![m_c];
    loop {
        let next = minima
            .iter()
            .filter(|&&(m, _)| m > m_c)
            .map(|&(m, e)| (m, e, ((e - e_c) / (z * (m - m_c))).max(h_c)))
            .min_by(|a, b| a.2.total_cmp(&b.2).then(b.0.total_cmp(&a.0)));
        let Some((m, e, h)) = next else { break };
        if h > h_max {
            break;
        }
        fields.push(h);
        labels.push(m);
        m_c = m;
        e_c = e;
        h_c = h;
    }
    Ok(CrossingReport {
        fields_oe: fields,
        ground_labels: labels,
        sector_minima: minima,
        g_factor: spec.g_factor(),
        h_max,
    })
}
