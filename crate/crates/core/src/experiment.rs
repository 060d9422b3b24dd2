//! Measured susceptibility ingestion, unit conversion, ratio decomposition
//! into subsystem susceptibilities, and experimental witness / EF series.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::MOLAR_CURIE_UNIT;
use crate::entanglement::{concurrence_from_susceptibility, find_threshold, witness_value, ScanOptions, Threshold};
use crate::error::{Error, Result};
use crate::model::ClusterSpec;
use crate::thermal::{fmt_f64, interpolate_optional, ratio_table, Curve, RatioTable, ThermalModel};

const SPIN: f64 = 0.5;

/// Default low-temperature cut: the cluster model does not describe the
/// ordered phase at the lowest temperatures.
pub const DEFAULT_MIN_TEMPERATURE: f64 = 8.0;

/// Default smoothing half-width for threshold location, Kelvin.
pub const DEFAULT_SMOOTHING_HALF_WIDTH: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChiUnits {
    /// emu per mole of formula units.
    EmuPerMol,
    /// `χ k_B / (g μ_B)²` per formula unit, 1/K.
    Reduced,
}

impl fmt::Display for ChiUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChiUnits::EmuPerMol => "emu-per-mol",
            ChiUnits::Reduced => "reduced",
        })
    }
}

impl std::str::FromStr for ChiUnits {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "emu-per-mol" => Ok(ChiUnits::EmuPerMol),
            "reduced" => Ok(ChiUnits::Reduced),
            other => Err(Error::Units(format!("unknown units `{other}` (emu-per-mol or reduced)"))),
        }
    }
}

/// Measurement metadata attached to a loaded series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub applied_field_oe: f64,
    /// Spins per formula unit the molar values refer to.
    pub moles_basis: usize,
    pub g_assumed: f64,
}

impl Default for SeriesMeta {
    fn default() -> Self {
        SeriesMeta {
            applied_field_oe: 100.0,
            moles_basis: 5,
            g_assumed: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalSeries {
    /// `(T, χ)` rows, strictly increasing in T.
    pub rows: Vec<(f64, f64)>,
    pub units: ChiUnits,
    pub applied_field_oe: f64,
    pub moles_basis: usize,
    pub g_assumed: f64,
    /// Data rows in the source before duplicate temperatures were merged.
    pub raw_row_count: usize,
}

impl ExperimentalSeries {
    pub fn temperatures(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.1).collect()
    }

    fn with_rows(&self, rows: Vec<(f64, f64)>, units: ChiUnits) -> Self {
        ExperimentalSeries {
            rows,
            units,
            ..self.clone()
        }
    }

    /// Parses `temperature_K,chi` rows. Lines starting with `#` are
    /// comments; a non-numeric first row is taken as a header. Rows are
    /// sorted by temperature and duplicate temperatures averaged.
    pub fn from_csv_str(text: &str, units: ChiUnits, meta: SeriesMeta) -> Result<Self> {
        let mut raw: Vec<(f64, f64)> = Vec::new();
        let mut first = true;
        for (k, text_line) in text.lines().enumerate() {
            let line = k + 1;
            let body = text_line.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let is_first = std::mem::take(&mut first);
            let fields: Vec<&str> = body.split(',').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 2 columns, found {}", fields.len()),
                });
            }
            let parsed: Vec<std::result::Result<f64, _>> = fields.iter().map(|f| f.parse::<f64>()).collect();
            if is_first && parsed.iter().any(|p| p.is_err()) {
                continue;
            }
            let mut vals = [0.0; 2];
            for (k, p) in parsed.into_iter().enumerate() {
                vals[k] = p.map_err(|e| Error::Parse {
                    line,
                    message: format!("column {}: `{}`: {e}", k + 1, fields[k]),
                })?;
            }
            let [t, chi] = vals;
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("temperature must be positive and finite, got {t}"),
                });
            }
            if !chi.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("susceptibility must be finite, got {chi}"),
                });
            }
            raw.push((t, chi));
        }
        let raw_row_count = raw.len();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rows: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        let mut k = 0;
        while k < raw.len() {
            let t = raw[k].0;
            let group: Vec<f64> = raw[k..].iter().take_while(|r| r.0 == t).map(|r| r.1).collect();
            k += group.len();
            rows.push((t, group.iter().sum::<f64>() / group.len() as f64));
        }
        Ok(ExperimentalSeries {
            rows,
            units,
            applied_field_oe: meta.applied_field_oe,
            moles_basis: meta.moles_basis,
            g_assumed: meta.g_assumed,
            raw_row_count,
        })
    }

    pub fn write_csv_to<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<series csv>", e);
        writeln!(out, "# units={}", self.units).map_err(io)?;
        writeln!(out, "# applied_field_oe={}", fmt_f64(self.applied_field_oe)).map_err(io)?;
        writeln!(out, "# moles_basis={}", self.moles_basis).map_err(io)?;
        writeln!(out, "# g_assumed={}", fmt_f64(self.g_assumed)).map_err(io)?;
        let header = match self.units {
            ChiUnits::EmuPerMol => "chi_emu_per_mol",
            ChiUnits::Reduced => "chi_reduced",
        };
        writeln!(out, "temperature_K,{header}").map_err(io)?;
        for &(t, c) in &self.rows {
            writeln!(out, "{},{}", fmt_f64(t), fmt_f64(c)).map_err(io)?;
        }
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
}

/// Reads a measured series from `path`; see [`ExperimentalSeries::from_csv_str`].
pub fn load_csv(path: &Path, units: ChiUnits, meta: SeriesMeta) -> Result<ExperimentalSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let series = ExperimentalSeries::from_csv_str(&text, units, meta)?;
    if series.rows.is_empty() {
        return Err(Error::EmptyData(path.to_path_buf()));
    }
    Ok(series)
}

fn reduced_per_molar(g: f64) -> Result<f64> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::Units(format!("g factor must be positive, got {g}")));
    }
    Ok(1.0 / (g * g * MOLAR_CURIE_UNIT))
}

/// `χ̃ = χ_mol k_B / (N_A (g μ_B)²)`, per formula unit.
pub fn to_reduced_units(series: &ExperimentalSeries, g: f64) -> Result<ExperimentalSeries> {
    if series.units != ChiUnits::EmuPerMol {
        return Err(Error::Units(format!("expected emu-per-mol input, got {}", series.units)));
    }
    let f = reduced_per_molar(g)?;
    let rows = series.rows.iter().map(|&(t, c)| (t, c * f)).collect();
    let mut out = series.with_rows(rows, ChiUnits::Reduced);
    out.g_assumed = g;
    Ok(out)
}

/// Inverse of [`to_reduced_units`] using the series' `g_assumed`.
pub fn to_molar_units(series: &ExperimentalSeries) -> Result<ExperimentalSeries> {
    if series.units != ChiUnits::Reduced {
        return Err(Error::Units(format!("expected reduced input, got {}", series.units)));
    }
    let f = reduced_per_molar(series.g_assumed)?;
    let rows = series.rows.iter().map(|&(t, c)| (t, c / f)).collect();
    Ok(series.with_rows(rows, ChiUnits::EmuPerMol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemSeries {
    pub name: String,
    pub series: ExperimentalSeries,
    /// Data temperatures the ratio table could not cover.
    pub excluded: Vec<f64>,
}

/// `χ̃_sub(T) = R_sub(T) χ̃(T)`, with `R_sub` linearly interpolated. Points
/// outside the table (or where the ratio is undefined) are dropped and listed.
pub fn apply_ratio(series: &ExperimentalSeries, ratios: &RatioTable, subsystem: &str) -> Result<SubsystemSeries> {
    if series.units != ChiUnits::Reduced {
        return Err(Error::Units(format!("ratio decomposition needs reduced units, got {}", series.units)));
    }
    let r = ratios
        .ratios
        .get(subsystem)
        .ok_or_else(|| Error::MissingSubsystem(subsystem.to_string()))?;
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for &(t, chi) in &series.rows {
        match interpolate_optional(&ratios.temperatures, r, t) {
            Some(ratio) => rows.push((t, ratio * chi)),
            None => excluded.push(t),
        }
    }
    Ok(SubsystemSeries {
        name: subsystem.to_string(),
        series: series.with_rows(rows, ChiUnits::Reduced),
        excluded,
    })
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Result<f64> {
    let k = xs.partition_point(|&v| v < x);
    if k == xs.len() || (k == 0 && xs[0] != x) {
        return Err(Error::Domain(format!("{x} is outside the data range")));
    }
    if xs[k] == x {
        return Ok(ys[k]);
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    Ok(ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0))
}

/// Local linear regression of `ys` over points within `half_width` of each
/// abscissa; returns the fitted value at that abscissa. Points with fewer
/// than three neighbours are left unchanged.
pub fn local_linear_smooth(xs: &[f64], ys: &[f64], half_width: f64) -> Vec<f64> {
    if !(half_width > 0.0) {
        return ys.to_vec();
    }
    xs.iter()
        .enumerate()
        .map(|(i, &x0)| {
            let lo = xs.partition_point(|&x| x < x0 - half_width);
            let hi = xs.partition_point(|&x| x <= x0 + half_width);
            let n = (hi - lo) as f64;
            if hi - lo < 3 {
                return ys[i];
            }
            let mx = xs[lo..hi].iter().map(|x| x - x0).sum::<f64>() / n;
            let my = ys[lo..hi].iter().sum::<f64>() / n;
            let (mut sxx, mut sxy) = (0.0, 0.0);
            for (x, y) in xs[lo..hi].iter().zip(&ys[lo..hi]) {
                let dx = x - x0 - mx;
                sxx += dx * dx;
                sxy += dx * (y - my);
            }
            if sxx > 0.0 {
                my - sxy / sxx * mx
            } else {
                my
            }
        })
        .collect()
}

/// Threshold of a tabulated series: the lowest sign change of the linear
/// interpolant of its locally smoothed values.
fn series_threshold(name: &str, xs: &[f64], ys: &[f64], opts: &ThresholdOptions) -> Result<Threshold> {
    if xs.len() < 2 {
        return Ok(Threshold::Absent {
            quantity: name.to_string(),
            range: (xs.first().copied().unwrap_or(f64::NAN), xs.last().copied().unwrap_or(f64::NAN)),
        });
    }
    let smooth = local_linear_smooth(xs, ys, opts.smoothing_half_width);
    let scan = ScanOptions::temperature().with_points(xs.len()).with_tolerance(opts.tolerance);
    find_threshold(name, |t| interpolate(xs, &smooth, t), xs[0], xs[xs.len() - 1], scan)
}

/// How thresholds are located on measured series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    /// Bisection tolerance in Kelvin.
    pub tolerance: f64,
    /// Half-width in Kelvin of the local linear smoothing applied before the
    /// sign change is located; 0 uses the raw points.
    pub smoothing_half_width: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            tolerance: 1e-3,
            smoothing_half_width: DEFAULT_SMOOTHING_HALF_WIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSeries {
    pub name: String,
    pub n_spins: usize,
    pub temperatures: Vec<f64>,
    pub values: Vec<f64>,
    pub threshold: Threshold,
}

/// Pointwise witness of a reduced series for `n_spins` spins of length `spin`.
pub fn experimental_witness(
    name: &str,
    series: &ExperimentalSeries,
    n_spins: usize,
    spin: f64,
    opts: &ThresholdOptions,
) -> Result<WitnessSeries> {
    if series.units != ChiUnits::Reduced {
        return Err(Error::Units(format!("witness needs reduced units, got {}", series.units)));
    }
    let temperatures = series.temperatures();
    let values = series
        .rows
        .iter()
        .map(|&(t, c)| witness_value(c, t, n_spins, spin))
        .collect::<Result<Vec<_>>>()?;
    let threshold = series_threshold(name, &temperatures, &values, opts)?;
    Ok(WitnessSeries {
        name: name.to_string(),
        n_spins,
        temperatures,
        values,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfSeries {
    pub name: String,
    pub temperatures: Vec<f64>,
    /// Unclamped `T(2|χ̃ − 1/(2T)| − χ̃)`; positive where the pair is entangled.
    pub margin: Vec<f64>,
    pub concurrence: Vec<f64>,
    pub ef: Vec<f64>,
    pub threshold: Threshold,
}

/// Concurrence and EF of a pair from its reduced susceptibility series.
pub fn experimental_ef(name: &str, pair_series: &ExperimentalSeries, opts: &ThresholdOptions) -> Result<EfSeries> {
    if pair_series.units != ChiUnits::Reduced {
        return Err(Error::Units(format!("EF needs reduced units, got {}", pair_series.units)));
    }
    let temperatures = pair_series.temperatures();
    let results = pair_series
        .rows
        .iter()
        .map(|&(t, c)| concurrence_from_susceptibility(c, t))
        .collect::<Result<Vec<_>>>()?;
    let margin: Vec<f64> = results.iter().map(|r| r.margin).collect();
    let threshold = series_threshold(name, &temperatures, &margin, opts)?;
    Ok(EfSeries {
        name: name.to_string(),
        temperatures,
        concurrence: results.iter().map(|r| r.concurrence).collect(),
        ef: results.iter().map(|r| r.ef).collect(),
        margin,
        threshold,
    })
}

/// Model susceptibility on `t_grid` in emu/mol of formula units, with
/// multiplicative Gaussian noise of relative amplitude `noise_fraction`.
pub fn synthesize_dataset(
    spec: &ClusterSpec,
    t_grid: &[f64],
    field_oe: f64,
    noise_fraction: f64,
    seed: u64,
) -> Result<ExperimentalSeries> {
    if !(noise_fraction >= 0.0) || !noise_fraction.is_finite() {
        return Err(Error::Domain(format!("noise fraction must be ≥ 0, got {noise_fraction}")));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Domain("synthesis grid must be positive and strictly increasing".into()));
    }
    let model = ThermalModel::new(spec, field_oe)?;
    let chi: Vec<f64> = t_grid.par_iter().map(|&t| model.chi_total(t)).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_molar = reduced_per_molar(spec.g_factor())?;
    let rows = t_grid
        .iter()
        .zip(chi)
        .map(|(&t, c)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (t, c / per_molar * (1.0 + noise_fraction * z))
        })
        .collect::<Vec<_>>();
    Ok(ExperimentalSeries {
        raw_row_count: rows.len(),
        rows,
        units: ChiUnits::EmuPerMol,
        applied_field_oe: field_oe,
        moles_basis: spec.n_spins(),
        g_assumed: spec.g_factor(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ExtractionOptions {
    /// Data below this temperature are dropped.
    pub min_temperature: f64,
    pub threshold: ThresholdOptions,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            min_temperature: DEFAULT_MIN_TEMPERATURE,
            threshold: ThresholdOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub spec_hash: String,
    pub applied_field_oe: f64,
    pub g_assumed: f64,
    pub raw_row_count: usize,
    /// Temperature grid shared by every series below.
    pub temperatures: Vec<f64>,
    pub excluded_low_temperature: Vec<f64>,
    /// Points the ratio table could not cover, per subsystem.
    pub excluded_by_ratio: BTreeMap<String, Vec<f64>>,
    /// Reduced susceptibility of the whole cluster and of each subsystem.
    pub chi: BTreeMap<String, Vec<f64>>,
    pub witnesses: Vec<WitnessSeries>,
    pub pair_ef: Vec<EfSeries>,
}

/// Runs the full extraction: unit conversion, low-temperature cut, ratio
/// decomposition with model ratios evaluated at the data's own field and
/// temperatures, witnesses for the whole cluster and the `trimer` / `dimer`
/// subsystems, and EF for every two-site `pair_*` subsystem.
pub fn extract(spec: &ClusterSpec, series: &ExperimentalSeries, opts: &ExtractionOptions) -> Result<ExtractionReport> {
    if series.moles_basis != spec.n_spins() {
        return Err(Error::Units(format!(
            "molar basis of {} spins does not match the {}-spin formula unit",
            series.moles_basis,
            spec.n_spins()
        )));
    }
    let reduced = match series.units {
        ChiUnits::EmuPerMol => to_reduced_units(series, series.g_assumed)?,
        ChiUnits::Reduced => series.clone(),
    };
    let (kept, low): (Vec<(f64, f64)>, Vec<(f64, f64)>) =
        reduced.rows.iter().partition(|r| r.0 >= opts.min_temperature);
    if kept.is_empty() {
        return Err(Error::Domain(format!(
            "no data at or above {} K",
            opts.min_temperature
        )));
    }
    let reduced = reduced.with_rows(kept, ChiUnits::Reduced);

    let mut subsystems: Vec<(String, Vec<usize>)> = Vec::new();
    for name in ["trimer", "dimer"] {
        if let Ok(s) = spec.subsystem(name) {
            subsystems.push((name.to_string(), s.to_vec()));
        }
    }
    for (name, sites) in spec.subsystems() {
        if name.starts_with("pair_") && sites.len() == 2 {
            subsystems.push((name.clone(), sites.clone()));
        }
    }
    let table = ratio_table(spec, &subsystems, &reduced.temperatures(), reduced.applied_field_oe)?;

    let mut parts = Vec::new();
    let mut excluded_by_ratio = BTreeMap::new();
    for (name, _) in &subsystems {
        let part = apply_ratio(&reduced, &table, name)?;
        excluded_by_ratio.insert(name.clone(), part.excluded.clone());
        parts.push(part);
    }
    // Restrict everything to the temperatures every subsystem covers.
    let dropped: Vec<f64> = excluded_by_ratio.values().flatten().copied().collect();
    let keep = |rows: &[(f64, f64)]| -> Vec<(f64, f64)> {
        rows.iter().copied().filter(|r| !dropped.contains(&r.0)).collect()
    };
    let total = reduced.with_rows(keep(&reduced.rows), ChiUnits::Reduced);
    for p in &mut parts {
        p.series.rows = keep(&p.series.rows);
    }

    let mut chi = BTreeMap::from([("total".to_string(), total.values())]);
    for p in &parts {
        chi.insert(p.name.clone(), p.series.values());
    }

    let mut witnesses = vec![experimental_witness("ew_total", &total, spec.n_spins(), SPIN, &opts.threshold)?];
    for (name, label) in [("trimer", "ew_trimer"), ("dimer", "ew_dimer")] {
        if let (Some(p), Ok(sites)) = (parts.iter().find(|p| p.name == name), spec.subsystem(name)) {
            witnesses.push(experimental_witness(label, &p.series, sites.len(), SPIN, &opts.threshold)?);
        }
    }
    let pair_ef = parts
        .iter()
        .filter_map(|p| p.name.strip_prefix("pair_").map(|tag| (format!("ef_{tag}"), p)))
        .map(|(label, p)| experimental_ef(&label, &p.series, &opts.threshold))
        .collect::<Result<Vec<_>>>()?;

    Ok(ExtractionReport {
        spec_hash: spec.content_hash(),
        applied_field_oe: reduced.applied_field_oe,
        g_assumed: reduced.g_assumed,
        raw_row_count: series.raw_row_count,
        temperatures: total.temperatures(),
        excluded_low_temperature: low.iter().map(|r| r.0).collect(),
        excluded_by_ratio,
        chi,
        witnesses,
        pair_ef,
    })
}

impl ExtractionReport {
    pub fn threshold(&self, name: &str) -> Option<&Threshold> {
        self.witnesses
            .iter()
            .find(|w| w.name == name)
            .map(|w| &w.threshold)
            .or_else(|| self.pair_ef.iter().find(|e| e.name == name).map(|e| &e.threshold))
    }

    /// Subsystem susceptibilities as a curve (`chi_<name>` columns).
    pub fn chi_curve(&self) -> Result<Curve> {
        let mut c = Curve::new("T_K", self.temperatures.clone())?;
        for (name, v) in &self.chi {
            c.push_column(format!("chi_{name}"), v.clone())?;
        }
        Ok(c)
    }

    pub fn witness_curve(&self) -> Result<Curve> {
        let mut c = Curve::new("T_K", self.temperatures.clone())?;
        for w in &self.witnesses {
            c.push_column(w.name.clone(), w.values.clone())?;
        }
        Ok(c)
    }

    pub fn ef_curve(&self) -> Result<Curve> {
        let mut c = Curve::new("T_K", self.temperatures.clone())?;
        for e in &self.pair_ef {
            c.push_column(e.name.clone(), e.ef.clone())?;
            c.push_column(format!("{}_margin", e.name), e.margin.clone())?;
        }
        Ok(c)
    }

    /// Writes `extraction.json` plus `exp_chi.csv`, `exp_witness.csv` and
    /// `exp_ef.csv` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        let json = dir.join("extraction.json");
        std::fs::write(&json, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&json, e))?;
        self.chi_curve()?.write_csv(&dir.join("exp_chi.csv"))?;
        self.witness_curve()?.write_csv(&dir.join("exp_witness.csv"))?;
        self.ef_curve()?.write_csv(&dir.join("exp_ef.csv"))?;
        Ok(())
    }
}
