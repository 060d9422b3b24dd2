//! Cluster description, spin operators and the Heisenberg + Zeeman
//! Hamiltonian.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::zeeman_kelvin;
use crate::error::{Error, Result};
use crate::linalg::{site_bit, CMatrix, DenseHermitian};

/// Largest cluster handled with dense matrices (dimension 4096).
pub const MAX_SPINS: usize = 12;

pub const PRESET_NA2CU5SI4O14: &str = "na2cu5si4o14";

/// Intra-trimer exchange of Na₂Cu₅Si₄O₁₄ in Kelvin.
pub const J_TRIMER: f64 = -224.9;
/// Dimer–trimer exchange in Kelvin.
pub const J_DIMER_TRIMER: f64 = -8.01;
/// Intra-dimer exchange in Kelvin.
pub const J_DIMER: f64 = 40.22;

pub const DEFAULT_G: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Exchange bond between two distinct sites (0-based). Contributes
/// `-coupling · S_i·S_j` to the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

/// A cluster of spins-1/2 with isotropic exchange bonds.
///
/// Site indices are 0-based in the API and 1-based in the JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecFile", into = "SpecFile")]
pub struct ClusterSpec {
    n_spins: usize,
    bonds: Vec<Bond>,
    g_factor: f64,
    subsystems: BTreeMap<String, Vec<usize>>,
}

impl ClusterSpec {
    pub fn new(
        n_spins: usize,
        bonds: Vec<Bond>,
        g_factor: f64,
        subsystems: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self> {
        if n_spins == 0 || n_spins > MAX_SPINS {
            return Err(Error::Size {
                n_spins,
                max: MAX_SPINS,
            });
        }
        if !(g_factor > 0.0 && g_factor.is_finite()) {
            return Err(Error::InvalidSpec(format!("g factor must be positive, got {g_factor}")));
        }
        for b in &bonds {
            for site in [b.i, b.j] {
                if site >= n_spins {
                    return Err(Error::SiteIndex { site, n_spins });
                }
            }
            if b.i == b.j {
                return Err(Error::InvalidSpec(format!("bond connects site {} to itself", b.i + 1)));
            }
            if !b.coupling.is_finite() {
                return Err(Error::InvalidSpec("bond coupling must be finite".into()));
            }
        }
        for (name, sites) in &subsystems {
            if sites.is_empty() {
                return Err(Error::InvalidSpec(format!("subsystem `{name}` is empty")));
            }
            let mut seen = vec![false; n_spins];
            for &s in sites {
                if s >= n_spins {
                    return Err(Error::SiteIndex { site: s, n_spins });
                }
                if std::mem::replace(&mut seen[s], true) {
                    return Err(Error::InvalidSpec(format!(
                        "subsystem `{name}` lists site {} twice",
                        s + 1
                    )));
                }
            }
        }
        Ok(ClusterSpec {
            n_spins,
            bonds,
            g_factor,
            subsystems,
        })
    }

    /// Dimer–trimer cluster of Na₂Cu₅Si₄O₁₄: trimer sites 1–3 (chain 1–2–3),
    /// dimer sites 4–5, and the dimer–trimer term `-J₂ S_A·S_B` expanded into
    /// all six cross bonds.
    pub fn na2cu5si4o14() -> Self {
        Self::na2cu5si4o14_with_g(DEFAULT_G)
    }

    pub fn na2cu5si4o14_with_g(g_factor: f64) -> Self {
        let mut bonds = vec![
            Bond { i: 0, j: 1, coupling: J_TRIMER },
            Bond { i: 1, j: 2, coupling: J_TRIMER },
            Bond { i: 3, j: 4, coupling: J_DIMER },
        ];
        for a in [3, 4] {
            for b in [0, 1, 2] {
                bonds.push(Bond { i: a, j: b, coupling: J_DIMER_TRIMER });
            }
        }
        let subsystems = [
            ("trimer", vec![0, 1, 2]),
            ("dimer", vec![3, 4]),
            ("pair_12", vec![0, 1]),
            ("pair_23", vec![1, 2]),
            ("pair_13", vec![0, 2]),
            ("pair_45", vec![3, 4]),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        ClusterSpec::new(5, bonds, g_factor, subsystems).expect("preset is valid")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            PRESET_NA2CU5SI4O14 => Ok(Self::na2cu5si4o14()),
            other => Err(Error::InvalidSpec(format!(
                "unknown preset `{other}` (available: {PRESET_NA2CU5SI4O14})"
            ))),
        }
    }

    /// Spins with no bonds at all.
    pub fn free_spins(n_spins: usize) -> Result<Self> {
        ClusterSpec::new(n_spins, Vec::new(), DEFAULT_G, BTreeMap::new())
    }

    /// Two spins joined by a single bond.
    pub fn pair(coupling: f64) -> Result<Self> {
        let subsystems = BTreeMap::from([("pair_12".to_string(), vec![0, 1])]);
        ClusterSpec::new(2, vec![Bond { i: 0, j: 1, coupling }], DEFAULT_G, subsystems)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn g_factor(&self) -> f64 {
        self.g_factor
    }

    pub fn with_g_factor(&self, g_factor: f64) -> Result<Self> {
        ClusterSpec::new(self.n_spins, self.bonds.clone(), g_factor, self.subsystems.clone())
    }

    pub fn subsystems(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.subsystems
    }

    pub fn subsystem(&self, name: &str) -> Result<&[usize]> {
        self.subsystems
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingSubsystem(name.to_string()))
    }

    pub fn all_sites(&self) -> Vec<usize> {
        (0..self.n_spins).collect()
    }

    /// Bonds with both ends inside `sites`.
    pub fn internal_bonds<'a>(&'a self, sites: &'a [usize]) -> impl Iterator<Item = &'a Bond> + 'a {
        self.bonds
            .iter()
            .filter(move |b| sites.contains(&b.i) && sites.contains(&b.j))
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

impl FromStr for ClusterSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::from_json(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    n_spins: usize,
    #[serde(default = "default_g")]
    g: f64,
    bonds: Vec<(usize, usize, f64)>,
    #[serde(default)]
    subsystems: BTreeMap<String, Vec<usize>>,
}

fn default_g() -> f64 {
    DEFAULT_G
}

fn from_one_based(site: usize, n_spins: usize) -> Result<usize> {
    if site == 0 || site > n_spins {
        return Err(Error::InvalidSpec(format!(
            "site {site} out of range 1..={n_spins} (sites are 1-based in config files)"
        )));
    }
    Ok(site - 1)
}

impl TryFrom<SpecFile> for ClusterSpec {
    type Error = Error;
    fn try_from(f: SpecFile) -> Result<Self> {
        let n = f.n_spins;
        let bonds = f
            .bonds
            .iter()
            .map(|&(i, j, coupling)| {
                Ok(Bond {
                    i: from_one_based(i, n)?,
                    j: from_one_based(j, n)?,
                    coupling,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let subsystems = f
            .subsystems
            .into_iter()
            .map(|(name, sites)| {
                let sites = sites
                    .into_iter()
                    .map(|s| from_one_based(s, n))
                    .collect::<Result<Vec<_>>>()?;
                Ok((name, sites))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        ClusterSpec::new(n, bonds, f.g, subsystems)
    }
}

impl From<ClusterSpec> for SpecFile {
    fn from(s: ClusterSpec) -> SpecFile {
        SpecFile {
            n_spins: s.n_spins,
            g: s.g_factor,
            bonds: s.bonds.iter().map(|b| (b.i + 1, b.j + 1, b.coupling)).collect(),
            subsystems: s
                .subsystems
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().map(|s| s + 1).collect()))
                .collect(),
        }
    }
}

/// Single-site spin-1/2 operators `σ^α / 2` in the (↑, ↓) basis.
pub fn single_spin(axis: Axis) -> CMatrix {
    let h = 0.5;
    let z = Complex64::new(0.0, 0.0);
    match axis {
        Axis::X => CMatrix::from_real_rows(&[&[0.0, h], &[h, 0.0]]),
        Axis::Y => CMatrix::from_rows(vec![z, Complex64::new(0.0, -h), Complex64::new(0.0, h), z]),
        Axis::Z => CMatrix::from_real_diagonal(&[h, -h]),
    }
}

/// Dense `S^α_i` for every site of an `n`-spin register.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    n_spins: usize,
    ops: Vec<[DenseHermitian; 3]>,
}

impl SpinOperators {
    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn site(&self, site: usize, axis: Axis) -> &DenseHermitian {
        &self.ops[site][axis.index()]
    }

    pub fn total(&self, axis: Axis) -> DenseHermitian {
        let dim = 1 << self.n_spins;
        let sum = self
            .ops
            .iter()
            .fold(CMatrix::zeros(dim), |acc, o| &acc + o[axis.index()].matrix());
        DenseHermitian::symmetrized(sum)
    }
}

/// Builds `S^x_i, S^y_i, S^z_i` for each site by Kronecker products.
pub fn build_spin_operators(n_spins: usize) -> Result<SpinOperators> {
    if n_spins == 0 || n_spins > MAX_SPINS {
        return Err(Error::Size {
            n_spins,
            max: MAX_SPINS,
        });
    }
    let ops = (0..n_spins)
        .map(|site| {
            Axis::ALL.map(|axis| {
                let m = (0..n_spins).fold(CMatrix::identity(1), |acc, k| {
                    if k == site {
                        acc.kron(&single_spin(axis))
                    } else {
                        acc.kron(&CMatrix::identity(2))
                    }
                });
                DenseHermitian::symmetrized(m)
            })
        })
        .collect();
    Ok(SpinOperators { n_spins, ops })
}

/// Total `S^z` eigenvalue of a basis index.
pub fn basis_sz(index: usize, n_spins: usize) -> f64 {
    let down = (index & ((1 << n_spins) - 1)).count_ones() as f64;
    0.5 * n_spins as f64 - down
}

/// Diagonal `S^z_total`.
pub fn total_sz(n_spins: usize) -> DenseHermitian {
    let diag: Vec<f64> = (0..1usize << n_spins).map(|b| basis_sz(b, n_spins)).collect();
    DenseHermitian::symmetrized(CMatrix::from_real_diagonal(&diag))
}

/// `Σ_bonds −J S_i·S_j − g (μ_B/k_B) H S^z_total` in Kelvin, with the field
/// (Oersted) along z.
///
/// Built directly in the computational basis: `S_i·S_j` is `±1/4` on the
/// diagonal and exchanges anti-aligned spins with amplitude `1/2`.
pub fn build_hamiltonian(spec: &ClusterSpec, field_oe: f64) -> Result<DenseHermitian> {
    if !(field_oe >= 0.0) || !field_oe.is_finite() {
        return Err(Error::Domain(format!("field must be finite and ≥ 0 Oe, got {field_oe}")));
    }
    let n = spec.n_spins;
    let dim = spec.dim();
    let mut h = CMatrix::zeros(dim);
    for b in &spec.bonds {
        let (mi, mj) = (site_bit(b.i, n), site_bit(b.j, n));
        for idx in 0..dim {
            let parallel = (idx & mi != 0) == (idx & mj != 0);
            if parallel {
                h[(idx, idx)].re -= 0.25 * b.coupling;
            } else {
                h[(idx, idx)].re += 0.25 * b.coupling;
                let flipped = idx ^ mi ^ mj;
                h[(flipped, idx)].re -= 0.5 * b.coupling;
            }
        }
    }
    if field_oe > 0.0 {
        let zeeman = zeeman_kelvin(spec.g_factor, field_oe);
        for idx in 0..dim {
            h[(idx, idx)].re -= zeeman * basis_sz(idx, n);
        }
    }
    Ok(DenseHermitian::symmetrized(h))
}
