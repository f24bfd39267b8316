//! Simulation configuration.
//!
//! Configs are TOML files; every field is optional and falls back to the
//! factory-floor defaults (28 GHz, 200 MHz, 120 x 60 m, 0.2 W per antenna,
//! 9 dB noise figure, 1% outage).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub spacing_m: f64,
}

impl Grid {
    pub fn capacity(&self) -> usize {
        self.nx * self.ny
    }

    /// Coordinates of grid point `index` (x-major).
    pub fn point(&self, index: usize) -> [f64; 2] {
        let ix = index / self.ny;
        let iy = index % self.ny;
        [ix as f64 * self.spacing_m, iy as f64 * self.spacing_m]
    }
}

/// Which branch of the indoor-factory sparse-clutter model to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathlossBranch {
    Los,
    Nlos,
}

/// Pathloss options; the carrier frequency comes from [`SimConfig::carrier_ghz`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathlossModel {
    pub branch: PathlossBranch,
    pub shadowing: bool,
}

impl Default for PathlossModel {
    fn default() -> Self {
        PathlossModel {
            branch: PathlossBranch::Los,
            shadowing: true,
        }
    }
}

/// Transmission scheme under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Alamouti,
    SmallCell,
    Sfn,
    Mrt95,
    Mrt1Ru,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Alamouti => "alamouti",
            Scheme::SmallCell => "smallcell",
            Scheme::Sfn => "sfn",
            Scheme::Mrt95 => "mrt95",
            Scheme::Mrt1Ru => "mrt1ru",
        }
    }

    pub fn has_tx_csi(self) -> bool {
        matches!(self, Scheme::Mrt95 | Scheme::Mrt1Ru)
    }
}

/// Channel knowledge at the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RxCsi {
    Perfect,
    Statistical,
}

/// A scheme plus receiver CSI assumption, written `scheme` or
/// `scheme:statistical` in configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Method {
    pub scheme: Scheme,
    pub csi: RxCsi,
}

impl Method {
    pub const fn perfect(scheme: Scheme) -> Self {
        Method {
            scheme,
            csi: RxCsi::Perfect,
        }
    }

    pub const fn statistical(scheme: Scheme) -> Self {
        Method {
            scheme,
            csi: RxCsi::Statistical,
        }
    }

    pub fn all() -> Vec<Method> {
        vec![
            Method::perfect(Scheme::Alamouti),
            Method::perfect(Scheme::SmallCell),
            Method::perfect(Scheme::Sfn),
            Method::perfect(Scheme::Mrt95),
            Method::perfect(Scheme::Mrt1Ru),
            Method::statistical(Scheme::Mrt95),
            Method::statistical(Scheme::Mrt1Ru),
        ]
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.csi {
            RxCsi::Perfect => f.write_str(self.scheme.name()),
            RxCsi::Statistical => write!(f, "{}:statistical", self.scheme.name()),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (scheme, csi) = match s.split_once(':') {
            Some((a, b)) => (a, b),
            None => (s, "perfect"),
        };
        let scheme = match scheme.trim() {
            "alamouti" => Scheme::Alamouti,
            "smallcell" => Scheme::SmallCell,
            "sfn" => Scheme::Sfn,
            "mrt95" => Scheme::Mrt95,
            "mrt1ru" => Scheme::Mrt1Ru,
            other => return Err(Error::Config(format!("unknown scheme `{other}`"))),
        };
        let csi = match csi.trim() {
            "perfect" => RxCsi::Perfect,
            "statistical" => RxCsi::Statistical,
            other => return Err(Error::Config(format!("unknown rx csi `{other}`"))),
        };
        if csi == RxCsi::Statistical && !scheme.has_tx_csi() {
            return Err(Error::Config(format!(
                "statistical rx csi is only defined for mrt schemes, not `{}`",
                scheme.name()
            )));
        }
        Ok(Method { scheme, csi })
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub carrier_ghz: f64,
    pub bandwidth_hz: f64,
    pub area_m: [f64; 2],
    pub p_t_watts: f64,
    pub noise_figure_db: f64,
    pub ru_grid: Grid,
    pub ue_grid: Grid,
    pub ru_height_m: f64,
    pub ue_height_m: f64,
    pub m_rus: usize,
    pub k_ues: usize,
    pub l_per_ru: usize,
    pub n_per_ue: usize,
    pub p_out: f64,
    pub n_trial: usize,
    pub n_drops: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub pathloss: PathlossModel,
    pub rho_tx: f64,
    pub rho_rx: f64,
    /// Relative tolerance for merging near-equal eigenvalues.
    pub eigen_rel_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            carrier_ghz: 28.0,
            bandwidth_hz: 200e6,
            area_m: [120.0, 60.0],
            p_t_watts: 0.2,
            noise_figure_db: 9.0,
            ru_grid: Grid {
                nx: 16,
                ny: 8,
                spacing_m: 7.5,
            },
            ue_grid: Grid {
                nx: 120,
                ny: 60,
                spacing_m: 1.0,
            },
            ru_height_m: 8.0,
            ue_height_m: 1.5,
            m_rus: 16,
            k_ues: 4,
            l_per_ru: 1,
            n_per_ue: 1,
            p_out: 0.01,
            n_trial: 100_000,
            n_drops: 100,
            seed: 1,
            methods: Method::all(),
            pathloss: PathlossModel::default(),
            rho_tx: 0.5,
            rho_rx: 0.5,
            eigen_rel_tol: 1e-9,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.p_out > 0.0 && self.p_out < 1.0) {
            return bad(format!("p_out must lie in (0, 1), got {}", self.p_out));
        }
        if self.m_rus == 0 || self.k_ues == 0 || self.l_per_ru == 0 || self.n_per_ue == 0 {
            return bad("m_rus, k_ues, l_per_ru and n_per_ue must be positive".into());
        }
        if self.m_rus * self.l_per_ru < self.k_ues {
            return bad(format!(
                "{} RU antennas cannot serve {} users",
                self.m_rus * self.l_per_ru,
                self.k_ues
            ));
        }
        if self.n_drops == 0 {
            return bad("n_drops must be positive".into());
        }
        if (self.n_trial as f64) * self.p_out < 10.0 {
            return bad(format!(
                "n_trial * p_out must be at least 10 (got {} * {})",
                self.n_trial, self.p_out
            ));
        }
        for (name, v) in [
            ("carrier_ghz", self.carrier_ghz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("p_t_watts", self.p_t_watts),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, rho) in [("rho_tx", self.rho_tx), ("rho_rx", self.rho_rx)] {
            if !(0.0..1.0).contains(&rho) {
                return bad(format!("{name} must lie in [0, 1), got {rho}"));
            }
        }
        if !(self.eigen_rel_tol >= 0.0 && self.eigen_rel_tol < 1e-3) {
            return bad(format!("eigen_rel_tol out of range: {}", self.eigen_rel_tol));
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        Ok(())
    }

    pub fn pathloss_params(&self) -> crate::channel::PathlossParams {
        crate::channel::PathlossParams {
            carrier_ghz: self.carrier_ghz,
            branch: self.pathloss.branch,
            shadowing: self.pathloss.shadowing,
        }
    }

    pub fn noise_variance(&self) -> f64 {
        crate::channel::noise_variance(self.bandwidth_hz, self.noise_figure_db)
    }
}

/// Reads and validates a config file; an empty file yields the defaults.
pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    SimConfig::from_toml_str(&text)
}
