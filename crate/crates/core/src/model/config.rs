use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance when checking that `tau / dt` is an integer.
const ELL_TOL: f64 = 1e-9;
const STIFF_WARN: f64 = 0.1;
const STIFF_MAX: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("tau/dt not integral (tau = {tau}, dt = {dt}); nearest valid dt is {suggested}")]
    NotIntegral { tau: f64, dt: f64, suggested: f64 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    TwoAtoms,
    Mirror,
}

impl Setup {
    pub fn atoms(self) -> usize {
        match self {
            Setup::TwoAtoms => 2,
            Setup::Mirror => 1,
        }
    }

    pub fn modes(self) -> usize {
        self.atoms()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumFile {
    pub nu_min: Option<f64>,
    pub nu_max: Option<f64>,
    pub n_nu: Option<usize>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub incoherent: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2File {
    pub p_max: Option<usize>,
}

/// The configuration document as written by the user; every key optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub setup: Option<Setup>,
    #[serde(rename = "gamma_L")]
    pub gamma_l: Option<f64>,
    #[serde(rename = "gamma_R")]
    pub gamma_r: Option<f64>,
    pub chi: Option<f64>,
    #[serde(alias = "omega")]
    pub omega1: Option<f64>,
    pub omega1_phase: Option<f64>,
    pub omega2: Option<f64>,
    pub omega2_phase: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub phi: Option<f64>,
    pub tau: Option<f64>,
    pub dt: Option<f64>,
    pub d_ph: Option<usize>,
    pub d_max: Option<usize>,
    pub svd_cutoff: Option<f64>,
    pub t_max: Option<f64>,
    pub trunc_budget: Option<f64>,
    pub initial_system: Option<String>,
    pub record_stride: Option<usize>,
    pub spectrum: Option<SpectrumFile>,
    pub g2: Option<G2File>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSettings {
    pub nu_min: f64,
    pub nu_max: f64,
    pub n_nu: usize,
    /// `None` selects `floor(0.8 q)`.
    pub m: Option<usize>,
    pub incoherent: bool,
}

impl SpectrumSettings {
    pub fn grid(&self) -> Vec<f64> {
        if self.n_nu == 1 {
            return vec![self.nu_min];
        }
        let step = (self.nu_max - self.nu_min) / (self.n_nu - 1) as f64;
        (0..self.n_nu).map(|i| self.nu_min + step * i as f64).collect()
    }
}

/// Validated parameter set in units where `γ = γ_L + γ_R` is the rate scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub setup: Setup,
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub chi: Option<f64>,
    /// Complex Rabi frequency per atom.
    pub omega: Vec<C64>,
    pub omega_mag: Vec<f64>,
    pub omega_phase: Vec<f64>,
    pub delta: Vec<f64>,
    pub phi: f64,
    pub tau: f64,
    pub dt: f64,
    pub ell: usize,
    pub d_ph: usize,
    pub d_max: usize,
    pub svd_cutoff: f64,
    pub t_max: f64,
    pub trunc_budget: f64,
    pub initial_system: String,
    pub record_stride: usize,
    pub spectrum: SpectrumSettings,
    pub g2_p_max: Option<usize>,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

fn finite(name: &str, x: f64) -> Result<f64, ConfigError> {
    if x.is_finite() {
        Ok(x)
    } else {
        invalid(format!("`{name}` must be finite"))
    }
}

/// Local system state for a label such as `"ground"`, `"excited"`, `"g"`,
/// `"e"` or one letter per atom (`"eg"`).
pub fn initial_state(spec: &str, atoms: usize) -> Result<Vec<C64>, ConfigError> {
    let letters: String = match spec {
        "ground" => "g".repeat(atoms),
        "excited" => "e".repeat(atoms),
        s => s.to_string(),
    };
    if letters.len() != atoms || !letters.chars().all(|ch| ch == 'g' || ch == 'e') {
        return invalid(format!(
            "initial_system `{spec}` must be \"ground\", \"excited\" or {atoms} letter(s) from {{g, e}}"
        ));
    }
    let index = letters.chars().fold(0usize, |acc, ch| 2 * acc + usize::from(ch == 'e'));
    let mut v = vec![C64::new(0.0, 0.0); 1 << atoms];
    v[index] = C64::new(1.0, 0.0);
    Ok(v)
}

impl ConfigFile {
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let setup = self.setup.ok_or(ConfigError::Missing("setup"))?;
        let tau = finite("tau", self.tau.ok_or(ConfigError::Missing("tau"))?)?;
        let dt = finite("dt", self.dt.ok_or(ConfigError::Missing("dt"))?)?;
        if dt <= 0.0 {
            return invalid("`dt` must be positive");
        }
        if tau <= 0.0 {
            return invalid("`tau` must be positive");
        }
        let ratio = tau / dt;
        let ell = ratio.round();
        if ell < 1.0 || (ratio - ell).abs() > ELL_TOL * ratio {
            let suggested = tau / ell.max(1.0);
            return Err(ConfigError::NotIntegral { tau, dt, suggested });
        }
        let ell = ell as usize;

        let (gamma_l, gamma_r) = match (self.chi, self.gamma_l, self.gamma_r) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return invalid("`chi` cannot be combined with `gamma_L`/`gamma_R`")
            }
            (Some(chi), None, None) => {
                if !(-1.0..=1.0).contains(&chi) {
                    return invalid("`chi` must lie in [-1, 1]");
                }
                ((1.0 + chi) / 2.0, (1.0 - chi) / 2.0)
            }
            (None, l, r) => (l.unwrap_or(0.5), r.unwrap_or(0.5)),
        };
        finite("gamma_L", gamma_l)?;
        finite("gamma_R", gamma_r)?;
        if gamma_l < 0.0 || gamma_r < 0.0 {
            return invalid("decay rates must be non-negative (gamma_L, gamma_R >= 0)");
        }

        let atoms = setup.atoms();
        if setup == Setup::Mirror && (self.omega2.is_some() || self.omega2_phase.is_some() || self.delta2.is_some()) {
            return invalid("`omega2`, `omega2_phase` and `delta2` apply only to setup \"two_atoms\"");
        }
        let o1 = finite("omega1", self.omega1.unwrap_or(0.0))?;
        let p1 = finite("omega1_phase", self.omega1_phase.unwrap_or(0.0))?;
        let mut omega_mag = vec![o1];
        let mut omega_phase = vec![p1];
        let mut delta = vec![finite("delta1", self.delta1.unwrap_or(0.0))?];
        if atoms == 2 {
            omega_mag.push(finite("omega2", self.omega2.unwrap_or(o1.abs()))?);
            omega_phase.push(finite("omega2_phase", self.omega2_phase.unwrap_or(0.0))?);
            delta.push(finite("delta2", self.delta2.unwrap_or(0.0))?);
        }
        let omega: Vec<C64> = omega_mag.iter().zip(&omega_phase).map(|(&m, &p)| C64::from_polar(m, p)).collect();

        let rate = omega_mag
            .iter()
            .map(|m| m.abs())
            .chain(delta.iter().map(|d| d.abs()))
            .fold(gamma_l + gamma_r, f64::max);
        if dt * rate > STIFF_MAX {
            return invalid(format!(
                "dt * max(gamma, |omega_n|, |delta_n|) = {:.3} exceeds {STIFF_MAX}; reduce dt",
                dt * rate
            ));
        }
        if dt * rate > STIFF_WARN {
            log::warn!("dt * max(gamma, |omega_n|, |delta_n|) = {:.3} is above {STIFF_WARN}", dt * rate);
        }

        let d_ph = self.d_ph.unwrap_or(2);
        if d_ph < 1 {
            return invalid("`d_ph` must be at least 1");
        }
        let d_max = self.d_max.unwrap_or(64);
        if d_max < 1 {
            return invalid("`d_max` must be at least 1");
        }
        let svd_cutoff = finite("svd_cutoff", self.svd_cutoff.unwrap_or(1e-8))?;
        if svd_cutoff < 0.0 {
            return invalid("`svd_cutoff` must be non-negative");
        }
        let t_max = finite("t_max", self.t_max.unwrap_or(200.0))?;
        if t_max < 0.0 {
            return invalid("`t_max` must be non-negative");
        }
        let trunc_budget = finite("trunc_budget", self.trunc_budget.unwrap_or(1e-3))?;
        if trunc_budget < 0.0 {
            return invalid("`trunc_budget` must be non-negative");
        }
        let initial_system = self.initial_system.clone().unwrap_or_else(|| "ground".into());
        initial_state(&initial_system, atoms)?;
        let record_stride = self.record_stride.unwrap_or(1);
        if record_stride < 1 {
            return invalid("`record_stride` must be at least 1");
        }
        let phi = finite("phi", self.phi.unwrap_or(0.0))?;

        let sp = self.spectrum.clone().unwrap_or_default();
        let spectrum = SpectrumSettings {
            nu_min: finite("spectrum.nu_min", sp.nu_min.unwrap_or(-5.0))?,
            nu_max: finite("spectrum.nu_max", sp.nu_max.unwrap_or(5.0))?,
            n_nu: sp.n_nu.unwrap_or(401),
            m: sp.m,
            incoherent: sp.incoherent.unwrap_or(true),
        };
        if spectrum.n_nu < 1 || spectrum.nu_max < spectrum.nu_min {
            return invalid("spectrum grid needs n_nu >= 1 and nu_max >= nu_min");
        }
        if spectrum.m == Some(0) {
            return invalid("`spectrum.M` must be positive");
        }
        let g2_p_max = self.g2.as_ref().and_then(|g| g.p_max);

        Ok(ExperimentConfig {
            setup,
            gamma_l,
            gamma_r,
            chi: self.chi,
            omega,
            omega_mag,
            omega_phase,
            delta,
            phi,
            tau,
            dt,
            ell,
            d_ph,
            d_max,
            svd_cutoff,
            t_max,
            trunc_budget,
            initial_system,
            record_stride,
            spectrum,
            g2_p_max,
        })
    }
}

impl ExperimentConfig {
    /// Number of whole steps covering `t_max`.
    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt + 1e-9).floor() as usize
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_l + self.gamma_r
    }

    pub fn system_dim(&self) -> usize {
        1 << self.setup.atoms()
    }

    pub fn initial_state(&self) -> Vec<C64> {
        initial_state(&self.initial_system, self.setup.atoms()).expect("validated at resolve time")
    }

    /// Fully populated document that resolves back to `self`.
    pub fn to_file(&self) -> ConfigFile {
        let two = self.setup == Setup::TwoAtoms;
        let (gamma_l, gamma_r) = if self.chi.is_some() { (None, None) } else { (Some(self.gamma_l), Some(self.gamma_r)) };
        ConfigFile {
            setup: Some(self.setup),
            gamma_l,
            gamma_r,
            chi: self.chi,
            omega1: Some(self.omega_mag[0]),
            omega1_phase: Some(self.omega_phase[0]),
            omega2: two.then(|| self.omega_mag[1]),
            omega2_phase: two.then(|| self.omega_phase[1]),
            delta1: Some(self.delta[0]),
            delta2: two.then(|| self.delta[1]),
            phi: Some(self.phi),
            tau: Some(self.tau),
            dt: Some(self.dt),
            d_ph: Some(self.d_ph),
            d_max: Some(self.d_max),
            svd_cutoff: Some(self.svd_cutoff),
            t_max: Some(self.t_max),
            trunc_budget: Some(self.trunc_budget),
            initial_system: Some(self.initial_system.clone()),
            record_stride: Some(self.record_stride),
            spectrum: Some(SpectrumFile {
                nu_min: Some(self.spectrum.nu_min),
                nu_max: Some(self.spectrum.nu_max),
                n_nu: Some(self.spectrum.n_nu),
                m: self.spectrum.m,
                incoherent: Some(self.spectrum.incoherent),
            }),
            g2: Some(G2File { p_max: self.g2_p_max }),
        }
    }
}
