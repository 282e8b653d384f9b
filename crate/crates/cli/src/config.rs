//! TOML run configuration. Every field has a default; the resolved config is
//! echoed next to the artifacts.

use std::path::{Path, PathBuf};

use plap_core::cascade::{halving, SweepPlan, Swept};
use plap_core::dual::DualConfig;
use plap_core::mesh::GridSpec;
use plap_core::operators::{ConvectionMode, ProblemParams, MU_MACHINE};
use plap_core::presets::Datum;
use plap_core::solver::{Regime, SolveConfig};
use plap_core::PlapError;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of every randomized bank and datum.
    pub seed: u64,
    pub out: PathBuf,
    /// Store every `snapshot_stride`-th step; the dual audit needs 1.
    pub snapshot_stride: usize,
    pub regime: Regime,
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub datum: DatumSection,
    pub solve: SolveConfig,
    pub dual: DualSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("plap-out"),
            snapshot_stride: 1,
            regime: Regime::Pfepv,
            problem: ProblemSection::default(),
            grid: GridSection::default(),
            datum: DatumSection::default(),
            solve: SolveConfig::default(),
            dual: DualSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub p: f64,
    pub mu: f64,
    pub nu: f64,
    /// Convection radius; unset couples it to `sqrt(mu) * L`.
    pub conv_radius: Option<f64>,
    pub convection: ConvectionMode,
    /// Accept `mu = 0` by flooring it at machine precision.
    pub mu_floor: bool,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            p: 1.5,
            mu: 1e-2,
            nu: 1e-2,
            conv_radius: None,
            convection: ConvectionMode::Mollified,
            mu_floor: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    /// Cells per axis on the unit box; `cells - 1` interior nodes.
    pub cells: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { dim: 2, cells: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatumSection {
    pub kind: Datum,
    pub amplitude: f64,
}

impl Default for DatumSection {
    fn default() -> Self {
        DatumSection {
            kind: Datum::Bump,
            amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualSection {
    /// Stored run to audit; defaults to the output directory of `solve`.
    pub run: Option<PathBuf>,
    /// End of the audited segment; defaults to the run's final time.
    pub t: Option<f64>,
    /// Space-time mollification radius; defaults to `4h`.
    pub eta: Option<f64>,
    /// Dual viscosity; defaults to the run's `nu`.
    pub nu: Option<f64>,
    /// Final-time datum, normalized to unit L¹.
    pub phi0: Datum,
    /// Also compute the sup-norm certificate over a probe bank.
    pub certificate: bool,
    /// Sampled probes on grids too large for the full one-hot bank.
    pub random_probes: usize,
    pub solver: DualConfig,
}

impl Default for DualSection {
    fn default() -> Self {
        DualSection {
            run: None,
            t: None,
            eta: None,
            nu: None,
            phi0: Datum::Bump,
            certificate: true,
            random_probes: 4,
            solver: DualConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit schedule; unset gives `points` halvings from `start`.
    pub schedule: Option<Vec<f64>>,
    pub start: f64,
    pub points: usize,
    /// Compare the last mu-sweep point with the floored direct solve.
    pub cross_check: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            schedule: None,
            start: 0.1,
            points: 5,
            cross_check: true,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PlapError> {
        toml::from_str(text).map_err(|e| PlapError::Format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, PlapError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PlapError::Format(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<GridSpec, PlapError> {
        if !(1..=3).contains(&self.grid.dim) {
            return Err(PlapError::Usage(format!(
                "grid.dim must be 1, 2 or 3, got {}",
                self.grid.dim
            )));
        }
        GridSpec::unit(self.grid.dim, self.grid.cells)
    }

    /// Problem parameters, enforcing the singularity policy for `mu = 0`.
    pub fn params(&self) -> Result<ProblemParams, PlapError> {
        let s = &self.problem;
        let mut params = ProblemParams::new(s.p, s.mu, s.nu)?.with_convection(s.convection);
        if let Some(r) = s.conv_radius {
            params = params.with_conv_radius(r);
        }
        params.validate()?;
        if s.mu == 0.0 && !s.mu_floor && self.regime != Regime::Limit {
            return Err(PlapError::Usage(format!(
                "mu = 0 makes the diffusivity singular for p < 2; the singularity policy requires \
                 problem.mu_floor = true (floor {MU_MACHINE:e})"
            )));
        }
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), PlapError> {
        self.grid()?;
        self.params()?;
        self.solve.validate()?;
        if self.snapshot_stride == 0 {
            return Err(PlapError::Usage(
                "snapshot_stride must be at least 1".into(),
            ));
        }
        if !self.datum.amplitude.is_finite() {
            return Err(PlapError::Usage("datum.amplitude must be finite".into()));
        }
        Ok(())
    }

    pub fn sweep_plan(&self, swept: Swept) -> Result<SweepPlan, PlapError> {
        let schedule = match &self.sweep.schedule {
            Some(s) => s.clone(),
            None => halving(self.sweep.start, self.sweep.points),
        };
        let plan = SweepPlan {
            datum: self.datum.kind,
            amplitude: self.datum.amplitude,
            seed: self.seed,
            p: self.problem.p,
            mu: self.problem.mu,
            swept,
            schedule,
            dim: self.grid.dim,
            cells: self.grid.cells,
            solve: self.solve.clone(),
            cross_check: self.sweep.cross_check && swept == Swept::Mu,
        };
        plan.validate()?;
        Ok(plan)
    }
}
