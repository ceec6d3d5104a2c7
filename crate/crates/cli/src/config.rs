//! Run configuration: a single JSON document, lengths in mm and angles in
//! degrees inside the geometry block, SI everywhere else.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use iga_motor::assembly::Harmonics;
use iga_motor::geometry::{
    apply_offsets, build_geometry, ControlPointOffsets, DesignSpace, DesignVector, GeometryOptions,
    MachineGeometry, ParameterSet,
};
use iga_motor::materials::{BhCurve, MaterialLibrary, ReluctivityModel};
use iga_motor::model::{ModelSettings, MotorModel};
use iga_motor::optimize::OptimizationConfig;
use iga_motor::solver::NewtonOptions;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Free parameter entry: a bare value or value with bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamEntry {
    Value(f64),
    Bounded { value: f64, min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Overrides of the free template parameters by name.
    pub parameters: BTreeMap<String, ParamEntry>,
    /// Overrides of the fixed dimensions by name.
    pub fixed: BTreeMap<String, f64>,
    /// Radial rotor-surface offsets, 29 when symmetric else 58.
    pub offsets_mm: Option<Vec<f64>>,
    pub symmetric: bool,
    /// Remanence in tesla.
    pub remanence: f64,
    pub airgap_radius_mm: f64,
    pub full_machine: bool,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let o = GeometryOptions::default();
        Self {
            parameters: BTreeMap::new(),
            fixed: BTreeMap::new(),
            offsets_mm: None,
            symmetric: true,
            remanence: o.br,
            airgap_radius_mm: o.airgap_radius * 1e3,
            full_machine: o.full_machine,
        }
    }
}

/// Template parameters, offsets and options resolved from a geometry block.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedGeometry {
    pub params: ParameterSet,
    pub offsets: ControlPointOffsets,
    pub options: GeometryOptions,
}

impl GeometryConfig {
    pub fn resolve(&self) -> Result<ResolvedGeometry, CliError> {
        let mut params = ParameterSet::initial();
        for (name, entry) in &self.parameters {
            let i = params
                .index_of(name)
                .ok_or_else(|| CliError::Config(format!("unknown parameter {name}")))?;
            let p = &mut params.free[i];
            match *entry {
                ParamEntry::Value(v) => p.value = v,
                ParamEntry::Bounded { value, min, max } => {
                    p.value = value;
                    p.min = min;
                    p.max = max;
                }
            }
        }
        for (name, &v) in &self.fixed {
            let p = params
                .fixed
                .iter_mut()
                .find(|p| &p.name == name)
                .ok_or_else(|| CliError::Config(format!("unknown fixed dimension {name}")))?;
            p.value = v;
        }
        params.validate()?;
        let offsets = match &self.offsets_mm {
            None => ControlPointOffsets::zeros(self.symmetric),
            Some(v) => ControlPointOffsets::new(v.iter().map(|d| d * 1e-3).collect(), self.symmetric)?,
        };
        if !(self.remanence >= 0.0 && self.airgap_radius_mm > 0.0) {
            return Err(CliError::Config(
                "remanence must be non-negative and the air-gap radius positive".into(),
            ));
        }
        let options = GeometryOptions {
            br: self.remanence,
            airgap_radius: self.airgap_radius_mm * 1e-3,
            full_machine: self.full_machine,
        };
        Ok(ResolvedGeometry {
            params,
            offsets,
            options,
        })
    }

    /// Complete block that reproduces `params` and `offsets` exactly.
    pub fn from_resolved(r: &ResolvedGeometry) -> Self {
        Self {
            parameters: r
                .params
                .free
                .iter()
                .map(|p| {
                    let e = ParamEntry::Bounded {
                        value: p.value,
                        min: p.min,
                        max: p.max,
                    };
                    (p.name.clone(), e)
                })
                .collect(),
            fixed: r.params.fixed.iter().map(|p| (p.name.clone(), p.value)).collect(),
            offsets_mm: Some(r.offsets.values.iter().map(|v| v * 1e3).collect()),
            symmetric: r.offsets.symmetric,
            remanence: r.options.br,
            airgap_radius_mm: r.options.airgap_radius * 1e3,
            full_machine: r.options.full_machine,
        }
    }
}

impl ResolvedGeometry {
    pub fn build(&self) -> Result<MachineGeometry, CliError> {
        Ok(apply_offsets(
            &build_geometry(&self.params, &self.options)?,
            &self.offsets,
        )?)
    }

    pub fn space(&self) -> DesignSpace {
        DesignSpace::new(self.params.clone(), self.options, self.offsets.symmetric)
    }

    /// Design coordinates, clipped to the box; reports whether clipping happened.
    pub fn design_vector(&self) -> Result<(DesignVector, bool), CliError> {
        let space = self.space();
        let r = space.offset_range();
        let mut x = self.params.to_scaled();
        x.extend(self.offsets.values.iter().map(|v| (v - space.offset_min) / r));
        let clipped = x.iter().any(|v| !(0.0..=1.0).contains(v));
        let x = x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok((DesignVector::new(x)?, clipped))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum IronConfig {
    /// Bundled M27 curve.
    M27,
    Linear {
        mu_r: f64,
    },
    /// `B_tesla,H_A_per_m` CSV, relative to the config file.
    Curve {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialsConfig {
    pub iron: IronConfig,
    pub magnet_mu_r: f64,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        Self {
            iron: IronConfig::M27,
            magnet_mu_r: 1.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationConfig {
    /// Amperes.
    pub current: f64,
    pub n_wind: f64,
    pub pole_pairs: usize,
    /// Coil cross-section in m²; the template value when absent.
    pub coil_area: Option<f64>,
}

impl Default for ExcitationConfig {
    fn default() -> Self {
        let s = ModelSettings::default();
        Self {
            current: s.current,
            n_wind: s.n_wind,
            pole_pairs: s.pole_pairs,
            coil_area: None,
        }
    }
}

/// Degrees: an explicit list or an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl AngleSpec {
    pub fn degrees(&self) -> Result<Vec<f64>, CliError> {
        let out = match *self {
            AngleSpec::List(ref v) => v.clone(),
            AngleSpec::Range { start, stop, step } => {
                if !(step > 0.0) || !(stop >= start) {
                    return Err(CliError::Config(format!("bad angle range {start}:{stop}:{step}")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| start + k as f64 * step).collect()
            }
        };
        if out.is_empty() || out.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config("angle set must be non-empty and finite".into()));
        }
        Ok(out)
    }

    /// `a,b,c` or `start:stop[:step]`.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad angle '{t}'")))
        };
        if s.contains(':') {
            let parts: Vec<f64> = s.split(':').map(num).collect::<Result<_, _>>()?;
            match parts[..] {
                [start, stop] => Ok(AngleSpec::Range {
                    start,
                    stop,
                    step: 1.0,
                }),
                [start, stop, step] => Ok(AngleSpec::Range { start, stop, step }),
                _ => Err(CliError::Config(format!("bad angle range '{s}'"))),
            }
        } else {
            Ok(AngleSpec::List(s.split(',').map(num).collect::<Result<_, _>>()?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    /// Largest accepted relative error.
    pub threshold: f64,
    /// Difference step in scaled design coordinates.
    pub fd_step: f64,
    /// Parameter names or `offset<k>`; all free parameters when absent.
    pub coordinates: Option<Vec<String>>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            threshold: 1e-5,
            fd_step: 1e-6,
            coordinates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Option<GeometryConfig>,
    /// Geometry block in its own file (as written by `optimize`), relative
    /// to the config file.
    pub geometry_file: Option<PathBuf>,
    pub materials: MaterialsConfig,
    pub excitation: ExcitationConfig,
    /// Number of interface harmonics `2, 6, 10, …`.
    pub harmonics: Option<usize>,
    pub angles_deg: Option<AngleSpec>,
    pub newton: NewtonOptions,
    /// Parametric samples per direction and patch in `field.csv`.
    pub field_samples: usize,
    pub gradcheck: GradcheckConfig,
    pub optimization: OptimizationConfig,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: None,
            geometry_file: None,
            materials: MaterialsConfig::default(),
            excitation: ExcitationConfig::default(),
            harmonics: None,
            angles_deg: None,
            newton: NewtonOptions::default(),
            field_samples: 5,
            gradcheck: GradcheckConfig::default(),
            optimization: OptimizationConfig::default(),
            output_dir: None,
        }
    }
}

/// Configuration with its file references resolved.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub geometry: ResolvedGeometry,
    pub model: MotorModel,
    /// The sweep angles as configured, in degrees.
    pub angles_deg: Vec<f64>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((parse(&read(path)?, path)?, base))
    }

    /// Resolves file references against `base`.
    pub fn resolve(self, base: &Path) -> Result<Run, CliError> {
        let geometry = match (&self.geometry, &self.geometry_file) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give either geometry or geometry_file".into()));
            }
            (None, Some(f)) => {
                let p = base.join(f);
                parse::<GeometryConfig>(&read(&p)?, &p)?
            }
            (g, None) => g.clone().unwrap_or_default(),
        };
        let geometry = geometry.resolve()?;
        let m = &self.materials;
        let mut materials = match &m.iron {
            IronConfig::M27 => MaterialLibrary::nonlinear(m.magnet_mu_r)?,
            IronConfig::Linear { mu_r } => MaterialLibrary::linear(*mu_r, m.magnet_mu_r)?,
            IronConfig::Curve { file } => {
                let mut lib = MaterialLibrary::nonlinear(m.magnet_mu_r)?;
                let p = base.join(file);
                lib.iron = ReluctivityModel::Curve(BhCurve::from_csv(&read(&p)?)?);
                lib
            }
        };
        materials.magnet = ReluctivityModel::linear_relative(m.magnet_mu_r)?;
        let harmonics = match self.harmonics {
            Some(0) => return Err(CliError::Config("at least one harmonic required".into())),
            Some(n) => Harmonics::first(n),
            None => Harmonics::default(),
        };
        let angles_deg = match &self.angles_deg {
            Some(a) => a.degrees()?,
            None => (0..30).map(f64::from).collect(),
        };
        let angles = angles_deg.iter().map(|d| d.to_radians()).collect();
        let e = &self.excitation;
        if !(e.current.is_finite() && e.n_wind > 0.0) || e.coil_area.is_some_and(|a| !(a > 0.0)) {
            return Err(CliError::Config(
                "current must be finite, n_wind and coil area positive".into(),
            ));
        }
        if self.field_samples < 2 {
            return Err(CliError::Config("field_samples must be at least 2".into()));
        }
        if !(self.gradcheck.fd_step > 0.0 && self.gradcheck.fd_step < 0.5 && self.gradcheck.threshold > 0.0) {
            return Err(CliError::Config(
                "gradcheck step must lie in (0, 0.5) and the threshold be positive".into(),
            ));
        }
        self.optimization.validate()?;
        let settings = ModelSettings {
            current: e.current,
            n_wind: e.n_wind,
            pole_pairs: e.pole_pairs,
            coil_area: e.coil_area,
            harmonics,
            angles,
            newton: self.newton,
        };
        let model = MotorModel::new(settings, materials)?;
        Ok(Run {
            config: self,
            geometry,
            model,
            angles_deg,
        })
    }
}
