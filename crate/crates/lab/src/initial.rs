//! Catalog of initial data.

use bernlab_core::calculus::BandLimited;
use bernlab_core::manifold::{DiscreteManifold, ManifoldKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Constant {
        value: f64,
    },
    /// `offset + amplitude · cos(wavenumber · x_axis)` in grid coordinates.
    Cosine {
        #[serde(default)]
        offset: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        axis: usize,
        #[serde(default = "one")]
        wavenumber: f64,
    },
    /// `offset + amplitude · sin(wavenumber · x_axis)`.
    Sine {
        #[serde(default)]
        offset: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        axis: usize,
        #[serde(default = "one")]
        wavenumber: f64,
    },
    /// `offset + amplitude · z` on the sphere, `z = cos θ` the height of the
    /// unit embedding.
    Height {
        #[serde(default)]
        offset: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `offset + amplitude · B`, `B` a random band-limited field drawn with
    /// `seed` (the scenario seed when unset).
    BandLimited {
        #[serde(default)]
        offset: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_modes")]
        modes: usize,
        #[serde(default = "default_wavenumber")]
        max_wavenumber: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

fn one() -> f64 {
    1.0
}

fn default_modes() -> usize {
    5
}

fn default_wavenumber() -> u32 {
    3
}

/// Random band-limited field with coefficients uniform in `[-1, 1]`.
pub fn random_band_limited(man: &DiscreteManifold, modes: usize, max_wavenumber: u32, seed: u64) -> BandLimited {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BandLimited::random(man, modes, max_wavenumber, || rng.random_range(-1.0..=1.0))
}

impl InitialData {
    /// Nodal values on `man`; `seed` is used by random entries without
    /// their own.
    pub fn sample(&self, man: &DiscreteManifold, seed: u64) -> Result<Vec<f64>> {
        let coords = |f: &dyn Fn([f64; 2]) -> f64| (0..man.node_count()).map(|k| f(man.coords(k))).collect::<Vec<_>>();
        let check_axis = |axis: usize| {
            if axis > 1 {
                return Err(LabError::Invalid(format!("axis {axis} out of range; grids have axes 0 and 1")));
            }
            Ok(axis)
        };
        let values = match *self {
            InitialData::Constant { value } => vec![value; man.node_count()],
            InitialData::Cosine { offset, amplitude, axis, wavenumber } => {
                let a = check_axis(axis)?;
                coords(&|x| offset + amplitude * (wavenumber * x[a]).cos())
            }
            InitialData::Sine { offset, amplitude, axis, wavenumber } => {
                let a = check_axis(axis)?;
                coords(&|x| offset + amplitude * (wavenumber * x[a]).sin())
            }
            InitialData::Height { offset, amplitude } => {
                if man.kind() != ManifoldKind::SphereGrid {
                    return Err(LabError::Invalid("`height` initial data needs the sphere".into()));
                }
                coords(&|x| offset + amplitude * x[0].cos())
            }
            InitialData::BandLimited { offset, amplitude, modes, max_wavenumber, seed: own } => {
                if man.grid().is_none() {
                    return Err(LabError::Invalid("band-limited initial data needs a grid manifold".into()));
                }
                let field = random_band_limited(man, modes, max_wavenumber, own.unwrap_or(seed)).sample(man, "initial")?;
                field.values.iter().map(|b| offset + amplitude * b).collect()
            }
        };
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::Invalid(format!("initial data is not finite at node {k}")));
        }
        Ok(values)
    }
}
