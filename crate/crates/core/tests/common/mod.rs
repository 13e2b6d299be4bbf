#![allow(dead_code)]

use bernlab_core::manifold::{build_manifold, DiscreteManifold, ManifoldSpec, Shape, WeightKind};
use std::f64::consts::TAU;

pub fn torus(n: usize, m: f64, weight: WeightKind) -> DiscreteManifold {
    build_manifold(&ManifoldSpec { shape: Shape::Torus { side: [TAU; 2], resolution: [n, n] }, synthetic_dimension: m, weight }).unwrap()
}

pub fn sphere(radius: f64, n_theta: usize) -> DiscreteManifold {
    build_manifold(&ManifoldSpec {
        shape: Shape::Sphere { radius, resolution: [n_theta, 2 * n_theta] },
        synthetic_dimension: 4.0,
        weight: WeightKind::Zero,
    })
    .unwrap()
}

/// `[-half, half]²` with `n` nodes per side.
pub fn patch(half: f64, n: usize, weight: WeightKind) -> DiscreteManifold {
    build_manifold(&ManifoldSpec {
        shape: Shape::FlatPatch { lower: [-half; 2], upper: [half; 2], resolution: [n, n] },
        synthetic_dimension: 4.0,
        weight,
    })
    .unwrap()
}

pub fn sample(man: &DiscreteManifold, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    (0..man.node_count()).map(|k| f(man.coords(k))).collect()
}

pub fn sup_abs(x: impl IntoIterator<Item = f64>) -> f64 {
    x.into_iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Least-squares slope of `log err` against `log h`.
pub fn order(h: &[f64], err: &[f64]) -> f64 {
    bernlab_core::math::fitted_order(h, err)
}
