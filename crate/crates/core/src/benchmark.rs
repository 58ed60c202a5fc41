//! Integer-grid benchmark environments: Sphere and shifted/rotated
//! Rosenbrock, Rastrigin and expanded Schaffer F6 in the CEC 2017 style.
//!
//! The policy picks one integer per dimension in `[-B, B]`; the reward is
//! `-f(x)`, so the optimal reward is `-f*` (0 for Sphere, -400/-500/-600).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env_core::{ActionSpec, Environment, Evaluation, Observation};
use crate::error::{Error, Result};
use crate::linalg::random_orthonormal;
use crate::rng::{stream_rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkFn {
    Sphere,
    RosenbrockSr,
    RastriginSr,
    SchafferF6Sr,
}

impl BenchmarkFn {
    pub const ALL: [BenchmarkFn; 4] = [
        BenchmarkFn::Sphere,
        BenchmarkFn::RosenbrockSr,
        BenchmarkFn::RastriginSr,
        BenchmarkFn::SchafferF6Sr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkFn::Sphere => "sphere",
            BenchmarkFn::RosenbrockSr => "rosenbrock_sr",
            BenchmarkFn::RastriginSr => "rastrigin_sr",
            BenchmarkFn::SchafferF6Sr => "schaffer_f6_sr",
        }
    }

    /// Value at the global minimum.
    pub fn optimum(self) -> f64 {
        match self {
            BenchmarkFn::Sphere => 0.0,
            BenchmarkFn::RosenbrockSr => 400.0,
            BenchmarkFn::RastriginSr => 500.0,
            BenchmarkFn::SchafferF6Sr => 600.0,
        }
    }

    pub fn default_bound(self) -> i64 {
        match self {
            BenchmarkFn::Sphere => 35,
            _ => 100,
        }
    }

    /// Domain pre-scaling applied to `x - o` before rotation.
    fn prescale(self) -> f64 {
        match self {
            BenchmarkFn::Sphere | BenchmarkFn::SchafferF6Sr => 1.0,
            BenchmarkFn::RosenbrockSr => 2.048 / 100.0,
            BenchmarkFn::RastriginSr => 5.12 / 100.0,
        }
    }
}

impl FromStr for BenchmarkFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(BenchmarkFn::Sphere),
            "rosenbrock_sr" | "rosenbrock" | "func4" => Ok(BenchmarkFn::RosenbrockSr),
            "rastrigin_sr" | "rastrigin" | "func5" => Ok(BenchmarkFn::RastriginSr),
            "schaffer_f6_sr" | "schaffer" | "func6" => Ok(BenchmarkFn::SchafferF6Sr),
            _ => Err(Error::Config(format!("unknown benchmark function '{s}'"))),
        }
    }
}

/// A fully instantiated benchmark: function, dimension, bound, shift, rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub function: BenchmarkFn,
    pub nx: usize,
    pub bound: i64,
    pub shift: Vec<f64>,
    /// Row-major `nx × nx` orthogonal matrix.
    pub rotation: Vec<f64>,
    pub seed: u64,
}

const SHIFT_STREAM: u64 = 11;
const ROTATION_STREAM: u64 = 12;

impl BenchmarkSpec {
    /// Seeded instance: integral shift strictly inside `(-0.8B, 0.8B)` and a
    /// Gram-Schmidt rotation of a Gaussian matrix.
    pub fn generate(function: BenchmarkFn, nx: usize, seed: u64) -> Result<Self> {
        Self::generate_with_bound(function, nx, function.default_bound(), seed)
    }

    pub fn generate_with_bound(
        function: BenchmarkFn,
        nx: usize,
        bound: i64,
        seed: u64,
    ) -> Result<Self> {
        if nx == 0 || bound < 1 {
            return Err(Error::Config(
                "benchmark needs nx >= 1 and bound >= 1".into(),
            ));
        }
        let lim = (0.8 * bound as f64).ceil() as i64 - 1;
        let mut rng: Rng = stream_rng(seed, SHIFT_STREAM);
        let shift = (0..nx)
            .map(|_| rng.random_range(-lim..=lim) as f64)
            .collect();
        let rotation = if function == BenchmarkFn::Sphere {
            identity(nx)
        } else {
            random_orthonormal(nx, nx, &mut stream_rng(seed, ROTATION_STREAM))
        };
        Ok(Self {
            function,
            nx,
            bound,
            shift,
            rotation,
            seed,
        })
    }

    /// Instance from CEC-format shift and rotation data files
    /// (whitespace-separated numbers; the first `nx` / `nx²` values are used).
    pub fn from_cec_files(
        function: BenchmarkFn,
        nx: usize,
        shift: &Path,
        rotation: Option<&Path>,
    ) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let shift = parse_numbers(&read(shift)?, nx)?;
        let rotation = match rotation {
            Some(p) => parse_numbers(&read(p)?, nx * nx)?,
            None => identity(nx),
        };
        let spec = Self {
            function,
            nx,
            bound: function.default_bound(),
            shift,
            rotation,
            seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shift.len() != self.nx || self.rotation.len() != self.nx * self.nx {
            return Err(Error::Config(
                "shift/rotation size does not match nx".into(),
            ));
        }
        let err = orthogonality_error(&self.rotation, self.nx);
        if err > 1e-10 {
            return Err(Error::Config(format!(
                "rotation is not orthogonal (max error {err:e})"
            )));
        }
        Ok(())
    }

    /// `z = M·(s·(x − o))`, plus one for Rosenbrock.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let s = self.function.prescale();
        let d: Vec<f64> = x
            .iter()
            .zip(&self.shift)
            .map(|(xi, oi)| s * (xi - oi))
            .collect();
        let mut z: Vec<f64> = (0..self.nx)
            .map(|i| {
                (0..self.nx)
                    .map(|j| self.rotation[i * self.nx + j] * d[j])
                    .sum()
            })
            .collect();
        if self.function == BenchmarkFn::RosenbrockSr {
            z.iter_mut().for_each(|v| *v += 1.0);
        }
        z
    }

    pub fn eval(&self, x: &[i64]) -> Result<f64> {
        if x.len() != self.nx {
            return Err(Error::Domain(format!(
                "expected {} coordinates, got {}",
                self.nx,
                x.len()
            )));
        }
        if let Some(v) = x.iter().find(|v| v.abs() > self.bound) {
            return Err(Error::Domain(format!(
                "coordinate {v} outside [-{0}, {0}]",
                self.bound
            )));
        }
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let z = self.transform(&xf);
        let base = match self.function {
            BenchmarkFn::Sphere => z.iter().map(|v| v * v).sum(),
            BenchmarkFn::RosenbrockSr => rosenbrock(&z),
            BenchmarkFn::RastriginSr => rastrigin(&z),
            BenchmarkFn::SchafferF6Sr => expanded_schaffer_f6(&z),
        };
        Ok(base + self.function.optimum())
    }

    /// The grid point nearest the shift.
    pub fn optimum_point(&self) -> Vec<i64> {
        self.shift
            .iter()
            .map(|o| (o.round() as i64).clamp(-self.bound, self.bound))
            .collect()
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

pub fn orthogonality_error(m: &[f64], n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

fn parse_numbers(text: &str, want: usize) -> Result<Vec<f64>> {
    let vals = text
        .split_whitespace()
        .take(want)
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse '{t}' as a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if vals.len() < want {
        return Err(Error::Config(format!(
            "expected {want} numbers, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

pub fn rosenbrock(z: &[f64]) -> f64 {
    z.windows(2)
        .map(|w| 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

pub fn rastrigin(z: &[f64]) -> f64 {
    z.iter()
        .map(|v| v * v - 10.0 * (2.0 * PI * v).cos() + 10.0)
        .sum()
}

fn schaffer_g(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    let s = r2.sqrt().sin();
    0.5 + (s * s - 0.5) / (1.0 + 0.001 * r2).powi(2)
}

/// Sum of Schaffer F6 over consecutive pairs, wrapping the last to the first.
pub fn expanded_schaffer_f6(z: &[f64]) -> f64 {
    let n = z.len();
    if n == 1 {
        return schaffer_g(z[0], z[0]);
    }
    (0..n).map(|i| schaffer_g(z[i], z[(i + 1) % n])).sum()
}

/// Benchmark as an [`Environment`]: cardinality `2B + 1` per dimension.
#[derive(Debug, Clone)]
pub struct BenchmarkEnv {
    spec: BenchmarkSpec,
    action_spec: ActionSpec,
}

impl BenchmarkEnv {
    pub fn new(spec: BenchmarkSpec) -> Result<Self> {
        spec.validate()?;
        let action_spec = ActionSpec::new(vec![(2 * spec.bound + 1) as usize; spec.nx])?;
        Ok(Self { spec, action_spec })
    }

    pub fn spec(&self) -> &BenchmarkSpec {
        &self.spec
    }

    pub fn action_to_point(&self, action: &[usize]) -> Vec<i64> {
        action.iter().map(|&a| a as i64 - self.spec.bound).collect()
    }

    pub fn point_to_action(&self, x: &[i64]) -> Vec<usize> {
        x.iter().map(|&v| (v + self.spec.bound) as usize).collect()
    }
}

impl Environment for BenchmarkEnv {
    fn action_spec(&self) -> &ActionSpec {
        &self.action_spec
    }

    fn observation_len(&self) -> usize {
        self.spec.nx
    }

    fn evaluate(&mut self, action: &[usize]) -> Result<Evaluation> {
        let x = self.action_to_point(action);
        let f = self.spec.eval(&x)?;
        let b = self.spec.bound as f64;
        let obs = x.iter().map(|&v| (v as f64 + b) / (2.0 * b)).collect();
        let mut info = BTreeMap::new();
        info.insert("f".to_string(), f);
        Ok(Evaluation {
            objective: 0.0 - f,
            observation: Observation(obs),
            info,
            payload: serde_json::json!({ "x": x, "f": f }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimum_values() {
        for f in BenchmarkFn::ALL {
            let s = BenchmarkSpec::generate(f, 5, 3).unwrap();
            let v = s.eval(&s.optimum_point()).unwrap();
            assert!((v - f.optimum()).abs() < 1e-9, "{f:?}: {v}");
        }
    }

    #[test]
    fn shift_is_inside_the_box() {
        for seed in 0..50 {
            let s = BenchmarkSpec::generate(BenchmarkFn::RastriginSr, 10, seed).unwrap();
            assert!(s.shift.iter().all(|o| o.abs() < 80.0 && o.fract() == 0.0));
            let s = BenchmarkSpec::generate(BenchmarkFn::Sphere, 10, seed).unwrap();
            assert!(s.shift.iter().all(|o| o.abs() < 28.0));
        }
    }

    #[test]
    fn rotation_is_orthogonal_and_preserves_norm() {
        let s = BenchmarkSpec::generate(BenchmarkFn::SchafferF6Sr, 10, 1).unwrap();
        assert!(orthogonality_error(&s.rotation, 10) < 1e-10);
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 7.0 - 30.0).collect();
        let z = s.transform(&x);
        let n1: f64 = x
            .iter()
            .zip(&s.shift)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let n2: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n1 - n2).abs() <= 1e-9 * n1);
    }

    #[test]
    fn out_of_bounds_is_domain_error() {
        let s = BenchmarkSpec::generate(BenchmarkFn::Sphere, 2, 0).unwrap();
        assert!(matches!(s.eval(&[36, 0]), Err(Error::Domain(_))));
        assert!(matches!(s.eval(&[0]), Err(Error::Domain(_))));
    }

    #[test]
    fn sphere_reward_decreases_away_from_optimum() {
        let s = BenchmarkSpec::generate(BenchmarkFn::Sphere, 2, 4).unwrap();
        let mut env = BenchmarkEnv::new(s.clone()).unwrap();
        let o = s.optimum_point();
        let mut prev = f64::INFINITY;
        for k in 0..(35 - o[0]) {
            let a = env.point_to_action(&[o[0] + k, o[1]]);
            let r = env.evaluate(&a).unwrap().objective;
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn observation_maps_bounds_to_unit_interval() {
        let mut env =
            BenchmarkEnv::new(BenchmarkSpec::generate(BenchmarkFn::Sphere, 2, 0).unwrap()).unwrap();
        let e = env.evaluate(&[0, 70]).unwrap();
        assert_eq!(e.observation.values(), &[0.0, 1.0]);
    }

    #[test]
    fn cec_loader_reads_text_files() {
        let dir = tempfile::tempdir().unwrap();
        let sp = dir.path().join("shift.txt");
        let rp = dir.path().join("m.txt");
        std::fs::write(&sp, "1.5  -2.0\n 99 ").unwrap();
        std::fs::write(&rp, "0 1\n1 0\n").unwrap();
        let s = BenchmarkSpec::from_cec_files(BenchmarkFn::RastriginSr, 2, &sp, Some(&rp)).unwrap();
        assert_eq!(s.shift, vec![1.5, -2.0]);
        std::fs::write(&rp, "1 1\n1 0\n").unwrap();
        assert!(
            BenchmarkSpec::from_cec_files(BenchmarkFn::RastriginSr, 2, &sp, Some(&rp)).is_err()
        );
    }
}
